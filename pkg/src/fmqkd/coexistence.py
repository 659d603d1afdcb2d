"""Classical-channel overlay and the filter chain guarding the quantum band.

The classical plane only matters through optical power: spontaneous Raman
scattering along shared fiber converts a small, power- and length-linear
fraction of each channel into broadband photons inside the receiver
passband, and finite filter rejection leaks a minute direct crosstalk.
Both are summarized as SPAD count rates; waveforms are never simulated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import yaml

PLANCK_J_S = 6.62607015e-34
C_M_S = 299792458.0

# Count rate (per mW of launch power and km of shared fiber) scattered into
# the receiver acceptance band, before receiver filtering and detection
# efficiency.  Calibrated against the observed loss-tolerance penalty.
DEFAULT_RAMAN_COEFF_CPS_PER_MW_KM = 3.1e3

# Equivalent photon rate of transmitter spontaneous-emission tails reaching
# the receiver band edge before rejection (model ceiling, not a datasheet).
DEFAULT_ASE_TAIL_CPS = 1e9
_ASE_TAIL_NM = 950.0


@dataclass(frozen=True)
class ClassicalChannelPlan:
    """Wavelength/power list of the co-propagating data channels."""

    channels: tuple[tuple[float, float], ...]  # (wavelength_nm, power_dbm)
    modulation_label: str = "10G-OOK"

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(tuple(c) for c in self.channels))

    @classmethod
    def default_50(cls, aggregate_dbm: float = 10.1, lo_nm: float = 1307.2,
                   hi_nm: float = 1618.7, n_channels: int = 50) -> "ClassicalChannelPlan":
        per_channel = aggregate_dbm - 10.0 * math.log10(n_channels)
        if n_channels == 1:
            wavelengths = [lo_nm]
        else:
            step = (hi_nm - lo_nm) / (n_channels - 1)
            wavelengths = [lo_nm + i * step for i in range(n_channels)]
        return cls(tuple((w, per_channel) for w in wavelengths))

    def total_power_dbm(self) -> float:
        mw = sum(10.0 ** (p / 10.0) for _, p in self.channels)
        return 10.0 * math.log10(mw)

    def scaled(self, factor: float) -> "ClassicalChannelPlan":
        db = 10.0 * math.log10(factor)
        return ClassicalChannelPlan(tuple((w, p + db) for w, p in self.channels),
                                    self.modulation_label)


@dataclass(frozen=True)
class FilterStage:
    """One filtering element: passband, in-band loss, out-of-band rejection."""

    name: str
    center_nm: float
    fwhm_nm: float
    in_band_loss_db: float
    oob_rejection_db: float
    site: str = "bob"          # "alice" or "bob"
    in_receiver: bool = False  # loss already budgeted inside the receiver

    def __post_init__(self):
        if self.fwhm_nm <= 0:
            raise ValueError("fwhm must be > 0")
        if self.in_band_loss_db < 0 or self.oob_rejection_db < 0:
            raise ValueError("filter losses must be >= 0")

    def passes(self, wavelength_nm: float) -> bool:
        return abs(wavelength_nm - self.center_nm) <= self.fwhm_nm / 2.0


@dataclass(frozen=True)
class FilterChain:
    stages: tuple[FilterStage, ...]

    def __post_init__(self):
        object.__setattr__(self, "stages", tuple(self.stages))

    @classmethod
    def default(cls) -> "FilterChain":
        """Cleaning filter at the transmitter, separator/demultiplexer pair
        plus the 10 nm bandpass at the receiver."""
        return cls((
            FilterStage("alice-clean", 848.0, 60.0, 0.2, 30.0, site="alice"),
            FilterStage("bob-separator", 848.0, 40.0, 0.15, 50.0),
            FilterStage("bob-demux", 848.0, 30.0, 0.15, 50.0),
            FilterStage("bob-bpf", 845.0, 10.0, 0.0, 60.0, in_receiver=True),
        ))

    def without(self, name: str) -> "FilterChain":
        return FilterChain(tuple(s for s in self.stages if s.name != name))

    def addon_in_band_loss_db(self) -> float:
        """Quantum-signal loss added by the co-existence multiplexing stages
        (stages whose loss is already inside the receiver budget excluded)."""
        return sum(s.in_band_loss_db for s in self.stages if not s.in_receiver)

    def bob_in_band_transmission(self) -> float:
        return 10.0 ** (-sum(s.in_band_loss_db for s in self.stages
                             if s.site == "bob" and not s.in_receiver) / 10.0)

    def bob_rejection_at(self, wavelength_nm: float) -> float:
        """Total out-of-band suppression (dB) seen by light at a classical
        wavelength on its way to the detectors."""
        return sum(s.oob_rejection_db for s in self.stages
                   if s.site == "bob" and not s.passes(wavelength_nm))


def noise_count_rate(plan: ClassicalChannelPlan, span_lengths_km,
                     chain: FilterChain, detector_efficiency: float,
                     receiver_loss_db: float = 0.0,
                     raman_coeff_cps_per_mw_km: float = DEFAULT_RAMAN_COEFF_CPS_PER_MW_KM,
                     coeff_table: dict | None = None) -> float:
    """Total SPAD count rate (all detectors) caused by the classical overlay.

    Sum over channels of scattered-in-band photons (linear in power and in
    shared fiber length) plus direct leakage through the finite rejection,
    both attenuated by the receiver-side in-band transmission, internal
    receiver loss and detection efficiency.
    """
    if not plan.channels:
        return 0.0
    length_km = float(sum(span_lengths_km))
    t_bob = chain.bob_in_band_transmission()
    t_rx = 10.0 ** (-receiver_loss_db / 10.0)
    total = 0.0
    for wavelength_nm, power_dbm in plan.channels:
        p_mw = 10.0 ** (power_dbm / 10.0)
        coeff = raman_coeff_cps_per_mw_km
        if coeff_table:
            coeff = _lookup_coeff(coeff_table, wavelength_nm, coeff)
        scattered = p_mw * coeff * length_km
        photon_rate = (p_mw * 1e-3) / (PLANCK_J_S * C_M_S / (wavelength_nm * 1e-9))
        leakage = photon_rate * 10.0 ** (-chain.bob_rejection_at(wavelength_nm) / 10.0)
        total += (scattered + leakage) * t_bob * t_rx * detector_efficiency
    return total


def _lookup_coeff(table: dict, wavelength_nm: float, default: float) -> float:
    """Per-band coefficient table: {(lo_nm, hi_nm): coeff} or {band_name: ...}."""
    for key, value in table.items():
        if isinstance(key, tuple) and key[0] <= wavelength_nm <= key[1]:
            return value
    return table.get("default", default)


def spontaneous_emission_floor(chain: FilterChain,
                               ase_tail_cps: float = DEFAULT_ASE_TAIL_CPS) -> float:
    """Residual count rate from transmitter spontaneous-emission tails.

    The tail sits well outside the receiver passband, so every receiver
    stage that excludes it contributes its rejection; with the default
    bandpass in place the residual is far below the dark rate.
    """
    rejection_db = sum(s.oob_rejection_db for s in chain.stages
                      if s.site == "bob" and not s.passes(_ASE_TAIL_NM))
    return ase_tail_cps * 10.0 ** (-rejection_db / 10.0)


def plan_from_dict(d: dict) -> ClassicalChannelPlan:
    channels = tuple((float(c["wavelength_nm"]), float(c["power_dbm"]))
                     for c in d.get("channels", []))
    return ClassicalChannelPlan(channels, str(d.get("modulation_label", "10G-OOK")))


def load_plan(path) -> ClassicalChannelPlan:
    """Load a channel plan from the same YAML config family as topologies."""
    with open(path, "r", encoding="utf-8") as fh:
        return plan_from_dict(yaml.safe_load(fh))
