"""Weak-coherent-pulse polarization encoder and photon-counting receiver.

:func:`generate_frames` produces the symbol stream (random payload states
plus a deterministic synchronization pattern at every frame head) and
:func:`detect_symbols` turns symbols plus a channel operator into
time-tagged detection events.

Receiver model
--------------
The two spatial-mode replicas of each pulse reach the receiver separated
by the accumulated differential mode delay, far beyond the source
coherence, so they are treated as two incoherent arrivals.  For each
arrival the polarimeter splits passively 50/50 between the two measurement
bases and projects onto the four analyzer states; a detector clicks with
probability 1 - exp(-m) at mean photon number m.  Dark plus broadband
noise counts are Poisson and uniform in time, detector timing jitter is
Gaussian, and a non-paralyzable dead time suppresses trailing clicks per
detector.

An ideally aligned polarization controller in front of the polarimeter
undoes the unitary part of the on-time (LP01) channel response, so a
polarization-unitary single-mode channel produces no signal errors; only
the non-unitary residual (diattenuation from modal interference) and the
delayed LP11 background degrade the error rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .modal import ANALYZERS, TransferOperator, polar_unitary, state_jones

ORIGIN_SIGNAL_LP01 = 0
ORIGIN_SIGNAL_LP11 = 1
ORIGIN_DARK = 2
ORIGIN_NOISE = 3
ORIGIN_NAMES = ("SIGNAL_LP01", "SIGNAL_LP11", "DARK", "NOISE")

DETECTOR_NAMES = ("A", "D", "R", "L")

DEFAULT_SYNC_PATTERN = (
    "0101100110100001010011000110010101111110101110010010001110001011")


@dataclass(frozen=True)
class EncoderConfig:
    """Transmitter-side parameters."""

    wavelength_nm: float = 848.0
    symbol_rate_hz: float = 445e6
    mean_photon_number: float = 0.1
    frame_length: int = 512
    sync_pattern: str = DEFAULT_SYNC_PATTERN
    lp11_launch_fraction: float = 0.24  # calibrated power fraction at the output joint

    @property
    def payload_fraction(self) -> float:
        return 1.0 - len(self.sync_pattern) / self.frame_length

    def __post_init__(self):
        if self.mean_photon_number <= 0:
            raise ValueError("mean_photon_number must be > 0")
        if self.symbol_rate_hz <= 0:
            raise ValueError("symbol_rate_hz must be > 0")
        if not 0 < len(self.sync_pattern) <= self.frame_length:
            raise ValueError("sync pattern must fit inside one frame")
        if set(self.sync_pattern) - {"0", "1"}:
            raise ValueError("sync pattern must be a bit string")
        if not 0.0 <= self.lp11_launch_fraction < 1.0:
            raise ValueError("lp11_launch_fraction must be in [0, 1)")

    @property
    def symbol_period_s(self) -> float:
        return 1.0 / self.symbol_rate_hz


@dataclass(frozen=True)
class DetectorConfig:
    """Receiver-side parameters (four SPADs behind a passive polarimeter).

    ``receiver_loss_db`` is the internal optical loss between the link
    output and the SPADs (bandpass filter, polarimeter, coupling); it is
    not part of the swept optical budget.  ``lp11_acceptance`` is the power
    coupling efficiency for LP11-profile light relative to LP01 at the
    receiver input.
    """

    efficiency: float = 0.38
    dark_rate_cps: float = 350.0
    timing_jitter_sigma_s: float = 50e-12
    dead_time_s: float = 50e-9
    receiver_loss_db: float = 0.62
    lp11_acceptance: float = 0.04
    compensate_polarization: bool = True

    def __post_init__(self):
        if not 0.0 <= self.efficiency <= 1.0:
            raise ValueError("efficiency must be in [0, 1]")
        if self.dark_rate_cps < 0:
            raise ValueError("dark_rate_cps must be >= 0")
        if not 0.0 <= self.lp11_acceptance <= 1.0:
            raise ValueError("lp11_acceptance must be in [0, 1]")


@dataclass(frozen=True)
class SymbolRecord:
    index: int
    basis: str
    bit: int
    is_sync: bool


@dataclass(frozen=True)
class SymbolFrame:
    """Column-wise symbol stream: basis (0=AD, 1=RL), bit, sync flag."""

    basis: np.ndarray
    bit: np.ndarray
    is_sync: np.ndarray

    def __post_init__(self):
        for name in ("basis", "bit", "is_sync"):
            arr = getattr(self, name)
            arr.flags.writeable = False

    def __len__(self) -> int:
        return len(self.basis)

    @property
    def state_code(self) -> np.ndarray:
        """0..3 indexing the A/D/R/L state of each symbol."""
        return (self.basis.astype(np.int8) * 2 + self.bit.astype(np.int8))

    def record(self, index: int) -> SymbolRecord:
        return SymbolRecord(index, "AD" if self.basis[index] == 0 else "RL",
                            int(self.bit[index]), bool(self.is_sync[index]))


@dataclass(frozen=True)
class DetectionEvent:
    time_tag_s: float
    detector: str
    origin: str


@dataclass(frozen=True)
class EventBatch:
    """Time-sorted detection events as flat arrays."""

    time_s: np.ndarray
    detector: np.ndarray
    origin: np.ndarray

    def __post_init__(self):
        for name in ("time_s", "detector", "origin"):
            getattr(self, name).flags.writeable = False

    def __len__(self) -> int:
        return len(self.time_s)

    def event(self, i: int) -> DetectionEvent:
        return DetectionEvent(float(self.time_s[i]),
                              DETECTOR_NAMES[self.detector[i]],
                              ORIGIN_NAMES[self.origin[i]])

    @classmethod
    def empty(cls) -> "EventBatch":
        return cls(np.zeros(0), np.zeros(0, dtype=np.uint8), np.zeros(0, dtype=np.uint8))


def generate_frames(cfg: EncoderConfig, n_symbols: int, rng: np.random.Generator) -> SymbolFrame:
    """Random payload symbols with the sync pattern at every frame head."""
    if n_symbols < cfg.frame_length:
        raise ValueError("need at least one full frame of symbols")
    basis = rng.integers(0, 2, size=n_symbols, dtype=np.uint8)
    bit = rng.integers(0, 2, size=n_symbols, dtype=np.uint8)
    is_sync = np.zeros(n_symbols, dtype=bool)

    pattern = np.frombuffer(cfg.sync_pattern.encode(), dtype=np.uint8) - ord("0")
    for start in range(0, n_symbols, cfg.frame_length):
        stop = min(start + len(pattern), n_symbols)
        count = stop - start
        basis[start:stop] = 0  # sync symbols are sent in the A/D basis
        bit[start:stop] = pattern[:count]
        is_sync[start:stop] = True
    return SymbolFrame(basis, bit, is_sync)


def channel_projection_tables(channel: TransferOperator, enc: EncoderConfig,
                              det: DetectorConfig,
                              compensation: np.ndarray | None = None):
    """Mean-photon-number tables for the two arrivals.

    Returns (m01, m11, delays): m01[s, d] is the mean photon number hitting
    detector d for launch state s via the on-time LP01 arrival, m11 the
    same for the delayed LP11 arrival.
    """
    f = enc.lp11_launch_fraction
    launch = np.zeros((4, 2), dtype=np.complex128)
    launch[0, 0] = launch[1, 1] = math.sqrt(1.0 - f)
    launch[2, 0] = launch[3, 1] = math.sqrt(f)
    g = channel.matrix @ launch            # 4x2: jones in -> modal field out
    if compensation is None:
        compensation = receiver_compensation(channel, enc, det)
    g01 = compensation @ g[:2, :]
    g11 = compensation @ g[2:, :]

    t_rx = 10.0 ** (-det.receiver_loss_db / 10.0)
    scale = enc.mean_photon_number * det.efficiency * t_rx * 0.5
    m01 = np.zeros((4, 4))
    m11 = np.zeros((4, 4))
    for s in range(4):
        j = state_jones(s).as_array()
        v01 = g01 @ j
        v11 = g11 @ j
        for d in range(4):
            a = ANALYZERS[d].as_array()
            m01[s, d] = scale * abs(np.conj(a) @ v01) ** 2
            m11[s, d] = scale * det.lp11_acceptance * abs(np.conj(a) @ v11) ** 2
    delays = (float(channel.delay_inc[0]), float(channel.delay_inc[1]))
    return m01, m11, delays


def receiver_compensation(channel: TransferOperator, enc: EncoderConfig,
                          det: DetectorConfig) -> np.ndarray:
    """Polarization-controller setting that unwinds the on-time channel rotation."""
    if not det.compensate_polarization:
        return np.eye(2, dtype=np.complex128)
    f = enc.lp11_launch_fraction
    launch = np.zeros((4, 2), dtype=np.complex128)
    launch[0, 0] = launch[1, 1] = math.sqrt(1.0 - f)
    launch[2, 0] = launch[3, 1] = math.sqrt(f)
    g01 = (channel.matrix @ launch)[:2, :]
    return polar_unitary(g01).conj().T


def _dead_time_filter(times: np.ndarray, dead_time: float) -> np.ndarray:
    """Indices of events kept by a non-paralyzable dead time (times sorted)."""
    if dead_time <= 0 or len(times) == 0:
        return np.arange(len(times))
    keep = []
    last = -math.inf
    for i, t in enumerate(times):
        if t - last >= dead_time:
            keep.append(i)
            last = t
    return np.asarray(keep, dtype=np.int64)


def detect_symbols(symbols: SymbolFrame, channel: TransferOperator,
                   enc: EncoderConfig, det: DetectorConfig,
                   noise_rate_cps: float, rng: np.random.Generator,
                   compensation: np.ndarray | None = None) -> EventBatch:
    """Monte Carlo of the full receive side for one acquisition.

    ``noise_rate_cps`` is the per-detector broadband background beyond the
    intrinsic dark rate (stray light, co-existence noise).  Deterministic
    for a fixed random generator state.
    """
    if not channel.is_passive():
        raise ValueError("channel operator must be passive")
    n = len(symbols)
    period = enc.symbol_period_s
    duration = n * period
    m01, m11, delays = channel_projection_tables(channel, enc, det, compensation)
    p01 = -np.expm1(-m01).astype(np.float32)
    p11 = -np.expm1(-m11).astype(np.float32)

    state = symbols.state_code
    times_parts: list[np.ndarray] = []
    det_parts: list[np.ndarray] = []
    origin_parts: list[np.ndarray] = []

    for origin, p_table, delay in ((ORIGIN_SIGNAL_LP01, p01, delays[0]),
                                   (ORIGIN_SIGNAL_LP11, p11, delays[1])):
        for d in range(4):
            p_sym = p_table[:, d][state]
            hits = np.nonzero(rng.random(n, dtype=np.float32) < p_sym)[0]
            if len(hits) == 0:
                continue
            t = hits.astype(np.float64) * period + delay
            if det.timing_jitter_sigma_s > 0:
                t = t + rng.normal(0.0, det.timing_jitter_sigma_s, len(hits))
            times_parts.append(t)
            det_parts.append(np.full(len(hits), d, dtype=np.uint8))
            origin_parts.append(np.full(len(hits), origin, dtype=np.uint8))

    for origin, rate in ((ORIGIN_DARK, det.dark_rate_cps), (ORIGIN_NOISE, noise_rate_cps)):
        if rate <= 0:
            continue
        for d in range(4):
            k = rng.poisson(rate * duration)
            if k == 0:
                continue
            times_parts.append(rng.uniform(0.0, duration, k))
            det_parts.append(np.full(k, d, dtype=np.uint8))
            origin_parts.append(np.full(k, origin, dtype=np.uint8))

    if not times_parts:
        return EventBatch.empty()

    times = np.concatenate(times_parts)
    detectors = np.concatenate(det_parts)
    origins = np.concatenate(origin_parts)

    kept_t, kept_d, kept_o = [], [], []
    for d in range(4):
        mask = detectors == d
        if not mask.any():
            continue
        t_d = times[mask]
        o_d = origins[mask]
        order = np.argsort(t_d, kind="stable")
        t_d, o_d = t_d[order], o_d[order]
        keep = _dead_time_filter(t_d, det.dead_time_s)
        kept_t.append(t_d[keep])
        kept_d.append(np.full(len(keep), d, dtype=np.uint8))
        kept_o.append(o_d[keep])

    times = np.concatenate(kept_t)
    detectors = np.concatenate(kept_d)
    origins = np.concatenate(kept_o)
    order = np.argsort(times, kind="stable")
    return EventBatch(times[order], detectors[order], origins[order])


def dump_events(batch: EventBatch, path):
    """Write the time-tag file: integer picosecond tag, detector id."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("time_tag_ps,detector\n")
        tags = np.rint(batch.time_s * 1e12).astype(np.int64)
        for t, d in zip(tags, batch.detector):
            fh.write(f"{t},{d}\n")


def load_events(path) -> EventBatch:
    """Read a time-tag file produced by :func:`dump_events`."""
    tags = []
    dets = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline()
        if not header.startswith("time_tag_ps"):
            raise ValueError(f"{path} is not a time-tag file")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            t, d = line.split(",")
            tags.append(int(t))
            dets.append(int(d))
    times = np.asarray(tags, dtype=np.float64) * 1e-12
    detectors = np.asarray(dets, dtype=np.uint8)
    origins = np.full(len(tags), ORIGIN_NOISE, dtype=np.uint8)
    order = np.argsort(times, kind="stable")
    return EventBatch(times[order], detectors[order], origins[order])
