"""Scenario and sweep orchestration, seed bookkeeping and CSV output.

Every run derives its randomness from one master seed through a fixed
splitting rule (documented below), so a whole sweep, or any single point
of it, can be reproduced bit for bit.

Seed splitting
--------------
``SeedSequence(master_seed)`` is spawned once:

* child 0 seeds the channel realization (per-element draws),
* child 1 seeds the drift process of time sweeps,
* child 2 + i seeds the Monte Carlo stream of sweep point i (trial t of a
  multi-trial point uses ``spawn_key`` extension (i, t)).

The reported optical budget ``ob_db`` is the swept attenuation added at
the receiver input; the fixed component losses of the scenario are listed
separately in ``chain_nominal_db`` so end-to-end loss is their sum.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import __version__
from .coexistence import (
    DEFAULT_RAMAN_COEFF_CPS_PER_MW_KM,
    ClassicalChannelPlan,
    FilterChain,
    noise_count_rate,
    spontaneous_emission_floor,
)
from .link import (
    DetectorConfig,
    EncoderConfig,
    detect_symbols,
    generate_frames,
    receiver_compensation,
)
from .modal import TransferOperator, compose
from .odn import (
    Attenuator,
    DriftParams,
    FiberSpan,
    ODNTopology,
    chain_transfer,
    drift_step,
    element_transfer,
    scenario_preset,
)
from .postproc import TrialReport, process_events

SWEEP_KINDS = ("ob", "wavelength", "time", "port")
CSV_FORMAT_VERSION = 1
WORKERS_ENV_VAR = "FMQKD_WORKERS"

# Receiver background floor per detector (stray light and other broadband
# counts on top of the intrinsic dark rate); calibrated together with the
# receiver insertion loss against the straight-line scenario.
DEFAULT_STRAY_RATE_CPS = 150.0


@dataclass(frozen=True)
class RunConfig:
    """All non-topology parameters of a run, with calibrated defaults."""

    enc: EncoderConfig = field(default_factory=EncoderConfig)
    det: DetectorConfig = field(default_factory=DetectorConfig)
    stray_rate_cps: float = DEFAULT_STRAY_RATE_CPS
    window_fraction: float = 0.2
    f_ec: float = 1.16
    plan: ClassicalChannelPlan = field(default_factory=ClassicalChannelPlan.default_50)
    chain: FilterChain = field(default_factory=FilterChain.default)
    raman_coeff_cps_per_mw_km: float = DEFAULT_RAMAN_COEFF_CPS_PER_MW_KM


DEFAULT_CONFIG = RunConfig()


@dataclass(frozen=True)
class SweepSpec:
    kind: str
    start: float
    stop: float
    step: float
    trials: int = 1
    symbols: int = 10_000_000
    seed: int = 0

    def __post_init__(self):
        if self.kind not in SWEEP_KINDS:
            raise ValueError(f"sweep kind must be one of {SWEEP_KINDS}")
        if self.step <= 0:
            raise ValueError("step must be > 0")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")

    def values(self) -> list[float]:
        if self.kind == "port":
            return [float(p) for p in range(int(self.start), int(self.stop) + 1,
                                            max(1, int(self.step)))]
        n = int(round((self.stop - self.start) / self.step)) + 1
        return [self.start + i * self.step for i in range(max(n, 1))]


@dataclass(frozen=True)
class RunManifest:
    """Everything needed to replay a sweep bit for bit."""

    scenario: str
    topology: ODNTopology
    sweep: SweepSpec
    coexist: bool = False
    drift: DriftParams | None = None
    config: RunConfig = field(default_factory=lambda: DEFAULT_CONFIG)
    version: str = __version__

    @classmethod
    def for_preset(cls, scenario: str, sweep: SweepSpec, coexist: bool = False,
                   config: RunConfig | None = None) -> "RunManifest":
        topology, drift = scenario_preset(scenario)
        return cls(scenario=str(scenario), topology=topology, sweep=sweep,
                   coexist=coexist, drift=drift, config=config or DEFAULT_CONFIG)


def split_seeds(master_seed: int, n_points: int):
    root = np.random.SeedSequence(master_seed)
    children = root.spawn(2 + n_points)
    return children[0], children[1], children[2:]


def point_seed(master_seed: int, point_index: int, trial: int = 0) -> np.random.SeedSequence:
    """Recreate the Monte Carlo seed of one sweep point in isolation."""
    root = np.random.SeedSequence(master_seed)
    child = root.spawn(3 + point_index)[2 + point_index]
    return child if trial == 0 else np.random.SeedSequence(
        entropy=child.entropy, spawn_key=child.spawn_key + (trial,))


def _total_noise_rate_cps(config: RunConfig, topology: ODNTopology, coexist: bool) -> float:
    """Per-detector background rate beyond the intrinsic dark rate."""
    noise = config.stray_rate_cps
    if coexist:
        span_lengths = [e.length_km for e in topology.elements
                        if isinstance(e, FiberSpan)]
        total = noise_count_rate(
            config.plan, span_lengths, config.chain, config.det.efficiency,
            receiver_loss_db=config.det.receiver_loss_db,
            raman_coeff_cps_per_mw_km=config.raman_coeff_cps_per_mw_km)
        total += spontaneous_emission_floor(config.chain)
        noise += total / 4.0
    return noise


def channel_operator(topology: ODNTopology, wavelength_nm: float, ob_db: float,
                     coexist: bool, element_seed, config: RunConfig = DEFAULT_CONFIG
                     ) -> TransferOperator:
    """Chain operator with budget attenuation and, when the classical plane
    is on, the in-band loss of the co-existence multiplexing stages."""
    op = chain_transfer(topology, wavelength_nm, element_seed)
    extra_db = ob_db
    if coexist:
        extra_db += config.chain.addon_in_band_loss_db()
    if extra_db > 0:
        op = compose(element_transfer(Attenuator(extra_db), wavelength_nm, 0), op)
    return op


def run_point(topology: ODNTopology, wavelength_nm: float = 848.0,
              ob_db: float = 0.0, coexist: bool = False, seed: int = 0,
              n_symbols: int = 10_000_000, config: RunConfig = DEFAULT_CONFIG,
              element_seed=None, mc_seed=None,
              compensation: np.ndarray | None = None) -> TrialReport:
    """Simulate one acquisition and push it through the processing pipeline.

    ``element_seed``/``mc_seed`` override the derived split for callers that
    manage seeds themselves (sweeps, calibration searches).
    """
    if element_seed is None or mc_seed is None:
        elem, _, points = split_seeds(seed, 1)
        element_seed = element_seed if element_seed is not None else elem
        mc_seed = mc_seed if mc_seed is not None else points[0]
    op = channel_operator(topology, wavelength_nm, ob_db, coexist, element_seed, config)
    noise = _total_noise_rate_cps(config, topology, coexist)
    rng = np.random.default_rng(mc_seed)
    enc = replace(config.enc, wavelength_nm=wavelength_nm)
    symbols = generate_frames(enc, n_symbols, rng)
    events = detect_symbols(symbols, op, enc, config.det, noise, rng,
                            compensation=compensation)
    return process_events(events, symbols, enc, ob_db=ob_db,
                          window_fraction=config.window_fraction, f_ec=config.f_ec)


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------

CSV_COLUMNS = ("scenario", "sweep_kind", "point", "trial", "sweep_value",
               "wavelength_nm", "port", "time_s", "coexist", "n_symbols",
               "chain_nominal_db", "noise_rate_cps", *TrialReport.COLUMNS)


def _point_task(args):
    (topology, wavelength_nm, ob_db, coexist, config, element_seed, mc_seed,
     n_symbols, compensation) = args
    return run_point(topology, wavelength_nm, ob_db, coexist,
                     n_symbols=n_symbols, config=config,
                     element_seed=element_seed, mc_seed=mc_seed,
                     compensation=compensation)


def run_sweep(manifest: RunManifest) -> list[dict]:
    """Execute a sweep, one CSV row per (point, trial).

    Time sweeps run sequentially because the drift state carries over;
    other sweeps fan out over ``FMQKD_WORKERS`` processes when set.
    """
    sweep = manifest.sweep
    config = manifest.config
    values = sweep.values()
    elem_seed, drift_seed, mc_seeds = split_seeds(sweep.seed, len(values))

    topology = manifest.topology
    wavelength = config.enc.wavelength_nm

    tasks = []
    rows_meta = []
    if sweep.kind == "time":
        drift = manifest.drift or DriftParams.lab()
        drift_rng = np.random.default_rng(drift_seed)
        # Polarization alignment is set once at the start of the series and
        # left untouched while the plant drifts.
        op0 = channel_operator(topology, wavelength, 0.0, manifest.coexist,
                               elem_seed, config)
        frozen = receiver_compensation(op0, config.enc, config.det)
        current = topology
        previous_t = values[0]
        for i, t in enumerate(values):
            if i > 0:
                current = drift_step(current, drift, t - previous_t, drift_rng)
                previous_t = t
            for trial in range(sweep.trials):
                tasks.append((current, wavelength, 0.0, manifest.coexist, config,
                              elem_seed, _trial_seed(mc_seeds[i], trial),
                              sweep.symbols, frozen))
                rows_meta.append((i, trial, t, wavelength, topology.selected_port, t))
    else:
        frozen = None
        if sweep.kind == "wavelength":
            center = 0.5 * (sweep.start + sweep.stop)
            op_c = channel_operator(topology, center, 0.0, manifest.coexist,
                                    elem_seed, config)
            frozen = receiver_compensation(op_c, config.enc, config.det)
        for i, v in enumerate(values):
            ob = v if sweep.kind == "ob" else 0.0
            wl = v if sweep.kind == "wavelength" else wavelength
            topo = topology.with_port(int(v)) if sweep.kind == "port" else topology
            for trial in range(sweep.trials):
                tasks.append((topo, wl, ob, manifest.coexist, config, elem_seed,
                              _trial_seed(mc_seeds[i], trial), sweep.symbols,
                              frozen))
                rows_meta.append((i, trial, v, wl, topo.selected_port, 0.0))

    workers = int(os.environ.get(WORKERS_ENV_VAR, "1"))
    if workers > 1 and sweep.kind != "time":
        with ProcessPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(_point_task, tasks))
    else:
        reports = [_point_task(t) for t in tasks]

    noise = _total_noise_rate_cps(config, topology, manifest.coexist)
    nominal = topology.nominal_loss_db()
    if manifest.coexist:
        nominal += config.chain.addon_in_band_loss_db()
    rows = []
    for (i, trial, value, wl, port, t_s), report in zip(rows_meta, reports):
        row = {
            "scenario": manifest.scenario,
            "sweep_kind": sweep.kind,
            "point": i,
            "trial": trial,
            "sweep_value": value,
            "wavelength_nm": wl,
            "port": port,
            "time_s": t_s,
            "coexist": int(manifest.coexist),
            "n_symbols": sweep.symbols,
            "chain_nominal_db": nominal,
            "noise_rate_cps": noise,
        }
        row.update(zip(TrialReport.COLUMNS, report.row()))
        rows.append(row)
    return rows


def _trial_seed(point_ss: np.random.SeedSequence, trial: int) -> np.random.SeedSequence:
    if trial == 0:
        return point_ss
    return np.random.SeedSequence(entropy=point_ss.entropy,
                                  spawn_key=point_ss.spawn_key + (trial,))


def background_sifted_rate(config: RunConfig, topology: ODNTopology,
                           coexist: bool) -> float:
    """Sifted-rate floor contributed by dark, stray and co-existence counts."""
    per_det = config.det.dark_rate_cps + _total_noise_rate_cps(config, topology, coexist)
    return (4.0 * per_det * config.window_fraction * 0.5
            * config.enc.payload_fraction)


def measure_loss_tolerance(topology: ODNTopology, config: RunConfig = DEFAULT_CONFIG,
                           coexist: bool = False, seed: int = 0,
                           ob_max: float = 26.0, ob_step: float = 2.0,
                           base_symbols: int = 4_000_000,
                           cap_symbols: int = 40_000_000) -> float:
    """Optical budget (dB) at which the secure-rate bound reaches zero.

    Reads the crossing off the background model fitted to a QBER-vs-budget
    scan, the same way one reads it off a measured curve: the error rate
    follows q(OB) = qint + (0.5 - qint) B / (B + S(OB)) with B the known
    count floor, so the scan pins qint and the signal scale, and the
    crossing with the abort threshold follows.  Negative values mean the
    configuration is past threshold even at zero added budget.
    """
    from .postproc import qber_threshold
    b_floor = background_sifted_rate(config, topology, coexist)
    elem, _, _ = split_seeds(seed, 1)
    qints, s0s, weights = [], [], []
    ob = 0.0
    while ob <= ob_max:
        n = int(min(max(base_symbols, base_symbols * 10 ** (ob / 10.0)), cap_symbols))
        rep = run_point(topology, ob_db=ob, coexist=coexist, seed=seed,
                        n_symbols=n, config=config, element_seed=elem)
        if rep.sync_ok and rep.n_sifted >= 100:
            signal = rep.sifted_rate_bps - b_floor
            if signal > 1.5 * b_floor:
                qint = (rep.qber * (signal + b_floor) - 0.5 * b_floor) / signal
                qints.append(qint)
                s0s.append(signal * 10 ** (ob / 10.0))
                weights.append(rep.n_sifted)
        ob += ob_step
    if not qints:
        return 0.0
    qint = float(np.average(qints, weights=weights))
    s0 = float(np.average(s0s, weights=weights))
    threshold = qber_threshold(config.f_ec)
    if qint >= threshold:
        return 0.0
    s_cross = b_floor * (0.5 - threshold) / (threshold - qint)
    return 10.0 * math.log10(s0 / s_cross)


def format_cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(rows: list[dict], path, manifest: RunManifest | None = None):
    """Deterministic CSV with a versioned header comment."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# fmqkd csv v{CSV_FORMAT_VERSION}")
        if manifest is not None:
            fh.write(f"; scenario={manifest.scenario}; sweep={manifest.sweep.kind}"
                     f"; seed={manifest.sweep.seed}; version={manifest.version}")
        fh.write("\n")
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for row in rows:
            fh.write(",".join(format_cell(row[c]) for c in CSV_COLUMNS) + "\n")


def read_csv(path) -> list[dict]:
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline()
        if not header.startswith("# fmqkd csv"):
            raise ValueError(f"{path} is not an fmqkd result file")
        columns = fh.readline().strip().split(",")
        for line in fh:
            parts = line.strip().split(",")
            row = {}
            for key, text in zip(columns, parts):
                try:
                    row[key] = int(text)
                except ValueError:
                    try:
                        row[key] = float(text)
                    except ValueError:
                        row[key] = text
            rows.append(row)
    return rows
