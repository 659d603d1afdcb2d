"""Re-derivation of the calibrated free parameters.

The shipped defaults were frozen from these routines; running one again
rebalances its parameter group against the named operating target while
leaving everything else locked:

* ``fig4a``: receiver insertion loss (sifted rate per basis of the
  straight-line scenario at zero added budget) and the receiver background
  floor (the budget at which the secure bound reaches zero).
* ``fig4b``: the scattered-light coefficient of the classical overlay
  (loss-tolerance penalty with the 50-channel plan enabled).
* ``fig5c``: the drop-span intermodal phase slope (error-rate swing
  reachable within a few picometers of detuning).
"""

from __future__ import annotations

import math
from dataclasses import replace

import numpy as np

from .link import DetectorConfig
from .odn import DROP_SPAN, FiberSpan, scenario_preset
from .postproc import qber_threshold
from .runner import (
    DEFAULT_CONFIG,
    RunConfig,
    background_sifted_rate,
    measure_loss_tolerance,
    run_point,
)

TARGETS = ("fig4a", "fig4b", "fig5c")

RATE_TARGET_BPS = 800e3        # per-basis sifted, straight line, 0 dB added
CUTOFF_TARGET_DB = 22.0        # added budget where the secure bound hits zero
COEX_PENALTY_TARGET_DB = 7.5   # tolerance reduction with the overlay on
DETUNE_SWING_TARGET = 0.05     # error-rate change reachable within 3.5 pm


def calibrate_fig4a(seed: int = 0) -> dict:
    topology, _ = scenario_preset("1")
    config = DEFAULT_CONFIG

    # Rate is linear in the receiver transmission.
    for _ in range(3):
        rep = run_point(topology, ob_db=0.0, seed=seed, n_symbols=4_000_000,
                        config=config)
        per_basis = rep.sifted_rate_bps / 2.0
        delta_db = 10.0 * math.log10(per_basis / RATE_TARGET_BPS)
        loss = max(0.0, config.det.receiver_loss_db + delta_db)
        config = replace(config, det=replace(config.det, receiver_loss_db=round(loss, 2)))
        if abs(delta_db) < 0.05:
            break

    # The crossing model gives the background floor that puts the secure
    # zero at the target budget directly.
    rep = run_point(topology, ob_db=0.0, seed=seed, n_symbols=8_000_000,
                    config=config)
    threshold = qber_threshold(config.f_ec)
    b_now = background_sifted_rate(config, topology, False)
    signal0 = rep.sifted_rate_bps - b_now
    qint = (rep.qber * rep.sifted_rate_bps - 0.5 * b_now) / signal0
    if qint >= threshold:
        stray = config.stray_rate_cps
    else:
        s_cross = signal0 * 10.0 ** (-CUTOFF_TARGET_DB / 10.0)
        b_needed = s_cross * (threshold - qint) / (0.5 - threshold)
        per_det = b_needed / (4.0 * config.window_fraction * 0.5
                              * config.enc.payload_fraction)
        stray = max(0.0, round(per_det - config.det.dark_rate_cps, 0))
    config = replace(config, stray_rate_cps=stray)
    achieved = measure_loss_tolerance(topology, config, base_symbols=2_000_000)
    return {
        "receiver_loss_db": config.det.receiver_loss_db,
        "stray_rate_cps": config.stray_rate_cps,
        "achieved_rate_per_basis_bps": round(per_basis, 0),
        "achieved_cutoff_db": round(achieved, 2),
    }


def calibrate_fig4b(seed: int = 0) -> dict:
    topology, _ = scenario_preset("4")
    config = DEFAULT_CONFIG
    tol_clear = measure_loss_tolerance(topology, config, coexist=False,
                                       ob_max=12, base_symbols=16_000_000)
    coeff = config.raman_coeff_cps_per_mw_km
    penalty = None
    for _ in range(4):
        cfg = replace(config, raman_coeff_cps_per_mw_km=coeff)
        tol_coex = measure_loss_tolerance(topology, cfg, coexist=True,
                                          ob_max=10, base_symbols=16_000_000)
        penalty = tol_clear - tol_coex
        if abs(penalty - COEX_PENALTY_TARGET_DB) <= 0.3:
            break
        # One crossing-model step: tolerance moves as 10 log10 of the floor.
        target_tol = tol_clear - COEX_PENALTY_TARGET_DB
        b_now = background_sifted_rate(cfg, topology, True)
        b_clear = background_sifted_rate(cfg, topology, False)
        b_needed = b_now * 10.0 ** ((tol_coex - target_tol) / 10.0)
        coeff *= max((b_needed - b_clear) / max(b_now - b_clear, 1e-9), 0.05)
    return {
        "raman_coeff_cps_per_mw_km": round(coeff, 0),
        "clear_tolerance_db": round(tol_clear, 2),
        "coexist_tolerance_db": round(tol_clear - penalty, 2),
        "achieved_penalty_db": round(penalty, 2),
    }


def calibrate_fig5c(seed: int = 0) -> dict:
    from .runner import RunManifest, SweepSpec, run_sweep

    topology, drift = scenario_preset("3")
    swing = 0.0
    scale = DROP_SPAN.phase_scale
    for scale in (0.3, 0.6, 0.9, 1.4, 2.0):
        elements = tuple(
            replace(e, intermodal_phase_scale=scale)
            if isinstance(e, FiberSpan) and e.length_km >= 0.1 else e
            for e in topology.elements)
        topo = replace(topology, elements=elements)
        sweep = SweepSpec(kind="wavelength", start=847.984, stop=848.016,
                          step=0.002, symbols=16_000_000, seed=seed)
        rows = run_sweep(RunManifest(scenario="3", topology=topo, sweep=sweep,
                                     drift=drift))
        points = [(r["sweep_value"], r["qber"]) for r in rows
                  if r["sync_ok"] and not math.isnan(r["qber"])]
        swing = _max_swing_within(points, 0.0035)
        if swing >= DETUNE_SWING_TARGET:
            break
    return {"drop_intermodal_phase_scale_rad_per_pm": scale,
            "achieved_swing": round(float(swing), 4)}


def _max_swing_within(points, window_nm: float) -> float:
    best = 0.0
    for i, (wl_i, q_i) in enumerate(points):
        for wl_j, q_j in points[i + 1:]:
            if wl_j - wl_i > window_nm + 1e-12:
                break
            best = max(best, abs(q_j - q_i))
    return best


def run_calibration(target: str, seed: int = 0) -> dict:
    if target == "fig4a":
        return calibrate_fig4a(seed)
    if target == "fig4b":
        return calibrate_fig4b(seed)
    if target == "fig5c":
        return calibrate_fig5c(seed)
    raise ValueError(f"unknown calibration target {target!r}")
