import math
import os
import subprocess
import sys

import numpy as np
import pytest

from fmqkd.odn import scenario_preset
from fmqkd.runner import (
    DEFAULT_CONFIG,
    RunManifest,
    SweepSpec,
    background_sifted_rate,
    point_seed,
    read_csv,
    run_point,
    run_sweep,
    split_seeds,
    write_csv,
)

SMALL = dict(symbols=600_000, seed=3)


def small_manifest(kind="ob", scenario="1", start=0.0, stop=8.0, step=4.0, **kw):
    sweep = SweepSpec(kind=kind, start=start, stop=stop, step=step,
                      symbols=kw.pop("symbols", SMALL["symbols"]),
                      seed=kw.pop("seed", SMALL["seed"]))
    return RunManifest.for_preset(scenario, sweep, **kw)


def test_replay_is_bitwise_identical(tmp_path):
    manifest = small_manifest()
    rows_a = run_sweep(manifest)
    rows_b = run_sweep(manifest)
    pa, pb = tmp_path / "a.csv", tmp_path / "b.csv"
    write_csv(rows_a, pa, manifest)
    write_csv(rows_b, pb, manifest)
    assert pa.read_bytes() == pb.read_bytes()


def test_sweep_points_rerun_in_isolation():
    manifest = small_manifest()
    rows = run_sweep(manifest)
    elem, _, _ = split_seeds(manifest.sweep.seed, 3)
    for i, value in enumerate(manifest.sweep.values()):
        report = run_point(manifest.topology, ob_db=value,
                           n_symbols=manifest.sweep.symbols,
                           element_seed=elem,
                           mc_seed=point_seed(manifest.sweep.seed, i))
        assert report.sifted_rate_bps == rows[i]["sifted_rate_bps"]
        assert report.counts == (rows[i]["counts_a"], rows[i]["counts_d"],
                                 rows[i]["counts_r"], rows[i]["counts_l"])


def test_ob_sweep_rate_is_monotone_non_increasing():
    manifest = small_manifest(stop=12.0, step=3.0, symbols=2_000_000)
    rows = run_sweep(manifest)
    rates = [r["sifted_rate_bps"] for r in rows]
    for a, b, row_a in zip(rates, rates[1:], rows):
        n = row_a["n_sifted"]
        slack = 3.0 * math.sqrt(max(n, 1)) / row_a["duration_s"]
        assert b <= a + slack


def test_port_sweep_varies_only_through_port():
    manifest = small_manifest(kind="port", scenario="3", start=0, stop=3, step=1,
                              symbols=2_000_000)
    rows = run_sweep(manifest)
    assert [r["port"] for r in rows] == [0, 1, 2, 3]
    assert len({r["sifted_rate_bps"] for r in rows}) > 1
    assert all(r["chain_nominal_db"] == rows[0]["chain_nominal_db"] for r in rows)


def test_extreme_attenuation_reports_failure_not_crash():
    topo, _ = scenario_preset("1")
    report = run_point(topo, ob_db=60.0, seed=0, n_symbols=600_000)
    assert not report.sync_ok
    assert report.secure_rate_bps == 0.0 and report.sifted_rate_bps == 0.0


def test_time_sweep_runs_sequentially_with_drift():
    manifest = small_manifest(kind="time", scenario="5", start=0.0, stop=240.0,
                              step=120.0, symbols=2_000_000)
    rows = run_sweep(manifest)
    assert [r["time_s"] for r in rows] == [0.0, 120.0, 240.0]
    assert all(r["sync_ok"] for r in rows)


def test_coexistence_flag_adds_noise_and_loss():
    topo, _ = scenario_preset("3")
    manifest_off = small_manifest(scenario="3", stop=0.0, symbols=2_000_000)
    manifest_on = small_manifest(scenario="4", stop=0.0, symbols=2_000_000,
                                 coexist=True)
    row_off = run_sweep(manifest_off)[0]
    row_on = run_sweep(manifest_on)[0]
    assert row_on["noise_rate_cps"] > row_off["noise_rate_cps"]
    assert row_on["chain_nominal_db"] > row_off["chain_nominal_db"]


def test_background_floor_accounting():
    topo, _ = scenario_preset("1")
    floor = background_sifted_rate(DEFAULT_CONFIG, topo, False)
    per_det = DEFAULT_CONFIG.det.dark_rate_cps + DEFAULT_CONFIG.stray_rate_cps
    expected = 4 * per_det * 0.2 * 0.5 * DEFAULT_CONFIG.enc.payload_fraction
    assert floor == pytest.approx(expected)


def test_csv_round_trip(tmp_path):
    manifest = small_manifest()
    rows = run_sweep(manifest)
    path = tmp_path / "out.csv"
    write_csv(rows, path, manifest)
    loaded = read_csv(path)
    assert len(loaded) == len(rows)
    for a, b in zip(loaded, rows):
        assert a["sifted_rate_bps"] == pytest.approx(b["sifted_rate_bps"])
        assert a["scenario"] == str(b["scenario"])


def test_worker_pool_gives_identical_results(tmp_path):
    manifest = small_manifest(stop=4.0)
    rows_seq = run_sweep(manifest)
    env_backup = os.environ.get("FMQKD_WORKERS")
    os.environ["FMQKD_WORKERS"] = "2"
    try:
        rows_par = run_sweep(manifest)
    finally:
        if env_backup is None:
            os.environ.pop("FMQKD_WORKERS", None)
        else:
            os.environ["FMQKD_WORKERS"] = env_backup
    pa, pb = tmp_path / "seq.csv", tmp_path / "par.csv"
    write_csv(rows_seq, pa)
    write_csv(rows_par, pb)
    assert pa.read_bytes() == pb.read_bytes()


def test_cli_simulate_writes_csv_and_figure(tmp_path):
    out = tmp_path / "res.csv"
    cmd = [sys.executable, "-m", "fmqkd", "simulate", "--scenario", "1",
           "--sweep", "ob", "--from", "0", "--to", "4", "--step", "4",
           "--symbols", "600000", "--seed", "1", "--out", str(out), "--plot"]
    result = subprocess.run(cmd, capture_output=True, text=True, timeout=300)
    assert result.returncode == 0, result.stderr
    assert out.exists()
    assert out.with_suffix(".png").exists()
    assert len(read_csv(out)) == 2


def test_cli_presets_list():
    result = subprocess.run([sys.executable, "-m", "fmqkd", "presets", "list"],
                            capture_output=True, text=True, timeout=120)
    assert result.returncode == 0
    for name in ("1-straight-line", "3-tree", "5-field-kos"):
        assert name in result.stdout


def test_cli_simulate_accepts_topology_file(tmp_path):
    from fmqkd.odn import save_topology
    topo, _ = scenario_preset("1")
    topo_path = tmp_path / "custom.yaml"
    save_topology(topo, topo_path)
    out = tmp_path / "res.csv"
    cmd = [sys.executable, "-m", "fmqkd", "simulate", "--scenario", str(topo_path),
           "--sweep", "ob", "--from", "0", "--to", "0", "--step", "2",
           "--symbols", "600000", "--out", str(out)]
    result = subprocess.run(cmd, capture_output=True, text=True, timeout=300)
    assert result.returncode == 0, result.stderr
    assert len(read_csv(out)) == 1


def test_render_port_speckle_figure(tmp_path):
    from fmqkd.odn import port_transmission_sweep
    from fmqkd.plotting import render_port_speckle_figure
    topo, _ = scenario_preset("3")
    rows = port_transmission_sweep(topo, 847.95, 848.05, 25.0, 0)
    path = tmp_path / "speckle.png"
    render_port_speckle_figure(rows, path)
    assert path.exists() and path.stat().st_size > 0
