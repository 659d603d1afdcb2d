"""Command-line interface.

    fmqkd simulate --scenario 3 --sweep ob --from 0 --to 30 --step 2 \
                   --seed 7 --symbols 2000000 --out results.csv --plot
    fmqkd calibrate --target fig4a --out params.yaml
    fmqkd presets list

Worker count for sweep points is taken from the FMQKD_WORKERS environment
variable (time sweeps always run sequentially).
"""

from __future__ import annotations

import argparse
import pathlib
import sys

from .odn import DriftParams, load_topology, preset_names, scenario_preset
from .runner import RunManifest, SweepSpec, DEFAULT_CONFIG, run_sweep, write_csv

_SWEEP_DEFAULTS = {
    # kind: (start, stop, step)
    "ob": (0.0, 30.0, 2.0),
    "wavelength": (847.98, 848.02, 0.0005),
    "time": (0.0, 3600.0, 60.0),
    "port": (0, 3, 1),
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fmqkd",
                                     description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a scenario sweep and write CSV")
    sim.add_argument("--scenario", default="1",
                     help="preset name (1..5, 5-roof) or a topology YAML file")
    sim.add_argument("--sweep", default="ob", choices=["ob", "wavelength", "time", "port"])
    sim.add_argument("--from", dest="start", type=float, default=None,
                     help="sweep start (dB / nm / s / port)")
    sim.add_argument("--to", dest="stop", type=float, default=None)
    sim.add_argument("--step", type=float, default=None)
    sim.add_argument("--coexist", action="store_true",
                     help="enable the 50-channel classical overlay")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--symbols", type=int, default=10_000_000)
    sim.add_argument("--trials", type=int, default=1)
    sim.add_argument("--out", type=pathlib.Path, required=True)
    sim.add_argument("--plot", action="store_true",
                     help="also render a figure next to the CSV")

    cal = sub.add_parser("calibrate", help="re-derive calibrated parameters")
    cal.add_argument("--target", required=True, choices=["fig4a", "fig4b", "fig5c"])
    cal.add_argument("--out", type=pathlib.Path, required=True)
    cal.add_argument("--seed", type=int, default=0)

    pre = sub.add_parser("presets", help="inspect the shipped scenarios")
    pre.add_argument("action", choices=["list"])
    return parser


def _cmd_simulate(args) -> int:
    path = pathlib.Path(args.scenario)
    if path.suffix in (".yaml", ".yml") or path.exists():
        topology = load_topology(path)
        manifest_kwargs = dict(scenario=topology.label or path.stem,
                               topology=topology, drift=DriftParams.lab())
    else:
        topology, drift = scenario_preset(args.scenario)
        manifest_kwargs = dict(scenario=args.scenario, topology=topology, drift=drift)

    defaults = _SWEEP_DEFAULTS[args.sweep]
    start = args.start if args.start is not None else defaults[0]
    stop = args.stop if args.stop is not None else defaults[1]
    step = args.step if args.step is not None else defaults[2]
    sweep = SweepSpec(kind=args.sweep, start=start, stop=stop, step=step,
                      trials=args.trials, symbols=args.symbols, seed=args.seed)
    manifest = RunManifest(sweep=sweep, coexist=args.coexist,
                           config=DEFAULT_CONFIG, **manifest_kwargs)
    rows = run_sweep(manifest)
    write_csv(rows, args.out, manifest)
    print(f"wrote {len(rows)} rows to {args.out}")
    if args.plot:
        from .plotting import render_sweep_figure
        fig_path = args.out.with_suffix(".png")
        render_sweep_figure(rows, fig_path)
        print(f"wrote figure to {fig_path}")
    return 0


def _cmd_calibrate(args) -> int:
    from .calibrate import run_calibration
    params = run_calibration(args.target, seed=args.seed)
    import yaml
    with open(args.out, "w", encoding="utf-8") as fh:
        yaml.safe_dump(params, fh, sort_keys=False)
    print(f"wrote calibrated parameters to {args.out}")
    for key, value in params.items():
        print(f"  {key}: {value}")
    return 0


def _cmd_presets(args) -> int:
    for name in preset_names():
        topology, drift = scenario_preset(name)
        parts = [type(e).__name__ for e in topology.elements]
        print(f"{name:8s} {topology.label:16s} port {topology.selected_port + 1}, "
              f"drift {drift.profile}: {' -> '.join(parts)}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "simulate":
        return _cmd_simulate(args)
    if args.command == "calibrate":
        return _cmd_calibrate(args)
    if args.command == "presets":
        return _cmd_presets(args)
    return 2


if __name__ == "__main__":
    sys.exit(main())
