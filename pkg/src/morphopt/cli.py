"""Command-line entry point: ``morphopt <subcommand> ...``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

from . import __version__
from .campaign import (RunDirectory, run_dynamic_validation, run_enumerate, run_exp1, run_exp2, write_enumeration,
                       write_exp1, write_validation)
from .config import CampaignConfig, load_config
from .dsp import FilterSpec, lowpass, moving_average
from .exceptions import ConfigurationError, MorphoptError
from .fullscale import (CANDIDATE_MATERIALS, EconomicsSpec, FullScalePanelSpec, fuel_and_emissions, material_table,
                        read_materials_csv)
from .geometry import decode_indices, write_grid_csv
from .rig.replay import ReplayRig
from .stats import t_test_one_sided
from .traces import read_trace

logger = logging.getLogger("morphopt")

MODES = {"optimize": "exp2-optimize", "baseline": "exp1-baseline", "validate": "dynamic-validate",
         "enumerate": "enumerate"}


def _campaign_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="YAML/JSON campaign config")
    parser.add_argument("--seed", type=int, help="root seed (overrides the config)")
    parser.add_argument("--out", type=Path, help="output directory (overrides the config)")
    parser.add_argument("--rig", choices=("synthetic", "replay", "remote"), help="rig backend")
    parser.add_argument("--realtime", action="store_true", help="pace acquisitions in wall-clock time")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="morphopt", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("optimize", help="GA campaign against the rig (delta mode)")
    _campaign_args(p)
    p = sub.add_parser("baseline", help="base vehicle vs neutral drag table")
    _campaign_args(p)
    p.add_argument("--save-traces", action="store_true")
    p = sub.add_parser("validate", help="dynamic morphing trials for elite shapes")
    _campaign_args(p)
    p.add_argument("--elites-from", type=Path, help="summary.json of an optimize run")
    p.add_argument("--control", action="store_true", help="add neutral-to-neutral control trials")
    p = sub.add_parser("enumerate", help="rank every admissible shape on the noiseless surrogate")
    _campaign_args(p)
    p.add_argument("--unconstrained", action="store_true", help="ignore the clearance constraints")
    p.add_argument("--grid-csv", action="store_true", help="also export the grid with admissibility flags")

    p = sub.add_parser("analyze", help="one-sided t-test of two raw trace CSVs")
    p.add_argument("trace_a", type=Path)
    p.add_argument("trace_b", type=Path)
    p.add_argument("--alpha", type=float, default=0.01)
    p.add_argument("--out", type=Path)

    p = sub.add_parser("filter", help="zero-phase low-pass a trace CSV")
    p.add_argument("trace", type=Path)
    p.add_argument("--cutoff", type=float, default=5.0)
    p.add_argument("--order", type=int, default=4)
    p.add_argument("--bin-window", type=float, default=1.0)
    p.add_argument("--sliding", action="store_true")
    p.add_argument("--plot-data", action="store_true", help="write the raw/filtered/binned triplet to --out")
    p.add_argument("--out", type=Path)

    p = sub.add_parser("scale", help="full-size panel sizing per material")
    p.add_argument("--materials", type=Path, help="CSV with name,E_GPa,sigma_u_MPa,rho_kg_m3")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--gamma", type=float, default=0.05)
    p.add_argument("--out", type=Path)

    p = sub.add_parser("economics", help="fuel, cost and CO2 savings")
    p.add_argument("--drag-reduction", type=float, default=0.085)
    p.add_argument("--metric-rounded", action="store_true", help="use $0.66/l, 8.5 km/l, 2.35 kg/l")
    p.add_argument("--out", type=Path)

    p = sub.add_parser("replay", help="score a directory of recorded shape traces")
    p.add_argument("directory", type=Path)
    p.add_argument("--mode", choices=("absolute", "delta"), default="delta")
    p.add_argument("--window", type=float, default=10.0)
    p.add_argument("--out", type=Path)
    return parser


def _config_for(args) -> CampaignConfig:
    config = load_config(args.config)
    overrides = {"mode": MODES[args.command], "seed": args.seed,
                 "output_dir": str(args.out) if args.out else None, "rig.backend": args.rig}
    if args.realtime:
        overrides["rig.realtime"] = True
    if getattr(args, "unconstrained", False):
        overrides["geometry.chain.unconstrained"] = True
    return config.with_overrides(**overrides)


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text)


def _dump(payload) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def cmd_optimize(args) -> dict:
    config = _config_for(args)
    run = RunDirectory(config.output_dir, config)
    with run.session():
        result = run_exp2(config, run=run)
    return {k: result.summary[k] for k in ("termination_reason", "n_generations", "n_evaluations", "best")}


def cmd_baseline(args) -> dict:
    config = _config_for(args)
    run = RunDirectory(config.output_dir, config)
    with run.session():
        result = run_exp1(config, keep_traces=args.save_traces or config.exp1.save_traces)
        write_exp1(result, run)
    return {"rows": result.rows}


def cmd_validate(args) -> dict:
    config = _config_for(args)
    elites = None
    if args.elites_from is not None:
        summary = json.loads(args.elites_from.read_text())
        elites = [decode_indices(e["indices"]) for e in summary["elites"]]
    run = RunDirectory(config.output_dir, config)
    with run.session():
        trials = run_dynamic_validation(config, elites, control=args.control)
        write_validation(trials, run)
    return {"trials": [{"elite": t.elite + 1, "trial": t.trial + 1, "control": t.control,
                        "p_value": t.ttest.p_value, "reject_null": t.ttest.reject_null} for t in trials]}


def cmd_enumerate(args) -> dict:
    config = _config_for(args)
    run = RunDirectory(config.output_dir, config)
    with run.session():
        result = run_enumerate(config)
        write_enumeration(result, run)
        if args.grid_csv:
            buf = io.StringIO()
            write_grid_csv(config.chain_spec(), buf)
            run.write_text("grid.csv", buf.getvalue())
    return {"n_shapes": len(result), "optimum": result.optimum.to_dict(), "drag_N": float(result.drag[0])}


def cmd_analyze(args) -> dict:
    result = t_test_one_sided(read_trace(args.trace_a), read_trace(args.trace_b), args.alpha)
    payload = result.to_dict()
    if args.out:
        _emit(_dump(payload), args.out)
    return payload


def _series_csv(times, values) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("t_s", "value_N"))
    writer.writerows([f"{t:.6f}", repr(float(v))] for t, v in zip(times, values))
    return buf.getvalue()


def cmd_filter(args) -> dict | None:
    trace = read_trace(args.trace)
    filtered = lowpass(trace, FilterSpec(order=args.order, cutoff=args.cutoff))
    if args.plot_data:
        if args.out is None:
            raise ConfigurationError("--plot-data needs --out DIR")
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "raw.csv").write_text(_series_csv(trace.times, trace.samples))
        (args.out / "filtered.csv").write_text(_series_csv(filtered.times, filtered.samples))
        centres, means = moving_average(trace, args.bin_window, sliding=args.sliding)
        (args.out / "binned.csv").write_text(_series_csv(centres, means))
        return {"written": sorted(str(p) for p in args.out.glob("*.csv"))}
    _emit(_series_csv(filtered.times, filtered.samples), args.out)
    return None


def cmd_scale(args) -> dict | None:
    materials = read_materials_csv(args.materials) if args.materials else CANDIDATE_MATERIALS
    rows = material_table(materials, FullScalePanelSpec(gamma=args.gamma))
    if args.format == "json":
        _emit(_dump({"materials": rows}), args.out)
        return None
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    _emit(buf.getvalue(), args.out)
    return None


def cmd_economics(args) -> dict | None:
    spec = (EconomicsSpec.metric_rounded(drag_reduction=args.drag_reduction) if args.metric_rounded
            else EconomicsSpec(drag_reduction=args.drag_reduction))
    payload = {"inputs": asdict(spec), **fuel_and_emissions(spec),
               "recovery_distance_m": {r["name"]: r["recovery_distance_m"]
                                       for r in material_table(econ=spec)}}
    _emit(_dump(payload), args.out)
    return None


def cmd_replay(args) -> dict | None:
    rig = ReplayRig.from_directory(args.directory, mode=args.mode, averaging_window=args.window)
    scored = []
    for indices in sorted(rig.traces):
        shape = decode_indices(indices)
        scored.append((rig.evaluate(shape), shape))
    scored.sort(key=lambda item: (item[0], item[1].indices))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("i1", "i2", "i3", "theta1_deg", "theta2_deg", "theta3_deg", "fitness_N"))
    for value, shape in scored:
        writer.writerow([*shape.indices, *(f"{t:.6f}" for t in shape.theta), repr(float(value))])
    _emit(buf.getvalue(), args.out)
    return None


COMMANDS = {"optimize": cmd_optimize, "baseline": cmd_baseline, "validate": cmd_validate,
            "enumerate": cmd_enumerate, "analyze": cmd_analyze, "filter": cmd_filter, "scale": cmd_scale,
            "economics": cmd_economics, "replay": cmd_replay}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        payload = COMMANDS[args.command](args)
    except ConfigurationError as exc:
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return 2
    except (MorphoptError, OSError, ValueError, KeyError) as exc:
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return 1
    if payload is not None:
        sys.stdout.write(_dump(payload))
    return 0


if __name__ == "__main__":
    sys.exit(main())
