"""Command-line entry point.

    python -m aleph_ipomdp run --game iug --sender-dom 1 --threshold 0.1 --seeds 3
    python -m aleph_ipomdp grid --threshold random --sender-dom -1 --seeds 20
    python -m aleph_ipomdp compare --threshold 0.5 --delta 0.1 --omega 0.3

Exit codes: 0 success, 2 configuration error, 1 runtime error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from typing import Optional, Sequence

from .core import ConfigError
from .harness import (DEFAULT_DELTAS, DEFAULT_OMEGAS, DEFAULT_SEEDS, OUT_DIR_ENV, Cell, ExperimentPlan,
                      compare, config_from_dict, default_out_dir, export, run_traces)

# flag name -> EngineConfig field
_ENGINE_FLAGS = {"trials": "horizon", "temperature": "temperature", "gamma": "gamma",
                 "samples": "mechanism_samples", "planner_iterations": "planner_iterations"}


def parse_seeds(text: str) -> tuple:
    """"N" -> 0..N-1, "a-b" -> a..b inclusive, "a,b,c" -> that list."""
    text = text.strip()
    try:
        if "," in text:
            return tuple(int(x) for x in text.split(",") if x.strip())
        if "-" in text[1:]:
            a, b = text.split("-", 1)
            return tuple(range(int(a), int(b) + 1))
        n = int(text)
    except ValueError:
        raise ConfigError(f"cannot parse seeds {text!r}") from None
    if n < 1:
        raise ConfigError("need at least one seed")
    return tuple(range(n))


def parse_floats(text: str) -> tuple:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise ConfigError(f"cannot parse number list {text!r}") from None


def parse_threshold(text: str):
    if text in ("random", "draw"):
        return text
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"bad threshold {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="aleph_ipomdp", description="Deception experiments between "
                                "theory-of-mind agents (iterated ultimatum and zero-sum games).")
    sub = p.add_subparsers(dest="command", required=True)
    helps = {"run": "one cell, full per-trial trace", "grid": "delta x omega sweep with summaries",
             "baseline": "aleph-mechanism off", "compare": "paired baseline-vs-aleph differences"}
    for name, text in helps.items():
        s = sub.add_parser(name, help=text, description=text)
        s.add_argument("--config", help="JSON file mirroring the plan; flags override its values")
        s.add_argument("--game", choices=("iug", "rowcol"), help="game (default iug)")
        s.add_argument("--sender-dom", type=int, help="DoM of the sender / row player: -1 or 1 (default 1)")
        s.add_argument("--receiver-dom", type=int, help="DoM of the receiver / column player: 0 or 2 (default 0)")
        s.add_argument("--threshold", help="iug sender threshold psi, 'random' (DoM(-1)) or 'draw' (default 0.1)")
        s.add_argument("--matrix", type=int, choices=(1, 2), help="rowcol payoff matrix; default drawn by nature")
        s.add_argument("--row-type", choices=("informed", "uninformed"), help="rowcol DoM(-1) row informedness")
        s.add_argument("--trials", type=int, help="horizon T (default 12)")
        s.add_argument("--temperature", type=float, help="softmax temperature (default 0.1)")
        s.add_argument("--gamma", type=float, help="discount (default 0.99)")
        s.add_argument("--delta", help="comma list of typicality tolerances (grid default: 5 values)")
        s.add_argument("--omega", help="comma list of reward-band quantiles (grid default: 5 values)")
        s.add_argument("--samples", type=int, help="aleph-mechanism sample size N (default 200)")
        s.add_argument("--planner-iterations", type=int, help="IPOMCP iterations per decision (default 3000)")
        s.add_argument("--seeds", help=f"N, a-b or a,b,c (default {DEFAULT_SEEDS})")
        s.add_argument("--aleph", choices=("on", "off"), help="aleph-mechanism (default off; grid/compare on)")
        s.add_argument("--out", help=f"output directory (default ${OUT_DIR_ENV} or ./aleph_out)")
        s.add_argument("--format", choices=("csv", "json", "both"), default="both", help="output format")
        s.add_argument("--workers", type=int, default=1, help="worker processes (default 1)")
    return p


def plan_from_args(args) -> ExperimentPlan:
    doc = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {args.config}: {e}") from None
    engine = dict(doc.get("config", {}))
    for flag, name in _ENGINE_FLAGS.items():
        v = getattr(args, flag)
        if v is not None:
            engine[name] = v
    grid_like = args.command in ("grid", "compare")
    aleph = args.aleph if args.aleph is not None else doc.get("aleph")
    if args.command == "baseline":
        aleph = "off"
    if aleph is None:
        aleph = "on" if grid_like else "off"
    if isinstance(aleph, bool):
        aleph = "on" if aleph else "off"
    engine["aleph_enabled"] = aleph == "on"
    cfg = config_from_dict(engine)

    def pick(flag, key, default):
        v = getattr(args, flag)
        return v if v is not None else doc.get(key, default)

    threshold = args.threshold if args.threshold is not None else doc.get("threshold", 0.1)
    if isinstance(threshold, str):
        threshold = parse_threshold(threshold)
    cell = Cell(game=pick("game", "game", "iug"), deceiver_dom=pick("sender_dom", "sender_dom", 1),
                victim_dom=pick("receiver_dom", "receiver_dom", 0), threshold=threshold,
                matrix=pick("matrix", "matrix", None), row_type=pick("row_type", "row_type", None),
                config=cfg)
    seeds = parse_seeds(args.seeds) if args.seeds else doc.get("seeds", DEFAULT_SEEDS)
    if isinstance(seeds, int):
        seeds = tuple(range(seeds))
    dflt_d = DEFAULT_DELTAS if args.command == "grid" else (cfg.delta,)
    dflt_w = DEFAULT_OMEGAS if args.command == "grid" else (cfg.omega,)
    deltas = parse_floats(args.delta) if args.delta else tuple(doc.get("deltas", dflt_d))
    omegas = parse_floats(args.omega) if args.omega else tuple(doc.get("omegas", dflt_w))
    out = args.out or doc.get("out") or default_out_dir()
    return ExperimentPlan(cell=cell, seeds=tuple(int(s) for s in seeds), deltas=deltas, omegas=omegas,
                          out_dir=out)


def execute(args) -> list:
    plan = plan_from_args(args)
    os.makedirs(plan.out_dir, exist_ok=True)
    fmt = ("csv", "json") if args.format == "both" else (args.format,)
    written = []
    prefix = os.path.join(plan.out_dir, args.command)
    if args.command == "compare":
        res = compare(plan, args.workers)
        base_plan = replace(plan, deltas=plan.deltas[:1], omegas=plan.omegas[:1])
        extra = {"comparison": res["cells"]}
        if "csv" in fmt:
            written.append(export(res["baseline_traces"], "csv", prefix + "_baseline_trials.csv", base_plan))
            written.append(export(res["aleph_traces"], "csv", prefix + "_aleph_trials.csv", plan))
        if "json" in fmt:
            written.append(export(res["aleph_traces"], "json", prefix + "_summary.json", plan, extra))
        return written
    traces = run_traces(plan, args.workers)
    if "csv" in fmt:
        written.append(export(traces, "csv", prefix + "_trials.csv", plan))
    if "json" in fmt:
        written.append(export(traces, "json", prefix + "_summary.json", plan))
    return written


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        for path in execute(args):
            print(path)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # noqa: BLE001 -- report, don't trace back
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
