"""``asev`` command line: validate, run, compare and sweep scenarios.

Exit codes: 0 success, 1 input/IO error, 2 infeasible run.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from .policies import POLICIES, ROLLOUT
from .scenario import SWEEPABLE, ScenarioFileError, apply_param, load_scenario, validate_scenario
from .sim import compare, run

EXIT_OK, EXIT_INPUT, EXIT_INFEASIBLE = 0, 1, 2
COST_FIELDS = ("total", "energy", "degradation", "terminal")


def _out_dir(arg) -> Path:
    return Path(arg or os.environ.get("ASEV_OUT") or "asev_out")


def _load(path):
    try:
        return load_scenario(path)
    except ScenarioFileError as exc:
        for d in exc.diagnostics:
            print(f"error: {d}", file=sys.stderr)
        return None


def _with_seed(scenario, seed):
    """One seed drives both the workload draws and Monte-Carlo rollout samples."""
    if seed is None:
        return scenario
    return replace(scenario, seed=seed, rollout=replace(scenario.rollout, seed=seed))


def _policies(text: str) -> list[str]:
    names = [p.strip() for p in text.split(",") if p.strip()]
    bad = [p for p in names if p not in POLICIES]
    if bad or not names:
        raise argparse.ArgumentTypeError(f"policies must be from {', '.join(POLICIES)}")
    return names


def cmd_validate(args) -> int:
    diags = validate_scenario(args.scenario)
    for d in diags:
        print(f"error: {d}")
    if diags:
        return EXIT_INPUT
    print(f"ok: {args.scenario}")
    return EXIT_OK


def cmd_run(args) -> int:
    scenario = _load(args.scenario)
    if scenario is None:
        return EXIT_INPUT
    scenario = _with_seed(scenario, args.seed)
    report = run(scenario, args.policy)
    try:
        report.write(_out_dir(args.out))
    except OSError as exc:
        print(f"error: cannot write outputs: {exc}", file=sys.stderr)
        return EXIT_INPUT
    c = report.cost
    print(f"{report.policy} {c.total:.2f} {c.energy:.2f} {c.degradation:.2f} {c.terminal:.2f} "
          f"{str(report.feasible).lower()}")
    if not report.feasible:
        f = report.failure
        print(f"infeasible at stage {f['stage']} ({f['time']}): {f['reason']}", file=sys.stderr)
        return EXIT_INFEASIBLE
    return EXIT_OK


def _rows(reports, cur: str):
    base = reports[0].cost.total
    rows = []
    for n, r in enumerate(reports):
        row = {"policy": r.policy, "feasible": str(r.feasible).lower()}
        for k in COST_FIELDS:
            row[k] = f"{getattr(r.cost, k):.2f}"
        if n > 0:
            delta = (r.cost.total - base) / base * 100 if base else 0.0
            row["delta_total_pct"] = f"{delta:+.2f}"
        else:
            row["delta_total_pct"] = ""
        rows.append(row)
    return rows


def cmd_compare(args) -> int:
    scenario = _load(args.scenario)
    if scenario is None:
        return EXIT_INPUT
    scenario = _with_seed(scenario, args.seed)
    reports = compare(scenario, args.policies)
    rows = _rows(reports, args.currency)
    fields = ["policy", "feasible", *COST_FIELDS]
    if len(reports) > 1:
        fields.append("delta_total_pct")
    out = _out_dir(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "comparison.csv", "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=fields, extrasaction="ignore", lineterminator="\n")
            w.writeheader()
            w.writerows(rows)
    except OSError as exc:
        print(f"error: cannot write outputs: {exc}", file=sys.stderr)
        return EXIT_INPUT

    cur = args.currency
    print(f"{'policy':<10} {'feasible':<8} " + " ".join(f"{k:>12}" for k in COST_FIELDS)
          + ("   Δtotal" if len(reports) > 1 else ""))
    for row in rows:
        line = f"{row['policy']:<10} {row['feasible']:<8} " + " ".join(f"{cur + row[k]:>12}" for k in COST_FIELDS)
        if len(reports) > 1 and row["delta_total_pct"]:
            line += f"  {row['delta_total_pct']}%"
        print(line)
    return EXIT_OK


def cmd_sweep(args) -> int:
    if args.param not in SWEEPABLE:
        print(f"error: unknown sweep key {args.param!r}; sweepable keys: {', '.join(sorted(SWEEPABLE))}",
              file=sys.stderr)
        return EXIT_INPUT
    values = [v.strip() for v in args.values.split(",") if v.strip()]
    if not values:
        print("error: --values must list at least one value", file=sys.stderr)
        return EXIT_INPUT
    scenario = _load(args.scenario)
    if scenario is None:
        return EXIT_INPUT
    out = _out_dir(args.out)
    rows = []
    for v in values:
        try:
            variant = apply_param(scenario, args.param, v)
        except (ValueError, TypeError) as exc:
            print(f"error: {args.param}={v}: {exc}", file=sys.stderr)
            return EXIT_INPUT
        for r in compare(variant, args.policies):
            rows.append({"param": args.param, "value": v, "policy": r.policy,
                         "feasible": str(r.feasible).lower(),
                         **{k: f"{getattr(r.cost, k):.2f}" for k in COST_FIELDS}})
    try:
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "sweep.csv", "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=["param", "value", "policy", "feasible", *COST_FIELDS],
                               lineterminator="\n")
            w.writeheader()
            w.writerows(rows)
    except OSError as exc:
        print(f"error: cannot write outputs: {exc}", file=sys.stderr)
        return EXIT_INPUT
    for row in rows:
        print(",".join(str(row[k]) for k in ("param", "value", "policy", "feasible", *COST_FIELDS)))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="asev", description="Airport service EV fleet energy management")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="statically check a scenario")
    p.add_argument("scenario")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("run", help="simulate one policy for a day")
    p.add_argument("scenario")
    p.add_argument("--policy", choices=POLICIES, default=ROLLOUT)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory (default $ASEV_OUT or ./asev_out)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="run several policies on common random numbers")
    p.add_argument("scenario")
    p.add_argument("--policies", type=_policies, default=["greedy", "renewable", "rollout"])
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--currency", default="£")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("sweep", help="compare policies across values of one parameter")
    p.add_argument("scenario")
    p.add_argument("--param", required=True, help=f"one of: {', '.join(sorted(SWEEPABLE))}")
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--policies", type=_policies, default=["greedy", "rollout"])
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
