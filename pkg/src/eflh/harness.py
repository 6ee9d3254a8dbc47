"""Command-line entry point: run, compare, sweep and check."""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import evaluation as ev
from .core import ConfigurationError, ContractError, EFLHError
from .meta import ALGORITHMS, run_game
from .scenarios import ScenarioConfig, generate
from .schedule import ScheduleKind, coverage_violations

EXIT_OK, EXIT_USAGE, EXIT_VIOLATION = 0, 1, 2
EPS_ALGOS = ("eflh-full", "eflh-exp")

class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass
class RunConfig:
    algo: str
    scenario: ScenarioConfig
    epsilon: Optional[float] = None
    seed: Optional[int] = None
    T: Optional[int] = None
    out: Optional[Path] = None

    def __post_init__(self):
        if self.algo not in ALGORITHMS:
            raise UsageError(f"unknown algorithm {self.algo!r}; choose from {', '.join(ALGORITHMS)}")
        if self.algo in EPS_ALGOS and self.epsilon is None:
            raise UsageError(f"{self.algo} requires --epsilon")
        if self.epsilon is not None and not 0 < self.epsilon < 0.5:
            raise UsageError("--epsilon must lie in (0, 1/2)")
        if self.algo == "eflh-exp" and self.scenario.kind == "piecewise-linear":
            raise UsageError("eflh-exp needs an exp-concave or strongly convex scenario (alpha or lambda)")

    def resolved_scenario(self) -> ScenarioConfig:
        d = self.scenario.to_dict()
        if self.seed is not None:
            d["seed"] = self.seed
        if self.T is not None:
            if d["segments"] is not None:
                raise UsageError("--T cannot override a scenario with explicit segments")
            d["T"] = self.T
            d["segment_lengths"] = None
        return ScenarioConfig.from_dict(d)


def execute(cfg: RunConfig):
    """Run one configuration; returns (trace, report, wall_ms)."""
    scen = cfg.resolved_scenario()
    stream = generate(scen)
    t0 = time.perf_counter()
    trace = run_game(cfg.algo, stream, epsilon=cfg.epsilon)
    wall_ms = (time.perf_counter() - t0) * 1e3
    config = {"algo": cfg.algo, "epsilon": cfg.epsilon, "scenario": scen.to_dict()}
    report = ev.build_report(trace, stream, config, epsilon=cfg.epsilon, seed=scen.seed)
    report["max_active_experts"] = int(trace.n_active.max())
    return trace, report, wall_ms


def dump_report(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_run(out: Path, trace, report):
    out.mkdir(parents=True, exist_ok=True)
    (out / "trace.csv").write_text(trace.to_csv(), encoding="utf-8")
    (out / "report.json").write_text(dump_report(report), encoding="utf-8")


def _fatal(report) -> list:
    return [v for v in report["violations"] if v.get("fatal")]


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("EFLH_THREADS", "1")))
    except ValueError:
        return 1


def _scenario_from_args(args) -> ScenarioConfig:
    try:
        return ScenarioConfig.load(args.scenario)
    except FileNotFoundError:
        raise UsageError(f"scenario file not found: {args.scenario}")
    except (json.JSONDecodeError, TypeError) as exc:
        raise UsageError(f"bad scenario file {args.scenario}: {exc}")


def cli_run(args) -> int:
    cfg = RunConfig(args.algo, _scenario_from_args(args), args.epsilon, args.seed, args.T, Path(args.out))
    try:
        trace, report, _ = execute(cfg)
    except ContractError as exc:
        print(f"contract violation: {exc}", file=sys.stderr)
        return EXIT_VIOLATION
    write_run(cfg.out, trace, report)
    bad = _fatal(report)
    if bad:
        print(f"{len(bad)} contract violation(s); first: {bad[0]}", file=sys.stderr)
        return EXIT_VIOLATION
    print(f"wrote {cfg.out / 'trace.csv'} and {cfg.out / 'report.json'}")
    return EXIT_OK


def _summary_row(algo, report, wall_ms) -> dict:
    row = {
        "algo": algo,
        "max_active_experts": report["max_active_experts"],
        "static_regret": report["static_regret"],
        "dynamic_regret": report["dynamic"]["regret"],
        "wall_time_ms": round(wall_ms, 3),
    }
    for r in report["sa_table"]:
        row[f"sa_max@{r['k']}"] = r["max_regret"]
    return row


def summary_csv(rows: list[dict]) -> str:
    sa_cols = []
    for r in rows:
        for k in r:
            if k.startswith("sa_max@") and k not in sa_cols:
                sa_cols.append(k)
    sa_cols.sort(key=lambda c: int(c.split("@")[1]))
    cols = ["algo", "max_active_experts", "static_regret", *sa_cols, "dynamic_regret", "wall_time_ms"]
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({c: r.get(c, "") for c in cols})
    return buf.getvalue()


def _run_many(cfgs: list[RunConfig]):
    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        return list(pool.map(execute, cfgs))


def cli_compare(args) -> int:
    scen = _scenario_from_args(args)
    algos = [a.strip() for a in args.algos.split(",") if a.strip()]
    if not algos:
        raise UsageError("--algos is empty")
    cfgs = [RunConfig(a, scen, args.epsilon if a in EPS_ALGOS else None, args.seed, args.T) for a in algos]
    out = Path(args.out)
    try:
        results = _run_many(cfgs)
    except ContractError as exc:
        print(f"contract violation: {exc}", file=sys.stderr)
        return EXIT_VIOLATION
    rows, code = [], EXIT_OK
    for a, (trace, report, wall) in zip(algos, results):
        write_run(out / a, trace, report)
        rows.append(_summary_row(a, report, wall))
        if _fatal(report):
            code = EXIT_VIOLATION
    (out / "summary.csv").write_text(summary_csv(rows), encoding="utf-8")
    print(summary_csv(rows), end="")
    return code


def cli_sweep(args) -> int:
    scen = _scenario_from_args(args)
    algos = [a.strip() for a in args.algos.split(",") if a.strip()]
    eps = [float(e) for e in args.epsilons.split(",")] if args.epsilons else [None]
    seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else [scen.seed]
    cfgs, names = [], []
    for a in algos:
        for e_used in eps if a in EPS_ALGOS else [None]:
            for s in seeds:
                cfgs.append(RunConfig(a, scen, e_used, s, args.T))
                names.append(f"{a}" + (f"_eps{e_used}" if e_used is not None else "") + f"_seed{s}")
    out = Path(args.out)
    results = _run_many(cfgs)
    rows, code = [], EXIT_OK
    for n, (trace, report, wall) in zip(names, results):
        write_run(out / n, trace, report)
        rows.append(_summary_row(n, report, wall))
        if _fatal(report):
            code = EXIT_VIOLATION
    (out / "summary.csv").write_text(summary_csv(rows), encoding="utf-8")
    print(f"{len(rows)} runs written under {out}")
    return code


def _schedule_from_args(args) -> ScheduleKind:
    if args.schedule in ("full", "largest") and args.epsilon is None:
        raise UsageError(f"--schedule {args.schedule} requires --epsilon")
    return {
        "basic": ScheduleKind.basic,
        "dyadic": ScheduleKind.dyadic,
        "full": lambda: ScheduleKind.full(args.epsilon),
        "largest": lambda: ScheduleKind.largest(args.epsilon),
    }[args.schedule]()


def cli_check(args) -> int:
    if args.what == "coverage":
        kind = _schedule_from_args(args)
        t0 = time.perf_counter()
        bad = coverage_violations(kind, args.T, min_length=args.min_length, limit=1)
        dt = time.perf_counter() - t0
        if bad:
            s, t = bad[0]
            print(f"coverage FAILED: no witness for interval [{s}, {t}] (schedule {args.schedule}, T={args.T})")
            return EXIT_VIOLATION
        print(f"coverage ok: schedule {args.schedule}, T={args.T}, all intervals with length >= {args.min_length} ({dt:.2f}s)")
        return EXIT_OK
    return check_inequalities()


INEQ_GRID = {"lemma_tech": 10**5, "lemma_tech_new": 10**4, "recursion_y_max": 10**4, "power_grid": 10**4}
INEQ_EPSILONS = (0.1, 0.2, 0.3, 0.4, 0.49)


def inequality_results() -> list[tuple[str, int, bool, Optional[str]]]:
    """(name, grid size, ok, first counterexample) for every inequality sweep."""
    out = []
    x = np.geomspace(1.0, 1e9, INEQ_GRID["lemma_tech"])
    s = ev.lemma_tech_slack(x)
    out.append(("lemma-tech", len(x), bool(s.min() >= ev.SLACK_TOL), _first_bad(x, s)))
    x = np.geomspace(1.0, 1e9, INEQ_GRID["lemma_tech_new"])
    for e in INEQ_EPSILONS:
        s = ev.lemma_tech_new_slack(x, e)
        out.append((f"lemma-tech-new eps={e}", len(x), bool(s.min() >= ev.SLACK_TOL), _first_bad(x, s)))
    for n in (2, 3):
        r = ev.check_recursion_bounds(n, 1.0, 1.0, INEQ_GRID["recursion_y_max"], grid_size=INEQ_GRID["power_grid"])
        out.append((f"recursion-dp n={n}", r["dp"]["y_max"], r["dp"]["ok"],
                    None if r["dp"]["ok"] else f"min slack {r['dp']['min_slack']}"))
    r = ev.check_recursion_bounds(2, 1.0, 1.0, 16, grid_size=INEQ_GRID["power_grid"])
    out.append(("power-law recursion (alpha=0.5, beta=0.75)", r["power_recursion"]["points"], r["power_recursion"]["ok"],
                None if r["power_recursion"]["ok"] else f"min slack {r['power_recursion']['min_slack']}"))
    grid = np.geomspace(1.0, 1e6, INEQ_GRID["power_grid"])
    for e in INEQ_EPSILONS:
        s = ev.exp_recursion_slack(grid, e)
        out.append((f"exp recursion eps={e}", len(grid), bool(s.min() >= ev.SLACK_TOL), _first_bad(grid, s)))
    return out


def _first_bad(x, slack) -> Optional[str]:
    idx = np.flatnonzero(slack < ev.SLACK_TOL)
    if len(idx) == 0:
        return None
    i = idx[0]
    return f"x={x[i]!r} slack={slack[i]!r}"


def check_inequalities() -> int:
    code = EXIT_OK
    for name, n, ok, bad in inequality_results():
        print(f"{name}: {n} points {'ok' if ok else 'FAILED'}")
        if not ok and code == EXIT_OK:
            print(f"  first counterexample: {bad}")
            code = EXIT_VIOLATION
    return code


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="eflh", description="Adaptive-regret experiments with tower-scheduled experts.")
    sub = p.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="play one algorithm on a scenario")
    r.add_argument("--algo", required=True, choices=ALGORITHMS)
    r.add_argument("--scenario", required=True, help="scenario JSON file")
    r.add_argument("--epsilon", type=float)
    r.add_argument("--seed", type=int)
    r.add_argument("--T", type=int, help="override the horizon (regenerates seeded segments)")
    r.add_argument("--out", required=True)
    r.set_defaults(func=cli_run)

    c = sub.add_parser("compare", help="run several algorithms on one scenario")
    c.add_argument("--algos", required=True, help="comma-separated selectors")
    c.add_argument("--scenario", required=True)
    c.add_argument("--epsilon", type=float)
    c.add_argument("--seed", type=int)
    c.add_argument("--T", type=int)
    c.add_argument("--out", required=True)
    c.set_defaults(func=cli_compare)

    s = sub.add_parser("sweep", help="grid over algorithms, epsilons and seeds")
    s.add_argument("--algos", required=True)
    s.add_argument("--scenario", required=True)
    s.add_argument("--epsilons", default="")
    s.add_argument("--seeds", default="")
    s.add_argument("--T", type=int)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cli_sweep)

    k = sub.add_parser("check", help="exhaustive structural and inequality checks")
    ksub = k.add_subparsers(dest="what", required=True, parser_class=_Parser)
    cov = ksub.add_parser("coverage")
    cov.add_argument("--schedule", required=True, choices=("basic", "full", "largest", "dyadic"))
    cov.add_argument("--T", type=int, required=True)
    cov.add_argument("--epsilon", type=float)
    cov.add_argument("--min-length", type=int, default=8)
    cov.set_defaults(func=cli_check)
    ine = ksub.add_parser("inequalities")
    ine.set_defaults(func=cli_check)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ConfigurationError) as exc:
        parser.print_usage(sys.stderr)
        print(f"eflh: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ContractError as exc:
        print(f"contract violation: {exc}", file=sys.stderr)
        return EXIT_VIOLATION
    except EFLHError as exc:
        print(f"eflh: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
