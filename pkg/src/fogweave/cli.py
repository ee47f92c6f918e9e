"""Command-line entry point.

Exit codes: 0 ok, 1 other failure, 2 invalid configuration or usage,
3 infeasible, 4 oracle mismatch.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from importlib import resources
from pathlib import Path

from . import experiments as ex
from .config import ConfigError, dump_scenario, load_scenario
from .infra_model import generate_scenario
from .milp import build_model, export_lp
from .montecarlo import ComparisonReport, compare_to_analytic
from .solver import (
    BUDGET_EXHAUSTED,
    INFEASIBLE,
    OracleCapError,
    solve_bruteforce,
    solve_exact,
    solve_restricted,
)

EXIT_OK, EXIT_OTHER, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_ORACLE = 0, 1, 2, 3, 4

PLACEMENT_COLUMNS = ("request_id", "vnf_type", "instance", "node_id", "tier")


def bundled_config(name: str) -> Path:
    """Path of a config shipped with the package (``tiny`` or ``driving``)."""
    return Path(str(resources.files("fogweave") / "data" / f"{name}.yaml"))


def _config_path(arg: str) -> str:
    if arg.startswith("bundled:"):
        return str(bundled_config(arg.split(":", 1)[1]))
    return arg


def _alpha(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0.0 <= v <= 1.0 or math.isnan(v):
        raise argparse.ArgumentTypeError(f"alpha must lie in [0, 1], got {text}")
    return v


def _grid(text: str) -> list[float]:
    return [_alpha(t) for t in text.split(",") if t.strip()]


def _positive(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _load(path: str):
    try:
        return load_scenario(_config_path(path))
    except ConfigError as exc:
        for d in exc.diagnostics:
            print(d, file=sys.stderr)
        return None


def _solve(scn, alpha, tier, budget, workers):
    if tier == "hybrid":
        return solve_exact(scn.infra, scn.requests, alpha, budget, workers)
    return solve_restricted(scn.infra, scn.requests, alpha, tier, budget, workers)


def result_text(res, alpha: float, tier: str) -> str:
    lines = [f"status: {res.status}", f"alpha: {alpha!r}", f"tier: {tier}",
             f"nodes_explored: {res.node_count_explored}"]
    if res.placement is not None:
        ev = res.evaluation
        lines += [f"objective: {res.objective!r}", f"cost_total: {res.cost_total!r}",
                  f"license_cost: {ev.license_cost!r}", f"makespan_total: {res.makespan_total!r}",
                  "requests:"]
        for rid in ev.costs:
            c, m = ev.costs[rid], ev.makespans[rid]
            lines += [f"  {rid}:",
                      f"    cost_processing: {c.processing!r}",
                      f"    cost_deployment: {c.deployment!r}",
                      f"    cost_communication: {c.communication!r}",
                      f"    makespan_processing: {m.processing!r}",
                      f"    makespan_communication: {m.communication!r}"]
    return "\n".join(lines) + "\n"


def placement_csv(res, infra) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PLACEMENT_COLUMNS)
    for (rid, t), (inst, node) in sorted(res.placement.assignments.items()):
        w.writerow([rid, t, inst.instance_index, node, infra.node(node).tier])
    return buf.getvalue()


def cmd_solve(args) -> int:
    scn = _load(args.config)
    if scn is None:
        return EXIT_CONFIG
    alpha = scn.alpha if args.alpha is None else args.alpha
    budget = args.budget or scn.budget_nodes
    res = _solve(scn, alpha, args.tier, budget, args.workers)
    text = result_text(res, alpha, args.tier)
    if args.export_lp:
        infra = scn.infra if args.tier == "hybrid" else scn.infra.restricted(args.tier)
        export_lp(build_model(infra, scn.requests, alpha), args.export_lp)
    if args.out:
        out = Path(args.out)
        out.write_text(text)
        if res.placement is not None:
            out.with_suffix(".placement.csv").write_text(placement_csv(res, scn.infra))
    else:
        sys.stdout.write(text)
    if res.status == INFEASIBLE:
        print("infeasible", file=sys.stderr)
        return EXIT_INFEASIBLE
    if res.status == BUDGET_EXHAUSTED:
        print("search budget exhausted before optimality was proven", file=sys.stderr)
        return EXIT_OTHER
    if args.oracle:
        infra = scn.infra if args.tier == "hybrid" else scn.infra.restricted(args.tier)
        try:
            ref = solve_bruteforce(infra, scn.requests, alpha, scn.oracle_cap)
        except OracleCapError as exc:
            print(f"oracle refused: {exc}", file=sys.stderr)
            return EXIT_OTHER
        same = ref.status == res.status and math.isclose(
            ref.objective, res.objective, rel_tol=1e-9, abs_tol=1e-9)
        print(f"oracle objective: {ref.objective!r} ({'match' if same else 'MISMATCH'})")
        if not same:
            return EXIT_ORACLE
    return EXIT_OK


def cmd_paper(args) -> int:
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    report = ex.ExperimentReport(args.seed, args.alpha)
    steps = [
        lambda: ex.run_tier_comparison(args.seed, args.alpha),
        lambda: ex.run_sharing_comparison(args.seed, args.alpha),
        lambda: ex.run_alpha_sweep(args.seed, args.alpha_grid),
        lambda: ex.run_random_comparison(args.seed, args.alpha, args.trials),
    ]
    failure = None
    for step in steps:
        try:
            report.sections.append(step())
        except ex.ExperimentError as exc:
            failure = str(exc)
            break
    ex.write_report(report, outdir)
    if failure is not None:
        with open(outdir / "summary.txt", "a") as fh:
            fh.write(f"INCOMPLETE: {failure}\n")
        print(f"aborted: {failure}", file=sys.stderr)
        return EXIT_OTHER
    sys.stdout.write(report.summary())
    return EXIT_OK if report.passed else EXIT_OTHER


def cmd_mc(args) -> int:
    scn = _load(args.config)
    if scn is None:
        return EXIT_CONFIG
    samples = args.samples or scn.mc_samples
    seed = scn.mc_seed if args.seed is None else args.seed
    res = solve_exact(scn.infra, scn.requests, scn.alpha, scn.budget_nodes)
    if res.status == INFEASIBLE:
        print("infeasible", file=sys.stderr)
        return EXIT_INFEASIBLE
    if res.placement is None:
        print(f"no placement: {res.status}", file=sys.stderr)
        return EXIT_OTHER
    reports = [compare_to_analytic(res.placement, r, scn.infra, samples, seed, args.workers)
               for r in scn.requests]
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=ComparisonReport.CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    for rep in reports:
        w.writerows(rep.rows())
    if args.out:
        Path(args.out).write_text(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    ok = True
    for rep in reports:
        if not rep.sufficient:
            print(f"{rep.request_id}: {rep.note} ({rep.samples} < 1000)", file=sys.stderr)
        elif not rep.passed:
            ok = False
        print(f"{rep.request_id}: makespan stderr {rep.stderr_makespan!r}, "
              f"cost stderr {rep.stderr_cost!r}", file=sys.stderr)
    return EXIT_OK if ok else EXIT_OTHER


def cmd_validate(args) -> int:
    scn = _load(args.config)
    if scn is None:
        return EXIT_CONFIG
    print(f"ok: {len(scn.infra.nodes)} nodes, {len(scn.infra.links)} links, "
          f"{len(scn.infra.catalog)} VNF types, {len(scn.requests)} requests")
    return EXIT_OK


def cmd_export_scenario(args) -> int:
    infra, requests = generate_scenario(args.seed)
    if args.apps:
        wanted = args.apps.split(",")
        requests = [r for r in requests if r.request_id in wanted]
    text = dump_scenario(infra, requests, args.alpha)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fogweave",
                                description="Exact VNF placement on hybrid cloud/fog infrastructure.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="solve a scenario config")
    s.add_argument("config", help="YAML scenario (or bundled:NAME)")
    s.add_argument("--alpha", type=_alpha, help="cost weight in [0, 1] (default from config)")
    s.add_argument("--tier", choices=("hybrid", "cloud", "fog"), default="hybrid")
    s.add_argument("--oracle", action="store_true", help="cross-check with brute force")
    s.add_argument("--export-lp", metavar="PATH", help="write the MILP model in LP format")
    s.add_argument("--out", metavar="PATH", help="result file; placement goes to PATH.placement.csv")
    s.add_argument("--budget", type=_positive, help="search node limit")
    s.add_argument("--workers", type=_positive, help="parallel search processes")
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("paper", help="run the evaluation protocol")
    s.add_argument("--seed", type=int, default=1)
    s.add_argument("--alpha", type=_alpha, default=0.5)
    s.add_argument("--alpha-grid", type=_grid, default=list(ex.DEFAULT_GRID))
    s.add_argument("--trials", type=_positive, default=30)
    s.add_argument("--outdir", default="results")
    s.set_defaults(func=cmd_paper)

    s = sub.add_parser("mc", help="Monte-Carlo check of the optimal placement")
    s.add_argument("config")
    s.add_argument("--samples", type=_positive)
    s.add_argument("--seed", type=int)
    s.add_argument("--workers", type=_positive, default=1)
    s.add_argument("--out", metavar="PATH")
    s.set_defaults(func=cmd_mc)

    s = sub.add_parser("validate", help="check a scenario config")
    s.add_argument("config")
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("export-scenario", help="write a generated scenario as YAML")
    s.add_argument("--seed", type=int, default=1)
    s.add_argument("--alpha", type=_alpha, default=0.5)
    s.add_argument("--apps", help="comma-separated request ids to keep")
    s.add_argument("--out", metavar="PATH")
    s.set_defaults(func=cmd_export_scenario)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OTHER


if __name__ == "__main__":
    sys.exit(main())
