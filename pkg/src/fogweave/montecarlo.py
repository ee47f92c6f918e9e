"""Stochastic execution of a placed request.

A sample draws one branch at every Sel node and a geometric repetition count
N with P(N=n) = (1-q) q^n at every Loop node, then prices the realized run
with the same per-leaf terms the analytic folds use. Averaging many samples
gives an independent check of the expected weights, cost and makespan.

Seeds are split per sample with ``SeedSequence([seed, k])`` feeding a PCG64
generator, so sample ``k`` is the same regardless of worker count.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .app_model import Loop, Par, Request, Sel, Seq, VnfLeaf, annotate_leaves, iter_nodes
from .evaluation import Placement, cost_of, device_terms, leaf_terms, makespan_of
from .infra_model import Infrastructure

MAX_LOOP_ITERATIONS = 10_000
MIN_SAMPLES_FOR_ASSERTIONS = 1_000


@dataclass(frozen=True)
class ExecutionTrace:
    visits: dict
    makespan: float
    variable_cost: float
    truncated_loops: int = 0


def _rng(seed: int, k: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, k])))


class _Sampler:
    def __init__(self, placement: Placement, request: Request, infra: Infrastructure):
        terms = leaf_terms(placement, request, infra)
        self.tree = request.tree
        self.delay = {t: (v.proc_delay, v.edge_delay) for t, v in terms.items()}
        self.cost = {t: v.proc_cost + v.edge_cost for t, v in terms.items()}
        self.dev_cost, self.dev_delay = device_terms(placement, request, infra)
        self.order = list(terms)

    def sample(self, rng: np.random.Generator) -> ExecutionTrace:
        visits = dict.fromkeys(self.order, 0)
        truncated = 0

        def run(node):
            nonlocal truncated
            if isinstance(node, VnfLeaf):
                visits[node.type_id] += 1
                return self.delay[node.type_id]
            if isinstance(node, Seq):
                p = c = 0.0
                for ch in node.children:
                    dp, dc = run(ch)
                    p += dp
                    c += dc
                return p, c
            if isinstance(node, Par):
                parts = [run(ch) for ch in node.children]
                return max(x for x, _ in parts), max(y for _, y in parts)
            if isinstance(node, Sel):
                k = int(rng.choice(len(node.children), p=node.probabilities))
                return run(node.children[k])
            if isinstance(node, Loop):
                n = int(rng.geometric(1.0 - node.q)) - 1
                if n > MAX_LOOP_ITERATIONS:
                    n = MAX_LOOP_ITERATIONS
                    truncated += 1
                p = c = 0.0
                for _ in range(n):
                    dp, dc = run(node.body)
                    p += dp
                    c += dc
                return p, c
            raise TypeError(f"unknown tree node {node!r}")

        p, c = run(self.tree)
        cost = math.fsum([self.dev_cost] + [self.cost[t] * n for t, n in visits.items()])
        return ExecutionTrace(visits, p + c + self.dev_delay, cost, truncated)


def sample_execution(placement: Placement, request: Request, infra: Infrastructure,
                     seed: int, index: int = 0) -> ExecutionTrace:
    """The ``index``-th sampled execution under ``seed``."""
    return _Sampler(placement, request, infra).sample(_rng(seed, index))


def has_stochastic_par(tree) -> bool:
    """True when some Par node has a Sel or a Loop below it."""
    for _, node in iter_nodes(tree):
        if isinstance(node, Par):
            if any(isinstance(d, Sel) or (isinstance(d, Loop) and d.q > 0)
                   for _, d in iter_nodes(node)):
                return True
    return False


@dataclass
class Check:
    name: str
    analytic: float
    mean: float
    stderr: float
    rule: str
    passed: bool | None


@dataclass
class ComparisonReport:
    request_id: str
    samples: int
    seed: int
    analytic_cost: float
    analytic_makespan: float
    mean_cost: float
    stderr_cost: float
    mean_makespan: float
    stderr_makespan: float
    visit_means: dict
    visit_stderr: dict
    node_weights: dict
    truncated_loops: int
    checks: list = field(default_factory=list)
    note: str = ""

    @property
    def sufficient(self) -> bool:
        return self.samples >= MIN_SAMPLES_FOR_ASSERTIONS

    @property
    def passed(self) -> bool:
        return self.sufficient and all(c.passed for c in self.checks)

    CSV_COLUMNS = ("request_id", "quantity", "analytic", "sample_mean", "stderr",
                   "samples", "seed", "rule", "outcome")

    def rows(self) -> list[dict]:
        out = []
        for c in self.checks:
            outcome = "SKIP" if c.passed is None else ("PASS" if c.passed else "FAIL")
            out.append({"request_id": self.request_id, "quantity": c.name,
                        "analytic": repr(c.analytic), "sample_mean": repr(c.mean),
                        "stderr": repr(c.stderr), "samples": self.samples,
                        "seed": self.seed, "rule": c.rule, "outcome": outcome})
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=self.CSV_COLUMNS, lineterminator="\n")
        w.writeheader()
        w.writerows(self.rows())
        return buf.getvalue()


def _chunk(args):
    placement, request, infra, seed, lo, hi = args
    s = _Sampler(placement, request, infra)
    return [s.sample(_rng(seed, k)) for k in range(lo, hi)]


def _mean_stderr(values) -> tuple[float, float]:
    n = len(values)
    if min(values) == max(values):
        return float(values[0]), 0.0
    mean = math.fsum(values) / n
    var = math.fsum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(var / n)


def _within(mean, analytic, se, k=3.0):
    return abs(mean - analytic) <= k * se + 1e-9 * max(1.0, abs(analytic))


def compare_to_analytic(placement: Placement, request: Request, infra: Infrastructure,
                        samples: int, seed: int, workers: int = 1) -> ComparisonReport:
    """Sample means and standard errors against the analytic expectations.

    With at least ``MIN_SAMPLES_FOR_ASSERTIONS`` samples, every leaf's mean
    visit count and the variable cost must lie within 3 standard errors of
    the analytic value. Makespan must too when no Par node has a stochastic
    branch; otherwise the analytic value may only undershoot the sample mean
    (a max of means never exceeds the mean of the max), again up to 3
    standard errors of sampling noise.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    if workers > 1 and samples >= 2 * workers:
        step = math.ceil(samples / workers)
        jobs = [(placement, request, infra, seed, lo, min(lo + step, samples))
                for lo in range(0, samples, step)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            traces = [t for part in pool.map(_chunk, jobs) for t in part]
    else:
        traces = _chunk((placement, request, infra, seed, 0, samples))

    weights = {a.leaf: a.node_weight for a in annotate_leaves(request.tree)}
    cost = cost_of(placement, request, infra)
    analytic_cost = cost.processing + cost.communication
    analytic_span = makespan_of(placement, request, infra).total

    mc, sc = _mean_stderr([t.variable_cost for t in traces])
    mm, sm = _mean_stderr([t.makespan for t in traces])
    vm, vs = {}, {}
    for leaf in weights:
        vm[leaf], vs[leaf] = _mean_stderr([t.visits[leaf] for t in traces])

    report = ComparisonReport(
        request.request_id, samples, seed, analytic_cost, analytic_span, mc, sc, mm, sm,
        vm, vs, weights, sum(t.truncated_loops for t in traces),
    )
    enough = report.sufficient
    if not enough:
        report.note = "insufficient samples for assertions"

    def check(name, analytic, mean, se, rule, ok):
        report.checks.append(Check(name, analytic, mean, se, rule, ok if enough else None))

    for leaf, w in weights.items():
        check(f"visits:{leaf}", w, vm[leaf], vs[leaf], "within 3 stderr", _within(vm[leaf], w, vs[leaf]))
    check("variable_cost", analytic_cost, mc, sc, "within 3 stderr", _within(mc, analytic_cost, sc))
    if has_stochastic_par(request.tree):
        check("makespan", analytic_span, mm, sm, "analytic <= mean + 3 stderr",
              analytic_span <= mm + 3.0 * sm + 1e-9 * max(1.0, abs(analytic_span)))
    else:
        check("makespan", analytic_span, mm, sm, "within 3 stderr", _within(mm, analytic_span, sm))
    return report
