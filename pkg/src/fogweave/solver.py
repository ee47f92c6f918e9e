"""Exact placement search.

``solve_exact`` is a depth-first branch and bound over one decision per
(request, leaf): which (instance, node) serves it. Node, instance and link
loads are tracked incrementally so infeasible branches are cut at once, and
every partial assignment gets an admissible lower bound on the objective.
``solve_bruteforce`` enumerates the whole assignment space instead and shares
no search code with it; it exists to certify the branch and bound on small
instances.
"""

from __future__ import annotations

import csv
import itertools
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .app_model import Par, Request, annotate_leaves, iter_nodes, leaves
from .evaluation import (
    Placement,
    SystemEvaluation,
    check_feasibility,
    evaluate,
    fold_makespan,
)
from .infra_model import Infrastructure, VnfInstanceRef, link_between, scenario_violations

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
BUDGET_EXHAUSTED = "budget_exhausted"
FEASIBLE = "feasible"

INF = math.inf


class OracleCapError(ValueError):
    """The assignment space is larger than the brute-force cap."""


@dataclass(frozen=True)
class SolveResult:
    status: str
    placement: Placement | None
    objective: float | None
    cost_total: float | None
    makespan_total: float | None
    node_count_explored: int
    evaluation: SystemEvaluation | None = None

    @property
    def found(self) -> bool:
        return self.placement is not None


def _result(status, placement, requests, infra, alpha, nodes) -> SolveResult:
    if placement is None:
        return SolveResult(status, None, None, None, None, nodes)
    ev = evaluate(placement, requests, infra, alpha)
    return SolveResult(status, placement, ev.objective, ev.cost_total, ev.makespan_total, nodes, ev)


def _check_inputs(infra, requests, alpha):
    if not 0.0 <= alpha <= 1.0 or math.isnan(alpha):
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    problems = scenario_violations(infra, requests)
    if problems:
        raise ValueError("invalid scenario: " + "; ".join(problems))


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get("FOGWEAVE_THREADS", "1")))
    except ValueError:
        return 1


# --- branch and bound ---------------------------------------------------------

class _Leaf:
    __slots__ = ("req", "type_id", "u", "weight", "pred", "succs", "succ_leaves", "first", "linear",
                 "proc_cost", "proc_delay", "capacity", "count", "license")


class _Search:
    """Mutable search state over a compiled problem."""

    def __init__(self, infra: Infrastructure, requests: list[Request], alpha: float,
                 budget: int, trace=None):
        self.infra = infra
        self.requests = requests
        self.alpha = alpha
        self.budget = budget
        self.trace = trace
        self.node_ids = [n.node_id for n in infra.nodes]
        self.node_cap = {n.node_id: n.usable_vcpu for n in infra.nodes}
        fog_first = (1.0 - alpha) > alpha
        tier_rank = {"fog": 0, "cloud": 1} if fog_first else {"cloud": 0, "fog": 1}
        self.node_order = sorted(self.node_ids, key=lambda n: (tier_rank[infra.node(n).tier], n))

        self.req_traffic = [r.traffic_bits for r in requests]
        self.req_factor = [infra.traffic_factor(r) for r in requests]
        # pairwise link data per ordered node pair
        self.link = {}
        for a in self.node_ids:
            for b in self.node_ids:
                if a != b:
                    self.link[(a, b)] = link_between(infra, a, b)
        self.dev = []  # per request: node -> (cost, delay, [links]) or None
        for k, r in enumerate(requests):
            per = {}
            for n in self.node_ids:
                links = [link_between(infra, d, n) for d in r.devices]
                if any(l is None for l in links):
                    per[n] = None
                else:
                    per[n] = (math.fsum(l.cost_for(r.traffic_bits) for l in links),
                              math.fsum(self.req_factor[k] * l.delay_ms for l in links),
                              links)
            self.dev.append(per)
        self.edges = []  # per request: (a, b) -> (cost, delay, link) or None
        for k in range(len(requests)):
            tab = {}
            for (a, b), link in self.link.items():
                tab[(a, b)] = None if link is None else (
                    link.cost_for(self.req_traffic[k]), self.req_factor[k] * link.delay_ms, link)
            for a in self.node_ids:
                tab[(a, a)] = (0.0, 0.0, None)
            self.edges.append(tab)
        self.is_fog = {n.node_id: n.tier == "fog" for n in infra.nodes}
        self.fog_nodes = [n.node_id for n in infra.nodes if n.tier == "fog"]
        self.has_par = [bool(_leaves_under_par(r.tree)) for r in requests]

        leaves: list[_Leaf] = []
        self.leaf_of = {}
        for k, r in enumerate(requests):
            anns = annotate_leaves(r.tree)
            under_par = _leaves_under_par(r.tree)
            pos = {a.leaf: idx for idx, a in enumerate(anns)}
            group = []
            for a in anns:
                vt = infra.vnf_type(a.leaf)
                lf = _Leaf()
                lf.req, lf.type_id, lf.u, lf.weight = k, a.leaf, vt.requirement_vcpu, a.node_weight
                lf.pred = a.predecessor
                lf.succs = [b.leaf for b in anns if b.predecessor == a.leaf]
                lf.first = a.predecessor is None
                lf.linear = a.leaf not in under_par
                lf.proc_cost = {n: a.node_weight * infra.node(n).cost_per_vcpu * vt.requirement_vcpu
                                for n in self.node_ids}
                lf.proc_delay = {n: self.req_factor[k] * vt.processing_delay(infra.node(n).tier)
                                 for n in self.node_ids}
                lf.capacity = vt.usage_threshold * vt.capacity_bits
                lf.count = vt.instance_count
                lf.license = vt.license_cost
                group.append((pos[a.leaf], lf))
            # fail-first: larger requirements earlier, tree order breaks ties
            group.sort(key=lambda pl: (-pl[1].u, pl[0]))
            for _, lf in group:
                self.leaf_of[(k, lf.type_id)] = lf
                leaves.append(lf)
        self.leaves = leaves
        # per request, leaves in declaration order (predecessors come first)
        self.decl = []
        for k, r in enumerate(requests):
            order = [self.leaf_of[(k, a.leaf)] for a in annotate_leaves(r.tree)]
            for lf in order:
                lf.succ_leaves = [self.leaf_of[(k, t)] for t in lf.succs]
            self.decl.append(order)
        self.by_request = [[lf for lf in leaves if lf.req == k] for k in range(len(requests))]

        self.assign: dict = {}
        self.node_used = {n: 0.0 for n in self.node_ids}
        self.inst_node: dict = {}
        self.inst_users: dict = {}
        self.inst_load: dict = {}
        self.link_load: dict = {}
        self.licenses = 0.0
        self.deployed_types: dict = {}

        self.best = INF
        self.best_assign = None
        self.explored = 0
        self.exhausted = False

    # -- candidate generation -------------------------------------------------

    def _edge(self, k, a, b):
        """(cost, delay, link) of moving request k's traffic from node a to b."""
        return self.edges[k][(a, b)]

    def candidates(self, lf: _Leaf):
        traffic = self.req_traffic[lf.req]
        out = []
        fresh = next((i for i in range(lf.count) if (lf.type_id, i) not in self.inst_node), None)
        for n in self.node_order:
            opts = []
            for i in range(lf.count):
                if self.inst_node.get((lf.type_id, i)) == n and \
                        self.inst_load[(lf.type_id, i)] + traffic <= lf.capacity + 1e-6:
                    opts.append(i)
            if fresh is not None and self.node_used[n] + lf.u <= self.node_cap[n] + 1e-9 \
                    and traffic <= lf.capacity + 1e-6:
                opts.append(fresh)
            for i in sorted(opts):
                if self._routes_ok(lf, n) is not None:
                    out.append((i, n))
        return out

    def _routes_ok(self, lf: _Leaf, n):
        """Per-link traffic increments of placing ``lf`` on ``n``, or None if
        a route is missing or overloaded."""
        k = lf.req
        traffic = self.req_traffic[k]
        inc: dict = {}
        others = []
        if lf.pred is not None and (k, lf.pred) in self.assign:
            others.append(self.assign[(k, lf.pred)][1])
        for s in lf.succs:
            if (k, s) in self.assign:
                others.append(self.assign[(k, s)][1])
        for m in others:
            if m == n:
                continue
            link = self.link[(m, n)]
            if link is None:
                return None
            inc[link.link_id] = (inc.get(link.link_id, (0.0, link))[0] + traffic, link)
        if lf.first:
            d = self.dev[k][n]
            if d is None:
                return None
            for link in d[2]:
                inc[link.link_id] = (inc.get(link.link_id, (0.0, link))[0] + traffic, link)
        for lid, (amount, link) in inc.items():
            if self.link_load.get(lid, 0.0) + amount > link.usable_bits + 1e-6:
                return None
        return inc

    # -- state updates ----------------------------------------------------------

    def apply(self, lf: _Leaf, i, n):
        key = (lf.type_id, i)
        inc = self._routes_ok(lf, n)
        fresh = key not in self.inst_node
        if fresh:
            self.inst_node[key] = n
            self.inst_users[key] = 0
            self.inst_load[key] = 0.0
            self.node_used[n] += lf.u
            self.licenses += lf.license
            self.deployed_types[lf.type_id] = self.deployed_types.get(lf.type_id, 0) + 1
        self.inst_users[key] += 1
        self.inst_load[key] += self.req_traffic[lf.req]
        for lid, (amount, _) in inc.items():
            self.link_load[lid] = self.link_load.get(lid, 0.0) + amount
        self.assign[(lf.req, lf.type_id)] = (i, n)
        return fresh, inc

    def undo(self, lf: _Leaf, i, n, fresh, inc):
        key = (lf.type_id, i)
        del self.assign[(lf.req, lf.type_id)]
        for lid, (amount, _) in inc.items():
            self.link_load[lid] -= amount
        self.inst_users[key] -= 1
        self.inst_load[key] -= self.req_traffic[lf.req]
        if fresh:
            del self.inst_node[key]
            del self.inst_users[key]
            del self.inst_load[key]
            self.node_used[n] -= lf.u
            self.licenses -= lf.license
            self.deployed_types[lf.type_id] -= 1

    # -- bounding ---------------------------------------------------------------

    def _open_nodes(self, lf: _Leaf):
        traffic = self.req_traffic[lf.req]
        has_fresh = any((lf.type_id, i) not in self.inst_node for i in range(lf.count))
        out = []
        for n in self.node_ids:
            ok = has_fresh and self.node_used[n] + lf.u <= self.node_cap[n] + 1e-9 \
                and traffic <= lf.capacity + 1e-6
            if not ok:
                ok = any(self.inst_node.get((lf.type_id, i)) == n
                         and self.inst_load[(lf.type_id, i)] + traffic <= lf.capacity + 1e-6
                         for i in range(lf.count))
            if ok:
                out.append(n)
        return out

    def lower_bound(self) -> float:
        """Admissible bound on the objective of every completion of the
        current partial assignment (inf when some leaf has no open node).

        Capacities are relaxed except for the per-leaf set of open nodes.
        Each request is then solved exactly by dynamic programming over its
        predecessor tree: a leaf's score on a node is its weighted processing
        term plus the best-scoring placement of each successor reached over
        the connecting edge. Leaves outside every Par block add to the
        makespan linearly, so their delays enter that score with weight
        ``1 - alpha``. Delays of leaves under a Par are bounded by their
        separate minima pushed through the makespan fold.
        """
        alpha, beta = self.alpha, 1.0 - self.alpha
        total = 0.0
        needs_license = set()
        doms = {}

        for k, order in enumerate(self.decl):
            edges = self.edges[k]
            dev = self.dev[k]
            for lf in order:
                placed = self.assign.get((k, lf.type_id))
                if placed is not None:
                    doms[lf] = (placed[1],)
                else:
                    dom = self._open_nodes(lf)
                    if not dom:
                        return INF
                    doms[lf] = dom
                    if self.deployed_types.get(lf.type_id, 0) == 0:
                        needs_license.add((lf.type_id, lf.license))
            score = {}
            values = {} if self.has_par[k] else None
            for lf in reversed(order):
                w = lf.weight
                dom = doms[lf]
                dscale = beta * w if lf.linear else 0.0
                per = {}
                for n in dom:
                    v = alpha * lf.proc_cost[n] + dscale * lf.proc_delay[n]
                    if lf.first:
                        d = dev[n]
                        if d is None:
                            continue
                        v += alpha * d[0] + beta * d[1]
                    for c in lf.succ_leaves:
                        cw = c.weight
                        cds = beta * cw if c.linear else 0.0
                        best = INF
                        for m, sc in score[c].items():
                            e = edges[(n, m)]
                            if e is not None:
                                ev = sc + alpha * cw * e[0] + cds * e[1]
                                if ev < best:
                                    best = ev
                        v += best
                    if v < INF:
                        per[n] = v
                if not per:
                    return INF
                score[lf] = per
                if values is not None:
                    if lf.linear:
                        values[lf.type_id] = (0.0, 0.0)
                    else:
                        ed = 0.0
                        if lf.pred is not None:
                            ed = INF
                            for m in doms[self.leaf_of[(k, lf.pred)]]:
                                for n in dom:
                                    e = edges[(m, n)]
                                    if e is not None and e[1] < ed:
                                        ed = e[1]
                        values[lf.type_id] = (min(lf.proc_delay[n] for n in dom), ed)
            total += min(score[order[0]].values())
            if values is not None:
                p, c = fold_makespan(self.requests[k].tree, values)
                total += beta * (p + c)
        lic = self.licenses + math.fsum(l for _, l in needs_license)
        return total + alpha * lic

    # -- search -----------------------------------------------------------------

    def placement(self, assign=None) -> Placement:
        assign = self.assign if assign is None else assign
        out = {}
        for (k, t), (i, n) in assign.items():
            out[(self.requests[k].request_id, t)] = (VnfInstanceRef(t, i), n)
        return Placement.from_assignments(out)

    def _slack(self):
        return 1e-12 * max(1.0, abs(self.best)) if self.best < INF else 0.0

    def run(self, depth=0, only=None):
        if self.exhausted:
            return
        if depth == len(self.leaves):
            pl = self.placement()
            if check_feasibility(pl, self.requests, self.infra):
                return
            obj = evaluate(pl, self.requests, self.infra, self.alpha).objective
            if obj < self.best:
                self.best = obj
                self.best_assign = dict(self.assign)
            return
        lf = self.leaves[depth]
        cands = self.candidates(lf)
        if only is not None and depth == 0:
            cands = [cands[only]] if only < len(cands) else []
        for i, n in cands:
            if self.explored >= self.budget:
                self.exhausted = True
                return
            self.explored += 1
            fresh, inc = self.apply(lf, i, n)
            lb = self.lower_bound()
            if self.trace is not None:
                self.trace.append((depth, lb, self.best))
            if lb <= self.best + self._slack():
                self.run(depth + 1)
            self.undo(lf, i, n, fresh, inc)
            if self.exhausted:
                return


def _leaves_under_par(tree) -> set:
    out = set()
    for _, node in iter_nodes(tree):
        if isinstance(node, Par):
            out.update(leaves(node))
    return out


def _run_subtree(args):
    infra, requests, alpha, budget, root_index = args
    s = _Search(infra, requests, alpha, budget)
    s.run(only=root_index)
    return s.best, s.best_assign, s.explored, s.exhausted


def solve_exact(infra: Infrastructure, requests: Iterable[Request], alpha: float,
                budget: int = 2_000_000, workers: int | None = None,
                trace_path=None) -> SolveResult:
    """Optimal placement of ``requests`` minimizing ``alpha*cost + (1-alpha)*makespan``.

    ``budget`` caps explored search nodes; when it runs out the incumbent, if
    any, is returned with status ``budget_exhausted``. With ``workers > 1``
    the first decision level is split across processes; each subtree is
    searched independently and the winner is chosen by (objective, subtree
    order), which reproduces the single-worker answer.
    """
    requests = list(requests)
    _check_inputs(infra, requests, alpha)
    if not requests:
        return _result(OPTIMAL, Placement({}, frozenset()), requests, infra, alpha, 0)
    workers = default_workers() if workers is None else max(1, workers)
    trace = [] if trace_path is not None else None

    if workers == 1:
        s = _Search(infra, requests, alpha, budget, trace)
        s.run()
        best, best_assign, explored, exhausted = s.best, s.best_assign, s.explored, s.exhausted
        if trace_path is not None:
            with open(trace_path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["depth", "bound", "incumbent"])
                w.writerows(trace)
    else:
        root = _Search(infra, requests, alpha, budget)
        n_root = len(root.candidates(root.leaves[0]))
        jobs = [(infra, requests, alpha, budget, k) for k in range(n_root)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outs = list(pool.map(_run_subtree, jobs))
        best, best_assign, explored, exhausted = INF, None, 0, False
        for b, a, e, x in outs:
            explored += e
            exhausted = exhausted or x
            if a is not None and b < best:
                best, best_assign = b, a
        s = root

    if best_assign is None:
        status = BUDGET_EXHAUSTED if exhausted else INFEASIBLE
        return SolveResult(status, None, None, None, None, explored)
    status = BUDGET_EXHAUSTED if exhausted else OPTIMAL
    return _result(status, s.placement(best_assign), requests, infra, alpha, explored)


def prefix_bounds(infra: Infrastructure, requests: Iterable[Request], alpha: float,
                  placement: Placement) -> list[float]:
    """Search lower bound after each decision when the choices of a feasible
    ``placement`` are replayed in search order. An admissible bound never
    exceeds the placement's objective at any prefix."""
    requests = list(requests)
    _check_inputs(infra, requests, alpha)
    s = _Search(infra, requests, alpha, budget=0)
    out = []
    for lf in s.leaves:
        inst, node = placement.assignments[(requests[lf.req].request_id, lf.type_id)]
        if s._routes_ok(lf, node) is None:
            raise ValueError(f"{lf.type_id}: placement is not routable in search order")
        s.apply(lf, inst.instance_index, node)
        out.append(s.lower_bound())
    return out


def solve_restricted(infra: Infrastructure, requests: Iterable[Request], alpha: float,
                     tier: str, budget: int = 2_000_000, workers: int | None = None) -> SolveResult:
    """``solve_exact`` with candidate nodes limited to one tier ("cloud" or "fog")."""
    tier = {"cloud-only": "cloud", "fog-only": "fog"}.get(tier, tier)
    return solve_exact(infra.restricted(tier), requests, alpha, budget, workers)


# --- exhaustive oracle ----------------------------------------------------------

def assignment_space_size(infra: Infrastructure, requests: Iterable[Request]) -> int:
    size = 1
    for r in requests:
        for t in r.vnf_types:
            size *= infra.vnf_type(t).instance_count * len(infra.nodes)
    return size


def solve_bruteforce(infra: Infrastructure, requests: Iterable[Request], alpha: float,
                     cap: int = 200_000) -> SolveResult:
    """Enumerate every (instance, node) choice for every request leaf."""
    requests = list(requests)
    _check_inputs(infra, requests, alpha)
    size = assignment_space_size(infra, requests)
    if size > cap:
        raise OracleCapError(f"assignment space {size} exceeds cap {cap}")
    keys = [(r.request_id, t) for r in requests for t in sorted(r.vnf_types)]
    choices = [
        [(VnfInstanceRef(t, i), n.node_id) for n in infra.nodes
         for i in range(infra.vnf_type(t).instance_count)]
        for _, t in keys
    ]
    best_obj, best = INF, None
    count = 0
    for combo in itertools.product(*choices):
        count += 1
        pl = Placement(dict(zip(keys, combo)), frozenset(combo))
        if check_feasibility(pl, requests, infra):
            continue
        obj = evaluate(pl, requests, infra, alpha).objective
        if obj < best_obj:
            best_obj, best = obj, pl
    if best is None:
        return SolveResult(INFEASIBLE, None, None, None, None, count)
    return _result(OPTIMAL, best, requests, infra, alpha, count)


# --- random baseline -------------------------------------------------------------

def random_feasible(infra: Infrastructure, requests: Iterable[Request], seed: int,
                    max_tries: int = 100_000, alpha: float = 0.5) -> SolveResult:
    """Rejection-sample uniform (instance, node) choices until one is feasible."""
    requests = list(requests)
    _check_inputs(infra, requests, alpha)
    rng = np.random.Generator(np.random.PCG64(seed))
    keys = [(r.request_id, t) for r in requests for t in sorted(r.vnf_types)]
    counts = [infra.vnf_type(t).instance_count for _, t in keys]
    nodes = [n.node_id for n in infra.nodes]
    if not nodes:
        return SolveResult(BUDGET_EXHAUSTED, None, None, None, None, 0)
    for attempt in range(1, max_tries + 1):
        picks = {}
        for key, c in zip(keys, counts):
            n = nodes[int(rng.integers(len(nodes)))]
            i = int(rng.integers(c))
            picks[key] = (VnfInstanceRef(key[1], i), n)
        pl = Placement.from_assignments(picks)
        if not check_feasibility(pl, requests, infra):
            return _result(FEASIBLE, pl, requests, infra, alpha, attempt)
    return SolveResult(BUDGET_EXHAUSTED, None, None, None, None, max_tries)
