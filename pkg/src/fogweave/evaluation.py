"""Exact expected cost and makespan of a concrete placement.

Every solver, the Monte-Carlo sampler and the experiment harness price
placements through this module; it is the ground truth the MILP encoding is
checked against.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable

from .app_model import Loop, Par, Request, Sel, Seq, VnfLeaf, annotate_leaves, expected_iterations
from .infra_model import Infrastructure, VnfInstanceRef, link_between


class IncompletePlacementError(ValueError):
    pass


class InfeasibleRouteError(ValueError):
    pass


@dataclass(frozen=True)
class Placement:
    """``assignments`` maps (request_id, type_id) to (VnfInstanceRef, node_id)."""

    assignments: dict
    deployed: frozenset

    @classmethod
    def from_assignments(cls, assignments: dict) -> "Placement":
        return cls(dict(assignments), frozenset(assignments.values()))

    def node_of(self, request_id: str, type_id: str) -> str:
        return self.assignments[(request_id, type_id)][1]

    def instances_used_by(self, request_id: str) -> set:
        return {v for (r, _), v in self.assignments.items() if r == request_id}


@dataclass(frozen=True)
class CostBreakdown:
    processing: float
    deployment: float
    communication: float

    @property
    def total(self) -> float:
        return self.processing + self.deployment + self.communication


@dataclass(frozen=True)
class MakespanBreakdown:
    processing: float
    communication: float

    @property
    def total(self) -> float:
        return self.processing + self.communication


@dataclass(frozen=True)
class LeafTerms:
    """Per-execution terms of one leaf; ``weight`` is its expected execution count."""

    type_id: str
    weight: float
    predecessor: str | None
    node_id: str
    proc_cost: float
    proc_delay: float
    edge_cost: float
    edge_delay: float


def _require_assignment(placement, request, type_id):
    key = (request.request_id, type_id)
    if key not in placement.assignments:
        raise IncompletePlacementError(f"{request.request_id}/{type_id} is not assigned")
    inst, node_id = placement.assignments[key]
    return inst, node_id


def leaf_terms(placement: Placement, request: Request, infra: Infrastructure) -> dict[str, LeafTerms]:
    traffic = request.traffic_bits
    factor = infra.traffic_factor(request)
    out = {}
    for ann in annotate_leaves(request.tree):
        inst, node_id = _require_assignment(placement, request, ann.leaf)
        node = infra.node(node_id)
        vt = infra.vnf_type(ann.leaf)
        edge_cost = edge_delay = 0.0
        if ann.predecessor is not None:
            _, pred_node = _require_assignment(placement, request, ann.predecessor)
            if pred_node != node_id:
                link = link_between(infra, pred_node, node_id)
                if link is None:
                    raise InfeasibleRouteError(
                        f"{request.request_id}: no link between {pred_node} and {node_id}"
                    )
                edge_cost = link.cost_for(traffic)
                edge_delay = factor * link.delay_ms
        out[ann.leaf] = LeafTerms(
            ann.leaf, ann.node_weight, ann.predecessor, node_id,
            node.cost_per_vcpu * vt.requirement_vcpu,
            factor * vt.processing_delay(node.tier),
            edge_cost, edge_delay,
        )
    return out


def device_terms(placement: Placement, request: Request, infra: Infrastructure) -> tuple[float, float]:
    """(cost, delay) of the links between the request's devices and its first VNF."""
    _, node_id = _require_assignment(placement, request, request.first_vnf)
    cost = delay = 0.0
    for d in request.devices:
        link = link_between(infra, d, node_id)
        if link is None:
            raise InfeasibleRouteError(f"{request.request_id}: device {d} has no link to {node_id}")
        cost += link.cost_for(request.traffic_bits)
        delay += infra.traffic_factor(request) * link.delay_ms
    return cost, delay


def fold_makespan(node, values: dict[str, tuple[float, float]]) -> tuple[float, float]:
    """Bottom-up (processing, communication) time of ``node``.

    Seq sums, Par takes the maximum of each component separately, Sel
    weights by branch probability and Loop scales the body by its expected
    iteration count.
    """
    if isinstance(node, VnfLeaf):
        return values[node.type_id]
    if isinstance(node, Loop):
        it = expected_iterations(node.q)
        p, c = fold_makespan(node.body, values)
        return it * p, it * c
    parts = [fold_makespan(ch, values) for ch in node.children]
    if isinstance(node, Seq):
        return math.fsum(p for p, _ in parts), math.fsum(c for _, c in parts)
    if isinstance(node, Par):
        return max(p for p, _ in parts), max(c for _, c in parts)
    if isinstance(node, Sel):
        return (math.fsum(w * p for w, (p, _) in zip(node.probabilities, parts)),
                math.fsum(w * c for w, (_, c) in zip(node.probabilities, parts)))
    raise TypeError(f"unknown tree node {node!r}")


def cost_of(placement: Placement, request: Request, infra: Infrastructure) -> CostBreakdown:
    terms = leaf_terms(placement, request, infra)
    processing = math.fsum(t.weight * t.proc_cost for t in terms.values())
    communication = math.fsum(t.weight * t.edge_cost for t in terms.values())
    communication += device_terms(placement, request, infra)[0]
    deployment = math.fsum(
        infra.vnf_type(inst.type_id).license_cost
        for inst, _ in placement.instances_used_by(request.request_id)
    )
    return CostBreakdown(processing, deployment, communication)


def makespan_of(placement: Placement, request: Request, infra: Infrastructure) -> MakespanBreakdown:
    terms = leaf_terms(placement, request, infra)
    proc, com = fold_makespan(request.tree, {k: (t.proc_delay, t.edge_delay) for k, t in terms.items()})
    return MakespanBreakdown(proc, com + device_terms(placement, request, infra)[1])


@dataclass(frozen=True)
class SystemEvaluation:
    """System-wide totals.

    ``license_cost`` counts each deployed instance once; ``cost_total`` uses
    it, while the per-request breakdowns charge every using request.
    """

    alpha: float
    costs: dict
    makespans: dict
    license_cost: float

    @property
    def variable_cost(self) -> float:
        return math.fsum(c.processing + c.communication for c in self.costs.values())

    @property
    def cost_total(self) -> float:
        return self.variable_cost + self.license_cost

    @property
    def cost_total_per_request(self) -> float:
        return math.fsum(c.total for c in self.costs.values())

    @property
    def makespan_total(self) -> float:
        return math.fsum(m.total for m in self.makespans.values())

    @property
    def objective(self) -> float:
        return self.alpha * self.cost_total + (1.0 - self.alpha) * self.makespan_total


def deployed_license_cost(placement: Placement, infra: Infrastructure) -> float:
    return math.fsum(infra.vnf_type(inst.type_id).license_cost for inst, _ in placement.deployed)


def evaluate(placement: Placement, requests: Iterable[Request], infra: Infrastructure,
             alpha: float) -> SystemEvaluation:
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    requests = list(requests)
    return SystemEvaluation(
        alpha,
        {r.request_id: cost_of(placement, r, infra) for r in requests},
        {r.request_id: makespan_of(placement, r, infra) for r in requests},
        deployed_license_cost(placement, infra),
    )


@dataclass(frozen=True)
class Violation:
    kind: str
    subject: str
    detail: str = ""
    slack: float | None = None

    def __str__(self):
        s = f"{self.kind}[{self.subject}]"
        if self.detail:
            s += f" {self.detail}"
        if self.slack is not None:
            s += f" (slack {self.slack:g})"
        return s


def check_feasibility(placement: Placement, requests: Iterable[Request],
                      infra: Infrastructure) -> list[Violation]:
    """Every violated placement constraint; an empty list means feasible.

    Capacity slack is ``limit - load`` so violations carry a negative slack.
    """
    requests = list(requests)
    out: list[Violation] = []
    types = infra.types

    node_of_instance = defaultdict(set)
    for inst, node_id in placement.deployed:
        node_of_instance[inst].add(node_id)
        if inst.type_id not in types:
            out.append(Violation("unknown-type", f"{inst.type_id}#{inst.instance_index}"))
            continue
        if not 0 <= inst.instance_index < types[inst.type_id].instance_count:
            out.append(Violation("instance-range", f"{inst.type_id}#{inst.instance_index}"))
        if not infra.has_node(node_id):
            out.append(Violation("unknown-node", node_id))
    for inst, where in sorted(node_of_instance.items(), key=lambda kv: (kv[0].type_id, kv[0].instance_index)):
        if len(where) > 1:
            out.append(Violation("instance-multiple-nodes", f"{inst.type_id}#{inst.instance_index}",
                                 f"on {sorted(where)}"))

    node_load = defaultdict(float)
    for inst, node_id in placement.deployed:
        if inst.type_id in types:
            node_load[node_id] += types[inst.type_id].requirement_vcpu
    for node in infra.nodes:
        slack = node.usable_vcpu - node_load.get(node.node_id, 0.0)
        if slack < -1e-9:
            out.append(Violation("node-capacity", node.node_id, "", slack))

    known = {(r.request_id, t) for r in requests for t in r.vnf_types}
    for key in placement.assignments:
        if key not in known:
            out.append(Violation("stray-assignment", f"{key[0]}/{key[1]}"))

    link_load = defaultdict(float)
    inst_load = defaultdict(float)
    routable = {}
    for r in requests:
        for t in sorted(r.vnf_types):
            key = (r.request_id, t)
            if key not in placement.assignments:
                out.append(Violation("incomplete", f"{r.request_id}/{t}"))
                continue
            inst, node_id = placement.assignments[key]
            if inst.type_id != t:
                out.append(Violation("type-mismatch", f"{r.request_id}/{t}", f"got {inst.type_id}"))
            if (inst, node_id) not in placement.deployed:
                out.append(Violation("not-deployed", f"{r.request_id}/{t}",
                                     f"{inst.type_id}#{inst.instance_index}@{node_id}"))
            inst_load[inst] += r.traffic_bits
        for ann in annotate_leaves(r.tree):
            if ann.predecessor is None:
                continue
            a = placement.assignments.get((r.request_id, ann.predecessor))
            b = placement.assignments.get((r.request_id, ann.leaf))
            if a is None or b is None or a[1] == b[1]:
                continue
            if not (infra.has_node(a[1]) and infra.has_node(b[1])):
                continue
            link = link_between(infra, a[1], b[1])
            if link is None:
                out.append(Violation("no-route", f"{r.request_id}/{ann.predecessor}->{ann.leaf}",
                                     f"{a[1]} to {b[1]}"))
                continue
            link_load[link.link_id] += r.traffic_bits
            routable[link.link_id] = link
        first = placement.assignments.get((r.request_id, r.first_vnf))
        if first is not None and infra.has_node(first[1]):
            for d in r.devices:
                if d not in infra.devices:
                    out.append(Violation("unknown-device", f"{r.request_id}/{d}"))
                    continue
                link = link_between(infra, d, first[1])
                if link is None:
                    out.append(Violation("no-route", f"{r.request_id}/{d}", f"{d} to {first[1]}"))
                    continue
                link_load[link.link_id] += r.traffic_bits
                routable[link.link_id] = link

    for link_id in sorted(link_load):
        slack = routable[link_id].usable_bits - link_load[link_id]
        if slack < -1e-6:
            out.append(Violation("link-capacity", link_id, "", slack))
    for inst in sorted(inst_load, key=lambda i: (i.type_id, i.instance_index)):
        if inst.type_id not in types:
            continue
        vt = types[inst.type_id]
        slack = vt.usage_threshold * vt.capacity_bits - inst_load[inst]
        if slack < -1e-6:
            out.append(Violation("instance-capacity", f"{inst.type_id}#{inst.instance_index}", "", slack))

    deployed_types = {inst.type_id for inst, _ in placement.deployed}
    for t in sorted({t for r in requests for t in r.vnf_types}):
        if t not in deployed_types:
            out.append(Violation("coverage", t, "no instance deployed"))
    return out


def vcpu_by_tier(placement: Placement, infra: Infrastructure) -> dict[str, float]:
    """vCPU of deployed instances per tier."""
    used = {"cloud": 0.0, "fog": 0.0}
    for inst, node_id in placement.deployed:
        used[infra.node(node_id).tier] += infra.vnf_type(inst.type_id).requirement_vcpu
    return used
