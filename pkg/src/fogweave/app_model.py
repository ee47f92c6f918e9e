"""Application graphs as structured trees of sub-structures with VNF leaves.

A tree is built from five node kinds: ``VnfLeaf``, ``Seq``, ``Par``, ``Sel``
(probabilistic selection) and ``Loop`` (geometric repetition of a body).
Leaves are keyed by their VNF type id, which must be unique inside one
request.
"""

from __future__ import annotations

import math
from functools import lru_cache
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Union

PROB_TOL = 1e-9


class DomainError(ValueError):
    """A numeric argument lies outside the domain of the function."""


class InvalidTreeError(ValueError):
    """Raised when an operation needs a structurally valid tree."""

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


@dataclass(frozen=True)
class VnfType:
    type_id: str
    license_cost: float
    capacity_kb: float
    requirement_vcpu: float
    instance_count: int = 1
    delay_cloud_ms: float = 0.0
    delay_fog_ms: float = 0.0
    usage_threshold: float = 1.0

    def __post_init__(self):
        if self.license_cost < 0:
            raise ValueError(f"{self.type_id}: license_cost must be >= 0")
        if self.capacity_kb <= 0:
            raise ValueError(f"{self.type_id}: capacity must be > 0")
        if self.requirement_vcpu <= 0:
            raise ValueError(f"{self.type_id}: requirement must be > 0")
        if int(self.instance_count) != self.instance_count or self.instance_count < 1:
            raise ValueError(f"{self.type_id}: instance_count must be a positive integer")
        if not 0 < self.usage_threshold <= 1:
            raise ValueError(f"{self.type_id}: usage_threshold must be in (0, 1]")

    @property
    def capacity_bits(self) -> float:
        return self.capacity_kb * 8000.0

    def processing_delay(self, tier: str) -> float:
        return self.delay_cloud_ms if tier == "cloud" else self.delay_fog_ms


@dataclass(frozen=True)
class VnfLeaf:
    type_id: str


@dataclass(frozen=True)
class Seq:
    children: tuple

    def __post_init__(self):
        object.__setattr__(self, "children", tuple(self.children))


@dataclass(frozen=True)
class Par:
    children: tuple

    def __post_init__(self):
        object.__setattr__(self, "children", tuple(self.children))


@dataclass(frozen=True)
class Sel:
    children: tuple
    probabilities: tuple

    def __post_init__(self):
        object.__setattr__(self, "children", tuple(self.children))
        object.__setattr__(self, "probabilities", tuple(float(p) for p in self.probabilities))


@dataclass(frozen=True)
class Loop:
    body: "TreeNode"
    q: float


TreeNode = Union[VnfLeaf, Seq, Par, Sel, Loop]


def children_of(node: TreeNode) -> tuple:
    if isinstance(node, VnfLeaf):
        return ()
    if isinstance(node, Loop):
        return (node.body,)
    return node.children


def iter_nodes(root: TreeNode) -> Iterator[tuple[int, TreeNode]]:
    """Yield ``(preorder_index, node)`` for every node of the tree."""
    counter = 0
    stack = [root]
    while stack:
        node = stack.pop()
        yield counter, node
        counter += 1
        stack.extend(reversed(children_of(node)))


def leaves(root: TreeNode) -> list[str]:
    """Leaf type ids in declaration (execution) order."""
    return [n.type_id for _, n in iter_nodes(root) if isinstance(n, VnfLeaf)]


@dataclass(frozen=True)
class Request:
    request_id: str
    tree: TreeNode
    traffic_kb: float
    devices: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "devices", tuple(self.devices))

    @property
    def traffic_bits(self) -> float:
        return self.traffic_kb * 8000.0

    @property
    def vnf_types(self) -> frozenset:
        return frozenset(leaves(self.tree))

    @property
    def first_vnf(self) -> str:
        return leaves(self.tree)[0]


@dataclass(frozen=True)
class LeafAnnotation:
    leaf: str
    node_weight: float
    predecessor: str | None
    edge_weight: float


def expected_iterations(q: float) -> float:
    """Mean of the geometric iteration count P(N=n) = (1-q) q^n, i.e. q / (1 - q)."""
    if not (0.0 <= q < 1.0) or math.isnan(q):
        raise DomainError(f"loop probability must satisfy 0 <= q < 1, got {q}")
    return q / (1.0 - q)


def tree_violations(root: TreeNode) -> list[str]:
    """Structural problems of a tree, independent of any catalog."""
    out = []
    seen: dict[str, int] = {}
    for idx, node in iter_nodes(root):
        if isinstance(node, VnfLeaf):
            seen[node.type_id] = seen.get(node.type_id, 0) + 1
        elif isinstance(node, (Seq, Par, Sel)):
            kind = type(node).__name__
            if len(node.children) < 2:
                out.append(f"{kind} node #{idx} has {len(node.children)} children (need >= 2)")
            if isinstance(node, Sel):
                ps = node.probabilities
                if len(ps) != len(node.children):
                    out.append(
                        f"Sel node #{idx} has {len(ps)} probabilities for {len(node.children)} branches"
                    )
                if any(p <= 0 for p in ps):
                    out.append(f"Sel node #{idx} has non-positive probabilities {list(ps)}")
                total = math.fsum(ps)
                if abs(total - 1.0) > PROB_TOL:
                    out.append(f"Sel node #{idx} probabilities sum to {total:g}")
        elif isinstance(node, Loop):
            if not (0.0 <= node.q < 1.0):
                out.append(f"Loop node #{idx} has q={node.q} outside [0, 1)")
        else:
            out.append(f"node #{idx} has unknown kind {type(node).__name__}")
    if not seen:
        out.append("tree has no VNF leaves")
    dups = sorted(t for t, c in seen.items() if c > 1)
    if dups:
        out.append(f"VNF types repeated within one tree: {', '.join(dups)}")
    if not out:
        entries = [a.leaf for a in _annotate(root) if a.predecessor is None]
        if len(entries) != 1:
            out.append(f"tree must start with a single entry VNF, found {len(entries)}: {entries}")
    return out


def _annotate(root: TreeNode) -> list[LeafAnnotation]:
    result: dict[str, LeafAnnotation] = {}

    def walk(node, weight, pred):
        # returns the exit leaf of ``node``
        if isinstance(node, VnfLeaf):
            result[node.type_id] = LeafAnnotation(node.type_id, weight, pred, weight)
            return node.type_id
        if isinstance(node, Seq):
            for child in node.children:
                pred = walk(child, weight, pred)
            return pred
        if isinstance(node, Par):
            exit_leaf = pred
            for child in node.children:
                exit_leaf = walk(child, weight, pred)
            return exit_leaf
        if isinstance(node, Sel):
            exit_leaf = pred
            for child, p in zip(node.children, node.probabilities):
                exit_leaf = walk(child, weight * p, pred)
            return exit_leaf
        if isinstance(node, Loop):
            return walk(node.body, weight * expected_iterations(node.q), pred)
        raise TypeError(f"unknown tree node {node!r}")

    walk(root, 1.0, None)
    order = leaves(root)
    return [result[t] for t in order]


def annotate_leaves(root: TreeNode) -> list[LeafAnnotation]:
    """Expected-execution weights and immediate predecessors of every leaf.

    A leaf's weight is the product of the Sel probabilities and loop
    expectations on its ancestor path. Predecessors follow execution order:
    inside a Seq each child's entry follows the previous child's exit; all
    branches of a Par/Sel start from the block's own predecessor and the
    block exits through its last declared child; a loop body starts from the
    node preceding the loop.
    """
    return list(_annotate_checked(root))


@lru_cache(maxsize=4096)
def _annotate_checked(root) -> tuple:
    problems = tree_violations(root)
    if problems:
        raise InvalidTreeError(problems)
    return tuple(_annotate(root))


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def validate_request(req: Request, catalog: Iterable[VnfType] | dict) -> ValidationReport:
    """Collect every invariant violation of ``req`` against ``catalog``."""
    if isinstance(catalog, dict):
        known = set(catalog)
    else:
        known = {t.type_id for t in catalog}
    out = [f"request {req.request_id}: {v}" for v in tree_violations(req.tree)]
    unknown = sorted({t for t in leaves(req.tree) if t not in known})
    if unknown:
        out.append(f"request {req.request_id}: unknown VNF types {', '.join(unknown)}")
    if not req.traffic_kb > 0:
        out.append(f"request {req.request_id}: traffic load must be > 0, got {req.traffic_kb}")
    if not req.devices:
        out.append(f"request {req.request_id}: device set is empty")
    return ValidationReport(out)
