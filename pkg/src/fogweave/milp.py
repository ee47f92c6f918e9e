"""0/1 linear model of the placement problem and its LP-format text export.

The model is a parallel encoding of the problem, used for export, for
cross-checking objective values against :mod:`fogweave.evaluation`, and for
an optional independent solve with HiGHS. The native branch and bound in
:mod:`fogweave.solver` does not go through it.

Variable families (name prefix):

``x(t,i,n)``         instance i of type t deployed on node n
``xR(R,t,i,n)``      request R uses that instance for its leaf t
``y(R,t,p,link)``    edge from leaf p to leaf t of R is routed over link
``yd(R,n,d)``        device d of R talks to node n
``Q(R,t,p,i,j,s,u)`` product xR(R,t,i,s) * xR(R,p,j,u)
``zp(R,k)/zc(R,k)``  processing / communication time of Par node k of R
"""

from __future__ import annotations

import csv
import io
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .app_model import Loop, Par, Sel, Seq, VnfLeaf, annotate_leaves, expected_iterations, iter_nodes
from .evaluation import Placement
from .infra_model import Infrastructure, VnfInstanceRef, link_between

FAMILY_OF_PREFIX = {
    "x": "x_deploy", "xR": "x_assign", "y": "y_edge", "yd": "y_device",
    "Q": "q_lin", "zp": "z_par", "zc": "z_par",
}

MEANINGS = {
    "x_deploy": "instance deployed on node",
    "x_assign": "request leaf served by instance on node",
    "y_edge": "VNF edge of request routed over link",
    "y_device": "device of request connected to node",
    "q_lin": "product of two assignment binaries",
    "z_par": "maximum over branches of a parallel block",
}

_NAME_OK = re.compile(r"[^A-Za-z0-9_.~]")


def _safe(s) -> str:
    return _NAME_OK.sub("~", str(s))


@dataclass(frozen=True)
class Variable:
    name: str
    kind: str  # "B" binary, "C" continuous >= 0

    @property
    def prefix(self) -> str:
        return self.name.split("(", 1)[0]

    @property
    def family(self) -> str:
        return FAMILY_OF_PREFIX[self.prefix]


@dataclass(frozen=True)
class Constraint:
    name: str
    coeffs: tuple  # ((var_index, coef), ...) in ascending index order
    sense: str  # "<=", "=", ">="
    rhs: float

    @property
    def family(self) -> str:
        return self.name.split(".", 1)[0]


@dataclass
class MilpModel:
    variables: list
    constraints: list
    objective: tuple
    alpha: float | None = None
    keys: dict = field(default_factory=dict, compare=False, repr=False)
    cost_coeffs: dict = field(default=None, compare=False, repr=False)
    makespan_coeffs: dict = field(default=None, compare=False, repr=False)
    _index: dict = field(default=None, compare=False, repr=False)
    _aux: tuple = field(default=None, compare=False, repr=False)

    def __eq__(self, other):
        if not isinstance(other, MilpModel):
            return NotImplemented
        return (self.variables == other.variables and self.constraints == other.constraints
                and self.objective == other.objective)

    @property
    def index(self) -> dict:
        if self._index is None:
            self._index = {v.name: k for k, v in enumerate(self.variables)}
        return self._index

    def family_members(self, family: str) -> list[int]:
        return [k for k, v in enumerate(self.variables) if v.family == family]

    def rows(self, family: str) -> list[Constraint]:
        return [c for c in self.constraints if c.family == family]

    def coefficient_vector(self) -> np.ndarray:
        c = np.zeros(len(self.variables))
        for k, v in self.objective:
            c[k] = v
        return c

    def _structure(self):
        # Q parents and z branch expressions, recovered from the rows so that
        # parsed models work as well as built ones
        if self._aux is None:
            parents: dict[int, list[int]] = {}
            branches: dict[int, list[tuple]] = {}
            for c in self.constraints:
                fam = c.family
                if fam in ("q_le_x", "q_le_xp"):
                    (q, _), (other, _) = sorted(c.coeffs, key=lambda kv: -kv[1])
                    parents.setdefault(q, []).append(other)
                elif fam == "par_max":
                    z = next(k for k, a in c.coeffs
                             if self.variables[k].family == "z_par" and a == 1.0
                             and c.name.startswith(f"par_max.{self.variables[k].name}"))
                    branches.setdefault(z, []).append(
                        tuple((k, -a) for k, a in c.coeffs if k != z))
            z_order = sorted(branches)  # creation order is post-order
            self._aux = (parents, branches, z_order)
        return self._aux


class _Builder:
    def __init__(self):
        self.variables: list[Variable] = []
        self.index: dict[str, int] = {}
        self.keys: dict[int, tuple] = {}
        self.rows: list[tuple] = []
        self.counts: dict[str, int] = {}

    def var(self, prefix, key, kind="B"):
        name = f"{prefix}({','.join(_safe(k) for k in key)})"
        if name in self.index:
            raise ValueError(f"variable name collision for {name}; use ids made of [A-Za-z0-9_.]")
        self.index[name] = len(self.variables)
        self.variables.append(Variable(name, kind))
        self.keys[self.index[name]] = (prefix,) + tuple(key)
        return self.index[name]

    def row(self, family, coeffs, sense, rhs, tag=None):
        merged: dict[int, float] = {}
        for k, a in coeffs:
            merged[k] = merged.get(k, 0.0) + a
        n = self.counts.get(family, 0)
        self.counts[family] = n + 1
        name = f"{family}.{tag}" if tag is not None else f"{family}.{n}"
        self.rows.append((name, merged, sense, float(rhs)))


def _add(expr: dict, other: dict, scale: float = 1.0):
    for k, a in other.items():
        expr[k] = expr.get(k, 0.0) + scale * a


def build_model(infra: Infrastructure, requests, alpha: float) -> MilpModel:
    """Encode ``requests`` on ``infra`` as a 0/1 model with objective
    ``alpha * cost + (1 - alpha) * makespan``."""
    if not 0.0 <= alpha <= 1.0 or math.isnan(alpha):
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    requests = list(requests)
    b = _Builder()
    nodes = list(infra.nodes)
    used = {t for r in requests for t in r.vnf_types}
    types = [t for t in infra.catalog if t.type_id in used]
    missing = used - {t.type_id for t in types}
    if missing:
        raise ValueError(f"requests use VNF types missing from the catalog: {sorted(missing)}")
    compute_links = [l for l in infra.links if not l.cls.startswith("iot")]

    x = {}
    for t in types:
        for i in range(t.instance_count):
            for n in nodes:
                x[(t.type_id, i, n.node_id)] = b.var("x", (t.type_id, i, n.node_id))
    xr = {}
    anns = {}
    for r in requests:
        anns[r.request_id] = annotate_leaves(r.tree)
        for a in anns[r.request_id]:
            t = infra.vnf_type(a.leaf)
            for i in range(t.instance_count):
                for n in nodes:
                    xr[(r.request_id, a.leaf, i, n.node_id)] = b.var(
                        "xR", (r.request_id, a.leaf, i, n.node_id))
    y = {}
    for r in requests:
        for a in anns[r.request_id]:
            if a.predecessor is None:
                continue
            for l in compute_links:
                y[(r.request_id, a.leaf, l.link_id)] = b.var(
                    "y", (r.request_id, a.leaf, a.predecessor, l.link_id))
    yd = {}
    for r in requests:
        for n in nodes:
            for d in r.devices:
                if link_between(infra, d, n.node_id) is not None:
                    yd[(r.request_id, n.node_id, d)] = b.var("yd", (r.request_id, n.node_id, d))

    cost: dict[int, float] = {}
    span: dict[int, float] = {}

    # products tying y to pairs of assignments
    q_of_y: dict[int, list[int]] = {}
    for r in requests:
        for a in anns[r.request_id]:
            if a.predecessor is None:
                continue
            ti = infra.vnf_type(a.leaf).instance_count
            tj = infra.vnf_type(a.predecessor).instance_count
            for s in nodes:
                for u in nodes:
                    if s.node_id == u.node_id:
                        continue
                    link = link_between(infra, s.node_id, u.node_id)
                    for i in range(ti):
                        for j in range(tj):
                            xa = xr[(r.request_id, a.leaf, i, s.node_id)]
                            xp = xr[(r.request_id, a.predecessor, j, u.node_id)]
                            q = b.var("Q", (r.request_id, a.leaf, a.predecessor, i, j,
                                            s.node_id, u.node_id))
                            if link is None:
                                b.row("no_route", [(q, 1.0)], "<=", 0.0)
                            else:
                                yk = y[(r.request_id, a.leaf, link.link_id)]
                                b.row("q_le_y", [(q, 1.0), (yk, -1.0)], "<=", 0.0)
                                q_of_y.setdefault(yk, []).append(q)
                            b.row("q_le_x", [(q, 1.0), (xa, -1.0)], "<=", 0.0)
                            b.row("q_le_xp", [(q, 1.0), (xp, -1.0)], "<=", 0.0)
                            b.row("q_ge", [(q, 1.0), (xa, -1.0), (xp, -1.0)], ">=", -1.0)
    for yk in sorted(y.values()):
        b.row("y_le_q", [(yk, 1.0)] + [(q, -1.0) for q in q_of_y.get(yk, [])], "<=", 0.0)

    # node capacity
    for n in nodes:
        terms = [(x[(t.type_id, i, n.node_id)], t.requirement_vcpu)
                 for t in types for i in range(t.instance_count)]
        if terms:
            b.row("cap_node", terms, "<=", n.usable_vcpu, tag=_safe(n.node_id))
    # link capacity, unweighted traffic
    for l in compute_links:
        terms = [(k, next(r.traffic_bits for r in requests if r.request_id == key[0]))
                 for key, k in y.items() if key[2] == l.link_id]
        if terms:
            b.row("cap_link", terms, "<=", l.usable_bits, tag=_safe(l.link_id))
    for l in infra.links:
        if not l.cls.startswith("iot"):
            continue
        terms = []
        for (rid, nid, d), k in yd.items():
            if set(l.endpoints) == {nid, d}:
                terms.append((k, next(r.traffic_bits for r in requests if r.request_id == rid)))
        if terms:
            b.row("cap_link", terms, "<=", l.usable_bits, tag=_safe(l.link_id))
    # device coupling with the first VNF
    for r in requests:
        fst = r.first_vnf
        inst = range(infra.vnf_type(fst).instance_count)
        for n in nodes:
            xs = [(xr[(r.request_id, fst, i, n.node_id)], -1.0) for i in inst]
            for d in r.devices:
                if (r.request_id, n.node_id, d) in yd:
                    b.row("dev_couple", [(yd[(r.request_id, n.node_id, d)], 1.0)] + xs, "=", 0.0)
                else:
                    b.row("dev_noroute", [(k, 1.0) for k, _ in xs], "=", 0.0)
    # instance capacity
    for t in types:
        for i in range(t.instance_count):
            for n in nodes:
                terms = [(xr[(r.request_id, t.type_id, i, n.node_id)], r.traffic_bits)
                         for r in requests if t.type_id in r.vnf_types]
                if terms:
                    b.row("cap_inst", terms, "<=", t.usage_threshold * t.capacity_bits)
    # one instance per request leaf
    for r in requests:
        for a in anns[r.request_id]:
            t = infra.vnf_type(a.leaf)
            b.row("assign", [(xr[(r.request_id, a.leaf, i, n.node_id)], 1.0)
                             for i in range(t.instance_count) for n in nodes], "=", 1.0)
    # assignment implies deployment
    for (rid, tid, i, nid), k in xr.items():
        b.row("deploy", [(k, 1.0), (x[(tid, i, nid)], -1.0)], "<=", 0.0)
    # coverage of used types
    for t in types:
        b.row("cover", [(x[(t.type_id, i, n.node_id)], 1.0)
                        for i in range(t.instance_count) for n in nodes], ">=", 1.0)
    # an instance lives on at most one node
    for t in types:
        for i in range(t.instance_count):
            b.row("inst_unique", [(x[(t.type_id, i, n.node_id)], 1.0) for n in nodes], "<=", 1.0)

    # objective: cost part
    for (tid, i, nid), k in x.items():
        cost[k] = infra.vnf_type(tid).license_cost
    for r in requests:
        weights = {a.leaf: a for a in anns[r.request_id]}
        for (rid, tid, i, nid), k in xr.items():
            if rid == r.request_id:
                cost[k] = weights[tid].node_weight * infra.node(nid).cost_per_vcpu \
                    * infra.vnf_type(tid).requirement_vcpu
        for (rid, tid, lid), k in y.items():
            if rid == r.request_id:
                link = next(l for l in compute_links if l.link_id == lid)
                cost[k] = weights[tid].edge_weight * link.cost_for(r.traffic_bits)
        factor = infra.traffic_factor(r)
        for (rid, nid, d), k in yd.items():
            if rid == r.request_id:
                link = link_between(infra, d, nid)
                cost[k] = link.cost_for(r.traffic_bits)
                span[k] = span.get(k, 0.0) + factor * link.delay_ms

    # objective: makespan part, folded with z variables for Par blocks
    for r in requests:
        factor = infra.traffic_factor(r)
        preorder = {id(node): k for k, node in iter_nodes(r.tree)}
        preds = {a.leaf: a.predecessor for a in anns[r.request_id]}

        def leaf_expr(tid, metric):
            e = {}
            if metric == "p":
                vt = infra.vnf_type(tid)
                for i in range(vt.instance_count):
                    for n in nodes:
                        e[xr[(r.request_id, tid, i, n.node_id)]] = factor * vt.processing_delay(n.tier)
            elif preds[tid] is not None:
                for l in compute_links:
                    e[y[(r.request_id, tid, l.link_id)]] = factor * l.delay_ms
            return e

        def fold(node, metric):
            if isinstance(node, VnfLeaf):
                return leaf_expr(node.type_id, metric)
            if isinstance(node, Loop):
                e = {}
                _add(e, fold(node.body, metric), expected_iterations(node.q))
                return e
            parts = [fold(ch, metric) for ch in node.children]
            if isinstance(node, Seq):
                e = {}
                for p in parts:
                    _add(e, p)
                return e
            if isinstance(node, Sel):
                e = {}
                for w, p in zip(node.probabilities, parts):
                    _add(e, p, w)
                return e
            if isinstance(node, Par):
                z = b.var("z" + metric, (r.request_id, preorder[id(node)]), kind="C")
                zname = b.variables[z].name
                for ci, p in enumerate(parts):
                    b.row("par_max", [(z, 1.0)] + [(k, -a) for k, a in p.items()], ">=", 0.0,
                          tag=f"{zname}.{ci}")
                return {z: 1.0}
            raise TypeError(f"unknown tree node {node!r}")

        for metric in ("p", "c"):
            _add(span, fold(r.tree, metric))

    # binaries first, continuous after, creation order within each group
    order = [k for k, v in enumerate(b.variables) if v.kind == "B"] + \
            [k for k, v in enumerate(b.variables) if v.kind == "C"]
    remap = {old: new for new, old in enumerate(order)}
    variables = [b.variables[k] for k in order]
    constraints = []
    for name, coeffs, sense, rhs in b.rows:
        items = tuple(sorted((remap[k], float(a)) for k, a in coeffs.items() if a != 0.0))
        constraints.append(Constraint(name, items, sense, rhs))
    obj = {}
    for k in set(cost) | set(span):
        val = alpha * cost.get(k, 0.0) + (1.0 - alpha) * span.get(k, 0.0)
        if val != 0.0:
            obj[remap[k]] = val
    model = MilpModel(variables, constraints, tuple(sorted(obj.items())), alpha)
    model.keys = {remap[k]: key for k, key in b.keys.items()}
    model.cost_coeffs = {remap[k]: v for k, v in cost.items()}
    model.makespan_coeffs = {remap[k]: v for k, v in span.items()}
    return model


# --- evaluation of vectors ---------------------------------------------------

def complete_vector(model: MilpModel, vector) -> np.ndarray:
    """Copy of ``vector`` with every Q set to the product of its parents and
    every z set to the maximum of its branch expressions."""
    v = np.asarray(vector, dtype=float)
    if v.shape != (len(model.variables),):
        raise ValueError(f"vector has shape {v.shape}, model has {len(model.variables)} variables")
    v = v.copy()
    for k, var in enumerate(model.variables):
        if var.kind == "B" and v[k] not in (0.0, 1.0):
            raise ValueError(f"binary {var.name} has value {v[k]}")
    parents, branches, z_order = model._structure()
    for q, ps in parents.items():
        v[q] = float(all(v[p] == 1.0 for p in ps))
    for z in z_order:
        v[z] = max(math.fsum(a * v[k] for k, a in expr) for expr in branches[z])
    return v


def objective_at(model: MilpModel, vector) -> float:
    """Objective value after propagating the implied Q and z values."""
    v = complete_vector(model, vector)
    return math.fsum(a * v[k] for k, a in model.objective)


def row_violations(model: MilpModel, vector, tol: float = 1e-7) -> list[str]:
    """Names of rows violated by ``vector`` (used as is, no propagation)."""
    v = np.asarray(vector, dtype=float)
    bad = []
    for c in model.constraints:
        lhs = math.fsum(a * v[k] for k, a in c.coeffs)
        scale = tol * max(1.0, abs(c.rhs))
        if (c.sense == "<=" and lhs > c.rhs + scale) or (c.sense == ">=" and lhs < c.rhs - scale) \
                or (c.sense == "=" and abs(lhs - c.rhs) > scale):
            bad.append(c.name)
    return bad


def encode_placement(model: MilpModel, placement: Placement, requests, infra: Infrastructure) -> np.ndarray:
    """0/1 vector of a placement, with Q and z propagated."""
    idx = model.index
    v = np.zeros(len(model.variables))

    def put(prefix, key):
        name = f"{prefix}({','.join(_safe(k) for k in key)})"
        if name not in idx:
            raise KeyError(f"placement references {name}, which the model does not have")
        v[idx[name]] = 1.0

    for inst, node_id in placement.deployed:
        put("x", (inst.type_id, inst.instance_index, node_id))
    for (rid, tid), (inst, node_id) in placement.assignments.items():
        put("xR", (rid, tid, inst.instance_index, node_id))
    for r in requests:
        for a in annotate_leaves(r.tree):
            if a.predecessor is None:
                continue
            s = placement.node_of(r.request_id, a.leaf)
            u = placement.node_of(r.request_id, a.predecessor)
            if s != u:
                link = link_between(infra, s, u)
                if link is not None:
                    put("y", (r.request_id, a.leaf, a.predecessor, link.link_id))
        first_node = placement.node_of(r.request_id, r.first_vnf)
        for d in r.devices:
            if link_between(infra, d, first_node) is not None:
                put("yd", (r.request_id, first_node, d))
    return complete_vector(model, v)


def decode_vector(model: MilpModel, vector) -> Placement:
    v = np.asarray(vector, dtype=float)
    assignments = {}
    deployed = set()
    for k, key in model.keys.items():
        if v[k] < 0.5:
            continue
        if key[0] == "xR":
            _, rid, tid, i, nid = key
            assignments[(rid, tid)] = (VnfInstanceRef(tid, int(i)), nid)
        elif key[0] == "x":
            _, tid, i, nid = key
            deployed.add((VnfInstanceRef(tid, int(i)), nid))
    return Placement(assignments, frozenset(deployed))


def solve_highs(model: MilpModel, mip_rel_gap: float = 1e-9, time_limit: float | None = None):
    """Solve the model with SciPy's HiGHS backend; returns (status, vector, objective).

    Used for independent cross-checks only.
    """
    from scipy.optimize import Bounds, LinearConstraint, milp
    from scipy.sparse import coo_matrix

    n = len(model.variables)
    rows, cols, vals, lo, hi = [], [], [], [], []
    for r, c in enumerate(model.constraints):
        for k, a in c.coeffs:
            rows.append(r)
            cols.append(k)
            vals.append(a)
        lo.append(c.rhs if c.sense in (">=", "=") else -np.inf)
        hi.append(c.rhs if c.sense in ("<=", "=") else np.inf)
    A = coo_matrix((vals, (rows, cols)), shape=(len(model.constraints), n)).tocsr()
    integrality = np.array([1 if v.kind == "B" else 0 for v in model.variables])
    upper = np.array([1.0 if v.kind == "B" else np.inf for v in model.variables])
    options = {"mip_rel_gap": mip_rel_gap, "disp": False}
    if time_limit is not None:
        options["time_limit"] = time_limit
    res = milp(model.coefficient_vector(), integrality=integrality,
               bounds=Bounds(np.zeros(n), upper),
               constraints=[LinearConstraint(A, lo, hi)] if model.constraints else [],
               options=options)
    if res.x is None:
        return res.status, None, None
    x = res.x.copy()
    x[integrality == 1] = np.round(x[integrality == 1])
    return res.status, x, float(res.fun)


# --- LP text format ---------------------------------------------------------

def _fmt(a: float) -> str:
    return repr(float(a))


def _terms(coeffs, per_line=6) -> list[str]:
    chunks = []
    for pos, (name, a) in enumerate(coeffs):
        if a < 0:
            s = f"- {_fmt(-a)} {name}"
        elif pos == 0:
            s = f"{_fmt(a)} {name}"
        else:
            s = f"+ {_fmt(a)} {name}"
        chunks.append(s)
    return [" ".join(chunks[k:k + per_line]) for k in range(0, len(chunks), per_line)] or [""]


def to_lp(model: MilpModel) -> str:
    names = [v.name for v in model.variables]
    out = ["\\ fogweave placement model"]
    if model.alpha is not None:
        out.append(f"\\ alpha = {_fmt(model.alpha)}")
    out.append("Minimize")
    lines = _terms([(names[k], a) for k, a in model.objective])
    out.append(f" obj: {lines[0]}".rstrip())
    out.extend(f"   {ln}" for ln in lines[1:])
    out.append("Subject To")
    for c in model.constraints:
        lines = _terms([(names[k], a) for k, a in c.coeffs])
        lines[-1] = f"{lines[-1]} {c.sense} {_fmt(c.rhs)}".strip()
        out.append(f" {c.name}: {lines[0]}")
        out.extend(f"   {ln}" for ln in lines[1:])
    out.append("Bounds")
    for v in model.variables:
        if v.kind == "C":
            out.append(f" {v.name} >= 0")
    out.append("Binaries")
    for v in model.variables:
        if v.kind == "B":
            out.append(f" {v.name}")
    out.append("End")
    return "\n".join(out) + "\n"


def export_lp(model: MilpModel, destination=None) -> str:
    """Render ``model`` as LP text and write it to ``destination`` when given
    (a path or a writable text stream)."""
    text = to_lp(model)
    if destination is not None:
        if hasattr(destination, "write"):
            destination.write(text)
        else:
            Path(destination).write_text(text)
    return text


def _parse_terms(text: str, index: dict) -> list[tuple[int, float]]:
    out = []
    toks = text.split()
    k = 0
    sign = 1.0
    while k < len(toks):
        tok = toks[k]
        if tok in ("+", "-"):
            sign = -1.0 if tok == "-" else 1.0
            k += 1
            continue
        coef = float(tok)
        name = toks[k + 1]
        out.append((index[name], sign * coef))
        sign = 1.0
        k += 2
    return out


def parse_lp(text: str) -> MilpModel:
    """Read back the LP subset written by :func:`to_lp`."""
    section = None
    alpha = None
    obj_text = []
    rows: list[list] = []
    bounds, binaries = [], []
    for raw in text.splitlines():
        if raw.startswith("\\"):
            m = re.match(r"\\ alpha = (\S+)", raw)
            if m:
                alpha = float(m.group(1))
            continue
        if raw in ("Minimize", "Subject To", "Bounds", "Binaries", "End"):
            section = raw
            continue
        if section == "Minimize":
            obj_text.append(raw.split(":", 1)[1] if raw.startswith(" obj:") else raw)
        elif section == "Subject To":
            if raw.startswith("   "):
                rows[-1][1].append(raw)
            else:
                name, rest = raw[1:].split(": ", 1)
                rows.append([name, [rest]])
        elif section == "Bounds":
            bounds.append(raw.split()[0])
        elif section == "Binaries":
            binaries.append(raw.strip())
    variables = [Variable(n, "B") for n in binaries] + [Variable(n, "C") for n in bounds]
    index = {v.name: k for k, v in enumerate(variables)}
    constraints = []
    for name, parts in rows:
        body = " ".join(parts)
        m = re.match(r"(.*?)\s*(<=|>=|=)\s*(\S+)$", body)
        lhs, sense, rhs = m.group(1), m.group(2), float(m.group(3))
        constraints.append(Constraint(name, tuple(sorted(_parse_terms(lhs, index))), sense, rhs))
    objective = tuple(sorted(_parse_terms(" ".join(obj_text), index)))
    model = MilpModel(variables, constraints, objective, alpha)
    model.keys = {}
    for k, v in enumerate(variables):
        inner = v.name[v.name.index("(") + 1:-1].split(",")
        model.keys[k] = (v.prefix, *inner)
    return model


def variable_manifest(model: MilpModel, destination=None) -> str:
    """CSV of (index, name, family, meaning) for every variable."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["index", "name", "family", "meaning"])
    for k, v in enumerate(model.variables):
        w.writerow([k, v.name, v.family, MEANINGS[v.family]])
    text = buf.getvalue()
    if destination is not None:
        Path(destination).write_text(text)
    return text
