import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fogweave.app_model import (
    DomainError,
    InvalidTreeError,
    Loop,
    Par,
    Request,
    Sel,
    Seq,
    VnfLeaf,
    VnfType,
    annotate_leaves,
    expected_iterations,
    iter_nodes,
    leaves,
    tree_violations,
    validate_request,
)
from fogweave.infra_model import APP3_TYPES, autonomous_driving_tree

from .helpers import random_tree

A, B, C, D, X = (VnfLeaf(t) for t in "ABCDX")


def weights(tree):
    return {a.leaf: a.node_weight for a in annotate_leaves(tree)}


def preds(tree):
    return {a.leaf: a.predecessor for a in annotate_leaves(tree)}


# --- expected iterations ---------------------------------------------------------

def test_expected_iterations_quarter_is_one_third():
    assert expected_iterations(0.25) == pytest.approx(1 / 3, abs=1e-15)
    assert round(expected_iterations(0.25), 2) == 0.33


@pytest.mark.parametrize("q,expected", [(0.0, 0.0), (0.5, 1.0), (0.75, 3.0)])
def test_expected_iterations_closed_form(q, expected):
    assert expected_iterations(q) == expected


@pytest.mark.parametrize("q", [1.0, 1.5, -0.1, math.nan])
def test_expected_iterations_rejects_out_of_domain(q):
    with pytest.raises(DomainError):
        expected_iterations(q)


@given(st.floats(0.0, 0.99))
def test_expected_iterations_matches_geometric_mean(q):
    # mean of P(N=n) = (1-q) q^n summed directly
    n = np.arange(0, 20000)
    direct = math.fsum(((1 - q) * q ** n * n).tolist())
    assert expected_iterations(q) == pytest.approx(direct, rel=1e-9, abs=1e-12)


# --- annotation ------------------------------------------------------------------

def test_sequence_weights_and_predecessors():
    t = Seq([A, B, C])
    assert weights(t) == {"A": 1.0, "B": 1.0, "C": 1.0}
    assert preds(t) == {"A": None, "B": "A", "C": "B"}


def test_selection_branches_share_predecessor():
    t = Seq([X, Sel([A, B], [0.5, 0.5])])
    assert weights(t) == {"X": 1.0, "A": 0.5, "B": 0.5}
    assert preds(t) == {"X": None, "A": "X", "B": "X"}


def test_loop_body_weighted_by_expected_iterations():
    t = Seq([X, Loop(Seq([A, B]), 0.25)])
    w = weights(t)
    assert w["A"] == pytest.approx(0.3333, abs=5e-5)
    assert w["B"] == w["A"]
    assert preds(t) == {"X": None, "A": "X", "B": "A"}


def test_block_exit_is_last_declared_child():
    t = Seq([X, Par([A, Seq([B, C])]), D])
    assert preds(t) == {"X": None, "A": "X", "B": "X", "C": "B", "D": "C"}
    t = Seq([X, Sel([Seq([B, C]), A], [0.3, 0.7]), D])
    assert preds(t)["D"] == "A"


def test_edge_weight_is_downstream_node_weight():
    t = Seq([X, Loop(Sel([A, B], [0.2, 0.8]), 0.5)])
    for a in annotate_leaves(t):
        assert a.edge_weight == a.node_weight


def test_sel_inside_loop_multiplies():
    q, p = 0.25, 0.3
    inner = Seq([X, Loop(Sel([A, B], [p, 1 - p]), q)])
    outer = Seq([X, Sel([Loop(A, q), Loop(B, q)], [p, 1 - p])])
    assert weights(inner)["A"] == pytest.approx(p * q / (1 - q), rel=1e-15)
    assert weights(inner) == pytest.approx(weights(outer), rel=1e-15)


def test_annotation_rejects_invalid_tree():
    with pytest.raises(InvalidTreeError):
        annotate_leaves(Seq([A]))
    with pytest.raises(InvalidTreeError):
        annotate_leaves(Seq([A, A]))


def test_driving_tree_weights():
    w = weights(autonomous_driving_tree(0.25, 0.5))
    assert sorted(w) == sorted(APP3_TYPES)
    for t in ("object_detection", "object_tracking", "object_recognition", "smart_navigation"):
        assert w[t] == 1.0
    assert w["collision_avoidance"] == pytest.approx(1 / 3)
    assert w["lane_change"] == pytest.approx(1 / 6)
    assert w["emergency_brake"] == pytest.approx(1 / 6)


# --- validation ------------------------------------------------------------------

def _catalog(types):
    return [VnfType(t, 100, 400, 1) for t in types]


def test_driving_tree_is_valid():
    req = Request("app3", autonomous_driving_tree(), 80, ["iot2"])
    report = validate_request(req, _catalog(APP3_TYPES))
    assert report.ok, report.violations
    assert sum(isinstance(n, Sel) for _, n in iter_nodes(req.tree)) == 1
    assert sum(isinstance(n, Loop) for _, n in iter_nodes(req.tree)) == 1
    assert len(leaves(req.tree)) == 7


def test_probability_sum_reported():
    req = Request("r", Seq([X, Sel([A, B], [0.5, 0.4])]), 80, ["d"])
    report = validate_request(req, _catalog("XAB"))
    assert not report
    assert any("probabilities sum to 0.9" in v for v in report.violations)


def test_unknown_type_reported_by_name():
    req = Request("r", Seq([X, VnfLeaf("ghost")]), 80, ["d"])
    report = validate_request(req, _catalog("X"))
    assert any("ghost" in v for v in report.violations)


def test_empty_devices_and_bad_traffic_reported():
    req = Request("r", Seq([X, A]), 0, [])
    v = validate_request(req, _catalog("XA")).violations
    assert any("device set is empty" in m for m in v)
    assert any("traffic" in m for m in v)


def test_structural_violations():
    assert any("children" in v for v in tree_violations(Par([A])))
    assert any("q=1.0" in v for v in tree_violations(Seq([X, Loop(A, 1.0)])))
    assert any("non-positive" in v for v in tree_violations(Seq([X, Sel([A, B], [1.0, 0.0])])))
    assert any("single entry" in v for v in tree_violations(Par([A, B])))


def test_vnf_type_invariants():
    with pytest.raises(ValueError):
        VnfType("t", -1, 400, 1)
    with pytest.raises(ValueError):
        VnfType("t", 1, 0, 1)
    with pytest.raises(ValueError):
        VnfType("t", 1, 400, 0)
    with pytest.raises(ValueError):
        VnfType("t", 1, 400, 1, instance_count=0)


# --- properties over random trees -------------------------------------------------

trees = st.builds(
    lambda seed, n: random_tree(np.random.Generator(np.random.PCG64(seed)), [f"t{k}" for k in range(n)]),
    st.integers(0, 2**32 - 1), st.integers(1, 7),
)


def _path_products(tree):
    """Leaf weights recomputed bottom-up from parent pointers."""
    parent, mult = {}, {}
    for _, node in iter_nodes(tree):
        if isinstance(node, Sel):
            for ch, p in zip(node.children, node.probabilities):
                parent[id(ch)], mult[id(ch)] = node, p
        elif isinstance(node, Loop):
            parent[id(node.body)], mult[id(node.body)] = node, node.q / (1 - node.q)
        elif not isinstance(node, VnfLeaf):
            for ch in node.children:
                parent[id(ch)], mult[id(ch)] = node, 1.0
    out = {}
    for _, node in iter_nodes(tree):
        if isinstance(node, VnfLeaf):
            w, cur = 1.0, node
            while id(cur) in parent:
                w *= mult[id(cur)]
                cur = parent[id(cur)]
            out[node.type_id] = w
    return out


@given(trees)
def test_weights_equal_ancestor_products(tree):
    assert weights(tree) == pytest.approx(_path_products(tree), rel=1e-12)


@given(trees)
def test_single_entry_and_predecessors_precede(tree):
    anns = annotate_leaves(tree)
    order = [a.leaf for a in anns]
    entries = [a.leaf for a in anns if a.predecessor is None]
    assert entries == [order[0]]
    for a in anns:
        if a.predecessor is not None:
            assert order.index(a.predecessor) < order.index(a.leaf)
        assert a.node_weight > 0


@given(trees)
def test_no_selection_or_loop_means_unit_weights(tree):
    if not any(isinstance(n, (Sel, Loop)) for _, n in iter_nodes(tree)):
        assert set(weights(tree).values()) <= {1.0}


@given(trees)
def test_selection_conserves_weight(tree):
    w = weights(tree)
    paths = _path_products(tree)
    for _, node in iter_nodes(tree):
        if not isinstance(node, Sel):
            continue
        # weight arriving at the Sel node, read off any leaf below it
        first = leaves(node)[0]
        inside = _path_products(node)[first]
        inherited = paths[first] / inside
        total = 0.0
        for ch, p in zip(node.children, node.probabilities):
            leaf = leaves(ch)[0]
            total += w[leaf] / _path_products(ch)[leaf]
        assert total == pytest.approx(inherited, rel=1e-12)


@given(trees)
def test_annotation_is_deterministic(tree):
    assert annotate_leaves(tree) == annotate_leaves(tree)
