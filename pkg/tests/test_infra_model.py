import itertools

import pytest
from hypothesis import given, strategies as st

from fogweave.app_model import Request, Seq, VnfLeaf, VnfType, validate_request
from fogweave.infra_model import (
    APP1_TYPES,
    APP2_TYPES,
    APP3_TYPES,
    SHARED_TYPE,
    ComputeNode,
    Infrastructure,
    Link,
    ScenarioParams,
    generate_scenario,
    link_between,
    link_class,
    packs_into,
    scenario_violations,
)


@pytest.fixture(scope="module")
def scenario():
    return generate_scenario(1)


def test_scenario_counts(scenario):
    infra, requests = scenario
    assert len(infra.nodes_in("cloud")) == 2
    assert len(infra.nodes_in("fog")) == 3
    assert len(infra.devices) == 5
    compute = [l for l in infra.links if not l.cls.startswith("iot")]
    assert len(compute) == 10
    assert len(infra.links) - len(compute) == 25
    assert [r.request_id for r in requests] == ["app1", "app2", "app3"]
    assert len(infra.catalog) == 18
    assert scenario_violations(infra, requests) == []


def test_scenario_node_and_link_parameters(scenario):
    infra, _ = scenario
    for n in infra.nodes:
        assert (n.capacity_vcpu, n.cost_per_vcpu) == ((8, 0.1) if n.tier == "cloud" else (3, 6.0))
    table = {"iot-fog": (54, 1.0), "fog-fog": (100, 2.0), "cloud-fog": (10_000, 3.0),
             "iot-cloud": (10_000, 4.0), "cloud-cloud": (100_000, 0.1)}
    for l in infra.links:
        assert (l.bandwidth_mbps, l.cost_per_gb) == table[l.cls]


def test_shared_type_appears_in_both_sequences(scenario):
    _, (a1, a2, a3) = scenario
    assert SHARED_TYPE in a1.vnf_types and SHARED_TYPE in a2.vnf_types
    assert SHARED_TYPE not in a3.vnf_types
    assert [l.type_id for l in a1.tree.children] == APP1_TYPES
    assert [l.type_id for l in a2.tree.children] == APP2_TYPES


@given(st.integers(0, 10_000))
def test_scenario_draws_stay_in_range(seed):
    infra, _ = generate_scenario(seed)
    ranges = ScenarioParams().delay_ms
    for l in infra.links:
        lo, hi = ranges[l.cls]
        assert lo <= l.delay_ms <= hi
    for t in infra.catalog:
        assert t.requirement_vcpu in (1, 2, 3, 4)
        assert (t.license_cost, t.capacity_kb, t.instance_count) == (100, 400, 2)
        assert (t.delay_cloud_ms, t.delay_fog_ms) == (3.12, 0.03)


@given(st.integers(0, 10_000))
def test_requirements_fit_the_tiers(seed):
    infra, _ = generate_scenario(seed)
    u = {t.type_id: t.requirement_vcpu for t in infra.catalog}
    fog = [n.usable_vcpu for n in infra.nodes_in("fog")]
    cloud = [n.usable_vcpu for n in infra.nodes_in("cloud")]
    for app in (APP1_TYPES, APP2_TYPES, APP3_TYPES):
        assert packs_into([u[t] for t in app], fog)
    joint = list(dict.fromkeys(APP1_TYPES + APP2_TYPES))
    assert packs_into([u[t] for t in joint], cloud)


def test_same_seed_same_scenario():
    assert generate_scenario(7) == generate_scenario(7)
    assert generate_scenario(7)[0] != generate_scenario(8)[0]


def test_unit_conversions(scenario):
    infra, requests = scenario
    r = requests[0]
    assert r.traffic_bits == 640_000
    iot_cloud = link_between(infra, "iot0", "cloud0")
    assert iot_cloud.cost_for(r.traffic_bits) == pytest.approx(0.00256, rel=1e-12)
    assert 640_000 / 1e9 == pytest.approx(6.4e-4)
    assert infra.traffic_factor(r) == 1.0


def test_link_lookup_is_symmetric(scenario):
    infra, _ = scenario
    for l in infra.links:
        a, b = l.endpoints
        assert link_between(infra, a, b) is l
        assert link_between(infra, b, a) is l
    with pytest.raises(ValueError):
        link_between(infra, "cloud0", "cloud0")
    with pytest.raises(KeyError):
        link_between(infra, "cloud0", "nowhere")


def test_missing_link_returns_none():
    nodes = [ComputeNode("a", "fog", 2, 1), ComputeNode("b", "fog", 2, 1)]
    infra = Infrastructure(nodes, [], [], [])
    assert link_between(infra, "a", "b") is None


def test_restricted_keeps_one_tier(scenario):
    infra, _ = scenario
    fog = infra.restricted("fog")
    assert {n.tier for n in fog.nodes} == {"fog"}
    assert {l.cls for l in fog.links} == {"fog-fog", "iot-fog"}
    assert len(fog.links) == 3 + 15
    with pytest.raises(ValueError):
        infra.restricted("edge")


def test_link_class_table():
    assert link_class("fog", "cloud") == "cloud-fog"
    assert link_class("iot", "fog") == "iot-fog"
    with pytest.raises(ValueError):
        link_class("iot", "iot")


def test_infrastructure_rejects_bad_input():
    a, b = ComputeNode("a", "fog", 2, 1), ComputeNode("b", "cloud", 2, 1)
    with pytest.raises(ValueError, match="duplicate node"):
        Infrastructure([a, a], [], [], [])
    with pytest.raises(ValueError, match="declared"):
        Infrastructure([a, b], [Link(("a", "b"), "fog-fog", 1, 1, 1)], [], [])
    with pytest.raises(ValueError, match="more than one link"):
        Infrastructure([a, b], [Link(("a", "b"), "cloud-fog", 1, 1, 1, link_id="x"),
                                Link(("b", "a"), "cloud-fog", 1, 1, 1, link_id="y")], [], [])
    with pytest.raises(ValueError, match="unknown endpoint"):
        Infrastructure([a], [Link(("a", "z"), "fog-fog", 1, 1, 1)], [], [])
    with pytest.raises(ValueError):
        ComputeNode("c", "edge", 1, 1)
    with pytest.raises(ValueError):
        ComputeNode("c", "fog", 0, 1)
    with pytest.raises(ValueError):
        Link(("a", "a"), "fog-fog", 1, 1, 1)


def test_request_against_catalog(scenario):
    infra, requests = scenario
    for r in requests:
        assert validate_request(r, infra.types).ok
    bad = Request("x", Seq([VnfLeaf("eq_acquisition"), VnfLeaf("nope")]), 80, ["iot0"])
    assert any("nope" in v for v in scenario_violations(infra, [bad]))
    ghost_dev = Request("y", Seq([VnfLeaf("eq_acquisition"), VnfLeaf("eq_filtering")]), 80, ["iot9"])
    assert any("iot9" in v for v in scenario_violations(infra, [ghost_dev]))


def _packs_brute(sizes, caps):
    return any(
        all(sum(s for s, b in zip(sizes, bins) if b == k) <= caps[k] for k in range(len(caps)))
        for bins in itertools.product(range(len(caps)), repeat=len(sizes))
    )


@given(st.lists(st.integers(1, 4), max_size=6), st.lists(st.integers(1, 8), min_size=1, max_size=3))
def test_packing_matches_enumeration(sizes, caps):
    assert packs_into(sizes, caps) == _packs_brute(sizes, caps)


def test_without_tier_fitting_requirements_are_plain_draws():
    infra, _ = generate_scenario(3, ScenarioParams(fit_tiers=False))
    assert all(1 <= t.requirement_vcpu <= 4 for t in infra.catalog)
    assert isinstance(infra.catalog[0], VnfType)
