"""Hybrid cloud/fog substrate: compute nodes, typed links, IoT devices, VNF catalog.

Quantities are stored in the units of the scenario file (vCPU, Mbps, $/Gb,
ms, KB) and converted on demand: traffic in bits (1 KB = 8000 bits), link
cost per bit = cost_per_gb / 1e9. Delay terms scale with the request's
traffic divided by ``delay_unit_kb`` so a request of exactly that size pays
the tabulated per-unit delay once.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable

import numpy as np

from .app_model import Loop, Request, Sel, Seq, VnfLeaf, VnfType

TIERS = ("cloud", "fog")
LINK_CLASSES = ("cloud-cloud", "fog-fog", "cloud-fog", "iot-cloud", "iot-fog")


@dataclass(frozen=True)
class ComputeNode:
    node_id: str
    tier: str
    capacity_vcpu: float
    cost_per_vcpu: float
    usage_threshold: float = 1.0

    def __post_init__(self):
        if self.tier not in TIERS:
            raise ValueError(f"{self.node_id}: tier must be one of {TIERS}, got {self.tier!r}")
        if self.capacity_vcpu <= 0:
            raise ValueError(f"{self.node_id}: capacity must be > 0")
        if self.cost_per_vcpu < 0:
            raise ValueError(f"{self.node_id}: unit cost must be >= 0")
        if not 0 < self.usage_threshold <= 1:
            raise ValueError(f"{self.node_id}: usage_threshold must be in (0, 1]")

    @property
    def usable_vcpu(self) -> float:
        return self.usage_threshold * self.capacity_vcpu


@dataclass(frozen=True)
class Link:
    endpoints: tuple
    cls: str
    bandwidth_mbps: float
    cost_per_gb: float
    delay_ms: float
    usage_threshold: float = 1.0
    link_id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "endpoints", tuple(self.endpoints))
        if len(self.endpoints) != 2 or self.endpoints[0] == self.endpoints[1]:
            raise ValueError(f"link needs two distinct endpoints, got {self.endpoints}")
        if not self.link_id:
            object.__setattr__(self, "link_id", f"{self.endpoints[0]}--{self.endpoints[1]}")
        if self.cls not in LINK_CLASSES:
            raise ValueError(f"{self.link_id}: unknown link class {self.cls!r}")
        if self.bandwidth_mbps <= 0:
            raise ValueError(f"{self.link_id}: bandwidth must be > 0")
        if self.cost_per_gb < 0 or self.delay_ms < 0:
            raise ValueError(f"{self.link_id}: cost and delay must be >= 0")
        if not 0 < self.usage_threshold <= 1:
            raise ValueError(f"{self.link_id}: usage_threshold must be in (0, 1]")

    @property
    def bandwidth_bits(self) -> float:
        return self.bandwidth_mbps * 1e6

    @property
    def usable_bits(self) -> float:
        return self.usage_threshold * self.bandwidth_bits

    def cost_for(self, bits: float) -> float:
        return bits * self.cost_per_gb / 1e9


@dataclass(frozen=True)
class VnfInstanceRef:
    type_id: str
    instance_index: int


def link_class(tier_a: str, tier_b: str) -> str:
    """Class of a link joining endpoints of the given kinds ("cloud", "fog", "iot")."""
    pair = {tier_a, tier_b}
    if pair == {"cloud"}:
        return "cloud-cloud"
    if pair == {"fog"}:
        return "fog-fog"
    if pair == {"cloud", "fog"}:
        return "cloud-fog"
    if pair == {"iot", "cloud"}:
        return "iot-cloud"
    if pair == {"iot", "fog"}:
        return "iot-fog"
    raise ValueError(f"no link class joins {tier_a!r} and {tier_b!r}")


@dataclass(frozen=True)
class Infrastructure:
    nodes: tuple
    links: tuple
    devices: tuple
    catalog: tuple
    delay_unit_kb: float = 80.0
    _node_by_id: dict = field(default=None, compare=False, repr=False)
    _link_by_pair: dict = field(default=None, compare=False, repr=False)
    _type_by_id: dict = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        for name in ("nodes", "links", "devices", "catalog"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if self.delay_unit_kb <= 0:
            raise ValueError("delay_unit_kb must be > 0")
        nodes = {}
        for n in self.nodes:
            if n.node_id in nodes:
                raise ValueError(f"duplicate node id {n.node_id}")
            nodes[n.node_id] = n
        devices = set(self.devices)
        if len(devices) != len(self.devices):
            raise ValueError("duplicate device ids")
        if devices & set(nodes):
            raise ValueError(f"ids used both as device and node: {sorted(devices & set(nodes))}")
        pairs = {}
        seen_ids = set()
        for link in self.links:
            a, b = link.endpoints
            kinds = []
            for e in (a, b):
                if e in nodes:
                    kinds.append(nodes[e].tier)
                elif e in devices:
                    kinds.append("iot")
                else:
                    raise ValueError(f"link {link.link_id} references unknown endpoint {e}")
            if link_class(*kinds) != link.cls:
                raise ValueError(
                    f"link {link.link_id} declared {link.cls} but joins {kinds[0]} and {kinds[1]}"
                )
            key = frozenset((a, b))
            if key in pairs:
                raise ValueError(f"more than one link between {a} and {b}")
            if link.link_id in seen_ids:
                raise ValueError(f"duplicate link id {link.link_id}")
            seen_ids.add(link.link_id)
            pairs[key] = link
        types = {}
        for t in self.catalog:
            if t.type_id in types:
                raise ValueError(f"duplicate VNF type {t.type_id}")
            types[t.type_id] = t
        object.__setattr__(self, "_node_by_id", nodes)
        object.__setattr__(self, "_link_by_pair", pairs)
        object.__setattr__(self, "_type_by_id", types)

    def node(self, node_id: str) -> ComputeNode:
        return self._node_by_id[node_id]

    def vnf_type(self, type_id: str) -> VnfType:
        return self._type_by_id[type_id]

    @property
    def types(self) -> dict:
        return dict(self._type_by_id)

    def has_node(self, node_id: str) -> bool:
        return node_id in self._node_by_id

    def nodes_in(self, tier: str) -> list[ComputeNode]:
        return [n for n in self.nodes if n.tier == tier]

    def traffic_factor(self, req: Request) -> float:
        """Multiplier applied to per-traffic-unit delays for this request."""
        return req.traffic_kb / self.delay_unit_kb

    def instances(self, type_id: str) -> list[VnfInstanceRef]:
        t = self._type_by_id[type_id]
        return [VnfInstanceRef(type_id, i) for i in range(t.instance_count)]

    def restricted(self, tier: str) -> "Infrastructure":
        """Sub-infrastructure keeping only ``tier`` nodes and the links touching them."""
        if tier not in TIERS:
            raise ValueError(f"tier must be one of {TIERS}")
        keep = {n.node_id for n in self.nodes if n.tier == tier}
        devices = set(self.devices)
        links = [
            l for l in self.links
            if all(e in keep or e in devices for e in l.endpoints)
        ]
        return replace(
            self,
            nodes=[n for n in self.nodes if n.node_id in keep],
            links=links,
            _node_by_id=None,
            _link_by_pair=None,
            _type_by_id=None,
        )

    def with_catalog(self, catalog: Iterable[VnfType]) -> "Infrastructure":
        return replace(self, catalog=tuple(catalog), _node_by_id=None, _link_by_pair=None,
                       _type_by_id=None)


def link_between(infra: Infrastructure, a: str, b: str) -> Link | None:
    """The unique link joining ``a`` and ``b`` (order-insensitive), or None."""
    if a == b:
        raise ValueError(f"link_between needs distinct endpoints, got {a!r} twice")
    for e in (a, b):
        if not infra.has_node(e) and e not in infra.devices:
            raise KeyError(f"unknown endpoint {e!r}")
    return infra._link_by_pair.get(frozenset((a, b)))


# --- evaluation scenario -------------------------------------------------

@dataclass(frozen=True)
class ScenarioParams:
    n_cloud: int = 2
    n_fog: int = 3
    n_devices: int = 5
    cloud_capacity_vcpu: float = 8
    fog_capacity_vcpu: float = 3
    cloud_cost_per_vcpu: float = 0.1
    fog_cost_per_vcpu: float = 6.0
    bandwidth_mbps: dict = field(default_factory=lambda: {
        "iot-fog": 54.0, "fog-fog": 100.0, "cloud-fog": 10_000.0,
        "iot-cloud": 10_000.0, "cloud-cloud": 100_000.0,
    })
    cost_per_gb: dict = field(default_factory=lambda: {
        "iot-fog": 1.0, "fog-fog": 2.0, "cloud-fog": 3.0, "iot-cloud": 4.0, "cloud-cloud": 0.1,
    })
    # (low, high) draws uniformly; equal bounds give a constant
    delay_ms: dict = field(default_factory=lambda: {
        "iot-fog": (1.0, 2.0), "fog-fog": (0.5, 1.2), "cloud-fog": (15.0, 35.0),
        "iot-cloud": (15.0, 35.0), "cloud-cloud": (0.64, 0.64),
    })
    license_cost: float = 100.0
    requirement_range: tuple = (1, 4)
    delay_cloud_ms: float = 3.12
    delay_fog_ms: float = 0.03
    vnf_capacity_kb: float = 400.0
    instances_per_type: int = 2
    traffic_kb: float = 80.0
    delay_unit_kb: float = 80.0
    loop_q: float = 0.25
    sel_p: float = 0.5
    usage_threshold: float = 1.0
    fit_tiers: bool = True


SHARED_TYPE = "historical_storage"

APP1_TYPES = ["eq_acquisition", "eq_filtering", "eq_detection", "eq_magnitude",
              SHARED_TYPE, "eq_alerting"]
APP2_TYPES = ["fl_acquisition", "fl_filtering", "fl_level_analysis", "fl_prediction",
              SHARED_TYPE, "fl_alerting"]
APP3_TYPES = ["object_detection", "object_tracking", "object_recognition",
              "smart_navigation", "collision_avoidance", "lane_change", "emergency_brake"]


def autonomous_driving_tree(q: float = 0.25, p: float = 0.5):
    """The 7-VNF driving application: a sequence ending in a collision-risk loop
    whose body picks between changing lane and braking."""
    return Seq([
        VnfLeaf("object_detection"),
        VnfLeaf("object_tracking"),
        VnfLeaf("object_recognition"),
        VnfLeaf("smart_navigation"),
        Loop(Seq([
            VnfLeaf("collision_avoidance"),
            Sel([VnfLeaf("lane_change"), VnfLeaf("emergency_brake")], [p, 1.0 - p]),
        ]), q),
    ])


def packs_into(sizes: Iterable[float], capacities: Iterable[float]) -> bool:
    """Exact bin-packing feasibility by backtracking (tiny inputs only)."""
    items = sorted(sizes, reverse=True)
    free = list(capacities)

    def place(k):
        if k == len(items):
            return True
        tried = set()
        for b in range(len(free)):
            if free[b] in tried or free[b] + 1e-12 < items[k]:
                continue
            tried.add(free[b])
            free[b] -= items[k]
            if place(k + 1):
                return True
            free[b] += items[k]
        return False

    return place(0)


def generate_scenario(seed: int, params: ScenarioParams | None = None):
    """Build the evaluation infrastructure and its three requests.

    Delays and VNF requirements are drawn from a PCG64 stream seeded with
    ``seed`` in a fixed order, so the same seed always yields the same
    scenario. With ``params.fit_tiers`` the requirement vector of each
    application is redrawn until it packs into the fog tier on its own, and
    applications 1 and 2 together pack into the cloud tier.
    """
    p = params or ScenarioParams()
    rng = np.random.Generator(np.random.PCG64(seed))
    mu = p.usage_threshold

    nodes = [ComputeNode(f"cloud{k}", "cloud", p.cloud_capacity_vcpu, p.cloud_cost_per_vcpu, mu)
             for k in range(p.n_cloud)]
    nodes += [ComputeNode(f"fog{k}", "fog", p.fog_capacity_vcpu, p.fog_cost_per_vcpu, mu)
              for k in range(p.n_fog)]
    devices = [f"iot{k}" for k in range(p.n_devices)]

    def draw_delay(cls):
        lo, hi = p.delay_ms[cls]
        return float(lo) if lo == hi else float(rng.uniform(lo, hi))

    def make_link(a, b, cls):
        return Link((a, b), cls, p.bandwidth_mbps[cls], p.cost_per_gb[cls], draw_delay(cls), mu)

    links = []
    for i, a in enumerate(nodes):
        for b in nodes[i + 1:]:
            links.append(make_link(a.node_id, b.node_id, link_class(a.tier, b.tier)))
    for d in devices:
        for n in nodes:
            links.append(make_link(d, n.node_id, link_class("iot", n.tier)))

    lo, hi = p.requirement_range
    fog_caps = [n.usable_vcpu for n in nodes if n.tier == "fog"]
    cloud_caps = [n.usable_vcpu for n in nodes if n.tier == "cloud"]
    req_u: dict[str, int] = {}

    def draw_app(types, accept, max_tries=1_000_000):
        fresh = [t for t in types if t not in req_u]
        for _ in range(max_tries):
            vals = dict(zip(fresh, (int(v) for v in rng.integers(lo, hi + 1, size=len(fresh)))))
            merged = {**req_u, **vals}
            if not p.fit_tiers or accept(merged):
                req_u.update(vals)
                return
        raise RuntimeError(f"could not draw requirements for {types}")

    def fits(types, caps):
        return lambda u: packs_into([u[t] for t in types], caps)

    draw_app(APP1_TYPES, fits(APP1_TYPES, fog_caps))
    joint = list(dict.fromkeys(APP1_TYPES + APP2_TYPES))
    draw_app(APP2_TYPES, lambda u: fits(APP2_TYPES, fog_caps)(u) and fits(joint, cloud_caps)(u))
    draw_app(APP3_TYPES, fits(APP3_TYPES, fog_caps))

    catalog = [
        VnfType(t, p.license_cost, p.vnf_capacity_kb, req_u[t], p.instances_per_type,
                p.delay_cloud_ms, p.delay_fog_ms, mu)
        for t in dict.fromkeys(APP1_TYPES + APP2_TYPES + APP3_TYPES)
    ]
    infra = Infrastructure(nodes, links, devices, catalog, p.delay_unit_kb)
    requests = [
        Request("app1", Seq([VnfLeaf(t) for t in APP1_TYPES]), p.traffic_kb, (devices[0],)),
        Request("app2", Seq([VnfLeaf(t) for t in APP2_TYPES]), p.traffic_kb,
                (devices[1 % len(devices)],)),
        Request("app3", autonomous_driving_tree(p.loop_q, p.sel_p), p.traffic_kb,
                (devices[2 % len(devices)],)),
    ]
    return infra, requests


def scenario_violations(infra: Infrastructure, requests: Iterable[Request]) -> list[str]:
    """Invariant violations of a whole scenario (requests checked against infra)."""
    from .app_model import validate_request

    out = []
    ids = set()
    for r in requests:
        if r.request_id in ids:
            out.append(f"duplicate request id {r.request_id}")
        ids.add(r.request_id)
        out.extend(validate_request(r, infra.types).violations)
        missing = sorted(d for d in r.devices if d not in infra.devices)
        if missing:
            out.append(f"request {r.request_id}: unknown devices {', '.join(missing)}")
    return out
