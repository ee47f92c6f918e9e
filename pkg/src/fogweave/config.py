"""YAML scenario files.

Every quantity carries its unit in the field name. A tree node is either a
bare string (a VNF leaf) or a mapping with exactly one key among ``vnf``,
``seq``, ``par``, ``sel`` and ``loop``::

    tree:
      seq:
        - object_detection
        - loop:
            q: 0.25
            body:
              sel:
                branches: [lane_change, emergency_brake]
                probabilities: [0.5, 0.5]

Errors are reported as ``path:line:column: message`` using the YAML node
marks, so a bad field points at the line that holds it.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Any, Literal

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .app_model import Loop, Par, Request, Sel, Seq, VnfLeaf, VnfType, validate_request
from .infra_model import (
    ComputeNode,
    Infrastructure,
    Link,
    link_class,
    scenario_violations,
)


class ConfigError(ValueError):
    def __init__(self, diagnostics: list[str]):
        self.diagnostics = list(diagnostics)
        super().__init__("\n".join(self.diagnostics))


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class NodeSpec(_Strict):
    id: str
    tier: Literal["cloud", "fog"]
    capacity_vcpu: float = Field(gt=0)
    cost_per_vcpu: float = Field(ge=0)
    usage_threshold: float = Field(default=1.0, gt=0, le=1)


class LinkSpec(_Strict):
    endpoints: tuple[str, str]
    link_class: Literal["cloud-cloud", "fog-fog", "cloud-fog", "iot-cloud", "iot-fog"] | None = None
    bandwidth_mbps: float = Field(gt=0)
    cost_per_gb: float = Field(ge=0)
    delay_ms: float = Field(ge=0)
    usage_threshold: float = Field(default=1.0, gt=0, le=1)
    id: str = ""


class VnfTypeSpec(_Strict):
    id: str
    license_cost: float = Field(ge=0)
    capacity_kb: float = Field(gt=0)
    requirement_vcpu: float = Field(gt=0)
    instances: int = Field(default=1, ge=1)
    delay_cloud_ms: float = Field(default=0.0, ge=0)
    delay_fog_ms: float = Field(default=0.0, ge=0)
    usage_threshold: float = Field(default=1.0, gt=0, le=1)


class RequestSpec(_Strict):
    id: str
    traffic_kb: float = Field(gt=0)
    devices: list[str] = Field(min_length=1)
    tree: Any


class SolverSpec(_Strict):
    budget_nodes: int = Field(default=2_000_000, ge=1)
    oracle_cap: int = Field(default=200_000, ge=1)


class MonteCarloSpec(_Strict):
    rng: Literal["pcg64"] = "pcg64"
    samples: int = Field(default=100_000, ge=1)
    seed: int = 0


class ScenarioSpec(_Strict):
    alpha: float = Field(default=0.5, ge=0, le=1)
    delay_unit_kb: float = Field(default=80.0, gt=0)
    solver: SolverSpec = SolverSpec()
    montecarlo: MonteCarloSpec = MonteCarloSpec()
    nodes: list[NodeSpec]
    devices: list[str]
    links: list[LinkSpec]
    vnf_types: list[VnfTypeSpec]
    requests: list[RequestSpec] = []


@dataclass(frozen=True)
class Scenario:
    infra: Infrastructure
    requests: list
    alpha: float = 0.5
    budget_nodes: int = 2_000_000
    oracle_cap: int = 200_000
    mc_samples: int = 100_000
    mc_seed: int = 0


# --- locating YAML nodes -----------------------------------------------------------

class _Locator:
    def __init__(self, root, source: str):
        self.root = root
        self.source = source

    def mark(self, path) -> tuple[int, int] | None:
        node = self.root
        best = node
        for key in path:
            if node is None:
                break
            nxt = None
            if isinstance(node, yaml.MappingNode):
                for k, v in node.value:
                    if k.value == str(key):
                        nxt = v
                        break
            elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
                nxt = node.value[key]
            if nxt is None:
                break
            node = best = nxt
        if best is None:
            return None
        return best.start_mark.line + 1, best.start_mark.column + 1

    def diag(self, path, message) -> str:
        m = self.mark(path)
        where = f"{self.source}:{m[0]}:{m[1]}" if m else self.source
        dotted = ".".join(str(p) for p in path)
        return f"{where}: {dotted + ': ' if dotted else ''}{message}"


# --- trees ---------------------------------------------------------------------

_TREE_KEYS = ("vnf", "seq", "par", "sel", "loop")


def _parse_tree(data, path, loc: _Locator, errors: list):
    if isinstance(data, str):
        return VnfLeaf(data)
    if not isinstance(data, dict) or len(data) != 1 or next(iter(data)) not in _TREE_KEYS:
        errors.append(loc.diag(path, f"tree node must be a VNF id or a mapping with one key of {_TREE_KEYS}"))
        return None
    kind, body = next(iter(data.items()))
    here = path + [kind]
    if kind == "vnf":
        if not isinstance(body, str):
            errors.append(loc.diag(here, "vnf must name a VNF type"))
            return None
        return VnfLeaf(body)
    if kind in ("seq", "par"):
        if not isinstance(body, list):
            errors.append(loc.diag(here, f"{kind} takes a list of children"))
            return None
        kids = [_parse_tree(c, here + [i], loc, errors) for i, c in enumerate(body)]
        return (Seq if kind == "seq" else Par)(kids)
    if kind == "sel":
        if not isinstance(body, dict) or set(body) != {"branches", "probabilities"}:
            errors.append(loc.diag(here, "sel takes exactly 'branches' and 'probabilities'"))
            return None
        br, ps = body["branches"], body["probabilities"]
        if not isinstance(br, list) or not isinstance(ps, list) or \
                not all(isinstance(p, (int, float)) and not isinstance(p, bool) for p in ps):
            errors.append(loc.diag(here, "sel branches and probabilities must be lists (numbers for probabilities)"))
            return None
        kids = [_parse_tree(c, here + ["branches", i], loc, errors) for i, c in enumerate(br)]
        return Sel(kids, [float(p) for p in ps])
    if not isinstance(body, dict) or set(body) != {"q", "body"}:
        errors.append(loc.diag(here, "loop takes exactly 'q' and 'body'"))
        return None
    q = body["q"]
    if not isinstance(q, (int, float)) or isinstance(q, bool):
        errors.append(loc.diag(here + ["q"], "q must be a number"))
        return None
    inner = _parse_tree(body["body"], here + ["body"], loc, errors)
    return Loop(inner, float(q))


def _tree_data(node):
    if isinstance(node, VnfLeaf):
        return node.type_id
    if isinstance(node, Seq):
        return {"seq": [_tree_data(c) for c in node.children]}
    if isinstance(node, Par):
        return {"par": [_tree_data(c) for c in node.children]}
    if isinstance(node, Sel):
        return {"sel": {"branches": [_tree_data(c) for c in node.children],
                        "probabilities": list(node.probabilities)}}
    if isinstance(node, Loop):
        return {"loop": {"q": node.q, "body": _tree_data(node.body)}}
    raise TypeError(f"unknown tree node {node!r}")


# --- loading -------------------------------------------------------------------

def _has_none(node) -> bool:
    if node is None:
        return True
    if isinstance(node, (VnfLeaf,)):
        return False
    if isinstance(node, Loop):
        return _has_none(node.body)
    return any(_has_none(c) for c in node.children)


def parse_scenario(text: str, source: str = "<config>") -> Scenario:
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{source}:{mark.line + 1}:{mark.column + 1}" if mark else source
        raise ConfigError([f"{where}: YAML syntax error: {getattr(exc, 'problem', exc)}"]) from None
    loc = _Locator(root, source)
    if not isinstance(data, dict):
        raise ConfigError([f"{source}: top level must be a mapping"])
    try:
        cfg = ScenarioSpec.model_validate(data)
    except ValidationError as exc:
        raise ConfigError([loc.diag(list(e["loc"]), e["msg"]) for e in exc.errors()]) from None

    errors: list[str] = []
    tiers = {n.id: n.tier for n in cfg.nodes}
    devices = set(cfg.devices)
    nodes = [ComputeNode(n.id, n.tier, n.capacity_vcpu, n.cost_per_vcpu, n.usage_threshold)
             for n in cfg.nodes]
    links = []
    for k, l in enumerate(cfg.links):
        kinds = []
        for e in l.endpoints:
            kinds.append(tiers.get(e, "iot" if e in devices else None))
        if None in kinds:
            errors.append(loc.diag(["links", k, "endpoints"], f"unknown endpoint in {list(l.endpoints)}"))
            continue
        try:
            cls = link_class(*kinds)
        except ValueError as exc:
            errors.append(loc.diag(["links", k, "endpoints"], str(exc)))
            continue
        if l.link_class is not None and l.link_class != cls:
            errors.append(loc.diag(["links", k, "link_class"], f"declared {l.link_class} but endpoints form {cls}"))
            continue
        links.append(Link(tuple(l.endpoints), cls, l.bandwidth_mbps, l.cost_per_gb, l.delay_ms,
                          l.usage_threshold, l.id))
    catalog = [VnfType(t.id, t.license_cost, t.capacity_kb, t.requirement_vcpu, t.instances,
                       t.delay_cloud_ms, t.delay_fog_ms, t.usage_threshold) for t in cfg.vnf_types]
    requests = []
    for k, r in enumerate(cfg.requests):
        tree = _parse_tree(r.tree, ["requests", k, "tree"], loc, errors)
        if tree is None or _has_none(tree):
            continue
        req = Request(r.id, tree, r.traffic_kb, tuple(r.devices))
        for v in validate_request(req, catalog).violations:
            errors.append(loc.diag(["requests", k], v))
        requests.append(req)
    if errors:
        raise ConfigError(errors)
    try:
        infra = Infrastructure(nodes, links, cfg.devices, catalog, cfg.delay_unit_kb)
    except ValueError as exc:
        raise ConfigError([f"{source}: {exc}"]) from None
    problems = scenario_violations(infra, requests)
    if problems:
        raise ConfigError([f"{source}: {p}" for p in problems])
    return Scenario(infra, requests, cfg.alpha, cfg.solver.budget_nodes, cfg.solver.oracle_cap,
                    cfg.montecarlo.samples, cfg.montecarlo.seed)


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError([f"{path}: cannot read: {exc.strerror}"]) from None
    return parse_scenario(text, str(path))


def scenario_data(infra: Infrastructure, requests, alpha: float = 0.5,
                  budget_nodes: int = 2_000_000, oracle_cap: int = 200_000) -> dict:
    return {
        "alpha": alpha,
        "delay_unit_kb": infra.delay_unit_kb,
        "solver": {"budget_nodes": budget_nodes, "oracle_cap": oracle_cap},
        "nodes": [{"id": n.node_id, "tier": n.tier, "capacity_vcpu": n.capacity_vcpu,
                   "cost_per_vcpu": n.cost_per_vcpu, "usage_threshold": n.usage_threshold}
                  for n in infra.nodes],
        "devices": list(infra.devices),
        "links": [{"id": l.link_id, "endpoints": list(l.endpoints), "link_class": l.cls,
                   "bandwidth_mbps": l.bandwidth_mbps, "cost_per_gb": l.cost_per_gb,
                   "delay_ms": l.delay_ms, "usage_threshold": l.usage_threshold}
                  for l in infra.links],
        "vnf_types": [{"id": t.type_id, "license_cost": t.license_cost,
                       "capacity_kb": t.capacity_kb, "requirement_vcpu": t.requirement_vcpu,
                       "instances": t.instance_count, "delay_cloud_ms": t.delay_cloud_ms,
                       "delay_fog_ms": t.delay_fog_ms, "usage_threshold": t.usage_threshold}
                      for t in infra.catalog],
        "requests": [{"id": r.request_id, "traffic_kb": r.traffic_kb, "devices": list(r.devices),
                      "tree": _tree_data(r.tree)} for r in requests],
    }


def dump_scenario(infra: Infrastructure, requests, alpha: float = 0.5, **solver) -> str:
    return yaml.safe_dump(scenario_data(infra, requests, alpha, **solver), sort_keys=False)
