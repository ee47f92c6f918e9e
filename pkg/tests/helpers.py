"""Seeded random instances small enough for the brute-force oracle."""

from __future__ import annotations

import math

import numpy as np

from fogweave.app_model import Loop, Par, Request, Sel, Seq, VnfLeaf, VnfType
from fogweave.infra_model import ComputeNode, Infrastructure, Link, link_class
from fogweave.solver import assignment_space_size


def random_tree(rng, types):
    """Random structured tree over distinct ``types`` with a single entry leaf."""
    first, rest = VnfLeaf(types[0]), list(types[1:])
    if not rest:
        return first
    return Seq([first, _random_block(rng, rest)])


def _random_block(rng, types):
    if len(types) == 1:
        leaf = VnfLeaf(types[0])
        if rng.random() < 0.3:
            return Loop(leaf, float(rng.choice([0.1, 0.25, 0.5, 0.75])))
        return leaf
    kind = rng.choice(["seq", "par", "sel", "loop"])
    if kind == "loop":
        return Loop(_random_block(rng, types), float(rng.choice([0.1, 0.25, 0.5, 0.75])))
    cut = int(rng.integers(1, len(types)))
    parts = [_random_block(rng, types[:cut]), _random_block(rng, types[cut:])]
    if kind == "seq":
        return Seq(parts)
    if kind == "par":
        return Par(parts)
    p = float(rng.choice([0.2, 0.5, 0.7]))
    return Sel(parts, [p, 1.0 - p])


def random_instance(seed: int, max_space: int = 4096):
    """(infra, requests, alpha) with at most 2 requests, 4 VNFs per request,
    4 nodes and 2 instances per type."""
    rng = np.random.Generator(np.random.PCG64(seed))
    while True:
        n_nodes = int(rng.integers(2, 5))
        nodes = []
        for k in range(n_nodes):
            tier = "cloud" if rng.random() < 0.5 else "fog"
            if tier == "cloud":
                nodes.append(ComputeNode(f"c{k}", "cloud", float(rng.integers(2, 9)),
                                         float(rng.choice([0.1, 0.5])), float(rng.choice([1.0, 0.75]))))
            else:
                nodes.append(ComputeNode(f"f{k}", "fog", float(rng.integers(2, 6)),
                                         float(rng.choice([3.0, 6.0])), float(rng.choice([1.0, 0.75]))))
        devices = [f"d{k}" for k in range(int(rng.integers(1, 3)))]
        links = []
        for a in range(n_nodes):
            for b in range(a + 1, n_nodes):
                if rng.random() < 0.9:
                    na, nb = nodes[a], nodes[b]
                    links.append(Link((na.node_id, nb.node_id), link_class(na.tier, nb.tier),
                                      float(rng.choice([0.7, 1.5, 100.0])),
                                      float(rng.choice([0.1, 1.0, 4.0])),
                                      float(rng.uniform(0.5, 30.0))))
        for d in devices:
            for n in nodes:
                if rng.random() < 0.9:
                    links.append(Link((d, n.node_id), link_class("iot", n.tier),
                                      float(rng.choice([1.5, 54.0])),
                                      float(rng.choice([1.0, 4.0])),
                                      float(rng.uniform(1.0, 30.0))))
        n_types = int(rng.integers(2, 6))
        catalog = [
            VnfType(f"t{k}", float(rng.choice([0.0, 10.0, 100.0])),
                    float(rng.choice([80.0, 160.0, 400.0])), float(rng.integers(1, 4)),
                    int(rng.integers(1, 3)), float(rng.uniform(1, 4)), float(rng.uniform(0, 1)))
            for k in range(n_types)
        ]
        infra = Infrastructure(nodes, links, devices, catalog)
        requests = []
        for r in range(int(rng.integers(1, 3))):
            size = int(rng.integers(2, min(4, n_types) + 1))
            chosen = [catalog[int(i)].type_id for i in rng.permutation(n_types)[:size]]
            dev = [devices[int(rng.integers(len(devices)))]]
            requests.append(Request(f"r{r}", random_tree(rng, chosen),
                                    float(rng.choice([40.0, 80.0])), dev))
        alpha = float(rng.choice([0.0, 0.25, 0.5, 0.75, 1.0]))
        if assignment_space_size(infra, requests) <= max_space:
            return infra, requests, alpha


def close(a: float, b: float, tol: float = 1e-9) -> bool:
    return math.isclose(a, b, rel_tol=tol, abs_tol=tol)
