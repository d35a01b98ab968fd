"""Standard desk-scale test graphs used across suites and acceptance runs."""

from __future__ import annotations

from .network import Network, Pinning, build_network

HETEROGENEOUS_BASE = (0.25, 0.6, 1.1, 0.45, 0.8, 0.35, 0.95, 0.55, 0.7)


def single_edge(beta=(1.0,), pinned: bool = False) -> Network:
    return _make(2, [(0, 1)], beta, pinned)

def path3(beta=(1.0, 1.0), pinned: bool = False) -> Network:
    return _make(3, [(0, 1), (1, 2)], beta, pinned)

def triangle(beta=(1.0, 1.0, 1.0), pinned: bool = False) -> Network:
    return _make(3, [(0, 1), (1, 2), (2, 0)], beta, pinned)

def cycle4(beta=(1.0,) * 4, pinned: bool = False) -> Network:
    return _make(4, [(0, 1), (1, 2), (2, 3), (3, 0)], beta, pinned)

def two_triangles(beta=(1.0,) * 5, pinned: bool = False) -> Network:
    return _make(4, [(0, 1), (1, 2), (2, 0), (1, 3), (2, 3)], beta, pinned)

def one_vertex(conductance: float = 2.0) -> Network:
    return Network(1, (), (), Pinning(0, conductance))


_SHAPES = {
    "single-edge": (single_edge, 1),
    "path3": (path3, 2),
    "triangle": (triangle, 3),
    "cycle4": (cycle4, 4),
    "two-triangles": (two_triangles, 5),
}


def _make(n, edges, beta, pinned) -> Network:
    spec = {"vertices": n, "edges": [list(e) for e in edges], "beta": list(beta)}
    if pinned:
        spec["pinning"] = {"vertex": 0, "conductance": 2.0}
    return build_network(spec)


def standard_battery(pinned: bool = False) -> list[tuple[str, Network]]:
    """Every shape with uniform weights 0.3 and 1.0 plus one heterogeneous
    assignment; the identity checks must hold on all of them."""
    nets = []
    for name, (maker, m) in _SHAPES.items():
        for label, beta in (
            ("b0.3", (0.3,) * m),
            ("b1.0", (1.0,) * m),
            ("hetero", HETEROGENEOUS_BASE[:m]),
        ):
            nets.append((f"{name}/{label}", maker(beta, pinned)))
    return nets
