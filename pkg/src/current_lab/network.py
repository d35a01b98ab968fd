"""Finite weighted multigraphs and their combinatorial primitives.

A network is a finite multigraph with nonnegative edge weights (couplings),
optionally pinned to an implicit boundary vertex through a single
(vertex, conductance) attachment.  Edge identity is positional: parallel
edges and self-loops are first-class, so every per-edge configuration is a
vector indexed by edge position.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class Pinning:
    """Attachment of one vertex to the implicit boundary vertex."""

    vertex: int
    conductance: float


@dataclass(frozen=True)
class Network:
    """Immutable weighted multigraph.

    ``edges[i]`` is the (u, v) pair of edge i, ``beta[i]`` its weight.
    Self-loops (u == v) are allowed.  The boundary vertex is implicit:
    only the pinning pair is stored, so all configuration spaces stay
    indexed by the listed vertices and edges.
    """

    vertex_count: int
    edges: tuple[tuple[int, int], ...]
    beta: tuple[float, ...]
    pinning: Pinning | None = None

    def __post_init__(self):
        if self.vertex_count < 1:
            raise ValidationError("network needs at least one vertex")
        if len(self.edges) != len(self.beta):
            raise ValidationError(
                f"edge list has {len(self.edges)} entries but weight list has {len(self.beta)}"
            )
        for i, (u, v) in enumerate(self.edges):
            if not (0 <= u < self.vertex_count and 0 <= v < self.vertex_count):
                raise ValidationError(f"edge {i} endpoint out of range: ({u}, {v})")
        for i, b in enumerate(self.beta):
            if not np.isfinite(b) or b < 0:
                raise ValidationError(f"edge {i} has invalid weight {b} (must be finite and >= 0)")
        if self.pinning is not None:
            if not (0 <= self.pinning.vertex < self.vertex_count):
                raise ValidationError(f"pinning vertex {self.pinning.vertex} out of range")
            if not np.isfinite(self.pinning.conductance) or self.pinning.conductance < 0:
                raise ValidationError("pinning conductance must be finite and >= 0")

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    @cached_property
    def beta_array(self) -> np.ndarray:
        a = np.asarray(self.beta, dtype=float)
        a.setflags(write=False)
        return a

    @cached_property
    def is_self_loop(self) -> np.ndarray:
        a = np.array([u == v for u, v in self.edges], dtype=bool)
        a.setflags(write=False)
        return a

    @cached_property
    def incident_edges(self) -> tuple[tuple[int, ...], ...]:
        """Edge indices incident to each vertex (self-loops listed once)."""
        inc: list[list[int]] = [[] for _ in range(self.vertex_count)]
        for i, (u, v) in enumerate(self.edges):
            inc[u].append(i)
            if v != u:
                inc[v].append(i)
        return tuple(tuple(x) for x in inc)

    @cached_property
    def incidence_matrix(self) -> np.ndarray:
        """GF(2)-style incidence: M[x, e] = 1 iff e is a non-loop edge at x.

        Self-loops contribute twice to every incidence sum, so they never
        affect a parity and are left out of this matrix.
        """
        m = np.zeros((self.vertex_count, self.edge_count), dtype=np.int64)
        for i, (u, v) in enumerate(self.edges):
            if u != v:
                m[u, i] = 1
                m[v, i] = 1
        m.setflags(write=False)
        return m

    def with_weights(self, beta) -> "Network":
        """Same topology and pinning, new weights (no connectivity re-check)."""
        return Network(self.vertex_count, self.edges, tuple(float(b) for b in beta), self.pinning)

    def to_json_dict(self) -> dict:
        pin = None
        if self.pinning is not None:
            pin = {"vertex": self.pinning.vertex, "conductance": self.pinning.conductance}
        return {
            "vertices": self.vertex_count,
            "edges": [[u, v] for u, v in self.edges],
            "beta": list(self.beta),
            "pinning": pin,
        }


def build_network(spec: dict) -> Network:
    """Validate a structured description and return a Network.

    The description follows the on-disk JSON schema:
    ``{"vertices": n, "edges": [[u, v], ...], "beta": [...],
    "pinning": {"vertex": i, "conductance": c} | null}``.

    Beyond the structural checks, the subgraph of positive-weight edges
    must be connected on the full vertex set.
    """
    if not isinstance(spec, dict):
        raise ValidationError("network description must be a mapping")
    missing = {"vertices", "edges", "beta"} - spec.keys()
    if missing:
        raise ValidationError(f"network description missing field(s): {sorted(missing)}")
    try:
        n = int(spec["vertices"])
        edges = tuple((int(u), int(v)) for u, v in spec["edges"])
        beta = tuple(float(b) for b in spec["beta"])
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"malformed network description: {exc}") from exc
    pin = None
    raw_pin = spec.get("pinning")
    if raw_pin is not None:
        if not isinstance(raw_pin, dict) or {"vertex", "conductance"} - raw_pin.keys():
            raise ValidationError("pinning must be {'vertex': i, 'conductance': c} or null")
        pin = Pinning(int(raw_pin["vertex"]), float(raw_pin["conductance"]))
    net = Network(n, edges, beta, pin)

    open_edges = np.array([b > 0 for b in beta], dtype=bool)
    clusters, k = components(net, open_edges)
    if k > 1:
        isolated = min((c for c in clusters), key=lambda c: (len(c), c))
        raise ValidationError(
            f"disconnected: component {sorted(isolated)} is not joined to the rest "
            "by positive-weight edges"
        )
    return net


def load_network(path: str | Path) -> Network:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            spec = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid JSON ({exc})") from exc
    return build_network(spec)


def save_network(net: Network, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(net.to_json_dict(), fh, indent=2)
        fh.write("\n")


class UnionFind:
    """Union-find with path compression and deterministic smallest-id roots.

    Always parenting the larger root under the smaller one makes the final
    labelling (and thus every emitted partition) reproducible regardless of
    union order.
    """

    def __init__(self, size: int):
        self.parent = list(range(size))

    def find(self, a: int) -> int:
        root = a
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[a] != root:
            self.parent[a], a = root, self.parent[a]
        return root

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        if rb < ra:
            ra, rb = rb, ra
        self.parent[rb] = ra

    def labels(self) -> list[int]:
        return [self.find(i) for i in range(len(self.parent))]


def _check_edge_vector(net: Network, w, name: str) -> np.ndarray:
    arr = np.asarray(w)
    if arr.shape != (net.edge_count,):
        raise ValidationError(
            f"{name} has shape {arr.shape}, expected ({net.edge_count},) for this network"
        )
    return arr


def component_labels(net: Network, open_edges) -> list[int]:
    """Cluster label (smallest member id) per vertex for an open-edge set."""
    w = _check_edge_vector(net, open_edges, "edge configuration")
    uf = UnionFind(net.vertex_count)
    for i, (u, v) in enumerate(net.edges):
        if w[i]:
            uf.union(u, v)
    return uf.labels()


def components(net: Network, open_edges) -> tuple[list[list[int]], int]:
    """Partition vertices into open-edge clusters; returns (clusters, count).

    Clusters are sorted lists, ordered by their smallest member, so the
    partition is byte-for-byte reproducible.
    """
    labels = component_labels(net, open_edges)
    groups: dict[int, list[int]] = {}
    for v, r in enumerate(labels):
        groups.setdefault(r, []).append(v)
    clusters = [groups[r] for r in sorted(groups)]
    return clusters, len(clusters)


def cluster_count(net: Network, open_edges) -> int:
    labels = component_labels(net, open_edges)
    return len(set(labels))


def cyclomatic_number(net: Network, open_edges) -> int:
    """Independent cycles of the open subgraph: open + clusters - vertices."""
    w = _check_edge_vector(net, open_edges, "edge configuration")
    o = int(np.count_nonzero(w))
    k = cluster_count(net, w)
    c = o + k - net.vertex_count
    assert c >= 0
    return c


def incidence_parity_check(net: Network, vector, mode: str = "current") -> bool:
    """True iff every vertex sees an even incidence sum.

    mode="current": entries are nonnegative integers; the sum of entries
    over incident edges must be even at each vertex, a self-loop counting
    its entry twice (so it can never break parity).

    mode="signed": entries are in {-1, 0, +1}; the count of incident
    negative edges must be even at each vertex, self-loops again counting
    twice.
    """
    arr = _check_edge_vector(net, vector, "edge vector")
    if mode == "current":
        if np.any(arr < 0) or not np.issubdtype(np.asarray(arr).dtype, np.integer):
            raise ValidationError("current mode expects nonnegative integer entries")
        contrib = arr.astype(np.int64)
    elif mode == "signed":
        if not np.all(np.isin(arr, (-1, 0, 1))):
            raise ValidationError("signed mode expects entries in {-1, 0, +1}")
        contrib = (arr == -1).astype(np.int64)
    else:
        raise ValidationError(f"unknown parity mode {mode!r}")
    sums = net.incidence_matrix @ contrib
    return bool(np.all(sums % 2 == 0))
