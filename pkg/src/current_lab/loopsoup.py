"""Random-walk loop soup on the network, with killing through the pinning.

The soup is Poissonian over unrooted discrete loops of the killed jump
walk (rates = edge weights, killing = pinning conductance; self-loop edges
carry no rate because they contribute nothing to the field's quadratic
form).  Each sampled loop is decorated with independent exponential
holding times, and every vertex additionally receives the trivial-loop
occupation, a Gamma(intensity, rate) field.

At intensity 1/2 the total occupation field is distributed like half the
squared pinned Gaussian field, which is the identity every convention
constant here is validated against.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import CapacityError, TruncationError, ValidationError
from .gff import precision_matrix
from .network import Network, components
from .sampling import SeedSpec

DEFAULT_CUTOFF = 24
DEFAULT_TRUNCATION_TOL = 1e-3
MAX_WALK_EXPANSIONS = 2_000_000


@dataclass(frozen=True)
class LoopSkeleton:
    """Unrooted discrete loop: representative rotation of its step cycle.

    ``vertices[i]`` is the i-th visited vertex, left via ``edges[i]``; the
    walk returns to ``vertices[0]`` after the last step.  ``poisson_mean``
    is the intensity-scaled measure mass of the whole rotation class.
    """

    vertices: tuple[int, ...]
    edges: tuple[int, ...]
    poisson_mean: float

    @property
    def length(self) -> int:
        return len(self.vertices)


@dataclass
class LoopDraw:
    skeleton: LoopSkeleton
    multiplicity: int
    holding: np.ndarray  # (multiplicity, length), exponential visit times


@dataclass
class LoopEnsemble:
    """One soup draw: decorated loops plus the trivial-loop occupation."""

    net: Network
    alpha: float
    cutoff: int
    loops: list[LoopDraw]
    trivial_occupation: np.ndarray
    truncation_bound: float


def holding_rates(net: Network) -> np.ndarray:
    """Total incident conductance per vertex (pinning included, self-loops
    excluded): the exponential holding rate and the killed-walk row sums."""
    return np.diag(precision_matrix(net)).copy()


def _killed_transitions(net: Network, rates: np.ndarray):
    """Per-vertex list of (edge, other endpoint, step probability)."""
    trans: list[list[tuple[int, int, float]]] = [[] for _ in range(net.vertex_count)]
    for e, ((u, v), b) in enumerate(zip(net.edges, net.beta)):
        if u == v or b <= 0:
            continue
        trans[u].append((e, v, b / rates[u]))
        trans[v].append((e, u, b / rates[v]))
    return trans


def spectral_radius(net: Network) -> float:
    """Spectral radius of the killed transition matrix (symmetrized form)."""
    rates = holding_rates(net)
    if np.any(rates <= 0):
        raise ValidationError(
            "vertex with zero holding rate: add edges or pin that vertex"
        )
    n = net.vertex_count
    adj = np.zeros((n, n))
    for (u, v), b in zip(net.edges, net.beta):
        if u != v:
            adj[u, v] += b
            adj[v, u] += b
    scale = 1.0 / np.sqrt(rates)
    sym = adj * scale[:, None] * scale[None, :]
    if not np.any(adj):
        return 0.0
    eigs = np.linalg.eigvalsh(sym)
    return float(np.max(np.abs(eigs)))


def truncation_bound(net: Network, alpha: float, cutoff: int) -> float:
    """Certified upper bound on the neglected loop mass beyond the cutoff:
    alpha * |X| * rho^L / (L * (1 - rho))."""
    rho = spectral_radius(net)
    if rho >= 1.0 - 1e-12:
        raise ValidationError(
            "killed walk is not strictly subcritical; a positive pinning "
            "conductance is required"
        )
    if rho == 0.0:
        return 0.0
    return alpha * net.vertex_count * rho**cutoff / (cutoff * (1.0 - rho))


def _estimate_expansions(net: Network, cutoff: int) -> float:
    """Walk-prefix count of the enumeration, via powers of the step-count
    matrix; cheap enough to reject oversized catalogs before any search."""
    n = net.vertex_count
    steps = np.zeros((n, n))
    for (u, v), b in zip(net.edges, net.beta):
        if u != v and b > 0:
            steps[u, v] += 1
            steps[v, u] += 1
    total = 0.0
    cur = np.ones(n)
    for _ in range(cutoff):
        cur = steps @ cur
        total += cur.sum()
        if total > 1e15:
            break
    return total


class LoopCatalog:
    """All unrooted loop classes up to the cutoff, with their measure mass.

    Enumerates rooted closed walks by depth-first search and merges
    rotation classes on their lexicographically smallest rotation; each
    rooted representative contributes (step-probability product)/length,
    so a class of R distinct rotations accumulates R * P / length.
    """

    def __init__(self, net: Network, cutoff: int):
        if cutoff < 2:
            raise ValidationError("cutoff must allow loops of at least 2 jumps")
        estimate = _estimate_expansions(net, cutoff)
        if estimate > MAX_WALK_EXPANSIONS:
            raise CapacityError(
                f"loop enumeration would visit ~{estimate:.2e} walk prefixes at "
                f"cutoff {cutoff} (limit {MAX_WALK_EXPANSIONS}); lower the cutoff"
            )
        self.net = net
        self.cutoff = cutoff
        self.rates = holding_rates(net)
        trans = _killed_transitions(net, self.rates)
        record: dict[tuple, list] = {}
        expansions = 0

        def dfs(vertex: int, start: int, depth: int, prob: float, steps: list):
            nonlocal expansions
            for edge, other, p in trans[vertex]:
                expansions += 1
                if expansions > MAX_WALK_EXPANSIONS:
                    raise CapacityError(
                        f"loop enumeration exceeded {MAX_WALK_EXPANSIONS} walk "
                        f"expansions at cutoff {cutoff}; lower the cutoff"
                    )
                steps.append((vertex, edge))
                next_prob = prob * p
                next_depth = depth + 1
                if other == start and next_depth >= 2:
                    key = _canonical_rotation(steps)
                    entry = record.get(key)
                    if entry is None:
                        record[key] = [next_prob / next_depth]
                    else:
                        entry[0] += next_prob / next_depth
                if next_depth < cutoff:
                    dfs(other, start, next_depth, next_prob, steps)
                steps.pop()

        for start in range(net.vertex_count):
            dfs(start, start, 0, 1.0, [])

        self.keys = sorted(record)
        self.masses = np.array([record[k][0] for k in self.keys])
        self.vertex_seqs = [tuple(v for v, _ in key) for key in self.keys]
        self.edge_seqs = [tuple(e for _, e in key) for key in self.keys]
        n, m = net.vertex_count, net.edge_count
        self.visits = np.zeros((len(self.keys), n), dtype=np.int64)
        self.crossings = np.zeros((len(self.keys), m), dtype=np.int64)
        for i, key in enumerate(self.keys):
            for v, e in key:
                self.visits[i, v] += 1
                self.crossings[i, e] += 1

    @property
    def size(self) -> int:
        return len(self.keys)


def _canonical_rotation(steps: list) -> tuple:
    base = tuple(steps)
    n = len(base)
    doubled = base + base
    best = base
    for shift in range(1, n):
        rot = doubled[shift : shift + n]
        if rot < best:
            best = rot
    return best


_CATALOG_CACHE: dict[tuple, LoopCatalog] = {}


def loop_catalog(net: Network, cutoff: int) -> LoopCatalog:
    key = (net.vertex_count, net.edges, net.beta, net.pinning, cutoff)
    cat = _CATALOG_CACHE.get(key)
    if cat is None:
        if len(_CATALOG_CACHE) > 16:
            _CATALOG_CACHE.clear()
        cat = LoopCatalog(net, cutoff)
        _CATALOG_CACHE[key] = cat
    return cat


def sample_soup(
    net: Network,
    alpha: float,
    cutoff: int = DEFAULT_CUTOFF,
    seed: SeedSpec = SeedSpec(0, 0),
    truncation_tol: float = DEFAULT_TRUNCATION_TOL,
) -> LoopEnsemble:
    """One decorated soup draw with its certified truncation bound.

    Draw order per seed: Poisson multiplicities over the catalog in key
    order, then holding times per surviving class, then the trivial-loop
    Gamma field, so a fixed seed reproduces the ensemble byte for byte.
    """
    if alpha < 0:
        raise ValidationError("intensity must be nonnegative")
    bound = truncation_bound(net, alpha, cutoff)
    if bound > truncation_tol:
        raise TruncationError(
            f"neglected loop mass bound {bound:.3e} exceeds tolerance "
            f"{truncation_tol:.3e}; increase the cutoff"
        )
    rng = seed.rng()
    rates = holding_rates(net)
    if alpha == 0.0:
        return LoopEnsemble(net, alpha, cutoff, [], np.zeros(net.vertex_count), bound)
    catalog = loop_catalog(net, cutoff)
    loops: list[LoopDraw] = []
    if catalog.size:
        counts = rng.poisson(alpha * catalog.masses)
        for i in np.nonzero(counts)[0]:
            verts = catalog.vertex_seqs[i]
            mult = int(counts[i])
            scale = 1.0 / rates[list(verts)]
            holding = rng.exponential(scale=np.tile(scale, (mult, 1)))
            skel = LoopSkeleton(verts, catalog.edge_seqs[i], float(alpha * catalog.masses[i]))
            loops.append(LoopDraw(skel, mult, holding))
    trivial = rng.gamma(shape=alpha, scale=1.0 / rates)
    return LoopEnsemble(net, alpha, cutoff, loops, trivial, bound)


def fields(ens: LoopEnsemble) -> tuple[np.ndarray, np.ndarray]:
    """(occupation, crossings) of an ensemble: holding-time sums plus the
    trivial occupation, and traversal counts per unoriented edge."""
    occupation = ens.trivial_occupation.astype(float).copy()
    crossings = np.zeros(ens.net.edge_count, dtype=np.int64)
    for draw in ens.loops:
        per_visit = draw.holding.sum(axis=0)
        for i, v in enumerate(draw.skeleton.vertices):
            occupation[v] += per_visit[i]
        for e in draw.skeleton.edges:
            crossings[e] += draw.multiplicity
    return occupation, crossings


def sample_fields_bulk(
    net: Network,
    alpha: float,
    cutoff: int,
    seed: SeedSpec,
    size: int,
    truncation_tol: float = DEFAULT_TRUNCATION_TOL,
) -> tuple[np.ndarray, np.ndarray, float]:
    """(occupation, crossings, bound) for many independent soup draws.

    Exploits that, conditionally on the loop multiplicities, the occupation
    at a vertex is a Gamma variable whose shape is the intensity plus the
    total visit count there (a sum of same-rate exponentials and the
    trivial Gamma field), which collapses each replica to one Poisson
    vector and one Gamma vector.  The joint law of (occupation, crossings)
    is exactly that of `fields(sample_soup(...))`.
    """
    bound = truncation_bound(net, alpha, cutoff)
    if bound > truncation_tol:
        raise TruncationError(
            f"neglected loop mass bound {bound:.3e} exceeds tolerance "
            f"{truncation_tol:.3e}; increase the cutoff"
        )
    rng = seed.rng()
    rates = holding_rates(net)
    n, m = net.vertex_count, net.edge_count
    if alpha == 0.0:
        return np.zeros((size, n)), np.zeros((size, m), dtype=np.int64), bound
    catalog = loop_catalog(net, cutoff)
    if catalog.size:
        counts = rng.poisson(alpha * catalog.masses, size=(size, catalog.size))
        visit_totals = counts @ catalog.visits
        crossings = counts @ catalog.crossings
    else:
        visit_totals = np.zeros((size, n), dtype=np.int64)
        crossings = np.zeros((size, m), dtype=np.int64)
    occupation = rng.gamma(shape=alpha + visit_totals, scale=1.0 / rates[None, :])
    return occupation, crossings, bound


def occupation_magnitudes(occupation: np.ndarray) -> np.ndarray:
    """Field-magnitude scale of an occupation field: u = sqrt(2 * occ),
    aligning occupation = h^2 / 2 with u = |h|."""
    return np.sqrt(2.0 * np.asarray(occupation, dtype=float))


def bridge_probabilities(net: Network, u) -> np.ndarray:
    """Per-edge bridging probability 1 - exp(-beta_e u_x u_y) at magnitude
    field u; at u = 1 everywhere this is the companion Bernoulli law."""
    u = np.asarray(u, dtype=float)
    if u.shape != (net.vertex_count,):
        raise ValidationError(f"magnitude vector shape {u.shape} != ({net.vertex_count},)")
    if np.any(u < 0):
        raise ValidationError("magnitudes must be nonnegative")
    w = np.array([b * u[x] * u[y] for (x, y), b in zip(net.edges, net.beta)])
    return -np.expm1(-w)


def sample_bridges(net: Network, u, seed: SeedSpec) -> np.ndarray:
    """Independent per-edge bridge bits at magnitude field u."""
    rng = seed.rng()
    return (rng.random(net.edge_count) < bridge_probabilities(net, u)).astype(np.int64)


def cable_clusters(net: Network, crossings, bridges) -> list[list[int]]:
    """Clusters of the superposition: edges open when crossed or bridged."""
    crossings = np.asarray(crossings)
    bridges = np.asarray(bridges)
    if crossings.shape != (net.edge_count,) or bridges.shape != (net.edge_count,):
        raise ValidationError("crossings/bridges must be per-edge vectors")
    open_edges = (crossings > 0) | (bridges > 0)
    clusters, _ = components(net, open_edges.astype(np.int64))
    return clusters


def dump_ensemble_jsonl(path: str | Path, ens: LoopEnsemble) -> None:
    """One loop per line; a final line carries the trivial occupation."""
    with open(path, "w", encoding="utf-8") as fh:
        for draw in ens.loops:
            fh.write(json.dumps({
                "vertices": list(draw.skeleton.vertices),
                "edges": list(draw.skeleton.edges),
                "poisson_mean": draw.skeleton.poisson_mean,
                "multiplicity": draw.multiplicity,
                "holding": [[float(t) for t in row] for row in draw.holding],
            }) + "\n")
        fh.write(json.dumps({
            "trivial_occupation": [float(t) for t in ens.trivial_occupation],
            "alpha": ens.alpha,
            "cutoff": ens.cutoff,
            "truncation_bound": ens.truncation_bound,
        }) + "\n")
