"""Exact enumeration of the five coupled measures and their identities.

The five models on a weighted multigraph, all enumerable at desk scale:

* Ising: spin vectors weighted by exp(sum_e beta_e * sigma_u * sigma_v).
* Current parity: per-edge classes in {zero, odd, positive-even} with
  weights {1, sinh(beta), cosh(beta) - 1}, restricted to classes whose
  odd edges form an even subgraph.  This is the exact finite-support
  reduction of the sourceless integer-current measure.
* Current trace: the per-edge occupation indicator, obtained by
  marginalizing the parity table.
* FK (random cluster, q=2): edge sets weighted by
  2^{#clusters} * prod (1-e^{-2 beta})^{open} (e^{-2 beta})^{closed}.
* Bernoulli percolation with open probabilities 1 - e^{-beta}.

The central identity: superposing an independent Bernoulli draw on top of
the current trace (edgewise maximum) reproduces FK exactly.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import CapacityError, InvariantViolationError, NotASuperpositionError, ValidationError
from .network import Network, cluster_count, component_labels, cyclomatic_number

MAX_BINARY_CONFIGS = 2**20
MAX_PARITY_CONFIGS = 3**13
MAX_SIGN_BRUTE_EDGES = 25


class SpaceKind(enum.Enum):
    SPIN = "spin"      # one {0,1} digit per vertex, 1 = spin +1
    EDGE = "edge"      # one {0,1} digit per edge, 1 = open
    PARITY = "parity"  # one {0,1,2} digit per edge


class ModelKind(enum.Enum):
    ISING = "ising"
    FK = "fk"
    CURRENT_PARITY = "current-parity"
    CURRENT_TRACE = "current-trace"
    BERNOULLI = "bernoulli"


_SPACE_OF_KIND = {
    ModelKind.ISING: SpaceKind.SPIN,
    ModelKind.FK: SpaceKind.EDGE,
    ModelKind.CURRENT_PARITY: SpaceKind.PARITY,
    ModelKind.CURRENT_TRACE: SpaceKind.EDGE,
    ModelKind.BERNOULLI: SpaceKind.EDGE,
}


@dataclass(frozen=True)
class Space:
    """A configuration space: fixed-length strings over {0,1} or {0,1,2}.

    Configurations are indexed 0..size-1 in ascending lexicographic order
    of the digit string, digit 0 (vertex/edge 0) most significant.
    """

    kind: SpaceKind
    length: int

    @property
    def radix(self) -> int:
        return 3 if self.kind is SpaceKind.PARITY else 2

    @property
    def size(self) -> int:
        return self.radix**self.length

    def digits(self, index: int) -> np.ndarray:
        out = np.empty(self.length, dtype=np.int8)
        r = self.radix
        for j in range(self.length - 1, -1, -1):
            out[j] = index % r
            index //= r
        return out

    def digit_matrix(self) -> np.ndarray:
        """(size, length) matrix of all configurations, rows in index order."""
        r = self.radix
        idx = np.arange(self.size, dtype=np.int64)
        cols = []
        for j in range(self.length):
            power = r ** (self.length - 1 - j)
            cols.append(((idx // power) % r).astype(np.int8))
        if not cols:
            return np.zeros((1, 0), dtype=np.int8)
        return np.stack(cols, axis=1)

    def encode(self, config) -> int:
        digits = np.asarray(config)
        if digits.shape != (self.length,):
            raise ValidationError(f"configuration shape {digits.shape} != ({self.length},)")
        r = self.radix
        index = 0
        for d in digits:
            index = index * r + int(d)
        return index

    def encode_many(self, configs: np.ndarray) -> np.ndarray:
        arr = np.asarray(configs, dtype=np.int64)
        if arr.ndim != 2 or arr.shape[1] != self.length:
            raise ValidationError(f"sample matrix must be (n, {self.length})")
        powers = self.radix ** np.arange(self.length - 1, -1, -1, dtype=np.int64)
        if self.length == 0:
            return np.zeros(len(arr), dtype=np.int64)
        return arr @ powers

    def config_string(self, index: int) -> str:
        return "".join(str(int(d)) for d in self.digits(index))


@dataclass
class FiniteDistribution:
    """Explicit probability table over a finite configuration space.

    ``probs[i]`` is the probability of configuration i; ``z`` is the
    unnormalized weight sum that was divided out.  ``support`` (optional)
    marks configurations that belong to the space at all -- parity tables
    exclude inadmissible classes rather than just zeroing them.
    ``product_p`` is set when the law is a known per-edge product measure.
    """

    space: Space
    probs: np.ndarray
    z: float
    support: np.ndarray | None = None
    product_p: np.ndarray | None = None

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=float)
        if self.probs.shape != (self.space.size,):
            raise ValidationError(
                f"table length {self.probs.shape} != space size {self.space.size}"
            )

    def validate(self, atol: float = 1e-12) -> None:
        if np.any(self.probs < 0):
            raise ValidationError("negative probability in table")
        total = math.fsum(self.probs.tolist())
        if abs(total - 1.0) > atol:
            raise ValidationError(f"probabilities sum to {total!r}, not 1")
        if not (self.z > 0):
            raise ValidationError("normalization constant must be positive")

    def prob_of(self, config) -> float:
        return float(self.probs[self.space.encode(config)])

    def to_csv(self, path: str | Path) -> None:
        """One row per configuration, preceded by a JSON header line.

        Columns: configuration string, probability, unnormalized weight.
        Configurations excluded from the support are omitted.
        """
        header = {
            "Z": float(self.z),
            "space": {"kind": self.space.kind.value, "length": self.space.length},
        }
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(json.dumps(header) + "\n")
            fh.write("config,probability,weight\n")
            for i in range(self.space.size):
                if self.support is not None and not self.support[i]:
                    continue
                p = float(self.probs[i])
                fh.write(f"{self.space.config_string(i)},{p!r},{p * self.z!r}\n")


def _require_same_space(a: FiniteDistribution, b: FiniteDistribution) -> None:
    if a.space != b.space:
        raise ValidationError(f"configuration spaces differ: {a.space} vs {b.space}")


def tv_distance(dist_a: FiniteDistribution, dist_b: FiniteDistribution) -> float:
    """Total variation distance: half the L1 distance between the tables."""
    _require_same_space(dist_a, dist_b)
    diffs = np.abs(dist_a.probs - dist_b.probs)
    return 0.5 * math.fsum(diffs.tolist())


class IsingEnumerator:
    """Cached spin enumeration for one topology.

    Precomputes the per-configuration edge products sigma_u * sigma_v so
    that partition sums and two-point functions under *any* weight vector
    are two matrix operations.  Used both by the exact measures and by the
    jump-process rates, which re-evaluate correlations at every proposal.
    """

    def __init__(self, vertex_count: int, edges: tuple[tuple[int, int], ...]):
        if 2**vertex_count > MAX_BINARY_CONFIGS:
            raise CapacityError(
                f"Ising enumeration needs 2^{vertex_count} configurations "
                f"(limit 2^{int(math.log2(MAX_BINARY_CONFIGS))})"
            )
        self.vertex_count = vertex_count
        self.edges = edges
        n = vertex_count
        idx = np.arange(2**n, dtype=np.int64)
        bits = (idx[:, None] >> np.arange(n - 1, -1, -1)[None, :]) & 1
        self.spins = (2.0 * bits - 1.0)  # (2^n, n), +1 where digit is 1
        cols = []
        for (u, v) in edges:
            cols.append(np.ones(2**n) if u == v else self.spins[:, u] * self.spins[:, v])
        self.edge_products = (
            np.stack(cols, axis=1) if cols else np.zeros((2**n, 0))
        )
        self._signed_cache: dict[int, np.ndarray] = {}

    def weights(self, beta_vec: np.ndarray) -> tuple[np.ndarray, float, float]:
        """Boltzmann weights as (shifted_weights, shift, Z)."""
        energies = self.edge_products @ np.asarray(beta_vec, dtype=float)
        shift = float(energies.max()) if len(energies) else 0.0
        w = np.exp(energies - shift)
        z = math.fsum(w.tolist()) * math.exp(shift)
        return w, shift, z

    def _signed_columns(self, base: int) -> np.ndarray:
        cached = self._signed_cache.get(base)
        if cached is None:
            cached = self.spins * self.spins[:, base : base + 1]
            self._signed_cache[base] = cached
        return cached

    def correlations(self, beta_vec: np.ndarray, base: int) -> np.ndarray:
        """Vector of two-point functions <sigma_base sigma_v> for all v."""
        energies = self.edge_products @ np.asarray(beta_vec, dtype=float)
        w = np.exp(energies - energies.max())
        return (w @ self._signed_columns(base)) / w.sum()

    def two_point(self, beta_vec: np.ndarray, x: int, y: int) -> float:
        if x == y:
            return 1.0
        return float(self.correlations(beta_vec, x)[y])


_ENUM_CACHE: dict[tuple[int, tuple[tuple[int, int], ...]], IsingEnumerator] = {}


def ising_enumerator(net: Network) -> IsingEnumerator:
    key = (net.vertex_count, net.edges)
    enum = _ENUM_CACHE.get(key)
    if enum is None:
        if len(_ENUM_CACHE) > 64:
            _ENUM_CACHE.clear()
        enum = IsingEnumerator(net.vertex_count, net.edges)
        _ENUM_CACHE[key] = enum
    return enum


def _check_edge_capacity(net: Network, what: str) -> None:
    if 2**net.edge_count > MAX_BINARY_CONFIGS:
        raise CapacityError(
            f"{what} enumeration needs 2^{net.edge_count} edge configurations "
            f"(limit 2^{int(math.log2(MAX_BINARY_CONFIGS))})"
        )


def _check_parity_capacity(net: Network) -> None:
    if 3**net.edge_count > MAX_PARITY_CONFIGS:
        raise CapacityError(
            f"parity enumeration needs 3^{net.edge_count} classes (limit 3^13)"
        )


def _ising_table(net: Network) -> FiniteDistribution:
    enum = ising_enumerator(net)
    w, shift, z = enum.weights(net.beta_array)
    total = math.fsum(w.tolist())
    return FiniteDistribution(Space(SpaceKind.SPIN, net.vertex_count), w / total, z)


def _fk_table(net: Network) -> FiniteDistribution:
    _check_edge_capacity(net, "FK")
    m = net.edge_count
    space = Space(SpaceKind.EDGE, m)
    beta = net.beta_array
    with np.errstate(divide="ignore"):
        log_open = np.log(-np.expm1(-2.0 * beta))  # log(1 - e^{-2b}), -inf at b=0
    log_closed = -2.0 * beta
    bits = space.digit_matrix().astype(bool)
    base = np.where(bits, log_open[None, :], log_closed[None, :]).sum(axis=1)
    ks = np.fromiter(
        (cluster_count(net, space.digits(i)) for i in range(space.size)),
        dtype=np.int64,
        count=space.size,
    )
    logw = base + ks * math.log(2.0)
    shift = float(np.max(logw))
    w = np.exp(logw - shift)
    total = math.fsum(w.tolist())
    z = total * math.exp(shift)
    return FiniteDistribution(space, w / total, z)


def _parity_weight_table(net: Network) -> np.ndarray:
    """(edge, class) weights: f(0)=1, f(1)=sinh(beta), f(2)=cosh(beta)-1."""
    beta = net.beta_array
    return np.stack([np.ones_like(beta), np.sinh(beta), np.cosh(beta) - 1.0], axis=1)


def _parity_admissible(net: Network, digits: np.ndarray) -> np.ndarray:
    odd = (digits == 1).astype(np.int64)
    sums = odd @ net.incidence_matrix.T
    return np.all(sums % 2 == 0, axis=1)


def _current_parity_table(net: Network) -> FiniteDistribution:
    _check_parity_capacity(net)
    space = Space(SpaceKind.PARITY, net.edge_count)
    digits = space.digit_matrix()
    admissible = _parity_admissible(net, digits)
    f = _parity_weight_table(net)
    w = np.ones(space.size)
    for j in range(net.edge_count):
        w *= f[j, digits[:, j]]
    w = np.where(admissible, w, 0.0)
    z = math.fsum(w[admissible].tolist())
    return FiniteDistribution(space, w / z, z, support=admissible)


def _current_trace_table(net: Network) -> FiniteDistribution:
    _check_edge_capacity(net, "current trace")
    parity = _current_parity_table(net)
    digits = parity.space.digit_matrix()
    occupied = (digits != 0).astype(np.int64)
    trace_space = Space(SpaceKind.EDGE, net.edge_count)
    trace_idx = trace_space.encode_many(occupied)
    probs = np.bincount(trace_idx, weights=parity.probs, minlength=trace_space.size)
    return FiniteDistribution(trace_space, probs, parity.z)


def bernoulli_probabilities(net: Network) -> np.ndarray:
    """Per-edge open probabilities 1 - e^{-beta} of the companion percolation."""
    return -np.expm1(-net.beta_array)


def _bernoulli_table(net: Network) -> FiniteDistribution:
    _check_edge_capacity(net, "Bernoulli")
    p = bernoulli_probabilities(net)
    probs = np.ones(1)
    for pe in p:
        probs = np.kron(probs, np.array([1.0 - pe, pe]))
    return FiniteDistribution(
        Space(SpaceKind.EDGE, net.edge_count), probs, 1.0, product_p=p
    )


def exact_measure(net: Network, kind: ModelKind) -> FiniteDistribution:
    """Exact probability table of one of the five coupled models.

    The stored Z is the unnormalized weight sum: the Ising partition
    function for ISING, the sourceless-current partition function for
    CURRENT_PARITY and CURRENT_TRACE (the sinh/cosh resummation makes the
    parity weight sum equal the current weight sum), the FK constant for
    FK, and 1 for BERNOULLI.
    """
    if kind is ModelKind.ISING:
        return _ising_table(net)
    if kind is ModelKind.FK:
        return _fk_table(net)
    if kind is ModelKind.CURRENT_PARITY:
        return _current_parity_table(net)
    if kind is ModelKind.CURRENT_TRACE:
        return _current_trace_table(net)
    if kind is ModelKind.BERNOULLI:
        return _bernoulli_table(net)
    raise ValidationError(f"unknown model kind {kind!r}")


def partition_functions(net: Network) -> tuple[float, float, float]:
    """(Z_ising, Z_current, Z_fk) as unnormalized weight sums.

    The spin sum equals 2^{#vertices} times the sourceless-current sum:
    expanding each exp(beta * sigma * sigma) into its power series and
    resumming over spins kills odd-degree terms and leaves a factor 2 per
    vertex.
    """
    z_ising = _ising_table(net).z
    z_current = _current_parity_table(net).z
    z_fk = _fk_table(net).z
    return z_ising, z_current, z_fk


def two_point_exact(net: Network, x: int, y: int) -> float:
    """Spin correlation E[sigma_x sigma_y] under the exact Ising law."""
    if not (0 <= x < net.vertex_count and 0 <= y < net.vertex_count):
        raise ValidationError(f"vertex pair ({x}, {y}) out of range")
    return ising_enumerator(net).two_point(net.beta_array, x, y)


def superpose_max(
    dist_a: FiniteDistribution, dist_b: FiniteDistribution
) -> FiniteDistribution:
    """Law of the edgewise maximum of independent draws from A and B.

    When B is a product measure the mixing is done edge by edge in place,
    never enumerating the product space; otherwise the full product is
    convolved (the max of two {0,1} digits is their bitwise OR).
    """
    if dist_a.space.kind is not SpaceKind.EDGE or dist_b.space.kind is not SpaceKind.EDGE:
        raise ValidationError("superpose_max is defined on edge configuration spaces")
    _require_same_space(dist_a, dist_b)
    m = dist_a.space.length
    if dist_b.product_p is not None:
        probs = dist_a.probs.copy()
        for j in range(m):
            pe = float(dist_b.product_p[j])
            shaped = probs.reshape(2**j, 2, -1)
            closed = shaped[:, 0, :].copy()
            shaped[:, 1, :] += closed * pe
            shaped[:, 0, :] = closed * (1.0 - pe)
        return FiniteDistribution(dist_a.space, probs, 1.0)
    if dist_a.space.size**2 > 2**22:
        raise CapacityError(
            "joint superposition over the product space needs "
            f"{dist_a.space.size}^2 entries; supply a product measure instead"
        )
    idx = np.arange(dist_a.space.size, dtype=np.int64)
    or_index = (idx[:, None] | idx[None, :]).ravel()
    outer = (dist_a.probs[:, None] * dist_b.probs[None, :]).ravel()
    probs = np.zeros(dist_a.space.size)
    np.add.at(probs, or_index, outer)
    return FiniteDistribution(dist_a.space, probs, 1.0)


def admissible_sign_count_brute(net: Network, open_edges) -> int:
    """Count sign choices on open edges leaving every vertex with an even
    number of negative incident edges, by explicit enumeration."""
    w = np.asarray(open_edges)
    open_idx = [i for i in range(net.edge_count) if w[i]]
    o = len(open_idx)
    if o > MAX_SIGN_BRUTE_EDGES:
        raise CapacityError(f"{o} open edges exceeds the sign brute-force limit")
    inc = net.incidence_matrix[:, open_idx]  # self-loops already excluded
    masks = np.arange(2**o, dtype=np.int64)
    neg = ((masks[:, None] >> np.arange(o)[None, :]) & 1).astype(np.int64)
    parities = neg @ inc.T
    return int(np.count_nonzero(np.all(parities % 2 == 0, axis=1)))


def sign_assignment_count(net: Network, open_edges) -> int:
    """Number of admissible sign assignments on an open-edge set.

    Cross-checks the brute-force count against 2^{cyclomatic number} and
    returns the common value; a mismatch is an invariant violation.
    """
    brute = admissible_sign_count_brute(net, open_edges)
    closed_form = 2 ** cyclomatic_number(net, open_edges)
    if brute != closed_form:
        raise InvariantViolationError(
            f"sign count {brute} != 2^cyclomatic {closed_form} for {open_edges}"
        )
    return brute


def color_clusters_exact(net: Network) -> FiniteDistribution:
    """Spin law of fair independent signs on FK clusters.

    Sums, over all edge configurations w, the FK mass of w spread uniformly
    over the 2^{k(w)} spin vectors constant on the clusters of w.
    """
    n = net.vertex_count
    if 2**n > MAX_BINARY_CONFIGS:
        raise CapacityError(
            f"cluster coloring needs a 2^{n} spin table "
            f"(limit 2^{int(math.log2(MAX_BINARY_CONFIGS))})"
        )
    fk = _fk_table(net)
    spin_space = Space(SpaceKind.SPIN, n)
    probs = np.zeros(spin_space.size)
    shifts = n - 1 - np.arange(n)
    for i in range(fk.space.size):
        mass = fk.probs[i]
        if mass == 0.0:
            continue
        labels = component_labels(net, fk.space.digits(i))
        roots = sorted(set(labels))
        k = len(roots)
        root_pos = {r: j for j, r in enumerate(roots)}
        share = mass / 2**k
        for coloring in range(2**k):
            index = 0
            for v in range(n):
                bit = (coloring >> root_pos[labels[v]]) & 1
                index |= bit << shifts[v]
            probs[index] += share
    return FiniteDistribution(spin_space, probs, 1.0)


def reconstruct_trace_law(
    fk: FiniteDistribution, p: np.ndarray
) -> FiniteDistribution:
    """Invert the superposition: find Q with max(Q, Bernoulli(p)) = fk.

    Solves the triangular system ordered by occupied-edge count: for each
    configuration v, fk(v) / prod_{e closed}(1-p_e) equals the sum over
    subsets w of v of Q(w) * prod_{e in v minus w} p_e, and the w = v term
    has coefficient 1.  Negative dust above -1e-9 is clamped to zero;
    anything more negative means fk is not a superposition over these
    Bernoulli probabilities.
    """
    if fk.space.kind is not SpaceKind.EDGE:
        raise ValidationError("trace reconstruction operates on edge-configuration laws")
    m = fk.space.length
    p = np.asarray(p, dtype=float)
    if p.shape != (m,):
        raise ValidationError(f"probability vector shape {p.shape} != ({m},)")
    if np.any(p >= 1.0):
        raise ZeroDivisionError("reconstruction needs every p_e < 1")
    if np.any(p < 0.0):
        raise ValidationError("negative Bernoulli probability")

    size = fk.space.size
    bit_of_edge = 1 << np.arange(m - 1, -1, -1, dtype=np.int64)
    p_of_bit = {int(bit_of_edge[j]): p[j] for j in range(m)}
    # prod of p (resp. 1-p) over the edges inside a mask, by low-bit recursion
    open_prod = np.ones(size)
    closed_of_mask = np.ones(size)
    for v in range(1, size):
        low = v & -v
        open_prod[v] = open_prod[v ^ low] * p_of_bit[low]
        closed_of_mask[v] = closed_of_mask[v ^ low] * (1.0 - p_of_bit[low])
    full = size - 1
    closed_prod = closed_of_mask[full & ~np.arange(size, dtype=np.int64)]

    order = sorted(range(size), key=lambda v: (bin(v).count("1"), v))
    q = np.zeros(size)
    for v in order:
        target = fk.probs[v] / closed_prod[v]
        terms = []
        w = (v - 1) & v
        while True:
            if q[w] != 0.0:
                terms.append(q[w] * open_prod[v & ~w])
            if w == 0:
                break
            w = (w - 1) & v
        # v's own subiteration starts at (v-1)&v so the w = v term is absent
        value = target - math.fsum(terms)
        if value < -1e-9:
            raise NotASuperpositionError(
                f"reconstructed mass {value!r} at configuration "
                f"{fk.space.config_string(v)}; the input law is not a "
                "superposition over these Bernoulli probabilities"
            )
        q[v] = max(value, 0.0)
    return FiniteDistribution(fk.space, q, 1.0)
