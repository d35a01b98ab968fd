"""Seeded Monte Carlo samplers for the five models.

Exact-table sampling uses the alias method over an enumerated table;
Markov-chain sampling exists for spins (single-site heat bath) and for FK
(heat-bath spins opened through the Edwards-Sokal conditional).  Full
integer currents are drawn by sampling the parity class exactly and then
completing each edge magnitude from its truncated factorial series.

Streams are counter-based (Philox keyed by master seed and stream id), so
any replica's draw sequence is reproducible independently of scheduling.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import UnsupportedMethodError, ValidationError
from .exact import (
    FiniteDistribution,
    ModelKind,
    Space,
    SpaceKind,
    bernoulli_probabilities,
    exact_measure,
)
from .network import Network, incidence_parity_check
from .stats import empirical_tv, multinomial_zscores, two_sided_threshold

MAGNITUDE_TAIL = 1e-15
MAGNITUDE_MAX_N = 80


@dataclass(frozen=True)
class SeedSpec:
    """Master seed plus stream id; distinct pairs are independent streams."""

    master: int
    stream: int = 0

    def rng(self) -> np.random.Generator:
        key = np.array([self.master % 2**64, self.stream % 2**64], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))

    def child(self, offset: int) -> "SeedSpec":
        return SeedSpec(self.master, self.stream + offset)


class AliasSampler:
    """Vose alias method over an explicit probability table.

    Construction is deterministic (index-ordered worklists), draws are O(1).
    """

    def __init__(self, probs: np.ndarray):
        probs = np.asarray(probs, dtype=float)
        n = len(probs)
        total = probs.sum()
        if not (total > 0):
            raise ValidationError("alias table needs positive total mass")
        scaled = probs * (n / total)
        self.alias = np.zeros(n, dtype=np.int64)
        self.accept = np.ones(n)
        small = [i for i in range(n) if scaled[i] < 1.0]
        large = [i for i in range(n) if scaled[i] >= 1.0]
        small.reverse()
        large.reverse()
        while small and large:
            s = small.pop()
            l = large.pop()
            self.accept[s] = scaled[s]
            self.alias[s] = l
            scaled[l] = (scaled[l] + scaled[s]) - 1.0
            if scaled[l] < 1.0:
                small.append(l)
            else:
                large.append(l)
        # leftovers are 1 up to rounding
        self.n = n

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        slots = rng.integers(0, self.n, size=size)
        keep = rng.random(size) < self.accept[slots]
        return np.where(keep, slots, self.alias[slots])


class ExactTableSampler:
    """Bulk sampler for an enumerated law; decodes indices to configurations."""

    def __init__(self, dist: FiniteDistribution):
        self.dist = dist
        self.space = dist.space
        self._alias = AliasSampler(dist.probs)

    def sample_indices(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return self._alias.sample(rng, size)

    def sample_configs(self, rng: np.random.Generator, size: int) -> np.ndarray:
        idx = self.sample_indices(rng, size)
        return decode_indices(self.space, idx)


def decode_indices(space: Space, indices: np.ndarray) -> np.ndarray:
    idx = np.asarray(indices, dtype=np.int64)
    out = np.empty((len(idx), space.length), dtype=np.int64)
    r = space.radix
    for j in range(space.length):
        power = r ** (space.length - 1 - j)
        out[:, j] = (idx // power) % r
    return out


def _magnitude_table(beta: float, parity: int) -> tuple[np.ndarray, np.ndarray]:
    """Support and probabilities of N given its parity class, truncated when
    the remaining factorial tail is below MAGNITUDE_TAIL of the total."""
    if parity == 0:
        return np.array([0]), np.array([1.0])
    start = 1 if parity == 1 else 2
    ns, terms = [], []
    term = beta**start
    for k in range(2, start + 1):
        term /= k
    n = start
    while n <= MAGNITUDE_MAX_N:
        ns.append(n)
        terms.append(term)
        term *= beta * beta / ((n + 1) * (n + 2))
        n += 2
        if terms[-1] > 0 and term < MAGNITUDE_TAIL * sum(terms):
            break
    terms = np.asarray(terms)
    total = terms.sum()
    if not (total > 0):
        raise ValidationError(
            f"magnitude class {parity} has zero mass at beta={beta} (is beta 0?)"
        )
    return np.asarray(ns, dtype=np.int64), terms / total


class CurrentSampler:
    """Exact sourceless-current sampler: parity table + magnitude completion."""

    def __init__(self, net: Network):
        self.net = net
        self.parity = exact_measure(net, ModelKind.CURRENT_PARITY)
        self._parity_alias = ExactTableSampler(self.parity)
        self._tables = []
        for beta in net.beta:
            per_edge = {}
            for parity in (0, 1, 2):
                try:
                    per_edge[parity] = _magnitude_table(beta, parity)
                except ValidationError:
                    per_edge[parity] = None  # class has zero mass at this weight
            self._tables.append(per_edge)

    def complete_magnitudes(
        self, parity_configs: np.ndarray, rng: np.random.Generator
    ) -> np.ndarray:
        """Conditional integer currents for sampled parity classes."""
        parity_configs = np.atleast_2d(parity_configs)
        n, m = parity_configs.shape
        out = np.zeros((n, m), dtype=np.int64)
        for j in range(m):
            col = parity_configs[:, j]
            for parity in (1, 2):
                mask = col == parity
                if not np.any(mask):
                    continue
                table = self._tables[j][parity]
                if table is None:
                    raise ValidationError(
                        f"edge {j}: parity class {parity} is impossible at this weight"
                    )
                ns, probs = table
                picks = rng.choice(len(ns), size=int(mask.sum()), p=probs)
                out[mask, j] = ns[picks]
        return out

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        parity = self._parity_alias.sample_configs(rng, size)
        return self.complete_magnitudes(parity, rng)


def _heat_bath_sweeps(
    net: Network, spins: np.ndarray, sweeps: int, rng: np.random.Generator
) -> None:
    """In-place single-site heat-bath updates, vertices in index order."""
    neighbors: list[list[tuple[int, float]]] = [[] for _ in range(net.vertex_count)]
    for (u, v), b in zip(net.edges, net.beta):
        if u != v:
            neighbors[u].append((v, b))
            neighbors[v].append((u, b))
    for _ in range(sweeps):
        us = rng.random(net.vertex_count)
        for x in range(net.vertex_count):
            h = sum(b * spins[y] for y, b in neighbors[x])
            p_up = 1.0 / (1.0 + np.exp(-2.0 * h))
            spins[x] = 1 if us[x] < p_up else -1


def edwards_sokal_edges(
    net: Network, spins: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Open agreeing edges with probability 1 - e^{-2 beta} given the spins."""
    agree = np.array(
        [spins[u] == spins[v] for (u, v) in net.edges], dtype=bool
    )
    p_open = -np.expm1(-2.0 * net.beta_array)
    return ((rng.random(net.edge_count) < p_open) & agree).astype(np.int64)


def color_clusters(
    net: Network, open_edges: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Fair independent sign per open cluster (Edwards-Sokal recoloring)."""
    from .network import component_labels

    labels = component_labels(net, open_edges)
    roots = sorted(set(labels))
    signs = {r: (1 if rng.random() < 0.5 else -1) for r in roots}
    return np.array([signs[labels[v]] for v in range(net.vertex_count)], dtype=np.int64)


def default_chain_params(net: Network) -> dict:
    return {"burn_in": 1000 * net.vertex_count, "thinning": net.vertex_count}


class ChainSampler:
    """Heat-bath Markov chain emitting spin or FK configurations."""

    def __init__(self, net: Network, kind: ModelKind, seed: SeedSpec,
                 burn_in: int | None = None, thinning: int | None = None):
        if kind not in (ModelKind.ISING, ModelKind.FK):
            raise UnsupportedMethodError(
                f"markov-chain sampling is not available for {kind.value}; "
                "use exact-table sampling or the jump-process module"
            )
        defaults = default_chain_params(net)
        self.net = net
        self.kind = kind
        self.burn_in = defaults["burn_in"] if burn_in is None else int(burn_in)
        self.thinning = defaults["thinning"] if thinning is None else int(thinning)
        self.rng = seed.rng()
        self.spins = np.where(self.rng.random(net.vertex_count) < 0.5, 1, -1).astype(np.int64)
        _heat_bath_sweeps(net, self.spins, self.burn_in, self.rng)

    def draw(self) -> np.ndarray:
        _heat_bath_sweeps(self.net, self.spins, self.thinning, self.rng)
        if self.kind is ModelKind.ISING:
            return self.spins.copy()
        return edwards_sokal_edges(self.net, self.spins, self.rng)

    def draw_many(self, size: int) -> np.ndarray:
        return np.stack([self.draw() for _ in range(size)])

    def params(self) -> dict:
        return {"burn_in": self.burn_in, "thinning": self.thinning,
                "kind": self.kind.value}


def _spins_from_digits(digits: np.ndarray) -> np.ndarray:
    return 2 * digits.astype(np.int64) - 1


def sample_configuration(
    net: Network,
    kind: ModelKind,
    seed: SeedSpec,
    method: str = "exact-table",
    burn_in: int | None = None,
    thinning: int | None = None,
) -> np.ndarray:
    """One configuration from the requested law.

    exact-table draws from the enumerated measure (spins are returned as
    +-1, edge models as 0/1 vectors, and CURRENT_PARITY as a *completed*
    integer current, the parity class sampled exactly and the magnitudes
    filled from their conditional factorial series).  markov-chain runs the
    heat-bath chain and exists for ISING and FK only.
    """
    if method == "markov-chain":
        chain = ChainSampler(net, kind, seed, burn_in, thinning)
        return chain.draw()
    if method != "exact-table":
        raise UnsupportedMethodError(f"unknown sampling method {method!r}")
    rng = seed.rng()
    if kind is ModelKind.CURRENT_PARITY:
        return CurrentSampler(net).sample(rng, 1)[0]
    dist = exact_measure(net, kind)
    config = ExactTableSampler(dist).sample_configs(rng, 1)[0]
    if kind is ModelKind.ISING:
        return _spins_from_digits(config)
    return config


def coupled_fk_sample(
    net: Network, seed: SeedSpec, current: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """One coupled draw (N, xi, V): exact current, independent Bernoulli,
    and their superposition V_e = 1{N_e > 0 or xi_e = 1}."""
    rng = seed.rng()
    if current is None:
        current = CurrentSampler(net).sample(rng, 1)[0]
    else:
        current = np.asarray(current, dtype=np.int64)
        if not incidence_parity_check(net, current, mode="current"):
            raise ValidationError("supplied current is not sourceless")
    xi = (rng.random(net.edge_count) < bernoulli_probabilities(net)).astype(np.int64)
    v = ((current > 0) | (xi == 1)).astype(np.int64)
    return current, xi, v


def coupled_fk_sample_bulk(
    net: Network, seed: SeedSpec, size: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized coupled draws; one stream, fixed draw order."""
    rng = seed.rng()
    sampler = CurrentSampler(net)
    currents = sampler.sample(rng, size)
    xi = (rng.random((size, net.edge_count)) < bernoulli_probabilities(net)).astype(np.int64)
    v = ((currents > 0) | (xi == 1)).astype(np.int64)
    return currents, xi, v


@dataclass
class CompareReport:
    """Outcome of testing empirical samples against an exact table."""

    n: int
    tv: float
    zscores: np.ndarray
    threshold: float
    worst_index: int
    worst_z: float
    passed: bool
    counts: np.ndarray

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "empirical_tv": self.tv,
            "threshold": self.threshold,
            "worst_index": self.worst_index,
            "worst_z": self.worst_z,
            "verdict": "pass" if self.passed else "fail",
        }


def empirical_compare(
    samples: np.ndarray,
    reference: FiniteDistribution,
    sigma_level: float = 3.0,
    extra_comparisons: int = 1,
) -> CompareReport:
    """Multinomial test of sampled configurations against an exact law.

    Verdict: the worst per-atom |z| must stay inside the sigma_level band,
    Bonferroni-corrected over the atoms (and over `extra_comparisons`
    sibling checks, for use inside suites).  Spin samples may be given as
    +-1 vectors; they are mapped onto the table's {0,1} digits.
    """
    samples = np.asarray(samples)
    if samples.ndim != 2:
        raise ValidationError("samples must be a (n, length) matrix")
    n = len(samples)
    if n < 100:
        raise ValidationError("empirical comparison needs at least 100 samples")
    if reference.space.kind is SpaceKind.SPIN and np.any(samples < 0):
        samples = (samples > 0).astype(np.int64)
    if samples.shape[1] != reference.space.length:
        raise ValidationError(
            f"samples have {samples.shape[1]} digits, space has {reference.space.length}"
        )
    if np.any(samples < 0) or np.any(samples >= reference.space.radix):
        raise ValidationError("sample digits outside the configuration space")
    idx = reference.space.encode_many(samples)
    counts = np.bincount(idx, minlength=reference.space.size)
    z = multinomial_zscores(counts, reference.probs, n)
    atoms = int(np.count_nonzero(reference.probs > 0))
    threshold = two_sided_threshold(sigma_level, max(atoms, 1) * extra_comparisons)
    finite_worst = np.where(np.isfinite(z), np.abs(z), np.inf)
    worst = int(np.argmax(finite_worst))
    worst_z = float(z[worst])
    passed = bool(np.all(np.abs(z[np.isfinite(z)]) <= threshold) and not np.any(np.isinf(z)))
    return CompareReport(
        n=n,
        tv=empirical_tv(counts, reference.probs, n),
        zscores=z,
        threshold=threshold,
        worst_index=worst,
        worst_z=worst_z,
        passed=passed,
        counts=counts,
    )


def dump_samples_csv(
    path: str | Path,
    samples: np.ndarray,
    stream_id: int,
    sidecar: dict | None = None,
) -> None:
    """One configuration per row with stream id and draw index; optional
    JSON sidecar (chain parameters and the like) next to the CSV."""
    samples = np.atleast_2d(np.asarray(samples))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("stream,draw,config\n")
        for i, row in enumerate(samples):
            config = "".join(str(int(d)) for d in row)
            fh.write(f"{stream_id},{i},{config}\n")
    if sidecar is not None:
        side = Path(path).with_suffix(".json")
        with open(side, "w", encoding="utf-8") as fh:
            json.dump(sidecar, fh, indent=2, sort_keys=True)
            fh.write("\n")
