"""Discrete Gaussian free field pinned through the boundary attachment.

The field is the centered Gaussian vector whose precision matrix is the
weighted graph Laplacian plus the pinning conductance on the attached
vertex's diagonal; self-loops contribute nothing to the quadratic form.
Conditioned on its magnitudes, the sign pattern is an Ising model with
per-edge weight beta_e * u_x * u_y, which is what ties the field to the
cluster models.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular

from .errors import MissingPinningError, ValidationError
from .network import Network
from .sampling import SeedSpec


def precision_matrix(net: Network) -> np.ndarray:
    """Graph Laplacian of the weights plus the pinning conductance.

    Off-diagonal (x, y): minus the total weight of edges joining x and y.
    Diagonal (x, x): total non-loop weight at x, plus the pinning
    conductance if x is the attached vertex.
    """
    n = net.vertex_count
    lap = np.zeros((n, n))
    for (u, v), b in zip(net.edges, net.beta):
        if u == v:
            continue
        lap[u, u] += b
        lap[v, v] += b
        lap[u, v] -= b
        lap[v, u] -= b
    if net.pinning is not None:
        lap[net.pinning.vertex, net.pinning.vertex] += net.pinning.conductance
    return lap


def _require_pinned(net: Network) -> None:
    if net.pinning is None or not (net.pinning.conductance > 0):
        raise MissingPinningError(
            "the field is defined only up to an additive constant without a "
            "positive pinning conductance"
        )


def green_matrix(net: Network) -> np.ndarray:
    """Covariance of the pinned field: inverse of the precision matrix."""
    _require_pinned(net)
    lap = precision_matrix(net)
    try:
        factor = cho_factor(lap, lower=True)
    except np.linalg.LinAlgError as exc:
        raise ValidationError(f"precision matrix is not positive definite: {exc}") from exc
    g = cho_solve(factor, np.eye(net.vertex_count))
    return 0.5 * (g + g.T)


class FieldSampler:
    """Reusable Cholesky factor for drawing pinned fields in bulk."""

    def __init__(self, net: Network):
        _require_pinned(net)
        self.net = net
        lap = precision_matrix(net)
        try:
            self.chol = np.linalg.cholesky(lap)
        except np.linalg.LinAlgError as exc:
            raise ValidationError(
                f"precision matrix is not positive definite: {exc}"
            ) from exc

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """(size, n) matrix of field draws with covariance = green matrix."""
        z = rng.standard_normal((self.net.vertex_count, size))
        h = solve_triangular(self.chol.T, z, lower=False)
        return h.T


class FieldSample:
    """A field draw with its magnitude and sign decomposition.

    sign(0) is +1: a measure-zero tie broken deterministically so repeated
    runs stay byte-identical.
    """

    __slots__ = ("h", "u", "sign")

    def __init__(self, h: np.ndarray):
        self.h = np.asarray(h, dtype=float)
        self.u = np.abs(self.h)
        self.sign = np.where(self.h >= 0, 1, -1).astype(np.int64)

    def __repr__(self):
        return f"FieldSample(h={self.h!r})"


def sample_field(net: Network, seed: SeedSpec) -> FieldSample:
    """One pinned-field draw."""
    return FieldSample(FieldSampler(net).sample(seed.rng(), 1)[0])


def sample_fields(net: Network, seed: SeedSpec, size: int) -> np.ndarray:
    """Bulk field draws, one stream, shape (size, vertices)."""
    return FieldSampler(net).sample(seed.rng(), size)


def conditional_sign_weights(net: Network, u) -> Network:
    """Ising weights of the sign pattern given field magnitudes u = |h|.

    Each edge weight becomes beta_e * u_x * u_y; the pinning is dropped
    because the pinning term depends on the magnitude only.  At u = 1
    everywhere the weights are returned unchanged.
    """
    u = np.asarray(u, dtype=float)
    if u.shape != (net.vertex_count,):
        raise ValidationError(f"magnitude vector shape {u.shape} != ({net.vertex_count},)")
    if np.any(u < 0) or not np.all(np.isfinite(u)):
        raise ValidationError("magnitudes must be finite and nonnegative")
    new_beta = tuple(
        float(b * u[x] * u[y]) for (x, y), b in zip(net.edges, net.beta)
    )
    return Network(net.vertex_count, net.edges, new_beta, pinning=None)


def reconstruct_field(
    u, clusters: list[list[int]], seed: SeedSpec
) -> FieldSample:
    """Field from magnitudes and a cluster partition: one fair independent
    sign per cluster, h_x = sign(cluster of x) * u_x."""
    u = np.asarray(u, dtype=float)
    signs = cluster_signs(u.shape[0], clusters, seed.rng())
    return FieldSample(signs * u)


def cluster_signs(
    vertex_count: int, clusters: list[list[int]], rng: np.random.Generator
) -> np.ndarray:
    """Fair +-1 per cluster, broadcast to vertices; validates the partition."""
    seen: set[int] = set()
    for cluster in clusters:
        for v in cluster:
            if v in seen or not (0 <= v < vertex_count):
                raise ValidationError("clusters do not form a partition of the vertices")
            seen.add(v)
    if len(seen) != vertex_count:
        raise ValidationError("clusters do not cover every vertex")
    signs = np.empty(vertex_count, dtype=np.int64)
    draws = rng.random(len(clusters))
    for c, cluster in enumerate(clusters):
        s = 1 if draws[c] < 0.5 else -1
        for v in cluster:
            signs[v] = s
    return signs


def dump_field_csv(path, sample: FieldSample) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("vertex,h,u,sign\n")
        for v in range(len(sample.h)):
            fh.write(f"{v},{float(sample.h[v])!r},{float(sample.u[v])!r},{int(sample.sign[v])}\n")


def dump_matrix_csv(path, matrix: np.ndarray, net: Network) -> None:
    """Dense matrix rows preceded by a JSON header (dimension, pinning)."""
    import json

    pin = None
    if net.pinning is not None:
        pin = {"vertex": net.pinning.vertex, "conductance": net.pinning.conductance}
    header = {"dimension": int(matrix.shape[0]), "pinning": pin}
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header) + "\n")
        for row in np.asarray(matrix, dtype=float):
            fh.write(",".join(repr(float(x)) for x in row) + "\n")
