"""Statistical acceptance machinery: z-scores, Bonferroni bands, verdicts."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm


def two_sided_threshold(sigma_level: float, comparisons: int = 1) -> float:
    """|z| threshold so that `comparisons` two-sided tests jointly keep the
    false-alarm rate of a single two-sided sigma_level test (Bonferroni)."""
    if comparisons < 1:
        raise ValueError("comparisons must be >= 1")
    tail = norm.sf(sigma_level)  # one-sided tail of the nominal band
    return float(norm.isf(tail / comparisons))


def multinomial_zscores(counts: np.ndarray, probs: np.ndarray, n: int) -> np.ndarray:
    """Per-atom binomial z-scores of observed counts against exact probs.

    Atoms with zero probability get z = 0 when unobserved and z = inf when
    observed (an impossible atom occurred).
    """
    counts = np.asarray(counts, dtype=float)
    probs = np.asarray(probs, dtype=float)
    z = np.zeros_like(probs)
    pos = probs > 0.0
    denom = np.sqrt(n * probs[pos] * (1.0 - probs[pos]))
    denom = np.where(denom == 0.0, 1.0, denom)  # p == 1 atoms: count is deterministic
    z[pos] = (counts[pos] - n * probs[pos]) / denom
    impossible = (~pos) & (counts > 0)
    z[impossible] = np.inf
    return z


def two_sample_multinomial_zscores(
    counts_a: np.ndarray, counts_b: np.ndarray
) -> np.ndarray:
    """Pooled two-proportion z-scores comparing two empirical histograms."""
    counts_a = np.asarray(counts_a, dtype=float)
    counts_b = np.asarray(counts_b, dtype=float)
    na, nb = counts_a.sum(), counts_b.sum()
    pooled = (counts_a + counts_b) / (na + nb)
    var = pooled * (1.0 - pooled) * (1.0 / na + 1.0 / nb)
    z = np.zeros_like(pooled)
    pos = var > 0.0
    z[pos] = (counts_a[pos] / na - counts_b[pos] / nb) / np.sqrt(var[pos])
    return z


def empirical_tv(counts: np.ndarray, probs: np.ndarray, n: int) -> float:
    diffs = np.abs(np.asarray(counts, dtype=float) / n - np.asarray(probs, dtype=float))
    return 0.5 * math.fsum(diffs.tolist())


@dataclass
class CheckResult:
    """One named verification with its statistic, band, and verdict."""

    name: str
    kind: str  # "exact" or "statistical"
    statistic: float
    bound: float
    passed: bool
    details: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "kind": self.kind,
            "statistic": self.statistic,
            "bound": self.bound,
            "verdict": "pass" if self.passed else "fail",
            "details": self.details,
        }


def exact_check(name: str, statistic: float, tolerance: float, **details) -> CheckResult:
    return CheckResult(
        name, "exact", float(statistic), float(tolerance),
        bool(statistic <= tolerance), details,
    )


def zmax_check(
    name: str, zscores: np.ndarray, sigma_level: float, comparisons: int, **details
) -> CheckResult:
    """Statistical verdict: worst |z| against the Bonferroni-corrected band."""
    zarr = np.atleast_1d(np.asarray(zscores, dtype=float))
    worst = float(np.max(np.abs(zarr))) if zarr.size else 0.0
    threshold = two_sided_threshold(sigma_level, comparisons)
    details = {"comparisons": comparisons, **details}
    return CheckResult(name, "statistical", worst, threshold, worst <= threshold, details)
