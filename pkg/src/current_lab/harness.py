"""Suite orchestration: run a named verification suite, emit report + tables.

Every suite produces a JSON report plus CSV tables (and figures unless
disabled).  CSV contents are a pure function of (config, seed): replica
work is distributed over a thread pool in fixed-size chunks with absolute
per-replica streams, and all reductions run in replica order, so the
tables are byte-identical for any pool size.
"""

from __future__ import annotations

import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import figures
from .errors import ValidationError
from .exact import (
    ModelKind,
    bernoulli_probabilities,
    color_clusters_exact,
    exact_measure,
    partition_functions,
    reconstruct_trace_law,
    superpose_max,
    tv_distance,
)
from .gff import FieldSampler, dump_matrix_csv, green_matrix, precision_matrix
from .loopsoup import (
    cable_clusters,
    fields,
    occupation_magnitudes,
    sample_fields_bulk,
    sample_soup,
    truncation_bound,
)
from .network import Network, incidence_parity_check, load_network
from .sampling import SeedSpec, coupled_fk_sample_bulk, empirical_compare
from .stats import (
    CheckResult,
    exact_check,
    multinomial_zscores,
    two_sample_multinomial_zscores,
    two_sided_threshold,
    zmax_check,
)
from .vrjp import run_vrjp

SUITES = ("verify-coupling", "gff-check", "loopsoup-check", "vrjp-check",
          "reconstruct-check", "full")

CHECK_STREAM_STRIDE = 1 << 24
REPLICA_STREAM_STRIDE = 16
POOL_CHUNK = 64
VERSION = "0.1.0"


@dataclass
class ExperimentConfig:
    network: str
    suite: str
    replicas: int = 100_000
    seed: int = 0
    tv_exact: float = 1e-12
    tv_recon: float = 1e-10
    sigma_level: float = 3.0
    alpha: float = 0.5
    cutoff: int = 24
    order: tuple[int, ...] | None = None
    burn_in: int | None = None
    thinning: int | None = None
    out_dir: str = "out"
    figures: bool = True
    threads: int | None = None

    def resolved_threads(self) -> int:
        if self.threads is not None:
            return max(1, int(self.threads))
        env = os.environ.get("CURRENT_LAB_THREADS")
        if env:
            return max(1, int(env))
        return min(4, os.cpu_count() or 1)

    def validate(self) -> None:
        if self.suite not in SUITES:
            raise ValidationError(f"unknown suite {self.suite!r} (choose from {SUITES})")
        if self.replicas < 100:
            raise ValidationError("statistical suites need replicas >= 100")
        for name in ("tv_exact", "tv_recon", "sigma_level", "alpha"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be nonnegative")
        if self.cutoff < 2:
            raise ValidationError("cutoff must be >= 2")

    def as_dict(self) -> dict:
        return {
            "network": self.network,
            "suite": self.suite,
            "replicas": self.replicas,
            "seed": self.seed,
            "tv_exact": self.tv_exact,
            "tv_recon": self.tv_recon,
            "sigma_level": self.sigma_level,
            "alpha": self.alpha,
            "cutoff": self.cutoff,
            "order": list(self.order) if self.order is not None else None,
            "burn_in": self.burn_in,
            "thinning": self.thinning,
            "out_dir": self.out_dir,
            "figures": self.figures,
            "threads": self.resolved_threads(),
        }


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    checks: list[CheckResult]
    timings: dict = field(default_factory=dict)
    outputs: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def as_dict(self) -> dict:
        return {
            "suite": self.config.suite,
            "network": self.config.network,
            "config": self.config.as_dict(),
            "environment": {
                "seed": self.config.seed,
                "threads": self.config.resolved_threads(),
                "version": VERSION,
            },
            "checks": [c.as_dict() for c in self.checks],
            "verdict": "pass" if self.passed else "fail",
            "timings": self.timings,
            "outputs": self.outputs,
        }


class OutputWriter:
    """CSV/figure emission with reproducible float formatting."""

    def __init__(self, out_dir: str | Path, render_figures: bool):
        self.dir = Path(out_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.render_figures = render_figures
        self.files: list[str] = []

    def path(self, name: str) -> Path:
        return self.dir / name

    def write_rows(self, name: str, header: list[str], rows: list[list]) -> None:
        path = self.path(name)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(",".join(_fmt(x) for x in row) + "\n")
        self.files.append(str(path))

    def figure(self, render_fn, *args, **kwargs) -> None:
        if self.render_figures:
            self.files.append(render_fn(*args, **kwargs))


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _pool_map(fn, count: int, threads: int) -> list:
    """Apply fn(i) for i in range(count); results in index order regardless
    of scheduling (fixed chunking, indexed writes)."""
    results = [None] * count
    if threads <= 1:
        for i in range(count):
            results[i] = fn(i)
        return results

    def run_chunk(lo: int, hi: int) -> None:
        for i in range(lo, hi):
            results[i] = fn(i)

    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [
            pool.submit(run_chunk, lo, min(lo + POOL_CHUNK, count))
            for lo in range(0, count, POOL_CHUNK)
        ]
        for f in futures:
            f.result()
    return results


def _trace_atom_labels(m: int) -> list[str]:
    return [format(i, f"0{m}b") if m else "0" for i in range(2**m)]


# ---------------------------------------------------------------- suites


def _suite_verify_coupling(net: Network, cfg: ExperimentConfig, out: OutputWriter,
                           base_stream: int) -> list[CheckResult]:
    checks: list[CheckResult] = []
    n_stat = 1
    trace = exact_measure(net, ModelKind.CURRENT_TRACE)
    bern = exact_measure(net, ModelKind.BERNOULLI)
    fk = exact_measure(net, ModelKind.FK)
    ising = exact_measure(net, ModelKind.ISING)
    superposed = superpose_max(trace, bern)

    checks.append(exact_check(
        "coupling-identity-tv", tv_distance(superposed, fk), cfg.tv_exact))

    z_ising, z_current, z_fk = partition_functions(net)
    rel = abs(z_ising - 2**net.vertex_count * z_current) / z_ising
    checks.append(exact_check(
        "partition-identity-relerr", rel, cfg.tv_exact,
        z_ising=z_ising, z_current=z_current, z_fk=z_fk))

    checks.append(exact_check(
        "cluster-coloring-tv", tv_distance(color_clusters_exact(net), ising),
        cfg.tv_exact))

    reconstructed = reconstruct_trace_law(fk, bernoulli_probabilities(net))
    checks.append(exact_check(
        "trace-reconstruction-tv", tv_distance(reconstructed, trace), cfg.tv_recon))

    _, _, v = coupled_fk_sample_bulk(net, SeedSpec(cfg.seed, base_stream), cfg.replicas)
    report = empirical_compare(v, fk, cfg.sigma_level, extra_comparisons=n_stat)
    checks.append(CheckResult(
        "coupled-sample-v-marginal", "statistical", abs(report.worst_z),
        report.threshold, report.passed,
        {"empirical_tv": report.tv, "replicas": cfg.replicas}))

    labels = _trace_atom_labels(net.edge_count)
    empirical = report.counts / cfg.replicas
    out.write_rows(
        "coupling_tables.csv",
        ["config", "fk", "superposed", "trace", "reconstructed", "empirical_v", "zscore"],
        [[labels[i], fk.probs[i], superposed.probs[i], trace.probs[i],
          reconstructed.probs[i], empirical[i], report.zscores[i]]
         for i in range(fk.space.size)],
    )
    out.write_rows(
        "partition_functions.csv",
        ["z_ising", "z_current", "z_fk", "relative_error"],
        [[z_ising, z_current, z_fk, rel]],
    )
    out.figure(
        figures.distribution_bars, out.path("verify_coupling.png"), labels,
        {"FK exact": fk.probs, "current+Bernoulli": superposed.probs,
         "sampled V": empirical},
        "Current + Bernoulli = FK",
    )
    out.figure(
        figures.zscore_bars, out.path("verify_coupling_z.png"), labels,
        report.zscores, report.threshold, "V-marginal z-scores",
    )
    return checks


def _suite_gff(net: Network, cfg: ExperimentConfig, out: OutputWriter,
               base_stream: int) -> list[CheckResult]:
    checks: list[CheckResult] = []
    g = green_matrix(net)
    lap = precision_matrix(net)
    residual = float(np.max(np.abs(lap @ g - np.eye(net.vertex_count))))
    checks.append(exact_check("green-residual", residual, 1e-10))
    dump_matrix_csv(out.path("green_matrix.csv"), g, net)
    out.files.append(str(out.path("green_matrix.csv")))

    n_stat = 2 if net.edge_count else 1
    sampler = FieldSampler(net)
    h = sampler.sample(SeedSpec(cfg.seed, base_stream).rng(), cfg.replicas)
    emp_cov = (h.T @ h) / cfg.replicas

    pairs = [(x, y) for x in range(net.vertex_count) for y in range(x, net.vertex_count)]
    zs, rows = [], []
    for x, y in pairs:
        se = np.sqrt((g[x, x] * g[y, y] + g[x, y] ** 2) / cfg.replicas)
        z = (emp_cov[x, y] - g[x, y]) / se
        zs.append(z)
        rows.append([x, y, emp_cov[x, y], g[x, y], z])
    checks.append(zmax_check("field-covariance", np.array(zs), cfg.sigma_level,
                             len(pairs) * n_stat, replicas=cfg.replicas))
    out.write_rows("covariance.csv", ["x", "y", "empirical", "exact", "zscore"], rows)
    out.figure(figures.zscore_bars, out.path("gff_covariance_z.png"),
               [f"({x},{y})" for x, y in pairs], np.array(zs),
               two_sided_threshold(cfg.sigma_level, len(pairs) * n_stat),
               "Field covariance z-scores")

    if net.edge_count:
        cells = 10
        cell_rows, cell_zs = [], []
        beta = net.beta_array
        for e, (x, y) in enumerate(net.edges):
            gprod = np.abs(h[:, x]) * np.abs(h[:, y])
            agree = np.where(h[:, x] >= 0, 1, -1) * np.where(h[:, y] >= 0, 1, -1)
            model_all = np.tanh(beta[e] * gprod)
            edges_q = np.quantile(gprod, np.linspace(0, 1, cells + 1))
            edges_q[0], edges_q[-1] = -np.inf, np.inf
            which = np.searchsorted(edges_q, gprod, side="right") - 1
            which = np.clip(which, 0, cells - 1)
            for c in range(cells):
                mask = which == c
                n_c = int(mask.sum())
                if n_c < 50:
                    continue
                rep = float(gprod[mask].mean())
                emp = float(agree[mask].mean())
                # cell average of the exact conditional expectation: the
                # statistic emp - model is centered for every cell shape,
                # unlike tanh at a single representative point
                model = float(model_all[mask].mean())
                var = float(np.maximum(1.0 - model_all[mask] ** 2, 0.0).sum())
                se = np.sqrt(max(var, 1e-12)) / n_c
                z = (emp - model) / se
                cell_zs.append(z)
                cell_rows.append([e, c, n_c, rep, emp, model, z])
        checks.append(zmax_check("sign-agreement-binned", np.array(cell_zs),
                                 cfg.sigma_level, len(cell_zs) * n_stat))
        out.write_rows("sign_cells.csv",
                       ["edge", "cell", "n", "mean_product", "empirical", "model", "zscore"],
                       cell_rows)
        rows0 = [r for r in cell_rows if r[0] == 0]
        if rows0:
            out.figure(
                figures.binned_curve, out.path("gff_sign_agreement.png"),
                [r[3] for r in rows0], [r[4] for r in rows0], [r[5] for r in rows0],
                [3 * np.sqrt(max(1 - r[5] ** 2, 1e-12) / r[2]) for r in rows0],
                "Conditional sign agreement vs tanh(beta u_x u_y)",
                "u_x u_y (cell mean)", "E[sign_x sign_y]",
            )
    return checks


def _suite_loopsoup(net: Network, cfg: ExperimentConfig, out: OutputWriter,
                    base_stream: int) -> list[CheckResult]:
    checks: list[CheckResult] = []
    g = green_matrix(net)
    n = cfg.replicas
    occ, crossings, bound = sample_fields_bulk(
        net, cfg.alpha, cfg.cutoff, SeedSpec(cfg.seed, base_stream), n)

    n_stat = 2
    diag = np.diag(g)
    mean_se = np.sqrt((diag**2 / 2.0) / n)
    z_mean = (occ.mean(axis=0) - diag / 2.0) / mean_se
    var_se = np.sqrt(3.5 * diag**4 / n)
    z_var = (occ.var(axis=0) - diag**2 / 2.0) / var_se
    checks.append(zmax_check("lejan-mean", z_mean, cfg.sigma_level,
                             net.vertex_count * n_stat, alpha=cfg.alpha))
    checks.append(zmax_check("lejan-variance", z_var, cfg.sigma_level,
                             net.vertex_count * n_stat, alpha=cfg.alpha))

    bad = 0
    for row in crossings:
        if not incidence_parity_check(net, row.astype(np.int64), mode="current"):
            bad += 1
    checks.append(exact_check("crossing-parity-failures", float(bad), 0.0, replicas=n))

    # a smaller per-replica batch through the pool exercises stream chaining
    batch = min(500, n)
    def one_parity(i: int) -> bool:
        ens = sample_soup(net, cfg.alpha, cfg.cutoff,
                          SeedSpec(cfg.seed, base_stream + 1 + i * REPLICA_STREAM_STRIDE))
        _, cr = fields(ens)
        return incidence_parity_check(net, cr, mode="current")
    parity_ok = _pool_map(one_parity, batch, cfg.resolved_threads())
    checks.append(exact_check("ensemble-parity-failures",
                              float(sum(1 for ok in parity_ok if not ok)), 0.0,
                              replicas=batch))

    band_floor = float(np.min(3.0 * mean_se))
    checks.append(exact_check("truncation-bound", bound, 0.1 * band_floor,
                              cutoff=cfg.cutoff))
    grid = list(range(max(2, cfg.cutoff - 8), cfg.cutoff + 1, 2))
    bounds = [truncation_bound(net, cfg.alpha, L) for L in grid]
    worst_rise = max(
        (bounds[i + 1] - bounds[i] for i in range(len(bounds) - 1)), default=0.0)
    checks.append(exact_check("truncation-monotone", max(worst_rise, 0.0), 0.0))

    out.write_rows(
        "occupation_moments.csv",
        ["vertex", "mean", "mean_expected", "z_mean", "var", "var_expected", "z_var"],
        [[x, occ[:, x].mean(), diag[x] / 2.0, z_mean[x],
          occ[:, x].var(), diag[x] ** 2 / 2.0, z_var[x]]
         for x in range(net.vertex_count)],
    )
    out.write_rows("truncation_bounds.csv", ["cutoff", "bound"],
                   [[L, b] for L, b in zip(grid, bounds)])
    out.figure(figures.occupation_histogram, out.path("loopsoup_occupation.png"),
               occ[:, 0], "Occupation at vertex 0")
    return checks


def _suite_reconstruct(net: Network, cfg: ExperimentConfig, out: OutputWriter,
                       base_stream: int) -> list[CheckResult]:
    checks: list[CheckResult] = []
    n = cfg.replicas
    rng_pipeline = SeedSpec(cfg.seed, base_stream).rng()
    occ, crossings, bound = sample_fields_bulk(
        net, cfg.alpha, cfg.cutoff, SeedSpec(cfg.seed, base_stream + 1), n)
    u = occupation_magnitudes(occ)

    recon = np.empty((n, net.vertex_count))
    beta = net.beta_array
    ex = np.array([e[0] for e in net.edges], dtype=np.int64)
    ey = np.array([e[1] for e in net.edges], dtype=np.int64)
    bridge_p = -np.expm1(-(beta[None, :] * u[:, ex] * u[:, ey])) if net.edge_count else np.zeros((n, 0))
    bridge_draws = rng_pipeline.random((n, net.edge_count))
    sign_draws_all = rng_pipeline.random((n, net.vertex_count))
    for i in range(n):
        bridges = (bridge_draws[i] < bridge_p[i]).astype(np.int64)
        clusters = cable_clusters(net, crossings[i], bridges)
        signs = np.empty(net.vertex_count)
        for c, cluster in enumerate(clusters):
            s = 1.0 if sign_draws_all[i, c] < 0.5 else -1.0
            for v in cluster:
                signs[v] = s
        recon[i] = signs * u[i]

    direct = FieldSampler(net).sample(SeedSpec(cfg.seed, base_stream + 2).rng(), n)

    names, zs, rows = [], [], []
    def add(name, a_vals, b_vals):
        za = a_vals.mean()
        zb = b_vals.mean()
        se = np.sqrt(a_vals.var() / n + b_vals.var() / n)
        z = (za - zb) / se if se > 0 else 0.0
        names.append(name)
        zs.append(z)
        rows.append([name, za, zb, z])

    for x in range(net.vertex_count):
        add(f"mean_h{x}", recon[:, x], direct[:, x])
    for x in range(net.vertex_count):
        add(f"second_moment_h{x}", recon[:, x] ** 2, direct[:, x] ** 2)
    for x in range(net.vertex_count):
        for y in range(x + 1, net.vertex_count):
            add(f"cov_h{x}h{y}", recon[:, x] * recon[:, y], direct[:, x] * direct[:, y])

    checks.append(zmax_check("field-reconstruction-moments", np.array(zs),
                             cfg.sigma_level, len(zs), replicas=n,
                             truncation_bound=bound))
    out.write_rows("field_moments.csv",
                   ["statistic", "reconstructed", "direct", "zscore"], rows)
    out.figure(figures.moment_comparison, out.path("reconstruct_moments.png"),
               names, [r[1] for r in rows], [r[2] for r in rows],
               "reconstructed", "direct", "Loop-soup field reconstruction")
    return checks


def _suite_vrjp(net: Network, cfg: ExperimentConfig, out: OutputWriter,
                base_stream: int) -> list[CheckResult]:
    checks: list[CheckResult] = []
    order = cfg.order if cfg.order is not None else tuple(range(net.vertex_count))
    n = cfg.replicas
    threads = cfg.resolved_threads()

    def run_batch(stream0: int, run_order) -> np.ndarray:
        def one(i: int) -> np.ndarray:
            return run_vrjp(net, run_order,
                            SeedSpec(cfg.seed, stream0 + i * REPLICA_STREAM_STRIDE))
        return np.stack(_pool_map(one, n, threads))

    currents = run_batch(base_stream, order)
    trace = exact_measure(net, ModelKind.CURRENT_TRACE)
    single_edge = net.edge_count == 1
    n_stat = 1 + (1 if len(order) >= 2 else 0) + (1 if single_edge else 0)

    bad = sum(
        0 if incidence_parity_check(net, row, mode="current") else 1
        for row in currents
    )
    checks.append(exact_check("vrjp-sourceless-failures", float(bad), 0.0, replicas=n))

    occupied = (currents > 0).astype(np.int64)
    report = empirical_compare(occupied, trace, cfg.sigma_level, extra_comparisons=n_stat)
    checks.append(CheckResult(
        "vrjp-trace-law", "statistical", abs(report.worst_z), report.threshold,
        report.passed, {"empirical_tv": report.tv, "order": list(order)}))

    labels = _trace_atom_labels(net.edge_count)
    out.write_rows(
        "vrjp_trace.csv",
        ["config", "exact", "empirical", "zscore"],
        [[labels[i], trace.probs[i], report.counts[i] / n, report.zscores[i]]
         for i in range(trace.space.size)],
    )
    out.figure(figures.distribution_bars, out.path("vrjp_trace.png"), labels,
               {"exact trace": trace.probs, "jump process": report.counts / n},
               "Jump-process trace law")

    if len(order) >= 2:
        alt_order = tuple(order[1:]) + (order[0],)
        alt = run_batch(base_stream + n * REPLICA_STREAM_STRIDE + 1, alt_order)
        alt_occupied = (alt > 0).astype(np.int64)
        counts_a = np.bincount(trace.space.encode_many(occupied), minlength=trace.space.size)
        counts_b = np.bincount(trace.space.encode_many(alt_occupied), minlength=trace.space.size)
        z2 = two_sample_multinomial_zscores(counts_a, counts_b)
        checks.append(zmax_check("vrjp-order-invariance", z2, cfg.sigma_level,
                                 trace.space.size * n_stat,
                                 orders=[list(order), list(alt_order)]))
        out.write_rows("vrjp_order_invariance.csv",
                       ["config", "order_a_freq", "order_b_freq", "zscore"],
                       [[labels[i], counts_a[i] / n, counts_b[i] / n, z2[i]]
                        for i in range(trace.space.size)])

    if single_edge:
        beta = float(net.beta[0])
        atoms, probs = _single_edge_current_atoms(beta, n)
        counts = np.zeros(len(atoms))
        values = currents[:, 0]
        for j, atom in enumerate(atoms[:-1]):
            counts[j] = np.count_nonzero(values == atom)
        counts[-1] = np.count_nonzero(values >= atoms[-1])
        zN = multinomial_zscores(counts, probs, n)
        checks.append(zmax_check("vrjp-single-edge-current-law", zN,
                                 cfg.sigma_level, len(atoms) * n_stat,
                                 p0_expected=probs[0]))
        out.write_rows("vrjp_current_law.csv",
                       ["atom", "exact", "empirical", "zscore"],
                       [[f"{atoms[j]}" if j < len(atoms) - 1 else f">={atoms[j]}",
                         probs[j], counts[j] / n, zN[j]] for j in range(len(atoms))])
        out.figure(figures.distribution_bars, out.path("vrjp_current_law.png"),
                   [str(a) for a in atoms],
                   {"exact": probs, "empirical": counts / n},
                   f"Single-edge current law (beta={beta})")
    return checks


def _single_edge_current_atoms(beta: float, n_samples: int) -> tuple[list[int], np.ndarray]:
    """Even atoms 0, 2, 4, ... with the tail pooled once expected counts
    drop below 25 (keeps the normal approximation honest)."""
    import math as _math

    z = _math.cosh(beta)
    atoms, probs = [], []
    k = 0
    while True:
        p = beta**k / _math.factorial(k) / z
        tail = 1.0 - sum(probs) - p
        if atoms and tail * n_samples < 25:
            atoms.append(k)
            probs.append(1.0 - sum(probs))
            break
        atoms.append(k)
        probs.append(p)
        k += 2
        if k > 60:
            atoms.append(k)
            probs.append(max(1.0 - sum(probs), 0.0))
            break
    return atoms, np.asarray(probs)


_SUITE_FNS = {
    "verify-coupling": _suite_verify_coupling,
    "gff-check": _suite_gff,
    "loopsoup-check": _suite_loopsoup,
    "reconstruct-check": _suite_reconstruct,
    "vrjp-check": _suite_vrjp,
}


def run_experiment(config: ExperimentConfig, net: Network | None = None) -> ExperimentReport:
    """Execute the configured suite; write report.json and tables; return
    the report.  Raises ValidationError for malformed inputs."""
    config.validate()
    if net is None:
        net = load_network(config.network)
    out = OutputWriter(config.out_dir, config.figures)
    started = time.time()
    checks: list[CheckResult] = []
    if config.suite == "full":
        names = [s for s in SUITES if s != "full"]
    else:
        names = [config.suite]
    for idx, name in enumerate(names):
        checks.extend(_SUITE_FNS[name](net, config, out, (idx + 1) * CHECK_STREAM_STRIDE))
    report = ExperimentReport(config, checks)
    report.timings = {"wall_s": time.time() - started}
    report.outputs = list(out.files)
    with open(out.path("report.json"), "w", encoding="utf-8") as fh:
        json.dump(report.as_dict(), fh, indent=2)
        fh.write("\n")
    return report
