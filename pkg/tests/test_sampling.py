import json
import math

import numpy as np
import pytest

from current_lab.battery import single_edge, triangle
from current_lab.errors import UnsupportedMethodError, ValidationError
from current_lab.exact import ModelKind, exact_measure
from current_lab.network import Network, incidence_parity_check
from current_lab.sampling import (
    AliasSampler,
    ChainSampler,
    CurrentSampler,
    ExactTableSampler,
    SeedSpec,
    color_clusters,
    coupled_fk_sample,
    coupled_fk_sample_bulk,
    dump_samples_csv,
    edwards_sokal_edges,
    empirical_compare,
    sample_configuration,
)

EDGE = single_edge((1.0,))
TRI = triangle((0.5, 0.5, 0.5))


def test_seedspec_streams_are_reproducible():
    a = SeedSpec(42, 3).rng().random(5)
    b = SeedSpec(42, 3).rng().random(5)
    c = SeedSpec(42, 4).rng().random(5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_alias_sampler_matches_table():
    probs = np.array([0.5, 0.25, 0.125, 0.125])
    sampler = AliasSampler(probs)
    draws = sampler.sample(SeedSpec(1, 0).rng(), 40_000)
    freq = np.bincount(draws, minlength=4) / 40_000
    assert np.all(np.abs(freq - probs) < 3 * np.sqrt(probs * (1 - probs) / 40_000) + 1e-9)


def test_sample_configuration_deterministic():
    a = sample_configuration(TRI, ModelKind.FK, SeedSpec(9, 0))
    b = sample_configuration(TRI, ModelKind.FK, SeedSpec(9, 0))
    assert np.array_equal(a, b)


def test_sample_configuration_spins_are_pm_one():
    spins = sample_configuration(TRI, ModelKind.ISING, SeedSpec(2, 5))
    assert set(np.unique(spins)) <= {-1, 1}


def test_beta_zero_deterministic_outputs():
    net = Network(2, ((0, 1),), (0.0,))
    assert sample_configuration(net, ModelKind.FK, SeedSpec(0, 0))[0] == 0
    assert sample_configuration(net, ModelKind.CURRENT_PARITY, SeedSpec(0, 0))[0] == 0
    assert sample_configuration(net, ModelKind.BERNOULLI, SeedSpec(0, 0))[0] == 0


def test_markov_chain_unavailable_for_currents():
    with pytest.raises(UnsupportedMethodError):
        sample_configuration(EDGE, ModelKind.CURRENT_PARITY, SeedSpec(0, 0),
                             method="markov-chain")


def test_unknown_method():
    with pytest.raises(UnsupportedMethodError):
        sample_configuration(EDGE, ModelKind.FK, SeedSpec(0, 0), method="quantum")


def test_current_sampler_parity_and_projection():
    sampler = CurrentSampler(TRI)
    currents = sampler.sample(SeedSpec(5, 0).rng(), 2000)
    for row in currents:
        assert incidence_parity_check(TRI, row, mode="current")
    # projecting back to parity classes reproduces the parity law
    parity = np.where(currents == 0, 0, np.where(currents % 2 == 1, 1, 2))
    report = empirical_compare(parity, exact_measure(TRI, ModelKind.CURRENT_PARITY))
    assert report.passed


def test_magnitude_completion_conditional_ratio():
    # P(N=2 | positive even) = (1/2) / (cosh(1) - 1)
    sampler = CurrentSampler(EDGE)
    rng = SeedSpec(3, 1).rng()
    parity = np.full((20_000, 1), 2, dtype=np.int64)
    ns = sampler.complete_magnitudes(parity, rng)[:, 0]
    assert np.all(ns % 2 == 0) and np.all(ns >= 2)
    p2 = 0.5 / (math.cosh(1.0) - 1.0)
    emp = np.mean(ns == 2)
    assert abs(emp - p2) < 3 * math.sqrt(p2 * (1 - p2) / 20_000)


def test_coupled_sample_definition():
    n, xi, v = coupled_fk_sample(EDGE, SeedSpec(7, 2))
    assert v[0] == int(n[0] > 0 or xi[0] == 1)
    supplied = np.array([2], dtype=np.int64)
    n2, xi2, v2 = coupled_fk_sample(EDGE, SeedSpec(7, 3), current=supplied)
    assert n2[0] == 2 and v2[0] == 1


def test_coupled_sample_rejects_sourceful_current():
    with pytest.raises(ValidationError):
        coupled_fk_sample(EDGE, SeedSpec(0, 0), current=np.array([1]))


def test_coupled_bulk_v_marginal_single_edge():
    _, _, v = coupled_fk_sample_bulk(EDGE, SeedSpec(11, 0), 30_000)
    emp = v.mean()
    p = math.tanh(1.0)
    assert abs(emp - p) < 3 * math.sqrt(p * (1 - p) / 30_000)


def test_empirical_compare_self_consistency():
    fk = exact_measure(EDGE, ModelKind.FK)
    samples = ExactTableSampler(fk).sample_configs(SeedSpec(1, 0).rng(), 10_000)
    assert empirical_compare(samples, fk).passed


def test_empirical_compare_detects_wrong_law():
    bern_half = exact_measure(Network(2, ((0, 1),), (math.log(2.0),)), ModelKind.BERNOULLI)
    assert bern_half.prob_of([1]) == pytest.approx(0.5)
    samples = np.zeros((10_000, 1), dtype=np.int64)
    report = empirical_compare(samples, bern_half)
    assert not report.passed
    assert abs(report.worst_z) == pytest.approx(100.0, rel=1e-12)


def test_empirical_compare_needs_samples():
    fk = exact_measure(EDGE, ModelKind.FK)
    with pytest.raises(ValidationError):
        empirical_compare(np.zeros((50, 1), dtype=np.int64), fk)


def test_empirical_compare_space_mismatch():
    fk = exact_measure(TRI, ModelKind.FK)
    with pytest.raises(ValidationError):
        empirical_compare(np.zeros((200, 1), dtype=np.int64), fk)


def test_heat_bath_chain_matches_exact_ising():
    chain = ChainSampler(EDGE, ModelKind.ISING, SeedSpec(21, 0))
    samples = chain.draw_many(4000)
    report = empirical_compare(samples, exact_measure(EDGE, ModelKind.ISING))
    assert report.passed, report.as_dict()


def test_chain_fk_via_edwards_sokal():
    chain = ChainSampler(TRI, ModelKind.FK, SeedSpec(22, 0), burn_in=500, thinning=3)
    samples = chain.draw_many(4000)
    report = empirical_compare(samples, exact_measure(TRI, ModelKind.FK))
    assert report.passed, report.as_dict()


def test_edwards_sokal_round_trip():
    # exact spins -> conditional edges -> recolored clusters must be Ising again
    ising = exact_measure(TRI, ModelKind.ISING)
    sampler = ExactTableSampler(ising)
    rng = SeedSpec(23, 0).rng()
    digit_samples = sampler.sample_configs(rng, 6000)
    spins = 2 * digit_samples - 1
    recolored = np.empty_like(spins)
    for i in range(len(spins)):
        edges = edwards_sokal_edges(TRI, spins[i], rng)
        recolored[i] = color_clusters(TRI, edges, rng)
    report = empirical_compare(recolored, ising)
    assert report.passed, report.as_dict()


def test_dump_samples_csv(tmp_path):
    path = tmp_path / "draws.csv"
    samples = np.array([[0, 1, 1], [1, 0, 0]])
    dump_samples_csv(path, samples, stream_id=4, sidecar={"burn_in": 10})
    lines = path.read_text().splitlines()
    assert lines == ["stream,draw,config", "4,0,011", "4,1,100"]
    side = json.loads((tmp_path / "draws.json").read_text())
    assert side == {"burn_in": 10}
