from __future__ import annotations

import math
from collections import Counter, defaultdict
from fractions import Fraction

import numpy as np
import pytest
from scipy import integrate
from scipy import stats as sps

from oracles import class_of, dfs_dwbc, gt3_bottom_density, mallows_law
from sixvertex.core import DomainError, WeightTriple, triangle_from_configuration, validate_configuration
from sixvertex.exactpf import enumerate_dwbc
from sixvertex.limits import stochastic_params, stochastic_row_law
from sixvertex.samplers import (
    ChainConfig,
    DwbcChain,
    ErgodicityError,
    RngSeed,
    conditional_law,
    mcmc_histogram,
    sample_conditional_triangle,
    sample_dwbc_exact,
    sample_dwbc_mcmc,
    sample_eta,
    sample_gue_corners,
    sample_mallows_finite,
    sample_qshuffle_prefix,
    sample_stochastic_6v,
    sample_uniform_gt,
    transition_matrix,
)
from sixvertex.specialfn import mv_bessel

W = WeightTriple(1, 1, math.sqrt(2))


def _grid_key(cfg):
    return tuple(tuple(cfg.at(x, y).occupancy for x in range(1, cfg.n + 1)) for y in range(1, cfg.n + 1))


def _oracle_law(n, w):
    val = {"a": w.a, "b": w.b, "c": w.c}
    wts = {g: math.prod(val[class_of(o)] for row in g for o in row) for g in dfs_dwbc(n)}
    z = sum(wts.values())
    return {g: v / z for g, v in wts.items()}


def _chi2_pvalue(counts: dict, law: dict, min_expected: float = 5.0) -> float:
    total = sum(counts.values())
    obs, exp = [], []
    rest_o = rest_e = 0.0
    for key, p in law.items():
        e = p * total
        o = counts.get(key, 0)
        if e >= min_expected:
            obs.append(o)
            exp.append(e)
        else:
            rest_o += o
            rest_e += e
    if rest_e > 0:
        obs.append(rest_o)
        exp.append(rest_e)
    obs = np.array(obs, float)
    exp = np.array(exp, float)
    exp *= obs.sum() / exp.sum()
    return float(sps.chisquare(obs, exp).pvalue)


def test_rng_streams_reproducible():
    a = [sample_dwbc_mcmc(5, W, ChainConfig(burn_in=50), RngSeed(3, 1)) for _ in range(2)]
    assert a[0] == a[1]
    assert RngSeed(3, 1).generator().random() != RngSeed(3, 2).generator().random()
    assert sample_mallows_finite(10, 0.5, 7) == sample_mallows_finite(10, 0.5, 7)


def test_dwbc_exact_law():
    law = _oracle_law(3, W)
    rng = np.random.default_rng(1)
    counts = Counter(_grid_key(sample_dwbc_exact(3, W, rng)) for _ in range(20000))
    assert set(counts) <= set(law)
    assert _chi2_pvalue(counts, law) > 0.001


@pytest.mark.parametrize("n", [1, 4, 9])
def test_samplers_emit_valid_configurations(n):
    rng = np.random.default_rng(n)
    cfgs = [sample_dwbc_mcmc(n, W, ChainConfig(burn_in=200), rng)]
    if n <= 6:
        cfgs.append(sample_dwbc_exact(n, W, rng))
    for cfg in cfgs:
        assert validate_configuration(cfg) == []


def test_mcmc_ergodicity_guard():
    with pytest.raises(ErgodicityError):
        DwbcChain(4, WeightTriple(1, 1, 0))


def test_transition_matrix_detailed_balance():
    states, P, pi = transition_matrix(4, WeightTriple(3, 1, 1))
    assert len(states) == 42
    assert np.allclose(P.sum(axis=1), 1, atol=1e-14)
    flow = pi[:, None] * P
    assert np.abs(flow - flow.T).max() < 1e-14
    assert np.abs(pi @ P - pi).max() < 1e-14


def test_mcmc_histogram_tv():
    w = WeightTriple(1, 1, math.sqrt(2))
    en = enumerate_dwbc(4, w)
    law = dict(zip(en.triangles, en.probabilities()))
    counts = mcmc_histogram(4, w, 200_000, rng=5)
    total = sum(counts.values())
    tv = 0.5 * sum(abs(counts.get(t, 0) / total - p) for t, p in law.items())
    assert tv < 0.02


def test_mcmc_draws_interlace():
    ch = DwbcChain(8, W, 2)
    for tri in ch.draws(5, ChainConfig(sweeps=10, burn_in=100)):
        assert validate_configuration(ch.state()) == []
        assert tri.rows[-1] == tuple(range(1, 9))


def test_stochastic_first_row_geometric():
    b1, b2 = stochastic_params(3, 1, 1)
    rng = np.random.default_rng(4)
    draws = Counter(sample_stochastic_6v(1, None, b1, b2, rng)[0][0] for _ in range(20000))
    law = {ell: (1 - b1) * b1 ** (ell - 1) for ell in range(1, 40)}
    assert _chi2_pvalue(draws, law) > 0.001


def test_stochastic_second_row_law():
    b1, b2 = stochastic_params(3, 1, 1)
    rng = np.random.default_rng(6)
    draws = Counter(sample_stochastic_6v(2, None, b1, b2, rng)[1] for _ in range(20000))
    law = stochastic_row_law(2, b1, b2, tail=1e-6)
    assert _chi2_pvalue(draws, law) > 0.001


def test_stochastic_rows_interlace():
    b1, b2 = stochastic_params(2, 1, 0.5)
    rows = sample_stochastic_6v(4, None, b1, b2, 9)
    for k in range(1, 4):
        lo, hi = rows[k - 1], rows[k]
        assert len(hi) == k + 1
        assert all(hi[i] <= lo[i] <= hi[i + 1] for i in range(k))


def test_stochastic_domain():
    with pytest.raises(DomainError):
        sample_stochastic_6v(1, None, 0.2, 1.0)


@pytest.mark.parametrize("q", [Fraction(1, 9), Fraction(1), Fraction(3)])
def test_mallows_law(q):
    law = mallows_law(4, q)
    rng = np.random.default_rng(int(q * 9))
    counts = Counter(sample_mallows_finite(4, float(q), rng) for _ in range(20000))
    assert _chi2_pvalue(counts, {k: float(v) for k, v in law.items()}) > 0.001


def test_mallows_is_permutation():
    p = sample_mallows_finite(30, 0.7, 1)
    assert sorted(p) == list(range(1, 31))


def test_qshuffle_prefix_law():
    q = 0.3
    rng = np.random.default_rng(2)
    counts = Counter(sample_qshuffle_prefix(2, q, rng) for _ in range(20000))
    law = {}
    for i in range(1, 15):
        for j in range(1, 15):
            if i != j:
                rank = j if j < i else j - 1
                law[(i, j)] = (1 - q) ** 2 * q ** (i - 1) * q ** (rank - 1)
    assert all(a != b for a, b in counts)
    assert _chi2_pvalue(counts, law) > 0.001


def test_gue_corners_interlace_and_trace():
    rng = np.random.default_rng(3)
    sq = []
    for _ in range(400):
        rows = sample_gue_corners(5, rng)
        for k in range(1, 5):
            lo, hi = rows[k - 1], rows[k]
            assert all(hi[i] <= lo[i] <= hi[i + 1] for i in range(k))
        sq.append(sum(v * v for v in rows[-1]))
    # E tr M^2 = N^2
    assert np.mean(sq) == pytest.approx(25, abs=4 * np.std(sq) / 20)


def test_gue_top_corner_standard_normal():
    rng = np.random.default_rng(4)
    x = [sample_gue_corners(3, rng)[0][0] for _ in range(3000)]
    assert sps.kstest(x, "norm").pvalue > 0.001


def test_gue_bessel_generating_function():
    # E B(lambda; z) = exp(|z|^2 / 2) for the 2 x 2 corner
    z = (0.4, -0.2)
    rng = np.random.default_rng(5)
    vals = np.array([float(mv_bessel(sample_gue_corners(2, rng)[1], z)) for _ in range(4000)])
    target = math.exp((z[0] ** 2 + z[1] ** 2) / 2)
    assert abs(vals.mean() - target) < 4 * vals.std() / math.sqrt(len(vals))


@pytest.mark.parametrize("theta", [2.0, -1.5, 0.0])
def test_eta_law(theta):
    x = sample_eta(theta, 1, size=5000)
    if theta == 0:
        cdf = lambda t: np.clip(t, 0, 1)
    else:
        cdf = lambda t: np.expm1(theta * np.clip(t, 0, 1)) / math.expm1(theta)
    assert sps.kstest(x, cdf).pvalue > 0.001


def test_conditional_law_matches_enumeration():
    w = WeightTriple(1, 1, math.sqrt(2))
    en = enumerate_dwbc(4, w)
    joint = defaultdict(float)
    for tri, p in zip(en.triangles, en.probabilities()):
        joint[tri.rows[:2]] += p
    for nu in {rows[1] for rows in joint}:
        cond = {rows[0]: p for rows, p in joint.items() if rows[1] == nu}
        tot = sum(cond.values())
        arrays, probs = conditional_law(nu, w)
        for rows, p in zip(arrays, probs):
            assert p == pytest.approx(cond.get(rows[0], 0) / tot, abs=1e-12)


def test_conditional_sampler_frequencies():
    w = WeightTriple(1, 1, 2)
    nu = (2, 4, 7)
    arrays, probs = conditional_law(nu, w)
    rng = np.random.default_rng(7)
    counts = Counter(sample_conditional_triangle(nu, w, rng) for _ in range(20000))
    assert _chi2_pvalue(counts, dict(zip(arrays, probs))) > 0.001


def test_uniform_gt_bottom_density():
    nu = (0.0, 1.0, 3.0)
    norm = integrate.quad(lambda x: gt3_bottom_density(nu, x), 0, 3, points=[1])[0]

    def cdf(t):
        t = float(np.clip(t, 0, 3))
        return integrate.quad(lambda x: gt3_bottom_density(nu, x), 0, t, points=[1] if t > 1 else None)[0] / norm

    rng = np.random.default_rng(8)
    x = [sample_uniform_gt(nu, sweeps=30, rng=rng)[0][0] for _ in range(1500)]
    assert sps.kstest(x, np.vectorize(cdf)).pvalue > 0.001


def test_uniform_gt_rejects_unsorted():
    with pytest.raises(ValueError):
        sample_uniform_gt([2.0, 1.0])


def test_triangle_roundtrip_from_sampler():
    cfg = sample_dwbc_exact(5, W, 11)
    tri = triangle_from_configuration(cfg)
    assert tri.rows[-1] == (1, 2, 3, 4, 5)
