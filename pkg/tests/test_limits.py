from __future__ import annotations

import math
from collections import defaultdict

import mpmath as mp
import numpy as np
import pytest

from oracles import dfs_dwbc
from sixvertex.core import DomainError, Phase, PhaseParams, WeightTriple, params_from_weights, weights_from_params
from sixvertex.exactpf import enumerate_dwbc, lambda11_distribution, ztilde_k, ztilde_k1
from sixvertex.limits import (
    THEOREMS,
    expansion_predict,
    f_st,
    f_st_partition,
    f_sym,
    gue_constants,
    limit_constants,
    sigma,
    stochastic_ik,
    stochastic_params,
    stochastic_row_law,
    stochastic_weight_match,
    ztilde_stochastic,
)

# stochastic vertex weights keyed by (left, below, right, above)
_ST = {
    (0, 0, 0, 0): lambda w, q: 1,
    (1, 1, 1, 1): lambda w, q: 1,
    (1, 0, 1, 0): lambda w, q: w,
    (0, 1, 0, 1): lambda w, q: q * w,
    (1, 0, 0, 1): lambda w, q: 1 - w,
    (0, 1, 1, 0): lambda w, q: 1 - q * w,
}


def _stochastic_sum(X, Y, q):
    n = len(X)
    total = mp.mpf(0)
    for grid in dfs_dwbc(n):
        term = mp.mpf(1)
        for y in range(n):
            for x in range(n):
                xy = mp.mpf(X[x]) * mp.mpf(Y[y])
                term *= _ST[grid[y][x]]((1 - xy) / (1 - q * xy), q)
        total += term
    return total


def test_gue_constants_symmetric_point():
    m, s = gue_constants(1, 1, math.sqrt(2))
    assert m == pytest.approx(0.5, abs=1e-15)
    assert s > 0
    assert gue_constants(1, 1, 2)[0] == pytest.approx(0.5, abs=1e-15)
    assert gue_constants(1, 1, math.sqrt(8))[0] == pytest.approx(0.5, abs=1e-12)


def test_gue_constants_ferro_rejected():
    with pytest.raises(DomainError):
        gue_constants(3, 1, 1)


@pytest.mark.parametrize("w", [(1, 1, math.sqrt(2)), (2, 1, 2), (1, 1, math.sqrt(8)), (1, 1, 2)])
def test_gue_constants_match_exact_law(w):
    m, s = gue_constants(*w)
    assert 0 < m < 1
    p = params_from_weights(*w)
    n = 48
    probs = lambda11_distribution(n, p)
    ell = np.arange(1, n + 1)
    mean = probs @ ell
    var = probs @ ell**2 - mean**2
    assert mean / n == pytest.approx(m, abs=2 / n)
    assert var / n == pytest.approx(s * s, rel=0.1)


def test_boundary_constants_are_limit_of_disordered():
    # (t, gamma) -> (eps t, eps gamma) on the Disordered side approaches Boundary at (t, gamma)
    t, g = 0.3, 1.0
    mb, sb = gue_constants(*weights_from_params(PhaseParams(Phase.BOUNDARY, t, g)).as_tuple())
    eps = 1e-4
    md, sd = gue_constants(*weights_from_params(PhaseParams(Phase.DISORDERED, eps * t, eps * g)).as_tuple())
    assert md == pytest.approx(mb, abs=1e-6)
    assert sd == pytest.approx(sb, rel=1e-6)


def test_stochastic_params_example():
    b1, b2 = stochastic_params(3, 1, 1)
    assert b1 == pytest.approx((3 - math.sqrt(5)) / 6, abs=1e-15)
    assert b2 == pytest.approx((3 + math.sqrt(5)) / 6, abs=1e-15)


def test_stochastic_params_invariants():
    rng = np.random.default_rng(5)
    for _ in range(50):
        a = rng.uniform(1.5, 4)
        b = rng.uniform(0.2, 1)
        c = rng.uniform(0.05, a - b - 0.05)
        b1, b2 = stochastic_params(a, b, c)
        assert 0 < b1 < b2 < 1
        assert b1 * b2 == pytest.approx(b * b / (a * a), rel=1e-12)
        assert b1 + b2 == pytest.approx((a * a + b * b - c * c) / (a * a), rel=1e-12)


def test_stochastic_params_small_c():
    b1, b2 = stochastic_params(2, 1, 1e-6)
    assert b1 == pytest.approx(0.25, abs=1e-9)
    assert b2 == pytest.approx(1, abs=1e-9)


def test_stochastic_params_domain():
    with pytest.raises(DomainError):
        stochastic_params(1, 1, 1)


def test_weight_match():
    p = params_from_weights(3, 1, 1)
    q, w = stochastic_weight_match(p)
    b1, b2 = stochastic_params(3, 1, 1)
    assert q == pytest.approx(math.exp(-4 * p.gamma), rel=1e-14)
    assert w == pytest.approx(b1, abs=1e-12)
    assert q * w == pytest.approx(b2, abs=1e-12)
    assert 0 < w < 1 and 0 < q * w < 1


def test_weight_match_double_ratios():
    p = params_from_weights(3, 1, 1)
    q, w = stochastic_weight_match(p)
    a, b, c = p.abc()
    st = {"a1": 1.0, "a2": 1.0, "b1": w, "b2": q * w, "c1": 1 - w, "c2": 1 - q * w}
    assert st["a1"] * st["a2"] / (st["b1"] * st["b2"]) == pytest.approx(float(a * a / (b * b)), rel=1e-12)
    assert st["a1"] * st["a2"] / (st["c1"] * st["c2"]) == pytest.approx(float(a * a / (c * c)), rel=1e-12)


def test_weight_match_requires_negative_gamma():
    with pytest.raises(DomainError):
        stochastic_weight_match(PhaseParams(Phase.FERRO, 1.0, 0.3))


def test_limit_constants_bundle():
    lc = limit_constants(3, 1, 1)
    assert lc.m_const is None and lc.b1 == pytest.approx(0.1273220037500350)
    assert lc.mallows_q == pytest.approx(1 / 9)
    lc = limit_constants(1, 1, math.sqrt(2))
    assert lc.b1 is None and lc.m_const == pytest.approx(0.5)


def test_sigma_boundary_is_disordered_limit():
    t, g = 0.2, 1.0
    sb = sigma(PhaseParams(Phase.BOUNDARY, t, g))
    eps = 1e-5
    sd = sigma(PhaseParams(Phase.DISORDERED, eps * t, eps * g)) * eps
    assert sd == pytest.approx(sb, rel=1e-6)


def test_expansion_zero_xi_is_one():
    p = params_from_weights(1, 1, math.sqrt(2))
    assert abs(expansion_predict("T2.5", 32, [0], p) - 1) < 1e-25


def test_expansion_phase_mismatch():
    with pytest.raises(DomainError):
        expansion_predict("T2.4", 8, [0.1], params_from_weights(1, 1, 2))
    with pytest.raises(ValueError):
        expansion_predict("T9", 8, [0.1], params_from_weights(1, 1, 2))


def test_t24_ratio_close_to_one():
    p = params_from_weights(3, 1, 1)
    r16 = abs(ztilde_k1(16, 0.3, p) / expansion_predict("T2.4", 16, [0.3], p) - 1)
    r32 = abs(ztilde_k1(32, 0.3, p) / expansion_predict("T2.4", 32, [0.3], p) - 1)
    assert r16 < 1 / math.sqrt(16)
    assert r32 < r16


@pytest.mark.parametrize(
    "theorem, w",
    [("T2.5", (1, 1, math.sqrt(2))), ("T2.5", (2, 1, 2)), ("T2.6", (1, 1, math.sqrt(8))), ("T2.7", (1, 1, 2))],
)
def test_scaled_expansions_converge(theorem, w):
    p = params_from_weights(*w)
    errs = []
    for n in (16, 64):
        exact = ztilde_k(n, [mp.mpf(0.5) / mp.sqrt(n), mp.mpf(-0.3) / mp.sqrt(n)], p)
        errs.append(float(abs(exact / expansion_predict(theorem, n, [0.5, -0.3], p) - 1)))
    assert errs[1] < errs[0] < 0.05


def test_t27_is_gamma_limit_of_t25():
    t, xi = 0.3, 0.4
    pb = PhaseParams(Phase.BOUNDARY, t, 1.0)
    target = expansion_predict("T2.7", 1, [xi], pb)
    errs = []
    for g in (1e-2, 1e-3):
        pd = PhaseParams(Phase.DISORDERED, t * g, g)
        errs.append(float(abs(expansion_predict("T2.5", 1, [xi * g], pd) / target - 1)))
    assert errs[1] < 1e-6
    # O(gamma^2) approach
    assert errs[0] / errs[1] == pytest.approx(100, rel=0.05)


def test_theorem_ids():
    assert THEOREMS == ("T2.4", "T2.5", "T2.6", "T2.7")


def test_f_sym_k1_closed_form():
    p = params_from_weights(2, 1, 2)
    xi = 0.1
    a, b, c = p.abc(mp.mpf(p.t) + xi)
    for n, nu in ((5, 3), (6, 1), (4, 4)):
        ref = a ** (n - 1) * c * (b / a) ** (nu - 1)
        assert abs(f_sym((nu,), [xi], p, n) / ref - 1) < 1e-14


def test_f_sym_n_stability():
    p = params_from_weights(2, 1, 2)
    nu, x = (2, 4), [0.1, -0.05]
    A = [p.abc(mp.mpf(p.t) + v)[0] for v in x]
    v4 = f_sym(nu, x, p, 4) / (A[0] * A[1]) ** 4
    v7 = f_sym(nu, x, p, 7) / (A[0] * A[1]) ** 7
    assert abs(v4 / v7 - 1) < 1e-14


def test_f_sym_generating_identity():
    p = params_from_weights(2, 1, 2)
    x = [0.1, -0.05]
    en = enumerate_dwbc(4, weights_from_params(p))
    law = defaultdict(float)
    for tri, wt in zip(en.triangles, en.weights):
        law[tri.rows[1]] += wt
    tot = sum(law.values())
    s = sum(v / tot * f_sym(nu, x, p, 4) / f_sym(nu, [0, 0], p, 4) for nu, v in law.items())
    assert abs(s / ztilde_k(4, x, p) - 1) < 1e-12


def test_f_st_k1():
    q = 6.854
    for nu in (1, 3, 6):
        assert f_st((nu,), [0.2], q) == pytest.approx(0.8 * 0.2 ** (nu - 1), rel=1e-13)


@pytest.mark.parametrize("nu, ws", [((2, 4), [0.2, 0.3]), ((1, 3, 4), [0.2, 0.3, 0.25]), ((2, 4), [0.2, 0.2]), ((1, 2), [0.1, 0.12])])
def test_f_st_matches_partition(nu, ws):
    q = 6.854
    assert abs(f_st(nu, ws, q) - f_st_partition(nu, ws, q)) < 1e-11 * abs(f_st_partition(nu, ws, q))


def test_f_st_degree():
    nu, q = (2, 3), 2.5
    deg = sum(nu) + len(nu) * (len(nu) - 1) // 2
    ws = np.array([0.3, -0.7])
    lam = 1e3
    ratio = f_st(nu, 2 * lam * ws, q) / f_st(nu, lam * ws, q)
    assert math.log2(abs(ratio)) == pytest.approx(deg, abs=0.01)


def test_f_st_positive():
    rng = np.random.default_rng(8)
    q = 3.0
    for _ in range(30):
        ws = rng.uniform(0.01, 1 / q - 0.01, 2)
        nu = tuple(sorted(rng.choice(np.arange(1, 7), 2, replace=False)))
        v = f_st(nu, ws, q)
        assert abs(v.imag) < 1e-12 and v.real > 0


def test_stochastic_ik_matches_sum():
    q = mp.mpf(6.854)
    X = [1, mp.mpf("1.01"), mp.mpf("0.98")]
    Y = [mp.mpf("0.3"), mp.mpf("0.35"), mp.mpf("0.28")]
    with mp.workprec(256):
        assert abs(stochastic_ik(X, Y, q) / _stochastic_sum(X, Y, q) - 1) < 1e-40


def test_ztilde_stochastic_matches_sum():
    q, w = stochastic_weight_match(params_from_weights(3, 1, 1))
    Yof = lambda v: (1 - mp.mpf(v)) / (1 - q * mp.mpf(v))
    n, w1 = 4, 1.05 * w
    with mp.workprec(256):
        ref = _stochastic_sum([1] * n, [Yof(w1)] + [Yof(w)] * (n - 1), q) / _stochastic_sum([1] * n, [Yof(w)] * n, q)
    assert abs(ztilde_stochastic(n, [w1], q, w) / ref - 1) < 1e-12


def test_ztilde_stochastic_normalization_and_trend():
    q, w = stochastic_weight_match(params_from_weights(3, 1, 1))
    assert ztilde_stochastic(8, [w, w], q, w) == 1
    errs = [abs(float(mp.re(ztilde_stochastic(n, [1.05 * w, 0.95 * w], q, w))) - 1) for n in (8, 16, 32)]
    assert errs[0] > errs[1] > errs[2]


def test_stochastic_row_law_first_row_geometric():
    b1, b2 = stochastic_params(3, 1, 1)
    law = stochastic_row_law(1, b1, b2)
    for ell in (1, 2, 5):
        assert law[(ell,)] == pytest.approx((1 - b1) ** 0 * b1 ** (ell - 1) * (1 - b1), rel=1e-12)
    assert sum(law.values()) == pytest.approx(1, abs=1e-10)


def test_characterization_sum_k2():
    b1, b2 = stochastic_params(3, 1, 1)
    q, w = b2 / b1, b1
    law = stochastic_row_law(2, b1, b2, tail=1e-8)
    assert sum(law.values()) == pytest.approx(1, abs=1e-8)
    wv = (1.05 * w, 0.97 * w)
    s = sum(pv * f_st(nu, wv, q, scale=w) / f_st(nu, (w, w), q, scale=w) for nu, pv in law.items())
    assert abs(s - 1) < 1e-6
