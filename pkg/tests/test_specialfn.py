from __future__ import annotations

import math

import mpmath as mp
import numpy as np
import pytest

from sixvertex.core import DomainError
from sixvertex.specialfn import ThetaNome, bessel_spherical_mc, haar_unitary, mv_bessel, theta

NOME = ThetaNome.from_gamma(1.3)


def test_nome_range():
    assert 0 < NOME.q_nome < 1
    with pytest.raises(DomainError):
        ThetaNome(1.0)
    with pytest.raises(DomainError):
        theta(1, 0.1, 1.2)


def test_theta1_odd():
    assert abs(theta(1, 0, NOME)[0]) < 1e-25
    assert abs(theta(1, -0.4, NOME)[0] + theta(1, 0.4, NOME)[0]) < 1e-25


def test_jacobi_derivative_identity():
    d1 = theta(1, 0, NOME)[1]
    prod = theta(2, 0, NOME)[0] * theta(3, 0, NOME)[0] * theta(4, 0, NOME)[0]
    assert abs(d1 - prod) < 1e-12


def test_duplication_formula():
    z = 0.3
    lhs = theta(1, 2 * z, NOME)[0] * theta(1, 0, NOME)[1]
    rhs = 2 * mp.fprod(theta(ell, z, NOME)[0] for ell in (1, 2, 3, 4))
    assert abs(lhs - rhs) < 1e-10


def test_theta3_period():
    assert abs(theta(3, 0.4 + math.pi, NOME)[0] - theta(3, 0.4, NOME)[0]) < 1e-12


def test_theta_series_by_hand():
    q = 0.2
    u = 0.7
    series = 2 * sum((-1) ** n * q ** ((n + 0.5) ** 2) * math.sin((2 * n + 1) * u) for n in range(12))
    assert float(theta(1, u, q)[0]) == pytest.approx(series, rel=1e-14)


@pytest.mark.parametrize("x", [(0.3, -1.2, 2.0), (1.0, 1.0, 1.0), (0.5, 0.2)])
def test_bessel_at_zero(x):
    assert mv_bessel(x, [0] * len(x)) == 1


def test_bessel_shift():
    rng = np.random.default_rng(0)
    x = rng.standard_normal(3)
    z = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    t = 0.37
    lhs = mv_bessel(x, z + t)
    rhs = mp.exp(t * sum(x)) * mv_bessel(x, z)
    assert abs(lhs / rhs - 1) < 1e-12


def test_bessel_det_vs_sum():
    x = [0.4, -1.1, 2.3]
    z = [0.7, 0.0, 0.0]
    via_sum = mv_bessel(x, z)
    # the determinant route at a tiny separation, extrapolated linearly
    eps = 1e-3
    d1 = mv_bessel(x, [0.7, eps, -eps])
    d2 = mv_bessel(x, [0.7, 2 * eps, -2 * eps])
    assert abs((4 * d1 - d2) / 3 - via_sum) < 1e-9
    # and the divided-difference route straddling the gap threshold
    assert abs(mv_bessel(x, [0.7, 1e-6, -1e-6]) - via_sum) < 1e-10


def test_bessel_det_vs_sum_exact_identity():
    # z = (xi, 0, 0): sum formula vs the explicit determinant with polynomial columns
    x = [mp.mpf(v) for v in (0.4, -1.1, 2.3)]
    xi = mp.mpf(0.7)
    with mp.workdps(40):
        total = mp.fsum(mp.exp(xi * x[i]) / mp.fprod(x[i] - x[j] for j in range(3) if j != i) for i in range(3))
        direct = 2 / xi**2 * total
    assert abs(mv_bessel(x, [0.7, 0, 0]) - direct) < 1e-12


@pytest.mark.parametrize("n", [2, 3, 4])
def test_bessel_symmetric(n):
    rng = np.random.default_rng(n)
    x = rng.standard_normal(n)
    z = rng.standard_normal(n)
    base = mv_bessel(x, z)
    perm = rng.permutation(n)
    assert abs(mv_bessel(x[perm], z) / base - 1) < 1e-12
    assert abs(mv_bessel(x, z[perm]) / base - 1) < 1e-12
    # x <-> z symmetry of the determinant formula
    assert abs(mv_bessel(z, x) / base - 1) < 1e-12


def test_bessel_confluent_both_equal():
    assert abs(mv_bessel([1.0, 1.0], [0.3, 0.3]) - mp.exp(0.6)) < 1e-14


def test_haar_unitary_is_unitary():
    u = haar_unitary(3, 5, np.random.default_rng(1))
    eye = np.einsum("sij,sik->sjk", u.conj(), u)
    assert np.allclose(eye, np.eye(3)[None], atol=1e-12)


def test_spherical_mc_trivial():
    est, se = bessel_spherical_mc([0, 0], [0.3, 0.1], samples=100, rng=1)
    assert est == 1 and se == 0


def test_spherical_mc_n2():
    est, se = bessel_spherical_mc([1, -1], [0.5, 0], samples=20000, rng=7)
    ref = float(mv_bessel([1, -1], [0.5, 0]))
    assert abs(est - ref) < 3 * se


def test_spherical_mc_pooled_zscore():
    x, z = [0.8, -0.3, 0.1], [0.6, 0.2, -0.4]
    ref = float(mv_bessel(x, z))
    zs = []
    for seed in range(20):
        est, se = bessel_spherical_mc(x, z, samples=2000, rng=seed)
        zs.append((est - ref) / se)
    assert abs(sum(zs) / math.sqrt(len(zs))) < 4
