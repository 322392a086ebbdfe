"""Jacobi theta functions, multivariate Bessel functions and a Haar Monte Carlo oracle."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import mpmath as mp
import numpy as np

from .core import DomainError

__all__ = [
    "ThetaNome",
    "theta",
    "ConfluenceError",
    "mv_bessel",
    "bessel_spherical_mc",
    "haar_unitary",
]

GAP = 1e-4


class ConfluenceError(ValueError):
    """Both argument vectors have coinciding entries."""


@dataclass(frozen=True)
class ThetaNome:
    q_nome: float

    def __post_init__(self) -> None:
        if not 0 < self.q_nome < 1:
            raise DomainError("nome must lie in (0, 1)")

    @classmethod
    def from_gamma(cls, gamma: float) -> "ThetaNome":
        if gamma <= 0:
            raise DomainError("gamma must be positive")
        return cls(math.exp(-math.pi**2 / (2 * gamma)))


def theta(ell: int, u, nome: "ThetaNome | float", bits: int | None = None):
    """Return ``(theta_ell(u; q), d/du theta_ell(u; q))``.

    Standard series, e.g. theta_1 = 2 sum (-1)^n q^{(n+1/2)^2} sin((2n+1)u).
    """
    if ell not in (1, 2, 3, 4):
        raise ValueError("ell must be 1..4")
    q = nome.q_nome if isinstance(nome, ThetaNome) else nome
    if not 0 <= q < 1:
        raise DomainError("nome must lie in [0, 1)")
    with mp.workprec(bits or max(mp.mp.prec, 96)):
        q = mp.mpmathify(q)
        u = mp.mpmathify(u)
        return +mp.jtheta(ell, u, q), +mp.jtheta(ell, u, q, 1)


# ---------------------------------------------------------------------------
# multivariate Bessel functions


def _gap(v: Sequence) -> float:
    best = math.inf
    for i in range(len(v)):
        for j in range(i + 1, len(v)):
            best = min(best, abs(v[i] - v[j]))
    return best


def _superfactorial(n: int):
    return mp.fprod(mp.factorial(j) for j in range(1, n))


def _vandermonde(v: Sequence):
    out = mp.mpf(1)
    for i in range(len(v)):
        for j in range(i + 1, len(v)):
            out *= v[i] - v[j]
    return out


def _bessel_det(x, z):
    n = len(x)
    M = mp.matrix(n, n)
    for i in range(n):
        for j in range(n):
            M[i, j] = mp.exp(x[i] * z[j])
    return _superfactorial(n) * mp.det(M) / (_vandermonde(x) * _vandermonde(z))


def _bessel_sum(x, xi):
    # z = (xi, 0, ..., 0)
    n = len(x)
    total = mp.mpf(0)
    for i in range(n):
        den = mp.mpf(1)
        for j in range(n):
            if j != i:
                den *= x[i] - x[j]
        total += mp.exp(xi * x[i]) / den
    return mp.factorial(n - 1) / xi ** (n - 1) * total


def _bessel_zero_block(x, xis, r):
    """z = (xi_1..xi_k, 0^r): the zero columns become x^m/m!."""
    n = len(x)
    k = len(xis)
    M = mp.matrix(n, n)
    for i in range(n):
        for j in range(k):
            M[i, j] = mp.exp(x[i] * xis[j])
        term = mp.mpf(1)
        for m in range(r):
            M[i, k + m] = term
            term = term * x[i] / (m + 1)
    sign = -1 if (r * (r - 1) // 2) % 2 else 1
    den = _vandermonde(x) * _vandermonde(xis) * mp.fprod(v**r for v in xis)
    return sign * _superfactorial(n) * mp.det(M) / den


def _bessel_divided(x, z):
    """Confluent-safe form in z: Newton divided differences of exp(x_i z).

    Divided differences come from exp(x_i J) with J bidiagonal (z on the
    diagonal, ones below), so repeated z need no special casing.
    """
    n = len(x)
    J = mp.matrix(n, n)
    for m in range(n):
        J[m, m] = z[m]
        if m + 1 < n:
            J[m + 1, m] = 1
    D = mp.matrix(n, n)
    for i in range(n):
        E = mp.expm(x[i] * J)
        for m in range(n):
            D[i, m] = E[m, 0]
    sign = -1 if (n * (n - 1) // 2) % 2 else 1
    return sign * _superfactorial(n) * mp.det(D) / _vandermonde(x)


def _bessel_eval(x, z):
    n = len(x)
    gx, gz = _gap([complex(v) for v in x]), _gap([complex(v) for v in z])
    if gx <= GAP and gz <= GAP:
        if gx == 0 and all(v == z[0] for v in z):
            # B_x(s^n) = exp(s sum x)
            return mp.exp(z[0] * mp.fsum(x))
        if gx == 0 and gz == 0:
            raise ConfluenceError("repeated x together with repeated z")
        if gx > 0:
            return _bessel_divided(x, z)
        return _bessel_divided(z, x)
    if gx <= GAP:
        # the function is symmetric under x <-> z
        x, z = z, x
        gx, gz = gz, gx
    if gz > GAP:
        return _bessel_det(x, z)
    nonzero = [v for v in z if v != 0]
    if len(nonzero) == 1:
        return _bessel_sum(x, nonzero[0])
    if not nonzero:
        return mp.mpf(1)
    if _gap([complex(v) for v in nonzero]) > GAP and min(abs(complex(v)) for v in nonzero) > GAP:
        return _bessel_zero_block(x, nonzero, n - len(nonzero))
    return _bessel_divided(x, z)


def mv_bessel(x: Sequence, z: Sequence, dps: int = 30):
    """B_x(z) = 1!...(n-1)! det[e^{x_i z_j}] / (V(x) V(z)).

    Well-separated arguments use the determinant; z = (xi, 0, ..., 0) uses the
    sum over i of e^{xi x_i}/prod_{j != i}(x_i - x_j); a zero block in z turns
    into polynomial columns; other near-coincidences use divided differences. Results from two precisions are compared and the
    precision is doubled when they disagree beyond 1e-9.
    """
    n = len(x)
    if n < 1 or len(z) != n:
        raise ValueError("x and z must have equal positive length")
    if n == 1:
        with mp.workdps(dps):
            return mp.exp(mp.mpmathify(x[0]) * mp.mpmathify(z[0]))
    prev = None
    for d in (dps, 2 * dps, 4 * dps, 8 * dps):
        with mp.workdps(d):
            val = _bessel_eval([mp.mpmathify(v) for v in x], [mp.mpmathify(v) for v in z])
        if prev is not None and abs(val - prev) <= 1e-9 * max(abs(val), mp.mpf(10) ** (-d // 2)):
            break
        if prev is None and min(_gap([complex(v) for v in x]), _gap([complex(v) for v in z])) > 1e-2:
            break
        prev = val
    with mp.workdps(dps):
        val = +val
    if all(mp.im(mp.mpmathify(v)) == 0 for v in z) and isinstance(val, mp.mpc):
        val = mp.re(val)
    return val


def haar_unitary(n: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """Batch of Haar unitaries via QR of complex Ginibre matrices."""
    g = (rng.standard_normal((size, n, n)) + 1j * rng.standard_normal((size, n, n))) / math.sqrt(2)
    qm, r = np.linalg.qr(g)
    d = np.diagonal(r, axis1=1, axis2=2)
    return qm * (d / np.abs(d))[:, None, :]


def bessel_spherical_mc(x: Sequence, z: Sequence, samples: int = 10000, rng=None) -> tuple[complex, float]:
    """Monte Carlo for the spherical integral of exp(tr(diag(x) U diag(z) U*))."""
    from .samplers import as_generator

    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=complex)
    n = x.size
    if n > 8:
        raise ValueError("n <= 8 supported")
    gen = as_generator(rng)
    u = haar_unitary(n, samples, gen)
    vals = np.exp(np.einsum("i,sij,j->s", x, np.abs(u) ** 2, z))
    est = vals.mean()
    se = float(vals.std(ddof=1) / math.sqrt(samples)) if samples > 1 else 0.0
    if np.all(z.imag == 0):
        est = est.real
    return est, se
