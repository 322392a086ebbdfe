"""Orthogonality measures, orthogonal polynomials, equilibrium measures and log-gas sampling.

The function phi(t) = c / (a b) is a two-sided Laplace transform of a phase
dependent measure m(dx).  Its tilted moments are the derivatives of phi, which
is how the high-precision routes below obtain them.  Direct summation and
quadrature against the explicit measures are kept as an independent route.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import mpmath as mp
import numpy as np
from numba import njit

from .core import DomainError, Phase, PhaseParams, spectral_weights
from .samplers import ChainConfig, as_generator

__all__ = [
    "PrecisionLoss",
    "MeasureSpec",
    "OrthoBasis",
    "EquilibriumMeasure",
    "phi",
    "phi_taylor",
    "measure_spec",
    "measure_moments",
    "orthobasis_from_moments",
    "orthobasis",
    "eval_monic",
    "monic_coefficients",
    "equilibrium",
    "stieltjes",
    "stieltjes_derivative",
    "sample_loggas",
    "conjecture_probe",
]


class PrecisionLoss(ArithmeticError):
    """Extended-precision computation lost all significant bits."""


def phi(t, gamma, phase) -> mp.mpf:
    """c(gamma) / (a(t, gamma) b(t, gamma)), signed."""
    a, b, c = spectral_weights(Phase.parse(phase), t, gamma)
    if a * b == 0:
        raise DomainError("t sits at a zero of a*b")
    return c / (a * b)


# ---------------------------------------------------------------------------
# Taylor series of phi


def _shift_series(kind: str, u, sign: int, count: int) -> list:
    """Coefficients of f(u + sign*h) in powers of h for f in {sin, sinh, lin}."""
    if kind == "lin":
        out = [u, mp.mpf(sign)] + [mp.mpf(0)] * max(0, count - 2)
        return out[:count]
    if kind == "sin":
        cyc = [mp.sin(u), mp.cos(u), -mp.sin(u), -mp.cos(u)]
    else:
        cyc = [mp.sinh(u), mp.cosh(u)]
    out = []
    fact = mp.mpf(1)
    for j in range(count):
        if j:
            fact *= j
        out.append((sign**j) * cyc[j % len(cyc)] / fact)
    return out


def _series_mul(p: Sequence, q: Sequence, count: int) -> list:
    return [mp.fsum(p[i] * q[j - i] for i in range(j + 1)) for j in range(count)]


def _series_inv(p: Sequence, count: int) -> list:
    r = [1 / p[0]]
    for j in range(1, count):
        r.append(-mp.fsum(p[i] * r[j - i] for i in range(1, j + 1)) / p[0])
    return r


def phi_taylor(phase, s, gamma, count: int) -> list:
    """First ``count`` Taylor coefficients of phi(s + h) around h = 0.

    ``s`` may be complex; coefficient j times j! is the j-th moment of the
    measure e^{sx} m(dx).
    """
    ph = Phase.parse(phase)
    s = mp.mpmathify(s)
    g = mp.mpf(gamma)
    if ph is Phase.FERRO:
        A = _shift_series("sinh", s - g, 1, count)
        B = _shift_series("sinh", s + g, 1, count)
        c = mp.sinh(2 * g)
    elif ph is Phase.DISORDERED:
        A = _shift_series("sin", g - s, -1, count)
        B = _shift_series("sin", g + s, 1, count)
        c = mp.sin(2 * g)
    elif ph is Phase.ANTIFERRO:
        A = _shift_series("sinh", g - s, -1, count)
        B = _shift_series("sinh", g + s, 1, count)
        c = mp.sinh(2 * g)
    else:
        A = _shift_series("lin", g - s, -1, count)
        B = _shift_series("lin", g + s, 1, count)
        c = 2 * g
    inv = _series_inv(_series_mul(A, B, count), count)
    return [c * v for v in inv]


# ---------------------------------------------------------------------------
# measures


@dataclass(frozen=True)
class MeasureSpec:
    """The tilted measure e^{tx} m(dx) of one phase.

    ``mass_fn`` returns the point mass (lattice phases) or the density
    (continuum phases) at ``x``, evaluated with mpmath.
    """

    phase: Phase
    t: float
    gamma: float
    support_kind: str
    mass_fn: Callable = field(repr=False, compare=False)

    @property
    def is_lattice(self) -> bool:
        return self.support_kind != "continuum"


def measure_spec(phase, t: float, gamma: float) -> MeasureSpec:
    ph = Phase.parse(phase)
    if ph is Phase.FERRO:
        # point masses normalized so that the total mass equals phi(t)
        def mass(x):
            x = mp.mpf(x)
            return 4 * mp.sinh(-mp.mpf(gamma) * x) * mp.exp(mp.mpf(t) * x)

        kind = "lattice_2Z_neg"
    elif ph is Phase.ANTIFERRO:

        def mass(x):
            x = mp.mpf(x)
            return 2 * mp.exp(-mp.mpf(gamma) * abs(x) + mp.mpf(t) * x)

        kind = "lattice_2Z"
    elif ph is Phase.DISORDERED:

        def mass(x):
            x = mp.mpmathify(x)
            g = mp.mpf(gamma)
            if x == 0:
                return (mp.pi - 2 * g) / mp.pi
            return mp.sinh(x * (mp.pi - 2 * g) / 2) / mp.sinh(mp.pi * x / 2) * mp.exp(mp.mpf(t) * x)

        kind = "continuum"
    else:

        def mass(x):
            x = mp.mpmathify(x)
            return mp.exp(-mp.mpf(gamma) * abs(x) + mp.mpf(t) * x)

        kind = "continuum"
    return MeasureSpec(ph, float(t), float(gamma), kind, mass)


def _lattice_moments(spec: MeasureSpec, count: int) -> list:
    """Moments by truncated summation; stops once terms are negligible."""
    tol = mp.mpf(2) ** (-int(mp.mp.prec * 0.9))
    sums = [mp.mpf(0)] * count
    if spec.support_kind == "lattice_2Z_neg":
        points = (-2 * k for k in range(1, 10**7))
        streams = [points]
    else:
        streams = [(2 * k for k in range(0, 10**7)), (-2 * k for k in range(1, 10**7))]
    for stream in streams:
        for x in stream:
            m = spec.mass_fn(x)
            terms = [m * mp.mpf(x) ** j for j in range(count)]
            for j, v in enumerate(terms):
                sums[j] += v
            big = max(abs(s) for s in sums) or mp.mpf(1)
            if abs(x) > 4 and max(abs(v) for v in terms) < tol * big:
                break
    return sums


def measure_moments(spec: MeasureSpec, count: int, bits: int = 256, method: str = "direct") -> list:
    """Moments m_0..m_{count-1} of e^{tx} m(dx).

    ``method="direct"`` sums the lattice masses or integrates the density;
    ``method="series"`` differentiates phi through its Taylor expansion.
    """
    with mp.workprec(bits):
        if method == "series":
            coef = phi_taylor(spec.phase, spec.t, spec.gamma, count)
            return [mp.factorial(j) * coef[j] for j in range(count)]
        if method != "direct":
            raise ValueError(f"unknown method {method!r}")
        if spec.is_lattice:
            return _lattice_moments(spec, count)
        out = []
        for j in range(count):
            f = lambda x, j=j: spec.mass_fn(x) * x**j
            out.append(mp.quad(f, [-mp.inf, -10, 0, 10, mp.inf]))
        return out


# ---------------------------------------------------------------------------
# orthogonal polynomials


@dataclass(frozen=True)
class OrthoBasis:
    """Monic recurrence P_{k+1} = (x - alpha_k) P_k - beta_k P_{k-1}.

    ``h[k]`` is the squared norm of P_k; ``beta[k] = h[k] / h[k-1]`` for k >= 1
    and ``beta[0] = h[0]`` by convention.
    """

    alpha: tuple
    beta: tuple
    h: tuple
    bits: int

    @property
    def degree(self) -> int:
        return len(self.h) - 1


def orthobasis_from_moments(moments: Sequence, bits: int = 256) -> OrthoBasis:
    """Chebyshev's algorithm on ordinary moments, in extended precision."""
    with mp.workprec(bits):
        mu = [mp.mpmathify(m) for m in moments]
        K = len(mu) // 2
        if K < 1:
            raise ValueError("need at least two moments")
        prev2 = [mp.mpf(0)] * len(mu)
        prev = list(mu)
        alpha = [mu[1] / mu[0]]
        beta = [mu[0]]
        h = [mu[0]]
        for k in range(1, K):
            cur = [mp.mpf(0)] * len(mu)
            for ell in range(k, 2 * K - k):
                cur[ell] = prev[ell + 1] - alpha[k - 1] * prev[ell] - beta[k - 1] * prev2[ell]
            hk = cur[k]
            bk = hk / prev[k - 1]
            if not (mp.re(bk) > 0) or hk == 0:
                raise PrecisionLoss(f"recurrence coefficient beta_{k} lost positivity at {bits} bits")
            alpha.append(cur[k + 1] / cur[k] - prev[k] / prev[k - 1])
            beta.append(bk)
            h.append(hk)
            prev2, prev = prev, cur
        return OrthoBasis(tuple(alpha), tuple(beta), tuple(h), bits)


def orthobasis(phase, t, gamma, degree: int, bits: int = 256) -> OrthoBasis:
    """Basis through ``degree`` from the Taylor moments of phi at t."""
    with mp.workprec(bits):
        coef = phi_taylor(phase, t, gamma, 2 * degree + 2)
        moms = [mp.factorial(j) * coef[j] for j in range(len(coef))]
    return orthobasis_from_moments(moms, bits)


def eval_monic(basis: OrthoBasis, k: int, x):
    if k > basis.degree + 1 or k < 0:
        raise ValueError("degree outside basis range")
    with mp.workprec(basis.bits):
        x = mp.mpmathify(x)
        p_prev, p = mp.mpf(0), mp.mpf(1)
        for j in range(k):
            p_prev, p = p, (x - basis.alpha[j]) * p - (basis.beta[j] * p_prev if j else 0)
        return p


def monic_coefficients(basis: OrthoBasis, k: int) -> list:
    """Monomial coefficients c_0..c_k of P_k (c_k = 1)."""
    with mp.workprec(basis.bits):
        p_prev: list = []
        p: list = [mp.mpf(1)]
        for j in range(k):
            nxt = [mp.mpf(0)] * (len(p) + 1)
            for i, v in enumerate(p):
                nxt[i + 1] += v
                nxt[i] -= basis.alpha[j] * v
            if j:
                for i, v in enumerate(p_prev):
                    nxt[i] -= basis.beta[j] * v
            p_prev, p = p, nxt
        return p


# ---------------------------------------------------------------------------
# equilibrium measures


@dataclass(frozen=True)
class EquilibriumMeasure:
    phase: Phase
    t: float
    gamma: float
    alpha: float
    beta: float
    alpha_prime: float | None
    beta_prime: float | None
    mu1: float
    mu2: float

    @property
    def endpoints(self) -> tuple[float, ...]:
        if self.alpha_prime is None:
            return (self.alpha, self.beta)
        return (self.alpha, self.alpha_prime, self.beta_prime, self.beta)


def _theta_logder(ell: int, u, q):
    return mp.jtheta(ell, u, q, 1) / mp.jtheta(ell, u, q)


def equilibrium(p: PhaseParams) -> EquilibriumMeasure:
    t, g = mp.mpf(p.t), mp.mpf(p.gamma)
    ap = bp = None
    with mp.workdps(30):
        if p.phase is Phase.FERRO:
            e = mp.exp(t - abs(g))
            al = -2 * (e - 1) / (e + 1)
            be = -2 * (e + 1) / (e - 1)
            ends = [al, be]
        elif p.phase is Phase.ANTIFERRO:
            q = mp.exp(-mp.pi**2 / (2 * g))
            w = mp.pi * (t + g) / (4 * g)
            f = -mp.pi / g
            al = f * _theta_logder(1, w, q)
            ap = f * _theta_logder(4, w, q)
            be = f * _theta_logder(2, w, q)
            bp = f * _theta_logder(3, w, q)
            ends = [al, ap, bp, be]
        else:
            al = -(mp.pi / g) * mp.tan(mp.pi / 4 * (1 - t / g))
            be = (mp.pi / g) * mp.tan(mp.pi / 4 * (1 + t / g))
            ends = [al, be]
        s1 = mp.fsum(ends)
        s2 = mp.fsum(e * e for e in ends)
        if len(ends) == 2:
            mu1 = s1 / 4
            mu2 = (3 * ends[0] ** 2 + 2 * ends[0] * ends[1] + 3 * ends[1] ** 2) / 24
        else:
            mu1 = s1 / 4
            mu2 = s2 / 12 + s1**2 / 24
        return EquilibriumMeasure(
            p.phase,
            p.t,
            p.gamma,
            float(al),
            float(be),
            None if ap is None else float(ap),
            None if bp is None else float(bp),
            float(mu1),
            float(mu2),
        )


def _root_product(z, ends) -> mp.mpc:
    out = mp.mpf(1)
    for e in ends:
        out *= mp.sqrt(z - e)
    return out


def stieltjes_derivative(eq: EquilibriumMeasure, z):
    z = mp.mpmathify(z)
    if eq.alpha_prime is None:
        return -1 / (z * _root_product(z, eq.endpoints))
    return -1 / _root_product(z, eq.endpoints)


def _on_support(eq: EquilibriumMeasure, z) -> bool:
    lo, hi = min(eq.endpoints), max(eq.endpoints)
    return mp.im(z) == 0 and lo <= mp.re(z) <= hi


def stieltjes(eq: EquilibriumMeasure, z) -> complex:
    """G(z) = integral of nu(dx) / (z - x) from the closed forms."""
    with mp.workdps(30):
        z = mp.mpmathify(z)
        if _on_support(eq, z):
            raise DomainError("z lies on the support of the equilibrium measure")
        al, be = mp.mpf(eq.alpha), mp.mpf(eq.beta)
        t, g = mp.mpf(eq.t), mp.mpf(eq.gamma)
        if eq.phase is not Phase.FERRO:
            # integrate G' from z to infinity along a ray leaving the support;
            # avoids choosing log branches in the closed form
            d = mp.mpc(0, 1) if mp.im(z) >= 0 else mp.mpc(0, -1)
            if mp.im(z) == 0:
                d = mp.mpf(1) if mp.re(z) > max(eq.endpoints) else -mp.mpf(1)
            f = lambda r: stieltjes_derivative(eq, z + d * r) * d
            return complex(-mp.quad(f, [0, 1, 10, mp.inf]))
        root = mp.sqrt(-al * (z - be)) - mp.sqrt(-be * (z - al))
        log_term = mp.log(root**2 / (z * (al - be)))
        return complex((abs(g) - t) / 2 - log_term / 2)


# ---------------------------------------------------------------------------
# log-gas sampling

_KIND = {Phase.FERRO: 0, Phase.DISORDERED: 1, Phase.ANTIFERRO: 2, Phase.BOUNDARY: 3}


@njit(cache=True)
def _log_sinh(y):
    # log sinh(y) for y > 0
    if y > 20.0:
        return y - math.log(2.0) + math.log1p(-math.exp(-2.0 * y))
    return math.log(math.sinh(y))


@njit(cache=True)
def _log_mass(kind, t, g, x):
    if kind == 0:
        if x >= 0.0:
            return -np.inf
        return math.log(4.0) + _log_sinh(abs(g * x)) + t * x
    if kind == 2:
        return math.log(2.0) - g * abs(x) + t * x
    if kind == 3:
        return -g * abs(x) + t * x
    ax = abs(x)
    if ax < 1e-8:
        return math.log((math.pi - 2.0 * g) / math.pi) + t * x
    return _log_sinh(ax * (math.pi - 2.0 * g) / 2.0) - _log_sinh(math.pi * ax / 2.0) + t * x


@njit(cache=True)
def _delta_energy(xs, i, new):
    old = xs[i]
    out = 0.0
    for j in range(xs.shape[0]):
        if j == i:
            continue
        dn = abs(new - xs[j])
        if dn == 0.0:
            return -np.inf
        out += 2.0 * (math.log(dn) - math.log(abs(old - xs[j])))
    return out


@njit(cache=True)
def _run_lattice(xs, kind, t, g, sweeps, seed, long_p):
    np.random.seed(seed)
    n = xs.shape[0]
    for _ in range(sweeps):
        for _k in range(n):
            i = np.random.randint(n)
            if np.random.random() < long_p:
                step = 2.0 * (1 + np.random.geometric(0.3))
            else:
                step = 2.0
            if np.random.random() < 0.5:
                step = -step
            new = xs[i] + step
            lw = _log_mass(kind, t, g, new)
            if lw == -np.inf:
                continue
            d = _delta_energy(xs, i, new)
            if d == -np.inf:
                continue
            d += lw - _log_mass(kind, t, g, xs[i])
            if d >= 0.0 or np.random.random() < math.exp(d):
                xs[i] = new
    return xs


@njit(cache=True)
def _run_continuum(xs, kind, t, g, sweeps, seed, scale, adapt):
    np.random.seed(seed)
    n = xs.shape[0]
    acc = 0
    tot = 0
    for s in range(sweeps):
        for _k in range(n):
            i = np.random.randint(n)
            new = xs[i] + scale * np.random.standard_normal()
            d = _delta_energy(xs, i, new)
            tot += 1
            if d == -np.inf:
                continue
            d += _log_mass(kind, t, g, new) - _log_mass(kind, t, g, xs[i])
            if d >= 0.0 or np.random.random() < math.exp(d):
                xs[i] = new
                acc += 1
        if adapt and (s + 1) % 20 == 0:
            rate = acc / max(tot, 1)
            scale *= math.exp(rate - 0.3)
            acc = 0
            tot = 0
    return xs, scale


def _initial_positions(n: int, p: PhaseParams) -> np.ndarray:
    eq = equilibrium(p)
    lo, hi = min(eq.endpoints), max(eq.endpoints)
    if p.phase is Phase.FERRO:
        return -2.0 * np.arange(1, n + 1, dtype=float)
    if p.phase is Phase.ANTIFERRO:
        start = 2 * int(round(lo * n / 4))
        return start + 2.0 * np.arange(n)
    return np.linspace(lo * n, hi * n, n + 2)[1:-1] if n > 1 else np.array([0.0])


def sample_loggas(n: int, p: PhaseParams, chain: ChainConfig | None = None, rng=None) -> tuple[float, ...]:
    """One draw of the n-point log-gas with weight e^{tx} |m|(dx).

    Lattice phases use +-2 moves with occasional longer jumps; continuum phases
    use Gaussian steps whose scale adapts toward a 0.3 acceptance rate during
    burn-in.
    """
    if n < 1:
        raise ValueError("n must be positive")
    chain = chain or ChainConfig(sweeps=1, burn_in=max(1000, 20 * n), thinning=1)
    gen = as_generator(rng)
    kind = _KIND[p.phase]
    xs = _initial_positions(n, p)
    seed = int(gen.integers(0, 2**31 - 1))
    total = chain.burn_in + chain.sweeps * chain.thinning
    if p.phase in (Phase.FERRO, Phase.ANTIFERRO):
        xs = _run_lattice(xs, kind, float(p.t), float(p.gamma), total, seed, 0.1)
    else:
        xs, scale = _run_continuum(xs, kind, float(p.t), float(p.gamma), chain.burn_in, seed, 1.0, True)
        seed2 = int(gen.integers(0, 2**31 - 1))
        xs, _ = _run_continuum(xs, kind, float(p.t), float(p.gamma), chain.sweeps * chain.thinning, seed2, scale, False)
    return tuple(sorted(float(v) for v in xs))


def conjecture_probe(
    n_list: Sequence[int],
    p: PhaseParams,
    coeffs: Sequence[float],
    draws: int = 50,
    c1: float = 1.0,
    chain: ChainConfig | None = None,
    rng=None,
) -> list[dict]:
    """Empirical E exp(c1 |xi_n|) for the centered linear statistic of a polynomial.

    Exploratory only: the values carry no pass/fail meaning.
    """
    gen = as_generator(rng)
    poly = np.polynomial.Polynomial(coeffs)
    eq_int = _equilibrium_poly_integral(p, poly)
    rows = []
    for n in n_list:
        vals = []
        for _ in range(draws):
            xs = np.asarray(sample_loggas(n, p, chain, gen)) / n
            xi = float(np.sum(poly(xs)) - n * eq_int)
            vals.append(math.exp(c1 * abs(xi)))
        rows.append({"n": int(n), "estimate": float(np.mean(vals)), "stderr": float(np.std(vals) / math.sqrt(len(vals)))})
    return rows


def _equilibrium_poly_integral(p: PhaseParams, poly: np.polynomial.Polynomial) -> float:
    """Integral of a polynomial against nu via moments from the G expansion."""
    coeffs = list(poly.coef)
    if len(coeffs) == 1:
        return float(coeffs[0])
    if len(coeffs) > 3:
        raise ValueError("only polynomials of degree <= 2 are supported")
    eq = equilibrium(p)
    mom = [1.0, eq.mu1, eq.mu2]
    return float(sum(c * m for c, m in zip(coeffs, mom)))
