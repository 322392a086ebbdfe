"""Exact and extended-precision DWBC partition functions.

Three routes are provided: brute-force enumeration over monotone triangles,
the Izergin-Korepin determinant for distinct inhomogeneities, and the
orthogonal-polynomial formula for the normalized functions Z~_n, which is the
canonical route at coinciding spectral parameters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import mpmath as mp
import numpy as np

from .core import (
    Configuration,
    DomainError,
    MonotoneTriangle,
    Phase,
    PhaseParams,
    WeightTriple,
    all_triangles,
    b_zero,
    configuration_from_triangle,
    spectral_weights,
)
from .loggas import OrthoBasis, PrecisionLoss, monic_coefficients, orthobasis, phi_taylor

__all__ = [
    "PrecisionCtx",
    "InhomSpec",
    "ConfluenceError",
    "PrecisionError",
    "SizeError",
    "Enumeration",
    "enumerate_dwbc",
    "inhomogeneous_sum",
    "ik_determinant",
    "ztilde_k1",
    "ztilde_k",
    "ztilde_by_enumeration",
    "z_homogeneous",
    "partition_function",
    "lambda11_distribution",
    "lambda11_by_enumeration",
    "ztilde_via_bessel_mc",
]

MAX_ENUM_N = 6


class ConfluenceError(ValueError):
    """Coinciding inhomogeneities; use the ztilde routes instead."""


class PrecisionError(PrecisionLoss):
    """Not enough significant bits survived; raise the mantissa."""


class SizeError(ValueError):
    """Input too large for an exhaustive method."""


@dataclass(frozen=True)
class PrecisionCtx:
    mantissa_bits: int = 256
    target_rel_err: float = 1e-20

    def __post_init__(self) -> None:
        if self.mantissa_bits < 64:
            raise ValueError("mantissa_bits must be at least 64")
        if not self.target_rel_err > 0:
            raise ValueError("target_rel_err must be positive")


DEFAULT_PREC = PrecisionCtx()


@dataclass(frozen=True)
class InhomSpec:
    chi: tuple
    psi: tuple
    gamma: float
    phase: Phase

    def __post_init__(self) -> None:
        object.__setattr__(self, "chi", tuple(self.chi))
        object.__setattr__(self, "psi", tuple(self.psi))
        object.__setattr__(self, "phase", Phase.parse(self.phase))
        if len(self.chi) != len(self.psi) or not self.chi:
            raise ValueError("chi and psi must be nonempty and of equal length")

    @property
    def n(self) -> int:
        return len(self.chi)


# ---------------------------------------------------------------------------
# enumeration


@dataclass(frozen=True)
class Enumeration:
    n: int
    triangles: tuple[MonotoneTriangle, ...]
    configurations: tuple[Configuration, ...]
    weights: tuple[float, ...]
    Z: float

    def probabilities(self) -> np.ndarray:
        w = np.asarray(self.weights, dtype=float)
        return w / w.sum()


@lru_cache(maxsize=16)
def _configurations(n: int) -> tuple[Configuration, ...]:
    return tuple(configuration_from_triangle(t) for t in all_triangles(n))


@lru_cache(maxsize=16)
def _class_count_table(n: int) -> np.ndarray:
    return np.array([c.class_counts() for c in _configurations(n)], dtype=np.int64)


def enumerate_dwbc(n: int, w: WeightTriple) -> Enumeration:
    """Every DWBC configuration of size n with its weight a^Na b^Nb c^Nc."""
    if n > MAX_ENUM_N:
        raise SizeError(f"enumeration supports n <= {MAX_ENUM_N}")
    if n < 1:
        raise ValueError("n must be positive")
    cnt = _class_count_table(n)
    weights = tuple(float(w.a**na * w.b**nb * w.c**nc) for na, nb, nc in cnt)
    return Enumeration(n, all_triangles(n), _configurations(n), weights, math.fsum(weights))


@lru_cache(maxsize=16)
def _class_grids(n: int) -> np.ndarray:
    """Array [config, y, x] of weight classes 0 (a), 1 (b), 2 (c)."""
    code = {"a": 0, "b": 1, "c": 2}
    out = np.zeros((len(_configurations(n)), n, n), dtype=np.int8)
    for k, cfg in enumerate(_configurations(n)):
        for y in range(n):
            for x in range(n):
                out[k, y, x] = code[cfg.grid[y][x].weight_class]
    return out


def inhomogeneous_sum(spec: InhomSpec, prec: PrecisionCtx = DEFAULT_PREC):
    """Sum over configurations with vertex weights at psi_y - chi_x."""
    n = spec.n
    if n > MAX_ENUM_N:
        raise SizeError(f"enumeration supports n <= {MAX_ENUM_N}")
    with mp.workprec(prec.mantissa_bits):
        tab = [[None] * n for _ in range(n)]
        c = None
        for y in range(n):
            for x in range(n):
                a, b, c = spectral_weights(spec.phase, mp.mpmathify(spec.psi[y]) - mp.mpmathify(spec.chi[x]), spec.gamma)
                tab[y][x] = (a, b, c)
        total = mp.mpf(0)
        for grid in _class_grids(n):
            term = mp.mpf(1)
            for y in range(n):
                row = tab[y]
                for x in range(n):
                    term *= row[x][grid[y, x]]
            total += term
        return +total


def _min_gap(values: Sequence) -> float:
    vals = [complex(v) for v in values]
    best = math.inf
    for i in range(len(vals)):
        for j in range(i + 1, len(vals)):
            best = min(best, abs(vals[i] - vals[j]))
    return best


def ik_determinant(spec: InhomSpec, prec: PrecisionCtx = DEFAULT_PREC, min_gap: float = 1e-8):
    """Izergin-Korepin determinant for distinct inhomogeneities."""
    n = spec.n
    if n > 1 and (_min_gap(spec.chi) <= min_gap or _min_gap(spec.psi) <= min_gap):
        raise ConfluenceError("coinciding inhomogeneities: use ztilde_k1 / ztilde_k / z_homogeneous")
    with mp.workprec(prec.mantissa_bits):
        chi = [mp.mpmathify(v) for v in spec.chi]
        psi = [mp.mpmathify(v) for v in spec.psi]
        num = mp.mpf(1)
        M = mp.matrix(n, n)
        for i in range(n):
            for j in range(n):
                a, b, c = spectral_weights(spec.phase, psi[j] - chi[i], spec.gamma)
                num *= a * b
                M[i, j] = c / (a * b)
        den = mp.mpf(1)
        for i in range(n):
            for j in range(i + 1, n):
                # psi ordered j - i so the sign agrees with the direct sum
                den *= b_zero(spec.phase, chi[i] - chi[j]) * b_zero(spec.phase, psi[j] - psi[i])
        val = num / den * mp.det(M)
        scale = abs(num / den) * mp.fsum(abs(M[i, j]) for i in range(n) for j in range(n)) ** n
        if val != 0 and abs(val) < scale * mp.mpf(2) ** (-prec.mantissa_bits + 16):
            raise PrecisionError("determinant underflow at the requested precision")
        return val


# ---------------------------------------------------------------------------
# normalized partition functions through orthogonal polynomials


def _phase_key(p: PhaseParams) -> tuple:
    return (p.phase, float(p.t), float(p.gamma))


@lru_cache(maxsize=64)
def _basis(phase: Phase, t: float, gamma: float, degree: int, bits: int) -> OrthoBasis:
    return orthobasis(phase, t, gamma, degree, bits)


@lru_cache(maxsize=64)
def _pcoeffs(phase: Phase, t: float, gamma: float, k: int, bits: int) -> tuple:
    basis = _basis(phase, t, gamma, max(k, 1), bits)
    return tuple(monic_coefficients(basis, k)), basis.h[k]


def _work_bits(n: int, xi, prec: PrecisionCtx) -> int:
    r = abs(complex(xi))
    loss = n * max(0.0, math.log2(1.0 / r)) if r > 0 else 0.0
    return int(prec.mantissa_bits + 12 * n + loss) // 32 * 32 + 32


def _ztilde_k1_raw(n: int, xi, p: PhaseParams, bits: int):
    """One evaluation at fixed precision, plus the cancellation in bits."""
    phase, t, g = _phase_key(p)
    with mp.workprec(bits):
        xi = mp.mpmathify(xi)
        if xi == 0:
            return mp.mpf(1), 0.0
        coeffs, h = _pcoeffs(phase, t, g, n - 1, bits)
        s = mp.mpf(t) + xi
        tay = phi_taylor(phase, s, g, n)
        terms = []
        fact = mp.mpf(1)
        for j in range(n):
            if j:
                fact *= j
            terms.append(coeffs[j] * fact * tay[j])
        integral = mp.fsum(terms)
        big = max(abs(v) for v in terms)
        lost = float(mp.log(big / abs(integral), 2)) if integral != 0 else float(bits)
        a0, b0, _ = spectral_weights(phase, t, g)
        a1, b1, _ = spectral_weights(phase, s, g)
        val = mp.factorial(n - 1) * ((a1 * b1) / (a0 * b0)) ** n / b_zero(phase, xi) ** (n - 1) * integral / h
        return val, lost


def ztilde_k1(n: int, xi, p: PhaseParams, prec: PrecisionCtx = DEFAULT_PREC):
    """Z~_n(xi; t, gamma) with one inhomogeneous row.

    The integral against P_{n-1} is evaluated through derivatives of phi at
    t + xi, so complex xi and xi outside the Laplace strip are allowed.
    """
    if n < 1:
        raise ValueError("n must be positive")
    bits = _work_bits(n, xi, prec)
    for _ in range(2):
        try:
            val, lost = _ztilde_k1_raw(n, xi, p, bits)
        except PrecisionLoss:
            bits *= 2
            continue
        # the Hankel step costs roughly the same number of bits as the sum
        if bits - 2 * lost >= prec.mantissa_bits:
            return val
        bits = int(2 * lost + prec.mantissa_bits + 64)
    try:
        val, lost = _ztilde_k1_raw(n, xi, p, bits)
    except PrecisionLoss as exc:
        raise PrecisionError(f"{exc}; raise mantissa_bits") from exc
    if bits - 2 * lost < 53:
        raise PrecisionError(f"only {bits - 2 * lost:.0f} bits left; raise mantissa_bits")
    return val


def _ab_ratio(p: PhaseParams, xi):
    a0, b0, _ = spectral_weights(p.phase, p.t, p.gamma)
    a1, b1, _ = spectral_weights(p.phase, mp.mpf(p.t) + xi, p.gamma)
    return (a1 * b1) / (a0 * b0)


def _ztilde_k_distinct(n: int, xis: Sequence, p: PhaseParams, prec: PrecisionCtx):
    k = len(xis)
    with mp.workprec(prec.mantissa_bits + 32 * k):
        xis = [mp.mpmathify(v) for v in xis]
        M = mp.matrix(k, k)
        for j, xj in enumerate(xis):
            ratio = _ab_ratio(p, xj)
            bz = b_zero(p.phase, xj)
            for i in range(1, k + 1):
                M[i - 1, j] = ztilde_k1(n - k + i, xj, p, prec) * ratio ** (k - i) * bz ** (i - 1)
        den = mp.mpf(1)
        for i in range(k):
            for j in range(i + 1, k):
                den *= b_zero(p.phase, xis[j] - xis[i])
        return mp.det(M) / den


def ztilde_k(
    n: int,
    xis: Sequence,
    p: PhaseParams,
    prec: PrecisionCtx = DEFAULT_PREC,
    radius: float = 1e-6,
    nodes: int = 8,
    _tol: float | None = None,
):
    """Z~_n(xi_1..xi_k) by the k x k determinant reduction.

    Coinciding arguments are resolved by averaging over a small circle in the
    colliding variable, which reproduces the analytic value.
    """
    xis = list(xis)
    k = len(xis)
    if k == 0:
        return mp.mpf(1)
    if k > n:
        raise ValueError("need k <= n")
    if k == 1:
        return ztilde_k1(n, xis[0], p, prec)
    tol = 10 * radius if _tol is None else _tol
    for j in range(1, k):
        if any(abs(complex(xis[j]) - complex(xis[i])) < tol for i in range(j)):
            bits = prec.mantissa_bits + 64
            inner = PrecisionCtx(bits, prec.target_rel_err)
            with mp.workprec(bits):
                acc = mp.mpc(0)
                for m in range(nodes):
                    shifted = list(xis)
                    shifted[j] = mp.mpmathify(xis[j]) + radius * mp.expjpi(2 * mp.mpf(m) / nodes)
                    # smaller inner radius keeps shifted points apart from each other
                    acc += ztilde_k(n, shifted, p, inner, radius / 3, nodes, radius / 6)
                val = acc / nodes
                if all(mp.im(mp.mpmathify(v)) == 0 for v in xis):
                    val = mp.re(val)
                return val
    return _ztilde_k_distinct(n, xis, p, prec)


def z_homogeneous(n: int, p: PhaseParams, prec: PrecisionCtx = DEFAULT_PREC):
    """Z_n(0^n; t^n; gamma) from the normalizing constants h_0..h_{n-1}.

    Uses the unscaled phase weights with signed c.
    """
    phase, t, g = _phase_key(p)
    bits = prec.mantissa_bits + 16 * n
    basis = _basis(phase, t, g, max(n - 1, 1), bits)
    with mp.workprec(bits):
        a, b, _ = spectral_weights(phase, t, g)
        prod_h = mp.fprod(basis.h[:n])
        sf = mp.fprod(mp.factorial(j) for j in range(1, n))
        return prod_h / sf**2 * (a * b) ** (n * n)


def partition_function(n: int, w: WeightTriple, prec: PrecisionCtx = DEFAULT_PREC):
    """Homogeneous Z_n(a, b, c) with nonnegative c, through z_homogeneous."""
    from .core import params_from_weights

    p = params_from_weights(*w.as_tuple())
    with mp.workprec(prec.mantissa_bits):
        return abs(z_homogeneous(n, p, prec)) * mp.mpf(p.scale) ** (n * n)


def ztilde_by_enumeration(n: int, xis: Sequence, p: PhaseParams, prec: PrecisionCtx = DEFAULT_PREC):
    """Z~_n from Def.-style inhomogeneous enumeration (small n only)."""
    k = len(xis)
    chi = [0] * n
    with mp.workprec(prec.mantissa_bits):
        psi_num = [mp.mpf(p.t) + mp.mpmathify(x) for x in xis] + [mp.mpf(p.t)] * (n - k)
        num = inhomogeneous_sum(InhomSpec(chi, psi_num, p.gamma, p.phase), prec)
        den = inhomogeneous_sum(InhomSpec(chi, [mp.mpf(p.t)] * n, p.gamma, p.phase), prec)
        return num / den


# ---------------------------------------------------------------------------
# distribution of the first row


def _r_of(p: PhaseParams, xi):
    a0, b0, _ = spectral_weights(p.phase, p.t, p.gamma)
    a1, b1, _ = spectral_weights(p.phase, mp.mpf(p.t) + xi, p.gamma)
    return b1 * a0 / (b0 * a1), a1 / a0


def _solve_lambda11(n: int, p: PhaseParams, nodes: Sequence, bits: int, prec: PrecisionCtx):
    with mp.workprec(bits):
        V = mp.matrix(n, n)
        rhs = mp.matrix(n, 1)
        inner = PrecisionCtx(max(prec.mantissa_bits, bits), prec.target_rel_err)
        for m, xi in enumerate(nodes):
            xi = mp.mpf(xi)
            r, aratio = _r_of(p, xi)
            rhs[m] = ztilde_k1(n, xi, p, inner) / aratio ** (n - 1)
            for ell in range(n):
                V[m, ell] = r**ell
        sol = mp.lu_solve(V, rhs)
        return [sol[i] for i in range(n)]


def lambda11_distribution(n: int, p: PhaseParams, prec: PrecisionCtx = DEFAULT_PREC, tol: float = 1e-10) -> np.ndarray:
    """Exact law of the first-row turning column, Prob(lambda_1^1 = l), l = 1..n."""
    if n < 1:
        raise ValueError("n must be positive")
    if n == 1:
        return np.array([1.0])
    delta = 0.5 / n
    attempts = [
        ([m * delta for m in range(1, n + 1)], prec.mantissa_bits + 24 * n),
        ([0.25 * (1 - math.cos(math.pi * (m + 0.5) / n)) for m in range(n)], 2 * prec.mantissa_bits + 48 * n),
    ]
    last = None
    for nodes, bits in attempts:
        try:
            sol = _solve_lambda11(n, p, nodes, bits, prec)
        except (PrecisionLoss, ZeroDivisionError):
            continue
        probs = np.array([float(mp.re(v)) for v in sol])
        last = probs
        if probs.min() >= -tol and abs(probs.sum() - 1) <= tol:
            return np.clip(probs, 0.0, None)
    raise PrecisionError(f"node system ill-conditioned; last sum {None if last is None else last.sum()}")


def lambda11_by_enumeration(n: int, w: WeightTriple) -> np.ndarray:
    en = enumerate_dwbc(n, w)
    probs = np.zeros(n)
    for tri, wt in zip(en.triangles, en.weights):
        probs[tri.rows[0][0] - 1] += wt
    return probs / probs.sum()


# ---------------------------------------------------------------------------
# Monte Carlo through the Bessel representation


def ztilde_via_bessel_mc(
    n: int,
    k: int,
    xis: Sequence,
    p: PhaseParams,
    samples: int = 2000,
    rng=None,
    chain=None,
) -> tuple[float, float]:
    """Estimate Z~_n(xi_1..xi_k) as prefactor times E[B_x(xi, 0^{n-k})] under the log-gas.

    Returns ``(estimate, stderr)`` for real xi.
    """
    from .loggas import sample_loggas
    from .samplers import ChainConfig, as_generator
    from .specialfn import mv_bessel

    if k == 0:
        return 1.0, 0.0
    xis = [float(v) for v in xis][:k]
    gen = as_generator(rng)
    chain = chain or ChainConfig(sweeps=1, burn_in=max(200, 20 * n), thinning=4)
    with mp.workdps(30):
        pref = mp.mpf(1)
        for xj in xis:
            pref *= _ab_ratio(p, mp.mpf(xj)) ** n * (mp.mpf(xj) / b_zero(p.phase, xj)) ** (n - k)
        for i in range(k):
            for j in range(i + 1, k):
                d = mp.mpf(xis[i]) - xis[j]
                pref *= d / b_zero(p.phase, d)
        pref = float(pref)
    z = xis + [0.0] * (n - k)
    vals = np.empty(samples)
    from .loggas import _KIND, _initial_positions, _run_continuum, _run_lattice

    kind = _KIND[p.phase]
    xs = _initial_positions(n, p)
    seed = int(gen.integers(0, 2**31 - 1))
    lattice = p.phase in (Phase.FERRO, Phase.ANTIFERRO)
    if lattice:
        xs = _run_lattice(xs, kind, float(p.t), float(p.gamma), chain.burn_in, seed, 0.1)
        scale = 1.0
    else:
        xs, scale = _run_continuum(xs, kind, float(p.t), float(p.gamma), chain.burn_in, seed, 1.0, True)
    for s in range(samples):
        seed = int(gen.integers(0, 2**31 - 1))
        if lattice:
            xs = _run_lattice(xs, kind, float(p.t), float(p.gamma), chain.thinning, seed, 0.1)
        else:
            xs, _ = _run_continuum(xs, kind, float(p.t), float(p.gamma), chain.thinning, seed, scale, False)
        vals[s] = float(mp.re(mv_bessel(np.sort(xs), z)))
    est = pref * vals.mean()
    # batch means for the correlated chain
    nb = 20
    batches = vals[: samples - samples % nb].reshape(nb, -1).mean(axis=1)
    se = abs(pref) * batches.std(ddof=1) / math.sqrt(nb)
    return float(est), float(se)
