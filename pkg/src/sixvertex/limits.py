"""Limit constants, leading-order expansions of Z~_n and the F^sym / F^st families."""

from __future__ import annotations

import cmath
import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import mpmath as mp

from .core import (
    DomainError,
    Phase,
    PhaseParams,
    VertexType,
    classify_phase,
    delta,
    iter_triangles_below,
    params_from_weights,
    row_types,
    spectral_weights,
)
from .specialfn import ThetaNome, theta

__all__ = [
    "LimitConstants",
    "limit_constants",
    "gue_constants",
    "sigma",
    "stochastic_params",
    "stochastic_weight_match",
    "THEOREMS",
    "expansion_predict",
    "f_sym",
    "f_st",
    "f_st_partition",
    "stochastic_row_law",
    "stochastic_ik",
    "ztilde_stochastic",
]

THEOREMS = ("T2.4", "T2.5", "T2.6", "T2.7")


@dataclass(frozen=True)
class LimitConstants:
    m_const: float | None
    s_const: float | None
    b1: float | None
    b2: float | None
    mallows_q: float
    sigma: float | None


def _cot(x):
    return mp.cot(x)


def _af_logders(t, g):
    """Theta log-derivatives used by the antiferroelectric formulas."""
    nome = ThetaNome.from_gamma(float(g))
    v, d = theta(2, mp.pi * t / (2 * g), nome)
    l2 = d / v
    u = mp.pi * (t + g) / (4 * g)
    sq = mp.fsum((lambda vd: (vd[1] / vd[0]) ** 2)(theta(ell, u, nome)) for ell in range(1, 5))
    return l2, sq


def gue_constants(a: float, b: float, c: float) -> tuple[float, float]:
    """(m, s) such that (lambda_1^1 - m n)/(s sqrt n) is asymptotically standard normal."""
    ph = classify_phase(a, b, c)
    if ph is Phase.FERRO:
        raise DomainError("Gaussian constants need Delta < 1")
    p = params_from_weights(a, b, c)
    with mp.workdps(30):
        t, g = mp.mpf(p.t), mp.mpf(p.gamma)
        if ph is Phase.DISORDERED:
            tn = mp.pi / (2 * g) * mp.tan(mp.pi * t / (2 * g))
            cp, cm = _cot(g + t), _cot(g - t)
            m = (cp + tn) / (cm + cp)
            s2 = (-mp.mpf(2) / 3 + mp.pi**2 / (6 * g**2) - (cp + tn) * (cm - tn)) / (cm + cp) ** 2
        elif ph is Phase.ANTIFERRO:
            l2, sq = _af_logders(t, g)
            l2 = mp.pi / (2 * g) * l2
            cp, cm = mp.coth(g + t), mp.coth(g - t)
            m = (cp - l2) / (cm + cp)
            s2 = (mp.mpf(2) / 3 - l2**2 / 3 + mp.pi**2 / (12 * g**2) * sq) / (cm + cp) ** 2
            s2 += (l2 * (cm - cp) - cp * cm) / (cm + cp) ** 2
        else:
            tn = mp.pi / (2 * g) * mp.tan(mp.pi * t / (2 * g))
            m = (g - t) / (2 * g) + mp.pi * (g**2 - t**2) / (4 * g**2) * mp.tan(mp.pi * t / (2 * g))
            ip, im = 1 / (g + t), 1 / (g - t)
            s2 = (mp.pi**2 / (6 * g**2) - (ip + tn) * (im - tn)) / (im + ip) ** 2
        if s2 <= 0:
            raise DomainError("nonpositive variance constant")
        return float(m), float(mp.sqrt(s2))


def sigma(p: PhaseParams) -> float:
    """Scale factor relating rescaled rows to Bessel arguments.

    At Delta = -1 the sum 1/(gamma-t) + 1/(gamma+t) is used; it is the limit of
    the other two phases.
    """
    t, g = p.t, p.gamma
    if p.phase is Phase.DISORDERED:
        return 1 / math.tan(g - t) + 1 / math.tan(g + t)
    if p.phase is Phase.BOUNDARY:
        return 1 / (g - t) + 1 / (g + t)
    return 1 / math.tanh(g - t) + 1 / math.tanh(g + t)


def stochastic_params(a: float, b: float, c: float) -> tuple[float, float]:
    """(b1, b2) of the limiting stochastic six-vertex model, 0 < b1 < b2 < 1."""
    if not delta(a, b, c) > 1 or a == b:
        raise DomainError("need Delta > 1 and a != b")
    if a < b:
        raise DomainError("need a > b; swap a and b and reflect the configuration first")
    s = a * a + b * b - c * c
    disc = math.sqrt(s * s - 4 * a * a * b * b)
    return (s - disc) / (2 * a * a), (s + disc) / (2 * a * a)


def stochastic_weight_match(p: PhaseParams) -> tuple[float, float]:
    """(q, w) of the stochastic weights with the same DWBC measure."""
    if p.phase is not Phase.FERRO or not p.gamma < 0:
        raise DomainError("stochastic weights are positive only for Ferro with gamma < 0")
    t, g = p.t, p.gamma
    q = math.exp(-4 * g)
    w = math.expm1(2 * t + 2 * g) / math.expm1(2 * t - 2 * g)
    return q, w


def limit_constants(a: float, b: float, c: float) -> LimitConstants:
    ph = classify_phase(a, b, c)
    p = params_from_weights(a, b, c)
    m = s = b1 = b2 = None
    if ph is Phase.FERRO:
        if a > b:
            b1, b2 = stochastic_params(a, b, c)
    else:
        m, s = gue_constants(a, b, c)
    return LimitConstants(m, s, b1, b2, b * b / (a * a), sigma(p))


# ---------------------------------------------------------------------------
# leading-order expansions


def _t24(n, xis, t, g):
    g = abs(g)
    out = mp.mpf(1)
    for x in xis:
        out *= (mp.sinh(t + g + x) / mp.sinh(t + g)) ** n * mp.exp(-x)
    return out


def _t25(n, xis, t, g):
    tn = mp.pi / (2 * g) * mp.tan(mp.pi * t / (2 * g))
    lin = _cot(g + t) - _cot(g - t) + tn
    quad = mp.mpf(5) / 3 - mp.pi**2 / (6 * g**2) - tn**2 + _cot(g + t) ** 2 + _cot(g - t) ** 2
    return mp.exp(mp.sqrt(n) * lin * mp.fsum(xis) - quad * mp.fsum(x * x for x in xis) / 2)


def _t26(n, xis, t, g):
    l2, sq = _af_logders(t, g)
    lin = mp.coth(g + t) - mp.coth(g - t) - mp.pi / (2 * g) * l2
    quad = (
        mp.mpf(5) / 3
        - mp.pi**2 / (12 * g**2) * l2**2
        + mp.pi**2 / (12 * g**2) * sq
        - mp.coth(g + t) ** 2
        - mp.coth(g - t) ** 2
    )
    return mp.exp(mp.sqrt(n) * lin * mp.fsum(xis) + quad * mp.fsum(x * x for x in xis) / 2)


def _t27(n, xis, t, g):
    # Z~ depends on (xi, t, gamma) only through (xi/gamma, t/gamma)
    xis = [x / g for x in xis]
    t = t / g
    tn = mp.pi / 2 * mp.tan(mp.pi * t / 2)
    lin = 1 / (1 + t) - 1 / (1 - t) + tn
    quad = 1 / (1 - t) ** 2 + 1 / (1 + t) ** 2 - mp.pi**2 / 6 - tn**2
    # quadratic sign taken from the gamma -> 0 limit of the Disordered formula
    return mp.exp(mp.sqrt(n) * lin * mp.fsum(xis) - quad * mp.fsum(x * x for x in xis) / 2)


_EXPANSIONS = {
    "T2.4": (Phase.FERRO, _t24),
    "T2.5": (Phase.DISORDERED, _t25),
    "T2.6": (Phase.ANTIFERRO, _t26),
    "T2.7": (Phase.BOUNDARY, _t27),
}


def expansion_predict(theorem: str, n: int, xi_vec: Sequence, p: PhaseParams):
    """Leading-order prediction without the O(1/sqrt n) remainder.

    For T2.4 the value approximates Z~_n(xi_1..xi_k); for T2.5-T2.7 it
    approximates Z~_n(xi_1/sqrt n, .., xi_k/sqrt n).
    """
    if theorem not in _EXPANSIONS:
        raise ValueError(f"theorem must be one of {THEOREMS}")
    phase, fn = _EXPANSIONS[theorem]
    if p.phase is not phase:
        raise DomainError(f"{theorem} needs the {phase.value} phase, got {p.phase.value}")
    with mp.workdps(30):
        return fn(n, [mp.mpmathify(x) for x in xi_vec], mp.mpf(p.t), mp.mpf(p.gamma))


# ---------------------------------------------------------------------------
# F^sym and F^st


def f_sym(nu: Sequence[int], xi_vec: Sequence, p: PhaseParams, n: int):
    """F^sym_nu as a sum over interlacing arrays below nu (top row nu)."""
    nu = tuple(int(v) for v in nu)
    k = len(nu)
    if len(xi_vec) != k:
        raise ValueError("need one xi per row")
    if k > 5:
        raise ValueError("k <= 5 supported")
    if n < nu[-1]:
        raise ValueError("need n >= nu_k")
    ws = [spectral_weights(p.phase, mp.mpf(p.t) + mp.mpmathify(x), p.gamma) for x in xi_vec]
    c = ws[0][2]
    pref = mp.fprod(ws[j - 1][0] ** (n - 2 * j + 1) * c ** (2 * j - 1) for j in range(1, k + 1))
    ratio = [b / a for a, b, _ in ws]
    sa = [(a / c) ** 2 for a, _, _ in ws]
    sb = [(b / c) ** 2 for _, b, _ in ws]
    total = mp.mpf(0)
    for rows in iter_triangles_below(nu):
        term = mp.mpf(1)
        prev: tuple[int, ...] = ()
        for j, row in enumerate(rows):
            term *= ratio[j] ** (sum(row) - sum(prev) - (j + 1))
            for i, v in enumerate(row):
                if i >= 1 and v == prev[i - 1]:
                    term *= sb[j]
                if i < len(prev) and v == prev[i]:
                    term *= sa[j]
            prev = row
        total += term
    return pref * total


def _f_st_direct(nu, ws, q, scale):
    k = len(nu)
    total = 0j
    for perm in itertools.permutations(range(k)):
        v = [ws[i] for i in perm]
        term = 1 + 0j
        for al in range(k):
            for be in range(al + 1, k):
                term *= (1 - v[al] * (1 + q) + q * v[al] * v[be]) / (v[be] - v[al])
        for i in range(k):
            term *= (v[i] / scale) ** (nu[i] - 1)
        total += term
    pref = 1 + 0j
    for x in ws:
        pref *= 1 - x
    return pref * total


def f_st(
    nu: Sequence[int],
    w_vec: Sequence,
    q: float,
    radius: float = 1e-4,
    nodes: int = 8,
    scale: float = 1.0,
) -> complex:
    """F^st_nu(w_1..w_k) by the symmetrization formula.

    Coinciding w's are resolved by averaging over small circles, which is
    exact up to aliasing of order radius^nodes for this polynomial. With
    ``scale`` the result is divided by scale^{sum(nu_i - 1)}, which keeps
    ratios finite for large nu.
    """
    nu = tuple(int(v) for v in nu)
    ws = [complex(v) for v in w_vec]
    k = len(nu)
    if len(ws) != k:
        raise ValueError("need one w per row")
    if k > 6:
        raise ValueError("k <= 6 supported")
    for j in range(1, k):
        if any(abs(ws[j] - ws[i]) < 10 * radius for i in range(j)):
            acc = 0j
            for m in range(nodes):
                shifted = list(ws)
                shifted[j] = ws[j] + radius * cmath.exp(2j * math.pi * m / nodes)
                acc += f_st(nu, shifted, q, radius / 3, nodes, scale)
            return acc / nodes
    return _f_st_direct(nu, ws, q, scale)


_ST_WEIGHT = {
    VertexType.T1: lambda w, q: 1.0,
    VertexType.T2: lambda w, q: 1.0,
    VertexType.T3: lambda w, q: w,
    VertexType.T4: lambda w, q: q * w,
    VertexType.T5: lambda w, q: 1.0 - w,
    VertexType.T6: lambda w, q: 1.0 - q * w,
}


def f_st_partition(nu: Sequence[int], w_vec: Sequence, q: float) -> complex:
    """F^st_nu as the strip partition function with stochastic row weights."""
    nu = tuple(int(v) for v in nu)
    width = nu[-1]
    total = 0j
    for rows in iter_triangles_below(nu):
        term = 1 + 0j
        prev: tuple[int, ...] = ()
        for j, row in enumerate(rows):
            w = complex(w_vec[j])
            for vt in row_types(width, prev, row):
                term *= _ST_WEIGHT[vt](w, q)
            prev = row
        total += term
    return total


def stochastic_row_law(k: int, b1: float, b2: float, tail: float = 1e-10) -> dict[tuple[int, ...], float]:
    """Exact law of the k-th row of the stochastic model in the quadrant.

    Rows are built by the row transfer with w = b1 and q w = b2; columns
    beyond the cutoff carry total mass below ``tail``.
    """
    if not (0 < b1 < 1 and 0 < b2 < 1):
        raise DomainError("need 0 < b1, b2 < 1")
    rho = max(b1, b2)
    cutoff = int(math.ceil(math.log(tail / (10 * k)) / math.log(rho))) + 2 * k
    law: dict[tuple[int, ...], float] = {(): 1.0}
    for _ in range(k):
        nxt: dict[tuple[int, ...], float] = {}
        for below, pr in law.items():
            _row_step(below, pr, b1, b2, cutoff, nxt)
        law = nxt
    return law


def _row_step(below, pr, w, qw, cutoff, out):
    # depth-first over columns with horizontal occupancy h
    below_set = set(below)
    stack = [(1, 1, (), pr)]
    while stack:
        x, h, ups, p = stack.pop()
        if x > cutoff:
            continue
        if x > (below[-1] if below else 0) and h == 0:
            out[ups] = out.get(ups, 0.0) + p
            continue
        d = 1 if x in below_set else 0
        if h == 1 and d == 1:
            stack.append((x + 1, 1, ups + (x,), p))
        elif h == 0 and d == 0:
            stack.append((x + 1, 0, ups, p))
        elif h == 1:
            stack.append((x + 1, 1, ups, p * w))
            stack.append((x + 1, 0, ups + (x,), p * (1 - w)))
        else:
            stack.append((x + 1, 0, ups + (x,), p * qw))
            stack.append((x + 1, 1, ups, p * (1 - qw)))


def stochastic_ik(X: Sequence, Y: Sequence, q, bits: int = 256):
    """Stochastic-weight Izergin-Korepin determinant for distinct X and distinct Y."""
    n = len(X)
    with mp.workprec(bits):
        X = [mp.mpmathify(v) for v in X]
        Y = [mp.mpmathify(v) for v in Y]
        q = mp.mpmathify(q)
        num = mp.fprod(1 - X[i] * Y[j] for i in range(n) for j in range(n))
        den = mp.mpf(1)
        for i in range(n):
            for j in range(i + 1, n):
                den *= (X[i] - X[j]) * (Y[i] - Y[j])
        M = mp.matrix(n, n)
        for i in range(n):
            for j in range(n):
                xy = X[i] * Y[j]
                M[i, j] = (1 - q) * xy / ((1 - xy) * (1 - q * xy))
        return num / den * mp.det(M)


def _xi_from_w(wi, t, g):
    # invert w_i = (1 - e^{2t+2g+2xi}) / (1 - e^{2t-2g+2xi})
    e = (1 - wi) / (mp.exp(2 * g) - wi * mp.exp(-2 * g))
    return mp.log(e) / 2 - t


def ztilde_stochastic(n: int, w_vec: Sequence, q: float, w: float, prec=None):
    """Normalized stochastic partition function via the symmetric-weight Z~_n."""
    from .exactpf import DEFAULT_PREC, ztilde_k

    prec = prec or DEFAULT_PREC
    if not (q > 1 and 0 < w < 1 and q * w < 1):
        raise DomainError("need q > 1 and 0 < w, q w < 1")
    if all(complex(v) == w for v in w_vec):
        return mp.mpf(1)
    with mp.workprec(prec.mantissa_bits):
        g = -mp.log(mp.mpf(q)) / 4
        e0 = (1 - mp.mpf(w)) / (mp.exp(2 * g) - w * mp.exp(-2 * g))
        t = mp.log(e0) / 2
        p = PhaseParams(Phase.FERRO, float(t), float(g))
        # use the float-rounded (t, g) consistently
        t, g = mp.mpf(p.t), mp.mpf(p.gamma)
        xis = [_xi_from_w(mp.mpmathify(v), t, g) for v in w_vec]
        val = ztilde_k(n, xis, p, prec)
        for x in xis:
            val *= mp.exp(x) * ((mp.exp(-t + g) - mp.exp(t - g)) / (mp.exp(-t - x + g) - mp.exp(t + x - g))) ** n
        return val
