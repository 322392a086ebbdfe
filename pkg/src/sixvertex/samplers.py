"""Random generators for DWBC configurations and the limiting objects."""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
from numba import njit

from .core import (
    Configuration,
    DomainError,
    MonotoneTriangle,
    VertexType,
    WeightTriple,
    configuration_from_triangle,
    iter_triangles_below,
    triangle_from_configuration,
)

__all__ = [
    "ChainConfig",
    "RngSeed",
    "as_generator",
    "ErgodicityError",
    "WindowOverflow",
    "sample_dwbc_exact",
    "DwbcChain",
    "sample_dwbc_mcmc",
    "mcmc_histogram",
    "transition_matrix",
    "sample_stochastic_6v",
    "sample_mallows_finite",
    "sample_qshuffle_prefix",
    "sample_gue_corners",
    "sample_eta",
    "abc_weight",
    "conditional_law",
    "sample_conditional_triangle",
    "sample_uniform_gt",
]


class ErgodicityError(DomainError):
    """Local flips do not connect the state space (c = 0)."""


class WindowOverflow(RuntimeError):
    """A path failed to turn inside the sampling window."""


@dataclass(frozen=True)
class ChainConfig:
    sweeps: int = 1
    burn_in: int = 1000
    thinning: int = 1

    def __post_init__(self) -> None:
        if min(self.sweeps, self.burn_in, self.thinning) < 1:
            raise ValueError("chain parameters must be positive")


@dataclass(frozen=True)
class RngSeed:
    seed: int
    stream: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream,))
        return np.random.Generator(np.random.PCG64(ss))


def as_generator(rng=None) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngSeed):
        return rng.generator()
    if rng is None:
        return np.random.default_rng()
    return RngSeed(int(rng)).generator()


# ---------------------------------------------------------------------------
# exact DWBC draws


def sample_dwbc_exact(n: int, w: WeightTriple, rng=None) -> Configuration:
    """Inverse-CDF draw from the enumerated Gibbs law (n <= 6)."""
    from .exactpf import enumerate_dwbc

    gen = as_generator(rng)
    en = enumerate_dwbc(n, w)
    cdf = np.cumsum(en.probabilities())
    idx = int(np.searchsorted(cdf, gen.random() * cdf[-1], side="right"))
    return en.configurations[min(idx, len(cdf) - 1)]


# ---------------------------------------------------------------------------
# height-flip Metropolis chain
#
# H[y, x], y = 1..n, x = 0..n: horizontal edge right of column x in row y.
# V[y, x], y = 0..n, x = 1..n: vertical edge above row y in column x.


def _weight_table(w: WeightTriple) -> np.ndarray:
    tab = np.zeros(16)
    val = {"a": w.a, "b": w.b, "c": w.c}
    for vt in VertexType:
        l, d, r, u = vt.occupancy
        tab[8 * l + 4 * d + 2 * r + u] = val[vt.weight_class]
    return tab


def _to_arrays(cfg: Configuration) -> tuple[np.ndarray, np.ndarray]:
    n = cfg.n
    H = np.zeros((n + 1, n + 1), dtype=np.int8)
    V = np.zeros((n + 1, n + 1), dtype=np.int8)
    for y in range(1, n + 1):
        for x in range(1, n + 1):
            l, d, r, u = cfg.at(x, y).occupancy
            H[y, x - 1], H[y, x] = l, r
            V[y - 1, x], V[y, x] = d, u
    return H, V


def _from_arrays(H: np.ndarray, V: np.ndarray) -> Configuration:
    n = H.shape[0] - 1
    grid = tuple(
        tuple(
            VertexType.from_occupancy(int(H[y, x - 1]), int(V[y - 1, x]), int(H[y, x]), int(V[y, x]))
            for x in range(1, n + 1)
        )
        for y in range(1, n + 1)
    )
    return Configuration(n, grid)


@njit(cache=True)
def _vcode(H, V, x, y):
    return 8 * H[y, x - 1] + 4 * V[y - 1, x] + 2 * H[y, x] + V[y, x]


@njit(cache=True)
def _flip_ratio(H, V, tab, x, k):
    """Gibbs ratio for flipping face (x, k), or -1 if the face is frozen."""
    lo, hi, left, right = H[k, x], H[k + 1, x], V[k, x], V[k, x + 1]
    if not (lo == right and hi == left and lo != hi):
        return -1.0
    old = tab[_vcode(H, V, x, k)] * tab[_vcode(H, V, x + 1, k)]
    old *= tab[_vcode(H, V, x, k + 1)] * tab[_vcode(H, V, x + 1, k + 1)]
    _toggle(H, V, x, k)
    new = tab[_vcode(H, V, x, k)] * tab[_vcode(H, V, x + 1, k)]
    new *= tab[_vcode(H, V, x, k + 1)] * tab[_vcode(H, V, x + 1, k + 1)]
    _toggle(H, V, x, k)
    return new / old


@njit(cache=True)
def _toggle(H, V, x, k):
    H[k, x] = 1 - H[k, x]
    H[k + 1, x] = 1 - H[k + 1, x]
    V[k, x] = 1 - V[k, x]
    V[k, x + 1] = 1 - V[k, x + 1]


@njit(cache=True)
def _sweeps(H, V, tab, count, seed):
    np.random.seed(seed)
    n = H.shape[0] - 1
    m = n - 1
    for _ in range(count * m * m):
        x = 1 + np.random.randint(m)
        k = 1 + np.random.randint(m)
        r = _flip_ratio(H, V, tab, x, k)
        if r < 0.0:
            continue
        if r >= 1.0 or np.random.random() < r:
            _toggle(H, V, x, k)


@njit(cache=True)
def _state_code(V):
    n = V.shape[0] - 1
    code = 0
    for y in range(1, n):
        for x in range(1, n + 1):
            code = 2 * code + V[y, x]
    return code


@njit(cache=True)
def _histogram(H, V, tab, sweeps, seed, counts):
    np.random.seed(seed)
    n = H.shape[0] - 1
    m = n - 1
    for _ in range(sweeps):
        for _p in range(m * m):
            x = 1 + np.random.randint(m)
            k = 1 + np.random.randint(m)
            r = _flip_ratio(H, V, tab, x, k)
            if r < 0.0:
                continue
            if r >= 1.0 or np.random.random() < r:
                _toggle(H, V, x, k)
        counts[_state_code(V)] += 1


def _lowest_configuration(n: int) -> Configuration:
    rows = tuple(tuple(range(1, k + 1)) for k in range(1, n + 1))
    return configuration_from_triangle(MonotoneTriangle(n, rows))


def _seed(gen: np.random.Generator) -> int:
    return int(gen.integers(0, 2**31 - 1))


class DwbcChain:
    """Metropolis chain on DWBC configurations with single-face height flips.

    A sweep is (n-1)^2 proposals at uniformly random interior faces.
    """

    def __init__(self, n: int, w: WeightTriple, rng=None, start: Configuration | None = None) -> None:
        if w.c <= 0:
            raise ErgodicityError("local flips need c > 0; use sample_mallows_finite for c = 0")
        self.n = n
        self.w = w
        self.gen = as_generator(rng)
        self.tab = _weight_table(w)
        self.H, self.V = _to_arrays(start or _lowest_configuration(n))

    def run(self, sweeps: int) -> None:
        if self.n > 1 and sweeps > 0:
            _sweeps(self.H, self.V, self.tab, int(sweeps), _seed(self.gen))

    def state(self) -> Configuration:
        return _from_arrays(self.H, self.V)

    def triangle(self) -> MonotoneTriangle:
        n = self.n
        return MonotoneTriangle(n, tuple(tuple(x for x in range(1, n + 1) if self.V[y, x]) for y in range(1, n + 1)))

    def draws(self, count: int, chain: ChainConfig) -> list[MonotoneTriangle]:
        self.run(chain.burn_in)
        out = []
        for _ in range(count):
            self.run(chain.sweeps * chain.thinning)
            out.append(self.triangle())
        return out


def default_burn_in(n: int) -> int:
    return max(1000, 20 * n * n)


def sample_dwbc_mcmc(n: int, w: WeightTriple, chain: ChainConfig | None = None, rng=None) -> Configuration:
    """Run burn-in plus ``sweeps * thinning`` sweeps and return the final state."""
    chain = chain or ChainConfig(burn_in=default_burn_in(n))
    ch = DwbcChain(n, w, rng)
    ch.run(chain.burn_in + chain.sweeps * chain.thinning)
    return ch.state()


def mcmc_histogram(n: int, w: WeightTriple, sweeps: int, burn_in: int = 1000, rng=None) -> dict[MonotoneTriangle, int]:
    """Visit counts of each state, recorded once per sweep (n <= 5)."""
    if n > 5:
        raise ValueError("histogram supports n <= 5")
    ch = DwbcChain(n, w, rng)
    ch.run(burn_in)
    counts = np.zeros(2 ** (n * (n - 1)), dtype=np.int64)
    if n == 1:
        return {ch.triangle(): int(sweeps)}
    _histogram(ch.H, ch.V, ch.tab, int(sweeps), _seed(ch.gen), counts)
    out = {}
    for code in np.nonzero(counts)[0]:
        out[_decode_state(n, int(code))] = int(counts[code])
    return out


def _decode_state(n: int, code: int) -> MonotoneTriangle:
    bits = [(code >> s) & 1 for s in range(n * (n - 1) - 1, -1, -1)]
    rows = []
    for y in range(n - 1):
        chunk = bits[y * n : (y + 1) * n]
        rows.append(tuple(x + 1 for x, b in enumerate(chunk) if b))
    rows.append(tuple(range(1, n + 1)))
    return MonotoneTriangle(n, tuple(rows))


def transition_matrix(n: int, w: WeightTriple) -> tuple[list[MonotoneTriangle], np.ndarray, np.ndarray]:
    """Exact one-proposal transition matrix and Gibbs weights (n <= 4)."""
    from .exactpf import enumerate_dwbc

    en = enumerate_dwbc(n, w)
    states = list(en.triangles)
    index = {t: i for i, t in enumerate(states)}
    tab = _weight_table(w)
    m = n - 1
    P = np.zeros((len(states), len(states)))
    for i, cfg in enumerate(en.configurations):
        H, V = _to_arrays(cfg)
        for x in range(1, m + 1):
            for k in range(1, m + 1):
                r = _flip_ratio(H, V, tab, x, k)
                if r < 0:
                    continue
                _toggle(H, V, x, k)
                j = index[triangle_from_configuration(_from_arrays(H, V))]
                _toggle(H, V, x, k)
                P[i, j] += min(1.0, r) / (m * m)
        P[i, i] = 1.0 - P[i].sum()
    pi = np.asarray(en.weights) / en.Z
    return states, P, pi


# ---------------------------------------------------------------------------
# stochastic six-vertex model in the quadrant


def _stochastic_row(below: tuple[int, ...], b1: float, b2: float, window: int, gen) -> tuple[int, ...]:
    below_set = set(below)
    last = below[-1] if below else 0
    h, x, ups = 1, 1, []
    while x <= last or h == 1:
        if x > window:
            raise WindowOverflow
        d = 1 if x in below_set else 0
        if h and d:
            ups.append(x)
        elif h:
            if gen.random() >= b1:
                ups.append(x)
                h = 0
        elif d:
            if gen.random() < b2:
                ups.append(x)
            else:
                h = 1
        x += 1
    return tuple(ups)


def sample_stochastic_6v(k_rows: int, window_cols: int | None, b1: float, b2: float, rng=None) -> tuple[tuple[int, ...], ...]:
    """Rows 1..k of the stochastic six-vertex model in the quadrant.

    Vertices are resolved row by row, left to right, which respects the same
    dependencies as the anti-diagonal order. The window starts at
    8k/(1-b2) columns and doubles on overflow, at most three times.
    """
    if not (0 < b1 < 1 and 0 < b2 < 1):
        raise DomainError("need 0 < b1, b2 < 1")
    gen = as_generator(rng)
    window = window_cols or int(math.ceil(8 * k_rows / (1 - b2)))
    for _ in range(4):
        try:
            rows: list[tuple[int, ...]] = []
            prev: tuple[int, ...] = ()
            for _k in range(k_rows):
                prev = _stochastic_row(prev, b1, b2, window, gen)
                rows.append(prev)
            return tuple(rows)
        except WindowOverflow:
            window *= 2
    raise WindowOverflow(f"paths did not turn within {window // 2} columns")


# ---------------------------------------------------------------------------
# Mallows permutations


def _confined_geometric(m: int, q: float, gen) -> int:
    logw = np.arange(m) * math.log(q)
    p = np.exp(logw - logw.max())
    cdf = np.cumsum(p)
    return 1 + int(np.searchsorted(cdf, gen.random() * cdf[-1], side="right"))


def sample_mallows_finite(n: int, q: float, rng=None) -> tuple[int, ...]:
    """q-shuffle: tau(k) is the zeta_k-th smallest unused letter, zeta_k confined geometric.

    The law is proportional to q^{inv(tau)}.
    """
    if not q > 0:
        raise DomainError("q must be positive")
    gen = as_generator(rng)
    remaining = list(range(1, n + 1))
    out = []
    for k in range(1, n + 1):
        z = min(_confined_geometric(n - k + 1, q, gen), len(remaining))
        out.append(remaining.pop(z - 1))
    return tuple(out)


def sample_qshuffle_prefix(k: int, q: float, rng=None) -> tuple[int, ...]:
    """First k letters of the infinite q-shuffle with Geom(q) steps."""
    if not 0 < q < 1:
        raise DomainError("need 0 < q < 1")
    gen = as_generator(rng)
    used: list[int] = []
    out = []
    for _ in range(k):
        xi = int(gen.geometric(1 - q))
        # xi-th smallest positive integer not in used
        v = xi
        for u in used:
            if u <= v:
                v += 1
            else:
                break
        bisect.insort(used, v)
        out.append(v)
    return tuple(out)


# ---------------------------------------------------------------------------
# GUE corners and the eta law


def sample_gue_corners(N: int, rng=None) -> tuple[tuple[float, ...], ...]:
    """Eigenvalues of the top-left corners of (X + X*)/2, X with N(0,1) real and imaginary parts."""
    gen = as_generator(rng)
    X = gen.standard_normal((N, N)) + 1j * gen.standard_normal((N, N))
    M = (X + X.conj().T) / 2
    rows = []
    for k in range(1, N + 1):
        try:
            ev = np.linalg.eigvalsh(M[:k, :k])
        except np.linalg.LinAlgError as exc:
            raise ArithmeticError("eigenvalue solver failed") from exc
        rows.append(tuple(float(v) for v in ev))
    return tuple(rows)


def sample_eta(theta: float, rng=None, size: int | None = None):
    """Draws from the density theta e^{theta x}/(e^theta - 1) on [0, 1]."""
    gen = as_generator(rng)
    u = gen.random(size)
    if theta == 0:
        return u
    return np.log1p(u * np.expm1(theta)) / theta


# ---------------------------------------------------------------------------
# conditional triangles


def abc_weight(rows: Sequence[Sequence[int]], w: WeightTriple) -> float:
    """Unnormalized conditional weight of an interlacing array below its top row."""
    sb = (w.b / w.c) ** 2
    sa = (w.a / w.c) ** 2
    out = 1.0
    prev: Sequence[int] = ()
    for row in rows:
        for i, v in enumerate(row):
            if i >= 1 and v == prev[i - 1]:
                out *= sb
            if i < len(prev) and v == prev[i]:
                out *= sa
        prev = row
    return out


@lru_cache(maxsize=64)
def conditional_law(nu: tuple[int, ...], w: WeightTriple) -> tuple[tuple, np.ndarray]:
    if len(nu) > 5:
        raise ValueError("k <= 5 supported")
    arrays = tuple(iter_triangles_below(nu))
    wts = np.array([abc_weight(r, w) for r in arrays])
    return arrays, wts / wts.sum()


def sample_conditional_triangle(nu: Sequence[int], w: WeightTriple, rng=None) -> tuple[tuple[int, ...], ...]:
    """Exact draw of rows 1..k below the top row ``nu``."""
    gen = as_generator(rng)
    arrays, probs = conditional_law(tuple(int(v) for v in nu), w)
    cdf = np.cumsum(probs)
    idx = int(np.searchsorted(cdf, gen.random() * cdf[-1], side="right"))
    return arrays[min(idx, len(arrays) - 1)]


def sample_uniform_gt(nu_real: Sequence[float], sweeps: int = 200, rng=None) -> tuple[tuple[float, ...], ...]:
    """Gibbs sampler for the uniform real interlacing array with top row ``nu_real``."""
    nu = [float(v) for v in nu_real]
    if any(nu[i] > nu[i + 1] for i in range(len(nu) - 1)):
        raise ValueError("top row must be nondecreasing")
    gen = as_generator(rng)
    k = len(nu)
    # block averages of the top row interlace
    rows = [[float(np.mean(nu[i : i + k - j + 1])) for i in range(j)] for j in range(1, k + 1)]
    rows[-1] = nu
    for _ in range(sweeps):
        for j in range(k - 1):
            up = rows[j + 1]
            down = rows[j - 1] if j > 0 else None
            for i in range(j + 1):
                lo, hi = up[i], up[i + 1]
                if down is not None:
                    if i >= 1:
                        lo = max(lo, down[i - 1])
                    if i < j:
                        hi = min(hi, down[i])
                rows[j][i] = lo + (hi - lo) * gen.random()
    return tuple(tuple(r) for r in rows)
