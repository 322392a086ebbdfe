"""Distances between laws and the verification drivers."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from itertools import product
from typing import Callable, Mapping, Sequence

import mpmath as mp
import numpy as np
from scipy import stats as sps

from .core import DomainError, Phase, WeightTriple, classify_phase, params_from_weights

__all__ = [
    "SCHEMA_VERSION",
    "EmpiricalSample",
    "VerifyReport",
    "ks_distance",
    "tv_distance",
    "geometric_pmf",
    "strictly_decreasing",
    "verify_gaussian_limit",
    "verify_geometric_limit",
    "verify_corners_joint",
    "mallows_prefix_tv",
    "verify_mallows",
    "verify_eta_limit",
    "verify_expansions",
]

SCHEMA_VERSION = "1"


@dataclass(frozen=True)
class EmpiricalSample:
    values: tuple
    weights: tuple | None = None
    seed: int | None = None

    def __post_init__(self) -> None:
        if len(self.values) == 0:
            raise ValueError("sample must be nonempty")


@dataclass
class VerifyReport:
    theorem: str
    params: dict
    grid: list[dict] = field(default_factory=list)
    verdict: bool = False
    thresholds: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["schema-version"] = SCHEMA_VERSION
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


# ---------------------------------------------------------------------------
# distances


def _as_pmf(x) -> dict | None:
    if isinstance(x, Mapping):
        return {float(k): float(v) for k, v in x.items()}
    return None


def _pmf_cdf(pmf: dict) -> Callable[[float], float]:
    keys = np.array(sorted(pmf))
    cum = np.cumsum([pmf[k] for k in keys])
    total = cum[-1]

    def cdf(t: float) -> float:
        i = np.searchsorted(keys, t, side="right")
        return 0.0 if i == 0 else float(cum[i - 1] / total)

    return cdf


def ks_distance(sample, reference) -> float:
    """Sup-norm distance between two CDFs.

    ``sample`` is either an array of draws or a mapping value -> probability
    (an exact law, so no sampling noise enters). ``reference`` is a CDF
    callable or such a mapping.
    """
    pmf = _as_pmf(sample)
    ref_pmf = _as_pmf(reference)
    ref = _pmf_cdf(ref_pmf) if ref_pmf is not None else reference
    if pmf is None:
        xs = np.sort(np.asarray(sample, dtype=float).ravel())
        if xs.size == 0:
            raise ValueError("sample must be nonempty")
        uniq, counts = np.unique(xs, return_counts=True)
        pmf = dict(zip(uniq.tolist(), (counts / xs.size).tolist()))
    cdf = _pmf_cdf(pmf)
    points = sorted(set(pmf) | (set(ref_pmf) if ref_pmf else set()))
    best = 0.0
    eps_left = lambda t: np.nextafter(t, -np.inf)
    for t in points:
        best = max(best, abs(cdf(t) - ref(t)), abs(cdf(eps_left(t)) - ref(eps_left(t))))
    return float(best)


def tv_distance(p1, p2) -> float:
    """Half the l1 distance; accepts mappings or aligned arrays."""
    if isinstance(p1, Mapping) or isinstance(p2, Mapping):
        keys = set(p1) | set(p2)
        return 0.5 * math.fsum(abs(p1.get(k, 0) - p2.get(k, 0)) for k in keys)
    a, b = np.asarray(p1, dtype=float), np.asarray(p2, dtype=float)
    m = max(a.size, b.size)
    a = np.pad(a, (0, m - a.size))
    b = np.pad(b, (0, m - b.size))
    return 0.5 * float(np.abs(a - b).sum())


def geometric_pmf(b: float, size: int) -> np.ndarray:
    """Prob(X = l) = (1 - b) b^{l-1}, l = 1..size."""
    ell = np.arange(size)
    return (1 - b) * b**ell


def strictly_decreasing(values: Sequence[float]) -> bool:
    return all(values[i + 1] < values[i] for i in range(len(values) - 1))


# ---------------------------------------------------------------------------
# exact-law drivers


def verify_gaussian_limit(
    weights: Sequence[float], n_grid: Sequence[int] = (8, 16, 32, 48), prec=None, threshold: float | None = None
) -> VerifyReport:
    """KS distance between the standardized exact law of lambda_1^1 and N(0, 1)."""
    from .exactpf import DEFAULT_PREC, lambda11_distribution
    from .limits import gue_constants

    a, b, c = weights
    if classify_phase(a, b, c) is Phase.FERRO:
        raise DomainError("Gaussian limit needs Delta < 1")
    m, s = gue_constants(a, b, c)
    p = params_from_weights(a, b, c)
    rows = []
    for n in n_grid:
        probs = lambda11_distribution(n, p, prec or DEFAULT_PREC)
        z = (np.arange(1, n + 1) - m * n) / (s * math.sqrt(n))
        ks = ks_distance(dict(zip(z.tolist(), probs.tolist())), sps.norm.cdf)
        mean = float(probs @ z)
        var = float(probs @ z**2 - mean**2)
        rows.append({"n": int(n), "statistic": ks, "mean": mean, "variance": var})
    ks_vals = [r["statistic"] for r in rows]
    verdict = strictly_decreasing(ks_vals) and (threshold is None or ks_vals[-1] <= threshold)
    return VerifyReport(
        "gaussian",
        {"weights": list(weights), "m": m, "s": s},
        rows,
        bool(verdict),
        {"final_ks": threshold},
    )


def verify_geometric_limit(
    weights: Sequence[float], n_grid: Sequence[int] = (8, 16, 32, 48), prec=None, threshold: float | None = None
) -> VerifyReport:
    """TV distance between the exact law of lambda_1^1 and Geom(b1)."""
    from .exactpf import DEFAULT_PREC, lambda11_distribution
    from .limits import stochastic_params

    a, b, c = weights
    b1, b2 = stochastic_params(a, b, c)
    p = params_from_weights(a, b, c)
    rows = []
    for n in n_grid:
        probs = lambda11_distribution(n, p, prec or DEFAULT_PREC)
        geo = geometric_pmf(b1, n)
        # mass of the geometric law beyond n also counts
        tv = 0.5 * (float(np.abs(probs - geo).sum()) + b1**n)
        rows.append({"n": int(n), "statistic": tv, "p1": float(probs[0])})
    tvs = [r["statistic"] for r in rows]
    verdict = strictly_decreasing(tvs) and (threshold is None or tvs[-1] <= threshold)
    return VerifyReport("geometric", {"weights": list(weights), "b1": b1, "b2": b2}, rows, bool(verdict), {"final_tv": threshold})


def verify_expansions(
    theorem: str,
    weights: Sequence[float],
    xi: Sequence,
    n_grid: Sequence[int] = (8, 16, 32, 64),
    prec=None,
    band: float = 2.0,
) -> VerifyReport:
    """e_n = |Z~_n / prediction - 1| on a doubling grid.

    Verdict: e_n sqrt(n) never exceeds ``band`` times its value at the first
    grid point. Consecutive ratios of e_n sqrt(n) are reported alongside.
    """
    from .exactpf import DEFAULT_PREC, ztilde_k
    from .limits import expansion_predict

    p = params_from_weights(*weights)
    rows = []
    for n in n_grid:
        args = list(xi) if theorem == "T2.4" else [mp.mpmathify(x) / mp.sqrt(n) for x in xi]
        exact = ztilde_k(n, args, p, prec or DEFAULT_PREC)
        pred = expansion_predict(theorem, n, xi, p)
        e = float(abs(exact / pred - 1))
        rows.append({"n": int(n), "statistic": e, "scaled": e * math.sqrt(n), "exact": mp.nstr(exact, 15)})
    sc = [r["scaled"] for r in rows]
    for i in range(1, len(rows)):
        rows[i]["ratio"] = sc[i] / sc[i - 1] if sc[i - 1] > 0 else 0.0
    verdict = max(sc) <= band * sc[0]
    return VerifyReport(
        theorem,
        {"weights": list(weights), "xi": [str(x) for x in xi]},
        rows,
        bool(verdict),
        {"band": band},
    )


# ---------------------------------------------------------------------------
# Mallows and the eta law


def _qint(q: Fraction, m: int) -> Fraction:
    return sum((q**j for j in range(m)), Fraction(0))


def mallows_prefix_tv(n: int, q: Fraction, k: int = 2) -> Fraction:
    """Exact TV between the laws of (tau(1..k)) for the finite and the infinite q-shuffle.

    Both laws are enumerated over prefixes with letters in 1..n; the infinite
    law's mass outside that set is added in full.
    """
    q = Fraction(q)
    fin_norm = [_qint(q, n - j) for j in range(k)]
    total = Fraction(0)
    inside = Fraction(0)
    for seq in product(range(1, n + 1), repeat=k):
        if len(set(seq)) < k:
            continue
        pf = Fraction(1)
        pi = Fraction(1)
        used: list[int] = []
        for j, v in enumerate(seq):
            r = v - sum(1 for u in used if u < v)
            pf *= q ** (r - 1) / fin_norm[j]
            pi *= (1 - q) * q ** (r - 1)
            used.append(v)
        total += abs(pf - pi)
        inside += pi
    return (total + (1 - inside)) / 2


def verify_mallows(
    a: float,
    b: float,
    k: int = 2,
    n_grid: Sequence[int] = (8, 32, 128),
    draws: int = 0,
    rng=None,
) -> VerifyReport:
    """TV between first-k-row laws of the finite Mallows triangle and the q-shuffle prefix.

    With ``draws == 0`` both laws are exact (rational q = b^2/a^2 when a, b are
    integers); otherwise an empirical TV from ``draws`` samples of each.
    """
    from .samplers import as_generator, sample_mallows_finite, sample_qshuffle_prefix

    if not a > b > 0:
        raise DomainError("need a > b > 0")
    q = Fraction(b * b / (a * a)).limit_denominator(10**6) if draws == 0 else b * b / (a * a)
    rows = []
    if draws == 0:
        for n in n_grid:
            rows.append({"n": int(n), "statistic": float(mallows_prefix_tv(n, q, k)), "exact": True})
    else:
        gen = as_generator(rng)
        for n in n_grid:
            fin: dict = {}
            inf: dict = {}
            for _ in range(draws):
                s = sample_mallows_finite(n, float(q), gen)[:k]
                fin[s] = fin.get(s, 0) + 1 / draws
                s = sample_qshuffle_prefix(k, float(q), gen)
                inf[s] = inf.get(s, 0) + 1 / draws
            rows.append({"n": int(n), "statistic": tv_distance(fin, inf), "exact": False})
    tvs = [r["statistic"] for r in rows]
    return VerifyReport("mallows", {"a": a, "b": b, "k": k, "q": float(q)}, rows, strictly_decreasing(tvs), {})


def verify_eta_limit(theta: float, n_grid: Sequence[int] = (8, 32, 128)) -> VerifyReport:
    """KS between the exact law of lambda_1^1 / n at q = e^{theta/n} and the eta density."""
    rows = []
    eta_cdf = lambda x: float(np.clip(np.expm1(theta * x) / np.expm1(theta), 0.0, 1.0))
    for n in n_grid:
        q = math.exp(theta / n)
        w = q ** np.arange(n)
        pmf = dict(zip((np.arange(1, n + 1) / n).tolist(), (w / w.sum()).tolist()))
        rows.append({"n": int(n), "statistic": ks_distance(pmf, eta_cdf)})
    ks = [r["statistic"] for r in rows]
    return VerifyReport("eta", {"theta": theta}, rows, strictly_decreasing(ks), {})


# ---------------------------------------------------------------------------
# joint law of the second row


def verify_corners_joint(
    weights: Sequence[float],
    k: int = 2,
    n: int = 64,
    draws: int = 200,
    rng=None,
    chain=None,
    tolerance: float = 0.15,
) -> VerifyReport:
    """Standardized second-row moments from MCMC against GUE-corner references."""
    from .limits import gue_constants
    from .samplers import ChainConfig, DwbcChain, as_generator, default_burn_in, sample_gue_corners

    if k != 2:
        raise ValueError("only k = 2 is implemented")
    if n > 128:
        raise ValueError("n <= 128")
    gen = as_generator(rng)
    m, s = gue_constants(*weights)
    chain = chain or ChainConfig(sweeps=max(10, n), burn_in=default_burn_in(n))
    ch = DwbcChain(n, WeightTriple(*weights), gen)
    tris = ch.draws(draws, chain)
    interlace = all(t.rows[1][0] <= t.rows[0][0] <= t.rows[1][1] for t in tris)
    six = np.array([t.rows[1] for t in tris], dtype=float)
    z = (six - m * n) / (s * math.sqrt(n))
    ref = np.array([sample_gue_corners(2, gen)[1] for _ in range(20000)])
    rows = []
    for i in range(2):
        se = math.sqrt(z[:, i].var(ddof=1) / draws + ref[:, i].var(ddof=1) / ref.shape[0])
        diff = float(z[:, i].mean() - ref[:, i].mean())
        rows.append(
            {
                "n": int(n),
                "coordinate": i + 1,
                "statistic": diff,
                "zscore": diff / se if se > 0 else 0.0,
                "mcmc_var": float(z[:, i].var(ddof=1)),
                "gue_var": float(ref[:, i].var(ddof=1)),
            }
        )
    verdict = interlace and all(abs(r["statistic"]) <= tolerance for r in rows)
    return VerifyReport("corners", {"weights": list(weights), "k": k, "draws": draws}, rows, bool(verdict), {"mean_tolerance": tolerance})
