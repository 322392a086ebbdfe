"""Vertex types, weight parameterizations, DWBC configurations and monotone triangles.

Grid convention: vertex ``(x, y)`` sits in column ``x`` (from the left) and
row ``y`` (from the bottom), both 1-based.  A configuration is stored as a
tuple of rows, ``grid[y - 1][x - 1]``.

Edges are described by path occupancy: a path on a horizontal edge means the
arrow points right, a path on a vertical edge means the arrow points up.  Under
DWBC a path enters every row from the left, no path leaves on the right, no
path enters from the bottom and every column is exited through the top.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterator, Sequence

import mpmath as mp

__all__ = [
    "DomainError",
    "UnsupportedDeltaOne",
    "StructureError",
    "VertexType",
    "Phase",
    "WeightTriple",
    "PhaseParams",
    "Configuration",
    "MonotoneTriangle",
    "delta",
    "classify_phase",
    "spectral_weights",
    "b_zero",
    "weights_from_params",
    "params_from_weights",
    "validate_configuration",
    "triangle_from_configuration",
    "configuration_from_triangle",
    "xor_reflect",
    "iter_monotone_triangles",
    "all_triangles",
    "row_types",
]

DEFAULT_EPS_DELTA = 1e-9


class DomainError(ValueError):
    """Parameters outside the admissible domain."""


class UnsupportedDeltaOne(DomainError):
    """Raised for weights sitting on the excluded Delta = 1 boundary."""


class StructureError(ValueError):
    """An object violates DWBC or interlacing structure."""


class VertexType(enum.IntEnum):
    """The six vertex types, numbered as in the usual ice-rule pictures."""

    T1 = 1
    T2 = 2
    T3 = 3
    T4 = 4
    T5 = 5
    T6 = 6

    @property
    def occupancy(self) -> tuple[int, int, int, int]:
        """Path occupancy of the (left, below, right, above) edges."""
        return _OCCUPANCY[self]

    @property
    def weight_class(self) -> str:
        return _CLASS[self]

    @classmethod
    def from_occupancy(cls, left: int, below: int, right: int, above: int) -> "VertexType":
        try:
            return _FROM_OCC[(left, below, right, above)]
        except KeyError:
            raise StructureError(
                f"occupancy {(left, below, right, above)} breaks the ice rule"
            ) from None


_OCCUPANCY = {
    VertexType.T1: (0, 0, 0, 0),
    VertexType.T2: (1, 1, 1, 1),
    VertexType.T3: (1, 0, 1, 0),
    VertexType.T4: (0, 1, 0, 1),
    VertexType.T5: (1, 0, 0, 1),
    VertexType.T6: (0, 1, 1, 0),
}
_FROM_OCC = {occ: vt for vt, occ in _OCCUPANCY.items()}
_CLASS = {
    VertexType.T1: "a",
    VertexType.T2: "a",
    VertexType.T3: "b",
    VertexType.T4: "b",
    VertexType.T5: "c",
    VertexType.T6: "c",
}


class Phase(str, enum.Enum):
    FERRO = "Ferro"
    DISORDERED = "Disordered"
    ANTIFERRO = "AntiFerro"
    BOUNDARY = "Boundary"

    @classmethod
    def parse(cls, value: "str | Phase") -> "Phase":
        if isinstance(value, Phase):
            return value
        key = str(value).strip().lower().replace("_", "").replace("-", "")
        for ph in cls:
            if ph.value.lower() == key:
                return ph
        aliases = {"f": cls.FERRO, "d": cls.DISORDERED, "af": cls.ANTIFERRO, "b": cls.BOUNDARY}
        if key in aliases:
            return aliases[key]
        raise DomainError(f"unknown phase {value!r}")


def delta(a: float, b: float, c: float) -> float:
    """Anisotropy parameter (a^2 + b^2 - c^2) / (2ab)."""
    if not (a > 0 and b > 0):
        raise DomainError("a and b must be positive")
    if c < 0:
        raise DomainError("c must be nonnegative")
    return (a * a + b * b - c * c) / (2.0 * a * b)


def classify_phase(a: float, b: float, c: float, eps: float = DEFAULT_EPS_DELTA) -> Phase:
    d = delta(a, b, c)
    if abs(d - 1.0) <= eps:
        raise UnsupportedDeltaOne("Delta = 1 is not supported")
    if abs(d + 1.0) <= eps:
        return Phase.BOUNDARY
    if d > 1.0:
        return Phase.FERRO
    if d < -1.0:
        return Phase.ANTIFERRO
    return Phase.DISORDERED


@dataclass(frozen=True)
class WeightTriple:
    a: float
    b: float
    c: float

    def __post_init__(self) -> None:
        if not (self.a > 0 and self.b > 0):
            raise DomainError("a and b must be positive")
        if self.c < 0:
            raise DomainError("c must be nonnegative")

    @property
    def delta(self) -> float:
        return delta(self.a, self.b, self.c)

    def swapped(self) -> "WeightTriple":
        """Weights with a and b exchanged."""
        return WeightTriple(self.b, self.a, self.c)

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.a, self.b, self.c)


@dataclass(frozen=True)
class PhaseParams:
    """Phase tag with (t, gamma) and an overall scale.

    ``c_sign`` is the sign of c(gamma) for the phase formulas; it is only
    negative in the ferroelectric phase with gamma < 0.
    """

    phase: Phase
    t: float
    gamma: float
    scale: float = 1.0
    c_sign: int = field(default=0)

    def __post_init__(self) -> None:
        object.__setattr__(self, "phase", Phase.parse(self.phase))
        t, g = float(self.t), float(self.gamma)
        ph = self.phase
        if not self.scale > 0:
            raise DomainError("scale must be positive")
        if ph is Phase.FERRO:
            ok = 0 < abs(g) < t
        elif ph is Phase.DISORDERED:
            ok = abs(t) < g < math.pi / 2
        else:
            ok = abs(t) < g
        if not ok:
            raise DomainError(f"(t, gamma) = ({t}, {g}) outside the {ph.value} domain")
        sign = -1 if (ph is Phase.FERRO and g < 0) else 1
        if self.c_sign not in (0, sign):
            raise DomainError("c_sign inconsistent with gamma")
        object.__setattr__(self, "c_sign", sign)

    def abc(self, s=None):
        """Unscaled (a(s), b(s), c) at spectral parameter ``s`` (default t)."""
        return spectral_weights(self.phase, self.t if s is None else s, self.gamma)


def spectral_weights(phase: Phase, s, gamma):
    """Return ``(a(s, gamma), b(s, gamma), c(gamma))`` with signed c.

    Works for real or complex ``s`` at the current mpmath precision.
    """
    phase = Phase.parse(phase)
    s = mp.mpmathify(s)
    g = mp.mpf(gamma) if not isinstance(gamma, mp.mpf) else gamma
    if phase is Phase.FERRO:
        return mp.sinh(s - g), mp.sinh(s + g), mp.sinh(2 * g)
    if phase is Phase.DISORDERED:
        return mp.sin(g - s), mp.sin(g + s), mp.sin(2 * g)
    if phase is Phase.ANTIFERRO:
        return mp.sinh(g - s), mp.sinh(g + s), mp.sinh(2 * g)
    return g - s, g + s, 2 * g


def b_zero(phase: Phase, x):
    """The function b(x, 0) entering the determinant denominators."""
    phase = Phase.parse(phase)
    x = mp.mpmathify(x)
    if phase is Phase.DISORDERED:
        return mp.sin(x)
    if phase is Phase.BOUNDARY:
        return x
    return mp.sinh(x)


def weights_from_params(p: PhaseParams) -> WeightTriple:
    """Realize (a, b, |c|) from phase parameters."""
    with mp.workdps(30):
        a, b, c = p.abc()
        a, b, c = float(a), float(b), float(c)
    if not (a > 0 and b > 0):
        raise DomainError("parameters give nonpositive a or b")
    return WeightTriple(p.scale * a, p.scale * b, p.scale * abs(c))


def params_from_weights(a: float, b: float, c: float, eps: float = DEFAULT_EPS_DELTA) -> PhaseParams:
    """Invert the phase parameterizations in closed form."""
    ph = classify_phase(a, b, c, eps)
    d = delta(a, b, c)
    if ph is Phase.DISORDERED:
        g = 0.5 * math.acos(-d)
        t = math.atan(math.tan(g) * (b - a) / (b + a))
        return PhaseParams(ph, t, g, c / math.sin(2 * g))
    if ph is Phase.BOUNDARY:
        return PhaseParams(ph, (b - a) / (b + a), 1.0, (a + b) / 2)
    if ph is Phase.ANTIFERRO:
        g = 0.5 * math.acosh(-d)
        t = math.atanh(math.tanh(g) * (b - a) / (b + a))
        return PhaseParams(ph, t, g, c / math.sinh(2 * g))
    if a == b:
        raise DomainError("a = b is impossible when Delta > 1")
    g = 0.5 * math.acosh(d) * (-1.0 if a > b else 1.0)
    t = math.atanh(math.tanh(g) * (b + a) / (b - a))
    return PhaseParams(ph, t, g, a / math.sinh(t - g))


# ---------------------------------------------------------------------------
# configurations and triangles


@dataclass(frozen=True)
class Configuration:
    n: int
    grid: tuple[tuple[VertexType, ...], ...]

    def __post_init__(self) -> None:
        grid = tuple(tuple(VertexType(v) for v in row) for row in self.grid)
        if len(grid) != self.n or any(len(row) != self.n for row in grid):
            raise StructureError("grid must be n x n")
        object.__setattr__(self, "grid", grid)

    def at(self, x: int, y: int) -> VertexType:
        return self.grid[y - 1][x - 1]

    def counts(self) -> dict[VertexType, int]:
        out = {vt: 0 for vt in VertexType}
        for row in self.grid:
            for v in row:
                out[v] += 1
        return out

    def class_counts(self) -> tuple[int, int, int]:
        na = nb = nc = 0
        for row in self.grid:
            for v in row:
                k = v.weight_class
                if k == "a":
                    na += 1
                elif k == "b":
                    nb += 1
                else:
                    nc += 1
        return na, nb, nc

    def weight(self, w: WeightTriple | Sequence[float]):
        a, b, c = w.as_tuple() if isinstance(w, WeightTriple) else w
        na, nb, nc = self.class_counts()
        return a**na * b**nb * c**nc

    def c_vertices(self) -> list[tuple[int, int]]:
        """Coordinates of Type 5 and Type 6 vertices."""
        return [
            (x + 1, y + 1)
            for y, row in enumerate(self.grid)
            for x, v in enumerate(row)
            if v.weight_class == "c"
        ]

    def to_text(self) -> str:
        lines = [str(self.n)]
        for y in range(self.n, 0, -1):
            lines.append("".join(str(int(v)) for v in self.grid[y - 1]))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Configuration":
        lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
        n = int(lines[0])
        rows = [tuple(VertexType(int(ch)) for ch in ln) for ln in lines[1 : n + 1]]
        if len(rows) != n:
            raise StructureError("expected n grid lines")
        return cls(n, tuple(reversed(rows)))


@dataclass(frozen=True)
class MonotoneTriangle:
    """Rows ``rows[k - 1] = lambda^k``; row k holds k increasing entries."""

    n: int
    rows: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        rows = tuple(tuple(int(v) for v in r) for r in self.rows)
        object.__setattr__(self, "rows", rows)
        problems = _triangle_problems(self.n, rows)
        if problems:
            raise StructureError("; ".join(problems))

    def row(self, k: int) -> tuple[int, ...]:
        return self.rows[k - 1]

    def to_csv(self) -> str:
        out = ["k,i,lambda"]
        for k, r in enumerate(self.rows, start=1):
            for i, v in enumerate(r, start=1):
                out.append(f"{k},{i},{v}")
        return "\n".join(out) + "\n"


def _triangle_problems(n: int, rows: Sequence[Sequence[int]], full: bool = True) -> list[str]:
    out = []
    if len(rows) != n:
        out.append(f"expected {n} rows, got {len(rows)}")
        return out
    for k, r in enumerate(rows, start=1):
        if len(r) != k:
            out.append(f"row {k} has length {len(r)}")
            continue
        if any(v < 1 or v > n for v in r):
            out.append(f"row {k} leaves [1, {n}]")
        if any(r[i] >= r[i + 1] for i in range(k - 1)):
            out.append(f"row {k} not strictly increasing")
    if out:
        return out
    for k in range(1, n):
        lo, hi = rows[k - 1], rows[k]
        for i in range(k):
            if not (hi[i] <= lo[i] <= hi[i + 1]):
                out.append(f"interlacing fails at k={k}, i={i + 1}")
    if full and tuple(rows[-1]) != tuple(range(1, n + 1)):
        out.append("top row must be (1..n)")
    return out


def row_types(n: int, below: Sequence[int], above: Sequence[int]) -> list[VertexType]:
    """Vertex types along one row given the vertical paths below and above it.

    A path enters the row from the left; raises :class:`StructureError` when
    the occupancies cannot be completed.
    """
    bset, aset = set(below), set(above)
    h = 1
    out = []
    for x in range(1, n + 1):
        d = 1 if x in bset else 0
        u = 1 if x in aset else 0
        r = h + d - u
        if r not in (0, 1):
            raise StructureError(f"column {x}: no vertex with these occupancies")
        out.append(VertexType.from_occupancy(h, d, r, u))
        h = r
    if h != 0:
        raise StructureError("path leaves through the right boundary")
    return out


def configuration_from_triangle(tri: MonotoneTriangle) -> Configuration:
    n = tri.n
    grid = []
    prev: tuple[int, ...] = ()
    for k in range(1, n + 1):
        cur = tri.row(k)
        grid.append(tuple(row_types(n, prev, cur)))
        prev = cur
    return Configuration(n, tuple(grid))


def triangle_from_configuration(cfg: Configuration) -> MonotoneTriangle:
    problems = validate_configuration(cfg)
    if problems:
        raise StructureError("invalid configuration: " + "; ".join(problems))
    rows = []
    for y in range(1, cfg.n + 1):
        rows.append(tuple(x for x in range(1, cfg.n + 1) if cfg.at(x, y).occupancy[3]))
    return MonotoneTriangle(cfg.n, tuple(rows))


def validate_configuration(cfg: Configuration) -> list[str]:
    """List every edge mismatch and boundary violation; empty means valid."""
    n = cfg.n
    out: list[str] = []
    for y in range(1, n + 1):
        for x in range(1, n + 1):
            left, below, right, above = cfg.at(x, y).occupancy
            if x == 1 and left != 1:
                out.append(f"({x},{y}): left boundary edge must carry a path")
            if x == n and right != 0:
                out.append(f"({x},{y}): right boundary edge must be empty")
            if y == 1 and below != 0:
                out.append(f"({x},{y}): bottom boundary edge must be empty")
            if y == n and above != 1:
                out.append(f"({x},{y}): top boundary edge must carry a path")
            if x < n and right != cfg.at(x + 1, y).occupancy[0]:
                out.append(f"({x},{y})-({x + 1},{y}): horizontal edge mismatch")
            if y < n and above != cfg.at(x, y + 1).occupancy[1]:
                out.append(f"({x},{y})-({x},{y + 1}): vertical edge mismatch")
    return out


_XOR_MAP = {}
for _vt, (_l, _d, _r, _u) in _OCCUPANCY.items():
    _XOR_MAP[_vt] = VertexType.from_occupancy(1 - _r, _d, 1 - _l, _u)


def xor_reflect(cfg: Configuration) -> Configuration:
    """Flip horizontal occupancies, then mirror left-right.

    Swaps T1 with T3 and T2 with T4, hence exchanges the roles of a and b.
    """
    n = cfg.n
    grid = tuple(
        tuple(_XOR_MAP[cfg.grid[y][n - 1 - x]] for x in range(n)) for y in range(n)
    )
    return Configuration(n, grid)


def _rows_below(upper: tuple[int, ...]) -> Iterator[tuple[int, ...]]:
    """All strictly increasing rows of length len(upper)-1 interlacing ``upper``."""
    k = len(upper) - 1
    if k == 0:
        yield ()
        return

    def rec(i: int, prefix: list[int]) -> Iterator[tuple[int, ...]]:
        if i == k:
            yield tuple(prefix)
            return
        lo = upper[i]
        if prefix:
            lo = max(lo, prefix[-1] + 1)
        for v in range(lo, upper[i + 1] + 1):
            prefix.append(v)
            yield from rec(i + 1, prefix)
            prefix.pop()

    yield from rec(0, [])


def iter_triangles_below(top: Sequence[int]) -> Iterator[tuple[tuple[int, ...], ...]]:
    """Interlacing arrays (row 1, ..., row k) whose row k equals ``top``."""
    top = tuple(top)

    def rec(row: tuple[int, ...]) -> Iterator[list[tuple[int, ...]]]:
        if len(row) == 1:
            yield [row]
            return
        for lower in _rows_below(row):
            for rest in rec(lower):
                yield rest + [row]

    for rows in rec(top):
        yield tuple(rows)


def iter_monotone_triangles(n: int) -> Iterator[MonotoneTriangle]:
    for rows in iter_triangles_below(tuple(range(1, n + 1))):
        yield MonotoneTriangle(n, rows)


@lru_cache(maxsize=16)
def all_triangles(n: int) -> tuple[MonotoneTriangle, ...]:
    return tuple(iter_monotone_triangles(n))
