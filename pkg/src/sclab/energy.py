"""Discrete energies and seminorms on the carpet approximations.

Functions on the carpet are passed around as :class:`LatticeFunction`
objects, which can be evaluated at integer lattice points ``(X, Y)`` of any
level ``n`` (geometric position ``(X, Y) / (2 * 3**n)``). Sampling one onto
``V_n`` gives a :class:`VertexFunction`; averaging over cells gives a
:class:`CellFunction`.

The measure is realized by the lower-left corners of level-``m`` cells,
each with weight ``8**-m``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence, Union

import numpy as np

from .errors import InvalidInputError
from .geometry import (POINT_OFFSETS, GraphSkeleton, all_origins, cell_graph, cell_pairs,
                       vertex_graph, vertex_indices)

ALPHA = math.log(8) / math.log(3)


@dataclass(frozen=True)
class Beta:
    """A smoothness exponent, optionally with exact growth ``3**(beta - alpha)``.

    Level weights ``3**((beta - alpha) n)`` are computed as ``growth**n`` when
    the growth is a known rational, which keeps threshold cases exact.
    """

    value: float
    growth: Fraction | None = None

    @classmethod
    def from_growth(cls, growth) -> "Beta":
        growth = Fraction(growth)
        return cls(math.log(8 * growth) / math.log(3), growth)

    def weight(self, n: int):
        if self.growth is not None:
            return self.growth**n
        return 3.0 ** (self.value * n) / 8.0**n


def as_beta(beta) -> Beta:
    return beta if isinstance(beta, Beta) else Beta(float(beta))


# -- lattice functions --------------------------------------------------------


class LatticeFunction:
    """A function evaluable at lattice points of any level."""

    max_level: int | None = None
    uses_y: bool = True          # False lets streaming sums skip the ordinates

    def values(self, x: np.ndarray, y: np.ndarray, level: int, exact: bool = False) -> np.ndarray:
        raise NotImplementedError

    def numerators(self, x: np.ndarray, y: np.ndarray, level: int) -> tuple[np.ndarray, int]:
        """Integer numerators over a common denominator, for exact streaming sums."""
        raise NotImplementedError

    def __call__(self, x, y, level, exact=False):
        return self.values(np.asarray(x), np.asarray(y), level, exact=exact)


class CoordinateX(LatticeFunction):
    """``u(x, y) = x``."""

    uses_y = False

    def values(self, x, y, level, exact=False):
        if exact:
            d = 2 * 3**level
            return np.array([Fraction(int(v), d) for v in np.ravel(x)], dtype=object).reshape(np.shape(x))
        return np.asarray(x, dtype=float) / (2 * 3**level)

    def numerators(self, x, y, level):
        return np.asarray(x, dtype=np.int64), 2 * 3**level


class GeometricFunction(LatticeFunction):
    """Wraps a vectorized float function of geometric coordinates."""

    def __init__(self, func: Callable[[np.ndarray, np.ndarray], np.ndarray]):
        self.func = func

    def values(self, x, y, level, exact=False):
        if exact:
            raise InvalidInputError("geometric functions have no exact evaluation")
        s = 2 * 3**level
        return np.asarray(self.func(np.asarray(x) / s, np.asarray(y) / s), dtype=float)


class Constant(LatticeFunction):
    def __init__(self, c=1):
        self.c = c

    def values(self, x, y, level, exact=False):
        if exact:
            out = np.empty(np.shape(x), dtype=object)
            out[...] = Fraction(self.c)
            return out
        return np.full(np.shape(x), float(self.c))

    def numerators(self, x, y, level):
        c = Fraction(self.c)
        return np.full(np.shape(x), c.numerator, dtype=np.int64), c.denominator


@dataclass
class VertexFunction:
    """Values on the nodes of ``vertex_graph(level, mode)``, in node order."""

    graph: GraphSkeleton
    values: np.ndarray

    def __post_init__(self):
        if len(self.values) != self.graph.node_count:
            raise InvalidInputError(
                f"{len(self.values)} values for {self.graph.node_count} nodes")

    @property
    def level(self) -> int:
        return self.graph.level

    @property
    def exact(self) -> bool:
        return self.values.dtype == object

    def max_denominator(self) -> int:
        if not self.exact:
            raise InvalidInputError("floating vertex function has no denominators")
        return max(Fraction(v).denominator for v in self.values)

    def as_lattice_function(self) -> "TabulatedFunction":
        return TabulatedFunction(self)


class TabulatedFunction(LatticeFunction):
    """Lookup of a vertex function at points of its own or coarser levels."""

    def __init__(self, vf: VertexFunction):
        self.vf = vf
        self.max_level = vf.level

    def values(self, x, y, level, exact=False):
        if level > self.vf.level:
            raise InvalidInputError(f"function known on V_{self.vf.level}, asked at level {level}")
        k = 3 ** (self.vf.level - level)
        pts = np.stack([np.ravel(x) * k, np.ravel(y) * k], axis=1)
        idx = self.vf.graph.indices_of(pts)
        if (idx < 0).any():
            raise InvalidInputError("point is not a vertex of the tabulation level")
        vals = self.vf.values[idx]
        if exact and not self.vf.exact:
            raise InvalidInputError("tabulated values are floating point")
        if not exact and self.vf.exact:
            vals = vals.astype(float)
        return vals.reshape(np.shape(x))


@dataclass
class CellFunction:
    """Values on level-``n`` words in lexicographic order."""

    level: int
    values: np.ndarray
    mode: str = "sc"

    def __post_init__(self):
        if not isinstance(self.values, np.ndarray):
            vals = list(self.values)
            exact = any(isinstance(v, Fraction) for v in vals)
            self.values = np.array(vals, dtype=object if exact else float)
        k = 6 if self.mode == "cross" else 8
        if len(self.values) != k**self.level:
            raise InvalidInputError(f"expected {k**self.level} cell values, got {len(self.values)}")

    @property
    def exact(self) -> bool:
        return self.values.dtype == object


# -- sampling -------------------------------------------------------------------


def sample(u: LatticeFunction, n: int, mode: str = "sc", exact: bool = False) -> VertexFunction:
    """Restrict a lattice function to ``V_n``."""
    g = vertex_graph(n, mode)
    return VertexFunction(g, u.values(g.coords[:, 0], g.coords[:, 1], n, exact=exact))


def restrict(vf: VertexFunction, n: int) -> VertexFunction:
    """Restriction of a function on ``V_N`` to ``V_n`` for ``n <= N``."""
    if n > vf.level:
        raise InvalidInputError("cannot restrict to a finer level")
    if n == vf.level:
        return vf
    g = vertex_graph(n, vf.graph.mode)
    k = 3 ** (vf.level - n)
    idx = vf.graph.indices_of(g.coords * k)
    return VertexFunction(g, vf.values[idx])


def compose_with_map(vf: VertexFunction, i: int) -> VertexFunction:
    """``u o f_i`` as a function on ``V_{n-1}`` for ``u`` on ``V_n``."""
    n = vf.level
    if n < 2:
        raise InvalidInputError("need a function on V_n with n >= 2")
    g = vertex_graph(n - 1, vf.graph.mode)
    shift = POINT_OFFSETS[i] * (2 * 3 ** (n - 1))
    idx = vf.graph.indices_of(g.coords + shift)
    if (idx < 0).any():
        raise InvalidInputError(f"map f_{i} leaves the vertex set in {vf.graph.mode} mode")
    return VertexFunction(g, vf.values[idx])


Family = Union[Callable[[int], VertexFunction], VertexFunction, LatticeFunction,
               Sequence[VertexFunction]]


def as_family(obj) -> Callable[[int], VertexFunction]:
    """Normalize the ways of giving a level-indexed family of vertex functions."""
    if isinstance(obj, VertexFunction):
        return lambda n: restrict(obj, n)
    if isinstance(obj, LatticeFunction):
        return lambda n: sample(obj, n)
    if isinstance(obj, dict):
        return lambda n: obj[n]
    if isinstance(obj, (list, tuple)):
        return lambda n: obj[n - 1]
    if callable(obj):
        return obj
    raise InvalidInputError(f"cannot interpret {type(obj).__name__} as a family")


# -- vertex energies ------------------------------------------------------------


def energy_D(u: VertexFunction):
    """``D_n(u)``: per-cell sum of squared increments along cell perimeters."""
    g = u.graph
    du = u.values[g.edges[:, 0]] - u.values[g.edges[:, 1]]
    if u.exact:
        return sum((int(w) * d * d for w, d in zip(g.weights.tolist(), du)), Fraction(0))
    return float(np.sum(g.weights * du * du))


def energy_a(u: VertexFunction, rho):
    return rho**u.level * energy_D(u)


def cellwise_energy(u: LatticeFunction, n: int, mode: str = "sc", chunk: int = 1 << 18):
    """``D_n(u)`` summed cell by cell without building ``V_n``.

    Exact (a Fraction) when ``u`` provides integer numerators; the partial
    sums are int64 per chunk and accumulated as Python integers.
    """
    present = list(vertex_indices(mode))
    local = {p: k for k, p in enumerate(present)}
    pairs = [(local[i], local[j]) for i, j in cell_pairs(mode)]
    left = np.array([a for a, _ in pairs])
    right = np.array([b for _, b in pairs])
    offsets = POINT_OFFSETS[present].astype(np.int32)
    split = min(n, 5)
    head = all_origins(n - split, mode).astype(np.int32)
    tail = all_origins(split, mode).astype(np.int32)
    rows_per_chunk = max(1, chunk // len(tail))
    total, exact, denom = 0, True, 1
    for start in range(0, len(head), rows_per_chunk):
        block = head[start:start + rows_per_chunk]
        px = (2 * 3**split * block[:, None, 0] + 2 * tail[None, :, 0]).reshape(-1, 1) + offsets[:, 0]
        py = None
        if u.uses_y:
            py = (2 * 3**split * block[:, None, 1] + 2 * tail[None, :, 1]).reshape(-1, 1) + offsets[:, 1]
        try:
            vals, denom = u.numerators(px, py, n)
        except NotImplementedError:
            exact = False
            vals = u.values(px, py, n)
        diffs = vals[:, left] - vals[:, right]
        if exact:
            # the float sum bounds the int64 one closely; nonnegative terms cannot cancel
            if diffs.dtype == object or float(np.sum(np.square(diffs, dtype=float))) >= 2.0**62:
                total += sum(int(d) * int(d) for d in diffs.ravel())
            else:
                total += int(np.sum(diffs * diffs, dtype=np.int64))
        else:
            total += float(np.sum(diffs * diffs))
    if exact:
        return Fraction(total, denom * denom)
    return total


# -- cell energies ----------------------------------------------------------------


def energy_frakD(c: CellFunction):
    """Sum of squared differences across side-sharing cells."""
    g = cell_graph(c.level, c.mode)
    d = c.values[g.edges[:, 0]] - c.values[g.edges[:, 1]]
    if c.exact:
        return sum((x * x for x in d), Fraction(0))
    return float(np.sum(d * d))


def energy_B(c: CellFunction, rho):
    return rho**c.level * energy_frakD(c)


def mean_operator(c: CellFunction, n: int) -> CellFunction:
    """Average each level-``n`` cell over its descendants at ``c.level``."""
    m = c.level - n
    if m < 1 or n < 0:
        raise InvalidInputError(f"cannot average level {c.level} down to level {n}")
    k = 6 if c.mode == "cross" else 8
    block = c.values.reshape(k**n, k**m)
    if c.exact:
        vals = np.array([sum(row, Fraction(0)) / k**m for row in block], dtype=object)
    else:
        vals = block.mean(axis=1)
    return CellFunction(n, vals, c.mode)


def cell_average(u: LatticeFunction, n: int, depth: int, exact: bool = False) -> CellFunction:
    """Approximate cell means ``P_n u`` from the ``8**depth`` lower-left
    corners of the level-``n + depth`` subcells of each cell."""
    if depth < 0:
        raise InvalidInputError("depth must be nonnegative")
    level = n + depth
    origins = all_origins(level)
    vals = u.values(2 * origins[:, 0], 2 * origins[:, 1], level, exact=exact)
    block = vals.reshape(8**n, 8**depth)
    if exact:
        avg = np.array([sum(row, Fraction(0)) / 8**depth for row in block], dtype=object)
    else:
        avg = block.mean(axis=1)
    return CellFunction(n, avg)


def default_depth(n: int, max_level: int | None = None, extra: int = 4) -> int:
    depth = extra
    if max_level is not None:
        depth = min(depth, max_level - n)
    if depth < 0:
        raise InvalidInputError(f"function resolved only to level {max_level} < {n}")
    return depth


def energy_b(u: LatticeFunction, n: int, rho, depth: int | None = None):
    if depth is None:
        depth = default_depth(n, u.max_level)
    return energy_B(cell_average(u, n, depth), rho)


# -- series and sup forms ------------------------------------------------------------


@dataclass
class SeriesResult:
    beta: Beta
    levels: list[int]
    energies: list
    terms: list
    partial_sums: list
    tail_ratios: list = field(default_factory=list)

    @property
    def total(self):
        return self.partial_sums[-1] if self.partial_sums else 0


def _series(energies: list, beta: Beta, levels: list[int]) -> SeriesResult:
    terms = [beta.weight(n) * e for n, e in zip(levels, energies)]
    partial, acc = [], 0
    for t in terms:
        acc = acc + t
        partial.append(acc)
    ratios = [terms[k + 1] / terms[k] if terms[k] else math.nan for k in range(len(terms) - 1)]
    return SeriesResult(beta, list(levels), list(energies), terms, partial, ratios)


def series_E(family: Family, beta, n_max: int) -> SeriesResult:
    """Partial sums of ``sum_n 3**((beta - alpha) n) D_n(u)`` for ``n <= n_max``."""
    fam = as_family(family)
    beta = as_beta(beta)
    levels = list(range(1, n_max + 1))
    return _series([energy_D(fam(n)) for n in levels], beta, levels)


def series_frakE(u: LatticeFunction, beta, n_max: int, depth: int | None = None) -> SeriesResult:
    """Partial sums of the cell-average form ``sum_n 3**((beta - alpha) n) frakD_n(P_n u)``."""
    beta = as_beta(beta)
    levels = list(range(1, n_max + 1))
    energies = []
    for n in levels:
        d = default_depth(n, u.max_level) if depth is None else depth
        energies.append(energy_frakD(cell_average(u, n, d)))
    return _series(energies, beta, levels)


def sup_form(family: Family, beta, n_max: int):
    """``max_{n <= n_max} 3**((beta - alpha) n) D_n(u)``."""
    return max(series_E(family, beta, n_max).terms)


# -- double-integral quadrature ---------------------------------------------------------


@dataclass
class QuadratureResult:
    beta: Beta
    depth: int
    integrals: list[float]     # annulus integrals for n = 0..N
    terms: list[float]         # 3**((alpha + beta) n) * integral

    @property
    def total(self) -> float:
        return float(sum(self.terms))


def besov_integrals(u: LatticeFunction, n_max: int, depth: int, chunk: int = 128) -> list[float]:
    """Approximate ``int int_{|x-y| < 3**-n} (u(x) - u(y))**2`` for ``n = 0..n_max``.

    The double integral becomes a double sum over the ``8**depth`` sample
    points (lower-left cell corners) with weights ``8**-depth`` each.
    """
    if depth < n_max:
        raise InvalidInputError("sampling depth must be at least the number of levels")
    origins = all_origins(depth)
    vals = np.asarray(u.values(2 * origins[:, 0], 2 * origins[:, 1], depth), dtype=float)
    px, py = origins[:, 0], origins[:, 1]
    # squared distance in units of 3**-depth; pair belongs to level n iff d2 < 9**(depth - n)
    thresholds = np.array([9 ** (depth - n) for n in range(n_max, -1, -1)], dtype=np.int64)
    sums = np.zeros(n_max + 2)
    npts = len(vals)
    for start in range(0, npts, chunk):
        stop = min(start + chunk, npts)
        dx = px[start:stop, None] - px[None, start:]
        dy = py[start:stop, None] - py[None, start:]
        d2 = dx * dx + dy * dy
        dv = vals[start:stop, None] - vals[None, start:]
        w = dv * dv
        # pairs (i, j) with j > i count twice; the diagonal contributes zero
        w[:, : stop - start] = np.triu(w[:, : stop - start], k=1)
        bucket = np.searchsorted(thresholds, d2.ravel(), side="right")
        sums += 2 * np.bincount(bucket, weights=w.ravel(), minlength=n_max + 2)
    # bucket b holds pairs with thresholds[b-1] <= d2 < thresholds[b]; such a
    # pair lies in the level-n ball exactly when b <= n_max - n
    cumulative = np.cumsum(sums[: n_max + 1])
    return (cumulative[::-1] / float(npts) ** 2).tolist()


def quadrature_from_integrals(integrals: Sequence[float], beta, depth: int) -> QuadratureResult:
    beta = as_beta(beta)
    terms = [3.0 ** ((ALPHA + beta.value) * n) * v for n, v in enumerate(integrals)]
    return QuadratureResult(beta, depth, list(integrals), terms)


def besov_quadrature(u: LatticeFunction, beta, n_max: int, depth: int,
                     chunk: int = 128) -> QuadratureResult:
    """Weighted annulus integrals ``3**((alpha + beta) n) int int_{|x-y| < 3**-n}``."""
    return quadrature_from_integrals(besov_integrals(u, n_max, depth, chunk), beta, depth)


# -- reports ------------------------------------------------------------------------


def _num(v):
    if isinstance(v, Fraction):
        return f"{v.numerator}/{v.denominator}"
    return float(v)


@dataclass
class EnergyReport:
    levels: list[int]
    D: list
    a: list
    b: list
    partial_sum: list
    sup_form: list
    alpha: float = ALPHA
    beta: float | None = None
    rho: float | None = None

    def rows(self) -> list[dict]:
        return [{"level": n, "D": _num(d), "a": _num(a), "b": _num(b),
                 "partial_sum": _num(s), "sup_form": _num(m)}
                for n, d, a, b, s, m in zip(self.levels, self.D, self.a, self.b,
                                            self.partial_sum, self.sup_form)]

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "beta": self.beta, "rho": self.rho, "rows": self.rows()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=["level", "D", "a", "b", "partial_sum", "sup_form"],
                                lineterminator="\n")
        writer.writeheader()
        writer.writerows(self.rows())
        return buf.getvalue()


def energy_report(u: LatticeFunction, n_max: int, beta, rho, depth: int | None = None) -> EnergyReport:
    beta = as_beta(beta)
    levels = list(range(1, n_max + 1))
    D = [energy_D(sample(u, n)) for n in levels]
    a = [rho**n * d for n, d in zip(levels, D)]
    b = [energy_b(u, n, rho, depth) for n in levels]
    s = _series(D, beta, levels)
    running, sups = None, []
    for t in s.terms:
        running = t if running is None else max(running, t)
        sups.append(running)
    return EnergyReport(levels, D, a, b, s.partial_sums, sups, beta=beta.value, rho=float(rho))
