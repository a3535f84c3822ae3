"""Per-level effective resistances and the scaling factor rho.

Every series here is a list of values indexed by contiguous levels; the fitting
helpers only look at those numbers, so synthetic series work the same way as
computed ones.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .errors import InvalidInputError
from .exact import exact_resistance
from .geometry import (POINT_OFFSETS, GraphSkeleton, cell_graph, check_word, vertex_graph,
                       vinfty_ball, word_index)
from .solver import DEFAULT_TOL, green_function, resistance_solve

RHO_BOUNDS = (7 / 6, 3 / 2)
RHO_SOFT = (1.20, 1.30)
RHO_LITERATURE = (1.25147, 1.25149)
CORNER_PAIRS = {"R_p0p1": (0, 1), "R_p1p5": (1, 5), "R_p3p7": (3, 7), "R_p0p4": (0, 4)}
CELL_PAIRS = {"N_0_1": (0, 1), "N_0_4": (0, 4), "N_1_5": (1, 5), "N_3_7": (3, 7)}


def ls_slope(x, y) -> float:
    """Least-squares slope of ``y`` against ``x``."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    dx = x - x.mean()
    return float(dx @ (y - y.mean()) / (dx @ dx))


def beta_star(rho: float) -> float:
    return math.log(8 * rho) / math.log(3)


def gamma_of(rho: float) -> float:
    return math.log(rho) / math.log(3)


BETA_BOUNDS = (beta_star(RHO_BOUNDS[0]), beta_star(RHO_BOUNDS[1]))


@dataclass
class ResistanceSeries:
    quantity: str
    levels: list[int]
    values: list[float]
    iterations: list[int] = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.levels) != len(self.values):
            raise InvalidInputError("levels and values differ in length")
        if any(b - a != 1 for a, b in zip(self.levels, self.levels[1:])):
            raise InvalidInputError("levels must be contiguous")
        if any(not (v > 0 and math.isfinite(v)) for v in self.values):
            raise InvalidInputError(f"{self.quantity}: values must be positive and finite")

    @classmethod
    def synthetic(cls, c: float, rho: float, levels: Sequence[int], quantity="synthetic"):
        return cls(quantity, list(levels), [c * rho**n for n in levels])

    def value(self, n: int) -> float:
        return self.values[self.levels.index(n)]

    def ratios(self) -> list[float]:
        return [b / a for a, b in zip(self.values, self.values[1:])]

    def to_dict(self) -> dict:
        out = {"quantity": self.quantity, "levels": list(self.levels),
               "values": [float(v) for v in self.values]}
        fit = None
        if len(self.levels) >= 3 and self.quantity != "V_inf":
            fit = estimate_rho(self)
        out["rho_hat"] = fit.rho_hat if fit else None
        out["beta_star_hat"] = fit.beta_star_hat if fit else None
        pairs = self.quantity != "V_inf" and len(self.levels) >= 2 and self.levels[0] == 1
        out["C_hat"] = multiplicativity_check(self).c_hat if pairs else None
        out["gamma_hat"] = self.extra.get("gamma_hat", gamma_of(fit.rho_hat) if fit else None)
        return out


# -- computing the series ----------------------------------------------------------


def corner_point(n: int, i: int) -> int:
    g = vertex_graph(n)
    x, y = POINT_OFFSETS[i] * 3**n
    return g.index_of(int(x), int(y))


def edge_sets(n: int) -> tuple[np.ndarray, np.ndarray]:
    g = vertex_graph(n)
    x = g.coords[:, 0]
    return np.where(x == 0)[0], np.where(x == g.scale)[0]


def _run(tasks: list[Callable[[], object]], threads: int) -> list:
    if threads <= 1:
        return [t() for t in tasks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda t: t(), tasks))


def _solve_task(g: GraphSkeleton, a, b, tol, method, maxiter=None):
    return lambda: resistance_solve(g, a, b, tol=tol, method=method, maxiter=maxiter)


def corner_resistances(n_max: int, tol: float = DEFAULT_TOL, method: str = "cg",
                       threads: int = 1, n_min: int = 1,
                       maxiter: int | None = None) -> dict[str, ResistanceSeries]:
    """``R_n^V`` and the corner-to-corner resistances on ``V_n``."""
    if n_max < n_min:
        raise InvalidInputError("empty level range")
    levels = list(range(n_min, n_max + 1))
    tasks, keys = [], []
    for n in levels:
        g = vertex_graph(n)
        left, right = edge_sets(n)
        tasks.append(_solve_task(g, left, right, tol, method, maxiter))
        keys.append(("R_V", n))
        for name, (i, j) in CORNER_PAIRS.items():
            tasks.append(_solve_task(g, [corner_point(n, i)], [corner_point(n, j)], tol, method, maxiter))
            keys.append((name, n))
    results = _run(tasks, threads)
    out = {}
    for name in ["R_V", *CORNER_PAIRS]:
        picked = [r for (k, _), r in zip(keys, results) if k == name]
        s = ResistanceSeries(name, levels, [r.resistance for r in picked],
                             [r.report.iterations for r in picked])
        s.extra["flux"] = [r.flux_resistance for r in picked]
        out[name] = s
    return out


def cell_terminal(n: int, digit: int) -> int:
    return word_index((digit,) * n)


def cell_resistances(n_max: int, tol: float = DEFAULT_TOL, method: str = "cg",
                     threads: int = 1, n_min: int = 1,
                     maxiter: int | None = None) -> dict[str, ResistanceSeries]:
    """Resistances on ``W_n`` between the repeated-digit corner words."""
    if n_max < n_min:
        raise InvalidInputError("empty level range")
    levels = list(range(n_min, n_max + 1))
    tasks, keys = [], []
    for n in levels:
        g = cell_graph(n)
        for name, (i, j) in CELL_PAIRS.items():
            tasks.append(_solve_task(g, [cell_terminal(n, i)], [cell_terminal(n, j)], tol, method, maxiter))
            keys.append(name)
    results = _run(tasks, threads)
    out = {}
    for name in CELL_PAIRS:
        picked = [r for k, r in zip(keys, results) if k == name]
        out[name] = ResistanceSeries(name, levels, [r.resistance for r in picked],
                                     [r.report.iterations for r in picked])
    return out


def exact_corner_values(n: int) -> dict[str, Fraction]:
    """Exact rational versions of the level-``n`` corner and cell quantities
    (oracle-sized levels only)."""
    g = vertex_graph(n)
    left, right = edge_sets(n)
    out = {"R_V": exact_resistance(g, left, right, cap=10**5)}
    for name, (i, j) in CORNER_PAIRS.items():
        out[name] = exact_resistance(g, [corner_point(n, i)], [corner_point(n, j)], cap=10**5)
    w = cell_graph(n)
    for name, (i, j) in CELL_PAIRS.items():
        out[name] = exact_resistance(w, [cell_terminal(n, i)], [cell_terminal(n, j)], cap=10**5)
    return out


# -- fitting -----------------------------------------------------------------------


@dataclass
class RhoEstimate:
    rho_hat: float
    beta_star_hat: float
    gamma_hat: float
    ratios: list[float]
    window: list[int]
    in_bounds: bool             # rho_hat within [7/6, 3/2]
    in_soft_window: bool        # rho_hat within [1.20, 1.30]
    ratio_flags: list[bool]     # successive ratios within the widened bounds

    def to_dict(self) -> dict:
        return asdict(self)


def estimate_rho(series: ResistanceSeries, drop_first: bool = True, eps: float = 0.05,
                 differenced: bool = False) -> RhoEstimate:
    """Exponential growth rate of a series by least squares on ``log value``.

    With ``differenced=True`` the fit uses ``log(x_{n+1} - x_n)`` instead,
    which is blind to an additive constant in the series.
    """
    if len(series.levels) < 3:
        raise InvalidInputError("rho estimation needs at least 3 levels")
    pairs = list(zip(series.levels, series.values))
    if differenced:
        pairs = [(n, b - a) for (n, a), (_, b) in zip(pairs, pairs[1:])]
        if any(v <= 0 for _, v in pairs):
            raise InvalidInputError("differenced fit needs an increasing series")
    if drop_first and pairs[0][0] == 1 and len(pairs) > 2:
        pairs = pairs[1:]
    n = np.array([p[0] for p in pairs], dtype=float)
    logs = np.log([p[1] for p in pairs])
    rho = math.exp(ls_slope(n, logs))
    ratios = series.ratios()
    lo, hi = RHO_BOUNDS[0] * (1 - eps), RHO_BOUNDS[1] * (1 + eps)
    flags = [lo <= r <= hi for r in ratios]
    return RhoEstimate(rho, beta_star(rho), gamma_of(rho), ratios, [int(k) for k in n],
                       RHO_BOUNDS[0] <= rho <= RHO_BOUNDS[1], RHO_SOFT[0] <= rho <= RHO_SOFT[1], flags)


@dataclass
class MultiplicativityReport:
    c_hat: float
    running: dict[int, float]   # top level L -> max constant over n + m <= L
    stable: bool

    def to_dict(self) -> dict:
        return {"c_hat": self.c_hat, "running": {str(k): v for k, v in self.running.items()},
                "stable": self.stable}


def multiplicativity_check(series: ResistanceSeries, drift: float = 0.2) -> MultiplicativityReport:
    """Empirical constant in ``x_n x_m / C <= x_{n+m} <= C x_n x_m``."""
    x = dict(zip(series.levels, series.values))
    running: dict[int, float] = {}
    best = 0.0
    for top in sorted(x):
        for n in x:
            m = top - n
            if m in x and n <= m:
                q = x[n] * x[m] / x[top]
                best = max(best, q, 1 / q)
        if best:
            running[top] = best
    if not running:
        raise InvalidInputError("no level pair (n, m) with n + m available")
    vals = list(running.values())
    stable = math.isfinite(vals[-1]) and vals[-1] <= vals[0] * (1 + drift) if len(vals) > 1 else True
    return MultiplicativityReport(best, running, stable)


# -- chaining ------------------------------------------------------------------------


def chain_words(w: Sequence[int]) -> list[tuple[int, ...]]:
    """``w^(1) = w, ..., w^(n) = w_1^n, w^(n+1) = 0^n``; the ``i``-th word
    keeps the first ``n - i`` letters and repeats the next one."""
    w = check_word(w)
    n = len(w)
    seq = [w[: n - i] + (w[n - i],) * i for i in range(1, n + 1)]
    seq.append((0,) * n)
    return seq


@dataclass
class ChainResult:
    words: list[tuple[int, ...]]
    steps: list[float]
    bound: float
    direct: float

    @property
    def holds(self) -> bool:
        return self.bound >= self.direct * (1 - 1e-9)


def chain_bound(w: Sequence[int], tol: float = DEFAULT_TOL, method: str = "cg") -> ChainResult:
    """Triangle-inequality bound for ``N_n(w, 0^n)`` along the chain words."""
    words = chain_words(w)
    n = len(words[0])
    g = cell_graph(n)

    def res(a, b):
        if a == b:
            return 0.0
        return resistance_solve(g, [word_index(a)], [word_index(b)], tol=tol, method=method).resistance

    steps = [res(a, b) for a, b in zip(words, words[1:])]
    result = ChainResult(words, steps, float(sum(steps)), res(words[0], words[-1]))
    if not result.holds:
        raise AssertionError(f"chain bound {result.bound} below direct value {result.direct}")
    return result


# -- infinite carpet -------------------------------------------------------------------


@dataclass
class ScalingResult:
    center: tuple[int, int]
    radii: list[int]
    green: list[float]          # g_B(z, z)
    resistance: list[float]     # R(z, boundary of B) from an independent solve
    nodes: list[int]
    distortion: list[float]     # max Euclidean distance / graph radius on the ball
    gamma_hat: float            # slope of log g against log r
    gamma_increment: float      # slope of log (g(3r) - g(r)) against log r

    def series(self) -> ResistanceSeries:
        # radii are reported in the "levels" slot so that the JSON layout is shared
        s = ResistanceSeries.__new__(ResistanceSeries)
        s.quantity, s.levels, s.values = "V_inf", list(self.radii), list(self.green)
        s.iterations, s.extra = [], {"gamma_hat": self.gamma_hat}
        return s

    def to_dict(self) -> dict:
        return asdict(self)


def vinfty_scaling(z: tuple[int, int], radii: Sequence[int], tol: float = DEFAULT_TOL,
                   method: str = "cg") -> ScalingResult:
    """``g_{B(z,r)}(z,z)`` and ``R(z, dB)`` on graph-distance balls.

    ``z`` is given in doubled coordinates (edges have length one).
    """
    radii = sorted(int(r) for r in radii)
    if not radii or radii[0] < 1:
        raise InvalidInputError("radii must be positive")
    greens, res, nodes, dist = [], [], [], []
    for r in radii:
        ball = vinfty_ball(z, r)
        rep = green_function(ball, tol=tol, method=method)
        greens.append(float(rep.solution[ball.center]))
        rs = resistance_solve(ball, [ball.center], np.where(ball.boundary)[0], tol=tol, method=method)
        res.append(rs.resistance)
        nodes.append(ball.node_count)
        d = np.hypot(*(ball.coords - ball.coords[ball.center]).T)
        dist.append(float(d.max() / r))
    logr = np.log(radii)
    gamma = ls_slope(logr, np.log(greens)) if len(radii) > 1 else float("nan")
    inc = np.diff(greens)
    if len(inc) > 1 and (inc > 0).all():
        gamma_inc = ls_slope(logr[:-1], np.log(inc))
    else:
        gamma_inc = float("nan")
    return ScalingResult((int(z[0]), int(z[1])), radii, greens, res, nodes, dist, gamma, gamma_inc)


# -- serialization -----------------------------------------------------------------------


def series_csv(series: Sequence[ResistanceSeries]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["quantity", "level", "value"])
    for s in series:
        for n, v in zip(s.levels, s.values):
            w.writerow([s.quantity, n, repr(float(v))])
    return buf.getvalue()
