"""Measured constants for the inequalities and equivalences that are only
stated up to unspecified constants.

Every check returns a :class:`RatioReport`; the windows it is judged against
come from :class:`Windows` so that experiments can tighten or relax them.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .energy import (ALPHA, CellFunction, LatticeFunction, TabulatedFunction, VertexFunction,
                     as_family, besov_integrals, cell_average, energy_B, energy_D,
                     mean_operator, quadrature_from_integrals, series_E, series_frakE)
from .errors import InvalidInputError
from .geometry import GraphSkeleton, vertex_graph
from .resistance import ls_slope
from .solver import DEFAULT_TOL, solve_dirichlet


@dataclass
class Windows:
    drift: float = 0.20                 # allowed upward drift of running maxima
    stability_factor: float = 2.0       # max / min of a level-indexed statistic
    equivalence: tuple[float, float] = (1e-2, 1e2)
    across_beta: float = 3.0
    local_window: tuple[float, float] = (0.1, 10.0)


@dataclass
class RatioReport:
    claim: str
    instances: list[dict]
    passed: bool
    statistics: dict = field(default_factory=dict)

    @property
    def ratios(self) -> list[float]:
        return [i["ratio"] for i in self.instances if "ratio" in i]

    @property
    def max(self) -> float:
        r = self.ratios
        return max(r) if r else math.nan

    @property
    def min(self) -> float:
        r = self.ratios
        return min(r) if r else math.nan

    def to_dict(self) -> dict:
        return {"claim": self.claim, "passed": self.passed, "max": self.max, "min": self.min,
                "statistics": self.statistics, "instances": self.instances}

    def to_csv(self) -> str:
        keys = sorted({k for i in self.instances for k in i})
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
        w.writeheader()
        w.writerows(self.instances)
        return buf.getvalue()


def _slope(xs, ys) -> float:
    if len(xs) < 2:
        return 0.0
    return ls_slope(xs, ys)


def _running_max_drift(by_level: dict[int, list[float]]) -> tuple[dict[int, float], float]:
    """Running maximum of the ratios as the top level grows, and its relative
    growth over the level range. The lowest top level is a transient (few
    ratios, coarsest graph) and only serves as the baseline when it is one
    of just two levels."""
    running, best = {}, -math.inf
    for top in sorted(by_level):
        best = max(best, max(by_level[top]))
        running[top] = best
    vals = list(running.values())
    base = vals[1] if len(vals) > 2 else vals[0]
    return running, vals[-1] / base - 1 if base > 0 else math.inf


# -- weak monotonicity ------------------------------------------------------------


def monotonicity_a(family, rho: float, n_max: int, m_max: int | None = None,
                   windows: Windows | None = None, label: str = "u") -> RatioReport:
    """Ratios ``a_n(u) / a_{n+m}(u)`` for ``n + m <= n_max``."""
    windows = windows or Windows()
    fam = as_family(family)
    m_max = n_max - 1 if m_max is None else m_max
    a = {n: rho**n * float(energy_D(fam(n))) for n in range(1, n_max + 1)}
    if all(v == 0 for v in a.values()):
        return RatioReport("a_n <= C a_{n+m}", [], True, {"excluded": "constant function"})
    instances, by_top = [], {}
    for top in range(2, n_max + 1):
        for m in range(1, min(m_max, top - 1) + 1):
            n = top - m
            if a[top] == 0:
                raise InvalidInputError(f"a_{top} vanishes for a nonconstant {label}")
            r = a[n] / a[top]
            instances.append({"function": label, "n": n, "m": m, "ratio": r})
            by_top.setdefault(top, []).append(r)
    running, drift = _running_max_drift(by_top)
    finite = all(math.isfinite(i["ratio"]) for i in instances)
    stats = {"running_max": {str(k): v for k, v in running.items()}, "drift": drift,
             "trend": _slope([i["n"] + i["m"] for i in instances], [i["ratio"] for i in instances])}
    return RatioReport("a_n <= C a_{n+m}", instances, finite and drift < windows.drift, stats)


def monotonicity_B(cells: Sequence[CellFunction], rho: float, windows: Windows | None = None,
                   label: str = "c") -> RatioReport:
    """Ratios ``B_n(M_{n,m} c) / B_{n+m}(c)`` for every coarser ``n`` of each
    given cell function (one function per top level)."""
    windows = windows or Windows()
    instances, by_top = [], {}
    for c in cells:
        top = c.level
        denom = energy_B(c, rho)
        if denom == 0:
            continue                       # constant: 0/0, excluded
        for n in range(1, top):             # level 0 is a single cell, energy 0
            r = energy_B(mean_operator(c, n), rho) / denom
            if isinstance(r, Fraction):
                r = float(r)
            instances.append({"function": label, "n": n, "m": top - n, "ratio": r})
            by_top.setdefault(top, []).append(r)
    if not instances:
        return RatioReport("B_n(M u) <= C B_{n+m}(u)", [], True, {"excluded": "constant"})
    running, drift = _running_max_drift(by_top)
    finite = all(math.isfinite(i["ratio"]) for i in instances)
    stats = {"running_max": {str(k): v for k, v in running.items()}, "drift": drift}
    return RatioReport("B_n(M u) <= C B_{n+m}(u)", instances, finite and drift < windows.drift, stats)


def random_cells(level: int, seed: int, mode: str = "sc") -> CellFunction:
    k = 6 if mode == "cross" else 8
    rng = np.random.default_rng(seed)
    return CellFunction(level, rng.random(k**level), mode)


def indicator_cell(level: int, index: int) -> CellFunction:
    vals = np.array([Fraction(0)] * 8**level, dtype=object)
    vals[index] = Fraction(1)
    return CellFunction(level, vals)


# -- form equivalence ---------------------------------------------------------------


def _as_lattice(u) -> LatticeFunction:
    if isinstance(u, VertexFunction):
        return TabulatedFunction(u)
    if isinstance(u, LatticeFunction):
        return u
    raise InvalidInputError("expected a lattice or vertex function")


def equivalence_EvsFrakE(u, betas: Sequence[float], n_max: int, quad_depth: int | None = None,
                         cell_depth: int | None = None, windows: Windows | None = None,
                         label: str = "u") -> RatioReport:
    """Partial sums of the vertex form, the cell-average form and the
    double-integral quadrature, compared pairwise for each ``beta``."""
    windows = windows or Windows()
    lat = _as_lattice(u)
    quad_depth = quad_depth if quad_depth is not None else (lat.max_level or n_max + 1)
    instances = []
    integrals = besov_integrals(lat, n_max, quad_depth)
    for beta in betas:
        e = float(series_E(u if isinstance(u, VertexFunction) else lat, beta, n_max).total)
        fe = float(series_frakE(lat, beta, n_max, cell_depth).total)
        q = quadrature_from_integrals(integrals, beta, quad_depth).total
        if e == 0 and fe == 0 and q == 0:
            continue
        for name, r in (("E/frakE", e / fe), ("E/quad", e / q), ("frakE/quad", fe / q)):
            instances.append({"function": label, "beta": float(beta), "pair": name, "ratio": r,
                              "E": e, "frakE": fe, "quad": q})
    if not instances:
        return RatioReport("E ~ frakE ~ quadrature", [], True, {"excluded": "constant"})
    lo, hi = windows.equivalence
    in_window = all(lo <= i["ratio"] <= hi for i in instances)
    spread = {}
    for pair in ("E/frakE", "E/quad", "frakE/quad"):
        rs = [i["ratio"] for i in instances if i["pair"] == pair]
        spread[pair] = max(rs) / min(rs)
    stable = all(s <= windows.across_beta for s in spread.values())
    return RatioReport("E ~ frakE ~ quadrature", instances, in_window and stable,
                       {"spread_across_beta": spread, "window": [lo, hi]})


# -- Harnack --------------------------------------------------------------------------


@dataclass
class BallDomain:
    graph: GraphSkeleton          # interior nodes followed by the outer ring
    interior: np.ndarray          # indices into the parent V_n
    ring: np.ndarray
    inner: np.ndarray             # local indices of the delta * r ball


def ball_domain(n: int, center: tuple[float, float], r: float, delta: float) -> BallDomain:
    """``V_n`` intersected with the open Euclidean ball, plus its outer
    neighbours (where Dirichlet data live)."""
    if not 0 < delta < 1:
        raise InvalidInputError("delta must lie in (0, 1)")
    g = vertex_graph(n)
    pos = g.positions()
    d = np.hypot(pos[:, 0] - center[0], pos[:, 1] - center[1])
    inside = d < r
    e = g.edges
    cross = inside[e[:, 0]] ^ inside[e[:, 1]]
    ring_mask = np.zeros(g.node_count, dtype=bool)
    ring_mask[e[cross].ravel()] = True
    ring_mask &= ~inside
    interior, ring = np.where(inside)[0], np.where(ring_mask)[0]
    if len(interior) == 0 or len(ring) == 0:
        raise InvalidInputError("ball has empty interior or no boundary in the graph")
    nodes = np.concatenate([interior, ring])
    local = -np.ones(g.node_count, dtype=np.int64)
    local[nodes] = np.arange(len(nodes))
    keep = (local[e[:, 0]] >= 0) & (local[e[:, 1]] >= 0) & (inside[e[:, 0]] | inside[e[:, 1]])
    edges = local[e[keep]]
    edges.sort(axis=1)
    sub = GraphSkeleton("derived", n, "sc", g.coords[nodes], edges, g.weights[keep])
    inner = np.where(d[interior] < delta * r)[0]
    if len(inner) == 0:
        raise InvalidInputError("inner ball contains no vertices")
    return BallDomain(sub, interior, ring, inner)


def _harnack_ratio(dom: BallDomain, data: np.ndarray, tol: float, method: str) -> float:
    k = len(dom.interior)
    bc = {k + j: float(v) for j, v in enumerate(data)}
    rep = solve_dirichlet(dom.graph, bc, tol=tol, method=method)
    vals = rep.solution[dom.inner]
    return float(vals.max() / vals.min())


def harnack_ratios(levels: Sequence[int], centers: Sequence[tuple[float, float]], r: float,
                   delta: float = 0.5, draws: int = 20, seed: int = 0, tol: float = DEFAULT_TOL,
                   method: str = "cg", harmonic: dict[int, VertexFunction] | None = None,
                   harmonic_center: tuple[float, float] = (0.75, 0.5), harmonic_r: float = 0.25,
                   windows: Windows | None = None, epsilon: float | None = None) -> RatioReport:
    """Worst ``max/min`` over the ``delta r`` ball of nonnegative harmonic
    functions with random boundary data; ``harmonic`` adds ``u_n - 1/2``
    around ``harmonic_center``. ``epsilon`` switches the data to
    ``1 + epsilon * U[0,1]`` (the continuity check)."""
    windows = windows or Windows()
    rng = np.random.default_rng(seed)
    instances, worst = [], {}
    for n in levels:
        for c in centers:
            dom = ball_domain(n, c, r, delta)
            for k in range(draws):
                data = rng.random(len(dom.ring))
                if epsilon is not None:
                    data = 1.0 + epsilon * data
                ratio = _harnack_ratio(dom, data, tol, method)
                instances.append({"n": n, "center": list(c), "draw": k, "ratio": ratio})
                worst[n] = max(worst.get(n, 1.0), ratio)
        if harmonic and n in harmonic:
            u = harmonic[n]
            dom = ball_domain(n, harmonic_center, harmonic_r, delta)
            vals = u.values[dom.interior[dom.inner]] - 0.5
            ratio = float(vals.max() / vals.min())
            instances.append({"n": n, "center": list(harmonic_center), "draw": "u_n-1/2",
                              "ratio": ratio})
            worst[n] = max(worst.get(n, 1.0), ratio)
    spread = max(worst.values()) / min(worst.values())
    return RatioReport("Harnack max <= C min", instances, spread < windows.stability_factor,
                       {"C_H": {str(k): v for k, v in worst.items()}, "spread": spread})


# -- Hoelder exponent -------------------------------------------------------------------


@dataclass
class HolderEstimate:
    theta: float
    distances: list[float]
    oscillations: list[float]

    def to_dict(self) -> dict:
        return asdict(self)


def holder_exponent(points: np.ndarray, values: np.ndarray, pairs: np.ndarray) -> HolderEstimate:
    """Slope of ``log max |u(x) - u(y)|`` against ``log |x - y|``, with pairs
    grouped by their (rounded) distance."""
    points = np.asarray(points, float)
    values = np.asarray(values, float)
    pairs = np.asarray(pairs)
    dist = np.hypot(*(points[pairs[:, 0]] - points[pairs[:, 1]]).T)
    diff = np.abs(values[pairs[:, 0]] - values[pairs[:, 1]])
    key = np.round(np.log(dist), 9)
    ds, osc = [], []
    for k in np.unique(key):
        m = key == k
        ds.append(float(dist[m][0]))
        osc.append(float(diff[m].max()))
    if len(ds) < 2:
        raise InvalidInputError("need pairs at two or more distances")
    if max(osc) == 0:
        raise InvalidInputError("function has no variation")
    if min(osc) == 0:
        raise InvalidInputError("zero oscillation at some scale")
    theta = _slope(np.log(ds), np.log(osc))
    return HolderEstimate(theta, ds, osc)


def holder_vertex(u: VertexFunction, region=((0.25, 0.75), (0.25, 0.75)),
                  levels: Sequence[int] | None = None) -> HolderEstimate:
    """Hoelder fit for a function on ``V_N`` using the edges of each coarser
    ``V_k`` inside ``region`` as the pairs at distance ``1 / (2 * 3**k)``."""
    levels = list(range(1, u.level + 1)) if levels is None else list(levels)
    g = u.graph
    pos = g.positions()
    (x0, x1), (y0, y1) = region
    all_pairs = []
    for k in levels:
        gk = vertex_graph(k, g.mode)
        scale = 3 ** (u.level - k)
        idx = g.indices_of(gk.coords * scale)
        p = idx[gk.edges]
        mid = pos[p].mean(axis=1)
        m = (mid[:, 0] >= x0) & (mid[:, 0] <= x1) & (mid[:, 1] >= y0) & (mid[:, 1] <= y1)
        all_pairs.append(p[m])
    return holder_exponent(pos, u.values, np.concatenate(all_pairs))


# -- blow-up above the critical exponent ----------------------------------------------------


def besov_blowup(family, beta: float, n_max: int, n_min: int = 2, label: str = "u") -> RatioReport:
    """Growth rate of ``3**((beta - alpha) n) D_n(u)``; must exceed 1 when
    ``beta`` is above the critical exponent and ``u`` is not constant."""
    s = series_E(family, beta, n_max)
    terms = [float(t) for t in s.terms]
    if all(t == 0 for t in terms):
        return RatioReport("sup form diverges", [], True, {"excluded": "constant"})
    ns = [n for n in s.levels if n >= n_min]
    ts = [terms[n - 1] for n in ns]
    rate = math.exp(_slope(ns, np.log(ts)))
    instances = [{"function": label, "n": n, "term": t} for n, t in zip(s.levels, terms)]
    return RatioReport("sup form diverges", instances, rate > 1.0,
                       {"growth_rate": rate, "beta": float(beta)})


# -- approximation of the local form --------------------------------------------------------


def approx_local(energies: Callable[[int], float] | None, beta_crit: float,
                 betas: Sequence[float], n_max: int | None = None,
                 growth: float | None = None, windows: Windows | None = None,
                 assert_window: bool = True, label: str = "u") -> RatioReport:
    """Trajectory of ``(beta_c - beta) E_beta(u) / sup_n 3**((beta_c - alpha) n) D_n(u)``.

    Either ``energies(n) = D_n(u)`` truncated at ``n_max``, or ``growth = q``
    for an exactly geometric ``D_n(u) = q**n``, in which case both the series
    and the supremum are summed in closed form.
    """
    windows = windows or Windows()
    instances = []
    if growth is not None:
        lam_c = 3 ** (beta_crit - ALPHA) * growth
        if lam_c > 1 + 1e-12:
            raise InvalidInputError("sup form is infinite above the critical exponent")
        sup = lam_c                        # the n = 1 term dominates when lam_c <= 1
        for b in betas:
            lam = 3 ** (b - ALPHA) * growth
            if lam >= 1:
                raise InvalidInputError(f"series diverges at beta = {b}")
            total = lam / (1 - lam)
            instances.append({"function": label, "beta": float(b), "gap": beta_crit - b,
                              "series": total, "ratio": (beta_crit - b) * total / sup})
    else:
        if energies is None or n_max is None:
            raise InvalidInputError("need energies and n_max without a closed form")
        d = [float(energies(n)) for n in range(1, n_max + 1)]
        if all(v == 0 for v in d):
            return RatioReport("(b* - b) E_b ~ sup form", [], True, {"excluded": "constant"})
        sup = max(3 ** ((beta_crit - ALPHA) * n) * v for n, v in enumerate(d, 1))
        for b in betas:
            total = sum(3 ** ((b - ALPHA) * n) * v for n, v in enumerate(d, 1))
            instances.append({"function": label, "beta": float(b), "gap": beta_crit - b,
                              "series": total, "ratio": (beta_crit - b) * total / sup})
    lo, hi = windows.local_window
    ok = all(lo <= i["ratio"] <= hi for i in instances) if assert_window else True
    return RatioReport("(b* - b) E_b ~ sup form", instances, ok, {"sup": sup, "window": [lo, hi]})


def critical_exponent(growth: float) -> float:
    """``beta`` at which ``3**((beta - alpha) n) growth**n`` stops decaying."""
    return ALPHA - math.log(growth) / math.log(3)
