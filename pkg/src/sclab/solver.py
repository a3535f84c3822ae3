"""Weighted graph Laplacians, Dirichlet problems and effective resistance.

Free nodes with exactly two neighbours (edge midpoints of the carpet
graphs) are eliminated before the iterative solve: two conductances in
series ``a, b`` become one edge ``a*b/(a+b)``. This is an exact Schur
complement, so every resistance between retained nodes is unchanged, and
the eliminated values are recovered afterwards as weighted averages.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import splu

from .errors import InvalidInputError, SingularSystemError, SolverError
from .geometry import GraphSkeleton

DEFAULT_TOL = 1e-10
METHODS = ("cg", "direct")


def laplacian(g: GraphSkeleton) -> sp.csr_matrix:
    """Weighted Laplacian ``D - W`` (cached on the graph)."""
    cache = g._index
    if "laplacian" not in cache:
        cache["laplacian"] = _assemble(g.node_count, g.edges, g.weights.astype(float))
    return cache["laplacian"]


def _assemble(n: int, edges: np.ndarray, weights: np.ndarray) -> sp.csr_matrix:
    i, j = edges[:, 0], edges[:, 1]
    w = sp.coo_matrix((weights, (i, j)), shape=(n, n)).tocsr()
    w = w + w.T
    deg = np.asarray(w.sum(axis=1)).ravel()
    return (sp.diags(deg) - w).tocsr()


def energy(g: GraphSkeleton, u: np.ndarray) -> float:
    """Sum over edges of conductance times squared increment."""
    du = u[g.edges[:, 0]] - u[g.edges[:, 1]]
    return float(np.sum(g.weights * du * du))


@dataclass
class SolveReport:
    solution: np.ndarray
    iterations: int
    residual: float
    energy: float
    max_node_residual: float = 0.0
    method: str = "cg"

    def to_dict(self) -> dict:
        return {"iterations": self.iterations, "residual": self.residual,
                "energy": self.energy}


def pcg(a: sp.csr_matrix, b: np.ndarray, x0: np.ndarray | None = None,
        tol: float = DEFAULT_TOL, maxiter: int | None = None) -> tuple[np.ndarray, int, float]:
    """Jacobi-preconditioned conjugate gradients.

    Convergence is declared when ``sqrt(r.D^-1 r) <= tol * sqrt(b.D^-1 b)``.
    Returns ``(x, iterations, relative_residual)``; raises SolverError if
    the cap is reached first.
    """
    n = len(b)
    if maxiter is None:
        maxiter = max(50, int(50 * math.sqrt(max(n, 1))))
    dinv = 1.0 / a.diagonal()
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    bnorm = math.sqrt(float(b @ (dinv * b)))
    r = b - a @ x
    z = dinv * r
    rz = float(r @ z)
    if bnorm == 0.0:
        bnorm = 1.0
        if rz == 0.0:
            return x, 0, 0.0
    rel = math.sqrt(max(rz, 0.0)) / bnorm
    if rel <= tol:
        return x, 0, rel
    p = z.copy()
    for k in range(1, maxiter + 1):
        ap = a @ p
        step = rz / float(p @ ap)
        x += step * p
        r -= step * ap
        z = dinv * r
        rz_new = float(r @ z)
        rel = math.sqrt(max(rz_new, 0.0)) / bnorm
        if rel <= tol:
            return x, k, rel
        p *= rz_new / rz
        p += z
        rz = rz_new
    raise SolverError(f"PCG stalled at relative residual {rel:.3e} after {maxiter} iterations",
                      residual=rel, iterations=maxiter)


def _series_candidates(g: GraphSkeleton, protected: np.ndarray) -> np.ndarray:
    """Free degree-2 nodes whose neighbours are not themselves eliminated."""
    count = np.bincount(g.edges.ravel(), minlength=g.node_count)
    cand = (count == 2) & ~protected
    if not cand.any():
        return cand
    touching = cand[g.edges[:, 0]] & cand[g.edges[:, 1]]
    bad = np.zeros(g.node_count, dtype=bool)
    bad[g.edges[touching].ravel()] = True
    return cand & ~bad


@dataclass
class _Reduced:
    keep: np.ndarray            # original indices of retained nodes
    lap: sp.csr_matrix
    elim: np.ndarray            # original indices of eliminated nodes
    nb: np.ndarray              # (k, 2) original neighbour indices
    nw: np.ndarray              # (k, 2) conductances to those neighbours
    cache: dict = field(default_factory=dict)


def _reduce(g: GraphSkeleton, protected: np.ndarray) -> _Reduced:
    elim_mask = _series_candidates(g, protected)
    e, w = g.edges, g.weights.astype(float)
    on_elim = elim_mask[e[:, 0]] | elim_mask[e[:, 1]]
    kept_edges, kept_w = e[~on_elim], w[~on_elim]
    se, sw = e[on_elim], w[on_elim]
    mid = np.where(elim_mask[se[:, 0]], se[:, 0], se[:, 1])
    end = np.where(elim_mask[se[:, 0]], se[:, 1], se[:, 0])
    order = np.argsort(mid, kind="stable")
    mid, end, sw = mid[order], end[order], sw[order]
    elim = mid[0::2]
    nb = np.stack([end[0::2], end[1::2]], axis=1)
    nw = np.stack([sw[0::2], sw[1::2]], axis=1)
    series = nw[:, 0] * nw[:, 1] / (nw[:, 0] + nw[:, 1])
    keep = np.where(~elim_mask)[0]
    new_id = -np.ones(g.node_count, dtype=np.int64)
    new_id[keep] = np.arange(len(keep))
    all_edges = np.concatenate([kept_edges, nb]) if len(nb) else kept_edges
    all_w = np.concatenate([kept_w, series]) if len(nb) else kept_w
    lap = _assemble(len(keep), new_id[all_edges], all_w)
    return _Reduced(keep, lap, elim, nb, nw)


def _check_boundary(g: GraphSkeleton, bc: Mapping[int, float]) -> tuple[np.ndarray, np.ndarray]:
    if not bc:
        raise InvalidInputError("boundary specification is empty")
    idx = np.fromiter((int(k) for k in bc), dtype=np.int64, count=len(bc))
    if idx.min() < 0 or idx.max() >= g.node_count:
        raise InvalidInputError("boundary index out of range")
    vals = np.fromiter((float(v) for v in bc.values()), dtype=float, count=len(bc))
    return idx, vals


def _check_solvable(g: GraphSkeleton, pinned: np.ndarray) -> None:
    ncomp, labels = connected_components(laplacian(g), directed=False)
    if ncomp == 1:
        return
    hit = np.zeros(ncomp, dtype=bool)
    hit[labels[pinned]] = True
    if not hit.all():
        raise SingularSystemError("a connected component has no pinned node")


def _solve_reduced(red: _Reduced, free: np.ndarray, rhs: np.ndarray,
                   x0: np.ndarray | None, tol: float, maxiter: int | None,
                   method: str) -> tuple[np.ndarray, int, float]:
    a = red.cache.get(("ff", free.tobytes()))
    if a is None:
        a = red.lap[free][:, free].tocsr()
        red.cache[("ff", free.tobytes())] = a
    if method == "direct":
        lu = red.cache.get(("lu", free.tobytes()))
        if lu is None:
            lu = splu(a.tocsc())
            red.cache[("lu", free.tobytes())] = lu
        x = lu.solve(rhs)
        r = rhs - a @ x
        dinv = 1.0 / a.diagonal()
        bn = math.sqrt(float(rhs @ (dinv * rhs))) or 1.0
        return x, 0, math.sqrt(float(r @ (dinv * r))) / bn
    if method != "cg":
        raise InvalidInputError(f"unknown method {method!r}")
    return pcg(a, rhs, x0=x0, tol=tol, maxiter=maxiter)


def _reduced_for(g: GraphSkeleton, protected: np.ndarray) -> _Reduced:
    key = ("reduced", protected.tobytes())
    red = g._index.get(key)
    if red is None:
        red = _reduce(g, protected)
        g._index[key] = red
    return red


def _node_residual(g: GraphSkeleton, u: np.ndarray, free: np.ndarray,
                   source: np.ndarray | None = None) -> float:
    if not free.any():
        return 0.0
    lu = laplacian(g) @ u
    if source is not None:
        lu = lu - source
    deg = laplacian(g).diagonal()
    return float(np.max(np.abs(lu[free]) / deg[free]))


def solve_dirichlet(g: GraphSkeleton, bc: Mapping[int, float], tol: float = DEFAULT_TOL,
                    x0: np.ndarray | None = None, maxiter: int | None = None,
                    method: str = "cg", check_max_principle: bool = True) -> SolveReport:
    """Energy minimizer with prescribed values on the pinned nodes."""
    idx, vals = _check_boundary(g, bc)
    pinned = np.zeros(g.node_count, dtype=bool)
    pinned[idx] = True
    u = np.zeros(g.node_count)
    u[idx] = vals
    if pinned.all():
        return SolveReport(u, 0, 0.0, energy(g, u), method=method)
    _check_solvable(g, idx)
    red = _reduced_for(g, pinned)
    rpinned = pinned[red.keep]
    rfree = ~rpinned
    lap = red.lap
    rhs = -(lap[rfree][:, rpinned] @ u[red.keep][rpinned])
    guess = None if x0 is None else np.asarray(x0, dtype=float)[red.keep][rfree]
    x, iters, rel = _solve_reduced(red, rfree, rhs, guess, tol, maxiter, method)
    kept_free = red.keep[rfree]
    u[kept_free] = x
    if len(red.elim):
        u[red.elim] = (red.nw * u[red.nb]).sum(axis=1) / red.nw.sum(axis=1)
    if check_max_principle:
        lo, hi = vals.min(), vals.max()
        slack = 1e3 * tol * max(hi - lo, 1.0) + 1e-12
        if u.min() < lo - slack or u.max() > hi + slack:
            raise SolverError("maximum principle violated; solution is not harmonic",
                              residual=rel, iterations=iters)
    report = SolveReport(u, iters, rel, energy(g, u), method=method)
    report.max_node_residual = _node_residual(g, u, ~pinned)
    return report


def _node_set(g: GraphSkeleton, nodes: Iterable[int]) -> np.ndarray:
    arr = np.unique(np.asarray(list(nodes), dtype=np.int64))
    if arr.size == 0:
        raise InvalidInputError("terminal set is empty")
    if arr.min() < 0 or arr.max() >= g.node_count:
        raise InvalidInputError("terminal index out of range")
    return arr


@dataclass
class ResistanceResult:
    resistance: float
    current: float
    report: SolveReport

    @property
    def flux_resistance(self) -> float:
        """Resistance computed from the current leaving the unit-potential set."""
        return 1.0 / self.current


def resistance_solve(g: GraphSkeleton, a: Iterable[int], b: Iterable[int],
                     tol: float = DEFAULT_TOL, x0: np.ndarray | None = None,
                     method: str = "cg", maxiter: int | None = None) -> ResistanceResult:
    a, b = _node_set(g, a), _node_set(g, b)
    if np.intersect1d(a, b).size:
        raise InvalidInputError("terminal sets must be disjoint")
    bc = {int(i): 0.0 for i in a}
    bc.update({int(i): 1.0 for i in b})
    rep = solve_dirichlet(g, bc, tol=tol, x0=x0, method=method, maxiter=maxiter)
    if rep.energy <= 0.0:
        raise SingularSystemError("terminal sets are not connected")
    current = float(np.sum((laplacian(g) @ rep.solution)[b]))
    return ResistanceResult(1.0 / rep.energy, current, rep)


def effective_resistance(g: GraphSkeleton, a: Iterable[int], b: Iterable[int],
                         tol: float = DEFAULT_TOL, method: str = "cg") -> float:
    """Reciprocal of the minimal energy among functions 0 on ``a`` and 1 on ``b``."""
    return resistance_solve(g, a, b, tol=tol, method=method).resistance


def green_function(ball: GraphSkeleton, z: int | None = None, tol: float = DEFAULT_TOL,
                   method: str = "cg") -> SolveReport:
    """Solve ``L g = delta_z`` inside the ball with ``g = 0`` on its boundary ring."""
    if ball.boundary is None:
        raise InvalidInputError("graph has no flagged boundary")
    z = ball.center if z is None else int(z)
    if ball.boundary[z]:
        raise InvalidInputError("source lies on the boundary")
    pinned = ball.boundary.copy()
    protected = pinned.copy()
    protected[z] = True
    red = _reduced_for(ball, protected)
    rfree = ~pinned[red.keep]
    rhs = np.zeros(int(rfree.sum()))
    pos = np.searchsorted(red.keep[rfree], z)
    rhs[pos] = 1.0
    x, iters, rel = _solve_reduced(red, rfree, rhs, None, tol, None, method)
    g = np.zeros(ball.node_count)
    g[red.keep[rfree]] = x
    if len(red.elim):
        g[red.elim] = (red.nw * g[red.nb]).sum(axis=1) / red.nw.sum(axis=1)
    source = np.zeros(ball.node_count)
    source[z] = 1.0
    rep = SolveReport(g, iters, rel, energy(ball, g), method=method)
    rep.max_node_residual = _node_residual(ball, g, ~pinned, source)
    return rep


# -- network surgery ----------------------------------------------------------


def _derived(g: GraphSkeleton, coords, edges, weights, kind="derived") -> GraphSkeleton:
    return GraphSkeleton(kind, g.level, g.mode, coords, edges, weights)


def short_nodes(g: GraphSkeleton, partition: Iterable[Iterable[int]]) -> tuple[GraphSkeleton, np.ndarray]:
    """Merge each group of nodes into one; returns the graph and old->new map.

    Parallel edges are combined by summing conductances, self-loops vanish.
    Nodes not mentioned stay as singletons.
    """
    label = np.arange(g.node_count)
    seen = set()
    for group in partition:
        group = [int(i) for i in group]
        if not group:
            continue
        if seen.intersection(group):
            raise InvalidInputError("partition groups overlap")
        seen.update(group)
        label[group] = min(group)
    reps, mapping = np.unique(label, return_inverse=True)
    e = mapping[g.edges]
    keep = e[:, 0] != e[:, 1]
    e = np.sort(e[keep], axis=1)
    w = g.weights[keep]
    n = len(reps)
    keys, inv = np.unique(e[:, 0] * n + e[:, 1], return_inverse=True)
    merged = np.zeros(len(keys), dtype=w.dtype) if w.dtype != object else np.array([0] * len(keys), dtype=object)
    np.add.at(merged, inv, w)
    edges = np.stack(np.divmod(keys, n), axis=1).astype(np.int64)
    return _derived(g, g.coords[reps], edges, merged), mapping


def cut_edges(g: GraphSkeleton, subset: Iterable[int]) -> GraphSkeleton:
    """Delete the edges with the given indices."""
    drop = np.zeros(g.edge_count, dtype=bool)
    idx = np.asarray(list(subset), dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= g.edge_count):
        raise InvalidInputError("edge index out of range")
    drop[idx] = True
    return _derived(g, g.coords, g.edges[~drop], g.weights[~drop])


def check_terminal_shorting(mapping: np.ndarray, a: Iterable[int], b: Iterable[int]) -> None:
    """Reject a shorting that would merge an A terminal with a B terminal."""
    if set(mapping[list(a)].tolist()) & set(mapping[list(b)].tolist()):
        raise InvalidInputError("shorting merges the two terminal sets")


def solution_csv(g: GraphSkeleton, u: np.ndarray) -> str:
    pos = g.positions()
    lines = ["x,y,value"]
    lines += [f"{x!r},{y!r},{v!r}" for (x, y), v in zip(pos.tolist(), u.tolist())]
    return "\n".join(lines) + "\n"
