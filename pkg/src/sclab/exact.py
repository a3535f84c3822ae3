"""Exact rational Dirichlet solves by sparse Gaussian elimination.

Used as the accuracy arbiter for the floating-point solver on small graphs.
The reduced Laplacian is symmetric positive definite once every component
carries a pinned node, so elimination needs no pivoting; a greedy
minimum-degree order keeps fill-in small.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import CapacityError, InvalidInputError, SingularSystemError
from .geometry import GraphSkeleton

DEFAULT_CAP = 2000


def _as_fraction(v) -> Fraction:
    if isinstance(v, Fraction):
        return v
    if isinstance(v, (int, np.integer)):
        return Fraction(int(v))
    if isinstance(v, float):
        return Fraction(v)
    return Fraction(v)


def solve_sparse_spd(rows: dict[int, dict[int, Fraction]],
                     rhs: dict[int, Fraction]) -> dict[int, Fraction]:
    """Solve a symmetric system given as ``{row: {col: value}}``.

    Rows are consumed. Raises SingularSystemError on a zero pivot.
    """
    eliminated: list[tuple[int, dict[int, Fraction], Fraction]] = []
    remaining = set(rows)
    while remaining:
        p = min(remaining, key=lambda k: (len(rows[k]), k))
        row = rows.pop(p)
        remaining.discard(p)
        piv = row.get(p, Fraction(0))
        if piv == 0:
            raise SingularSystemError("zero pivot: system is singular")
        bp = rhs.pop(p, Fraction(0))
        for i in list(row):
            if i == p:
                continue
            ri = rows[i]
            factor = ri.pop(p) / piv
            for j, v in row.items():
                if j == p:
                    continue
                nv = ri.get(j, Fraction(0)) - factor * v
                if nv:
                    ri[j] = nv
                else:
                    ri.pop(j, None)
            if bp:
                rhs[i] = rhs.get(i, Fraction(0)) - factor * bp
        eliminated.append((p, row, bp))
    x: dict[int, Fraction] = {}
    for p, row, bp in reversed(eliminated):
        acc = bp
        for j, v in row.items():
            if j != p:
                acc -= v * x[j]
        x[p] = acc / row[p]
    return x


def solve_linear_system(matrix: Sequence[Sequence], rhs: Sequence) -> list[Fraction]:
    """Dense exact solve with partial pivoting (small systems only)."""
    n = len(matrix)
    a = [[_as_fraction(v) for v in row] + [_as_fraction(b)] for row, b in zip(matrix, rhs)]
    for col in range(n):
        piv = next((r for r in range(col, n) if a[r][col] != 0), None)
        if piv is None:
            raise SingularSystemError("matrix is singular")
        a[col], a[piv] = a[piv], a[col]
        for r in range(n):
            if r != col and a[r][col] != 0:
                f = a[r][col] / a[col][col]
                a[r] = [x - f * y for x, y in zip(a[r], a[col])]
    return [a[i][n] / a[i][i] for i in range(n)]


def exact_solve(g: GraphSkeleton, bc: Mapping[int, object], cap: int = DEFAULT_CAP) -> list[Fraction]:
    """Exact energy minimizer with prescribed rational boundary values."""
    if g.node_count > cap:
        raise CapacityError(f"{g.node_count} nodes exceed the exact-solver cap {cap}")
    if not bc:
        raise InvalidInputError("boundary specification is empty")
    pinned = {int(k): _as_fraction(v) for k, v in bc.items()}
    for k in pinned:
        if not 0 <= k < g.node_count:
            raise InvalidInputError("boundary index out of range")
    rows: dict[int, dict[int, Fraction]] = {i: {} for i in range(g.node_count) if i not in pinned}
    rhs: dict[int, Fraction] = {}
    for (i, j), w in zip(g.edges.tolist(), g.weights.tolist()):
        w = _as_fraction(w)
        for a, b in ((i, j), (j, i)):
            if a in pinned:
                continue
            row = rows[a]
            row[a] = row.get(a, Fraction(0)) + w
            if b in pinned:
                if pinned[b]:
                    rhs[a] = rhs.get(a, Fraction(0)) + w * pinned[b]
            else:
                row[b] = row.get(b, Fraction(0)) - w
    for i, row in rows.items():
        if not row:
            raise SingularSystemError(f"node {i} is isolated and unpinned")
    x = solve_sparse_spd(rows, rhs)
    return [pinned[i] if i in pinned else x[i] for i in range(g.node_count)]


def exact_energy(g: GraphSkeleton, u: Sequence[Fraction]) -> Fraction:
    total = Fraction(0)
    for (i, j), w in zip(g.edges.tolist(), g.weights.tolist()):
        d = u[i] - u[j]
        total += _as_fraction(w) * d * d
    return total


def exact_resistance(g: GraphSkeleton, a: Iterable[int], b: Iterable[int],
                     cap: int = DEFAULT_CAP) -> Fraction:
    a, b = set(int(i) for i in a), set(int(i) for i in b)
    if not a or not b:
        raise InvalidInputError("terminal set is empty")
    if a & b:
        raise InvalidInputError("terminal sets must be disjoint")
    bc = {i: Fraction(0) for i in a}
    bc.update({i: Fraction(1) for i in b})
    u = exact_solve(g, bc, cap=cap)
    e = exact_energy(g, u)
    if e == 0:
        raise SingularSystemError("terminal sets are not connected")
    return 1 / e
