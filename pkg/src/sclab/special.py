"""Explicit test functions: the self-affine good function, the Cantor-cross
comparison, the quadratic whose minimum fixes the 2/7-5/7 weights, and the
harmonic minimizers ``u_n`` of the left-right problem."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .energy import (CoordinateX, LatticeFunction, VertexFunction, cellwise_energy, energy_a,
                     energy_D, restrict, sample)
from .errors import CapacityError, InvalidInputError
from .exact import solve_linear_system
from .geometry import vertex_graph
from .resistance import ls_slope
from .solver import DEFAULT_TOL, SolveReport, laplacian, solve_dirichlet

RATIONAL_CAP = 8
LOW, HIGH = Fraction(2, 7), Fraction(5, 7)


def f_triadic(i: int, n: int) -> Fraction:
    """Exact value of the good function at ``i / 3**n``."""
    if n < 0 or not 0 <= i <= 3**n:
        raise InvalidInputError(f"{i}/3^{n} is not a triadic point of [0, 1]")
    memo: dict[tuple[int, int], Fraction] = {}

    def f(i, n):
        if n == 0:
            return Fraction(i)
        key = (i, n)
        if key not in memo:
            j, r = divmod(i, 3)
            if r == 0:
                memo[key] = f(j, n - 1)
            elif r == 1:
                memo[key] = HIGH * f(j, n - 1) + LOW * f(j + 1, n - 1)
            else:
                memo[key] = LOW * f(j, n - 1) + HIGH * f(j + 1, n - 1)
        return memo[key]

    return f(i, n)


def f_at(x) -> Fraction:
    """Good function at a rational with denominator ``3**n`` or ``2 * 3**n``."""
    x = Fraction(x)
    if not 0 <= x <= 1:
        raise InvalidInputError("argument outside [0, 1]")
    d = x.denominator
    half = d % 2 == 0
    if half:
        d //= 2
    n = round(math.log(d, 3)) if d > 1 else 0
    if 3**n != d:
        raise InvalidInputError(f"{x} is not a (half-)triadic point")
    if not half:
        return f_triadic(x.numerator, n)
    i = (x.numerator - 1) // 2
    return (f_triadic(i, n) + f_triadic(i + 1, n)) / 2


def f_numerators(n: int) -> np.ndarray:
    """``7**n f(i / 3**n)`` for ``i = 0..3**n`` as integers."""
    table = np.array([0, 1], dtype=object)
    for _ in range(n):
        nxt = np.empty(3 * (len(table) - 1) + 1, dtype=object)
        nxt[0::3] = 7 * table
        nxt[1::3] = 5 * table[:-1] + 2 * table[1:]
        nxt[2::3] = 2 * table[:-1] + 5 * table[1:]
        table = nxt
    if 7**n < 2**62:
        return table.astype(np.int64)
    return table


def f_ifs(x, depth: int) -> Fraction:
    """Piecewise-linear approximation obtained by iterating the three affine
    branches ``depth`` times; agrees with ``f`` on triadic points of level
    ``<= depth``."""
    x = Fraction(x)
    if depth == 0:
        return x
    if x <= Fraction(1, 3):
        return LOW * f_ifs(3 * x, depth - 1)
    if x <= Fraction(2, 3):
        return Fraction(3, 7) * f_ifs(3 * x - 1, depth - 1) + LOW
    return LOW * f_ifs(3 * x - 2, depth - 1) + HIGH


class GoodFunction(LatticeFunction):
    """``U(x, y) = f(x)``.

    ``V_n`` abscissas are ``k / (2 * 3**n)``; at odd ``k`` (cell midpoints)
    the value is the mean of the two neighbouring triadic values, which is
    where the self-affine branch maps ``f(1/2) = 1/2``.
    """

    uses_y = False

    def __init__(self):
        self._tables: dict[int, np.ndarray] = {}

    def _table(self, level: int) -> np.ndarray:
        # indexed by the doubled abscissa: t[k // 2] + t[(k + 1) // 2]
        if level not in self._tables:
            t = f_numerators(level)
            k = np.arange(2 * 3**level + 1)
            self._tables[level] = t[k // 2] + t[(k + 1) // 2]
        return self._tables[level]

    def numerators(self, x, y, level):
        return self._table(level)[np.asarray(x)], 2 * 7**level

    def values(self, x, y, level, exact=False):
        num, den = self.numerators(x, y, level)
        if exact:
            flat = [Fraction(int(v), den) for v in np.ravel(num)]
            return np.array(flat, dtype=object).reshape(np.shape(x))
        return np.asarray(num, dtype=float) / den


def _check_rational_level(n: int, cap: int) -> None:
    if n < 1:
        raise InvalidInputError("level must be at least 1")
    if n > cap:
        raise CapacityError(f"level {n} exceeds the rational capacity {cap}")


def good_energy(n: int, cap: int = RATIONAL_CAP, route: str = "cells") -> Fraction:
    """Exact ``D_n(U)`` for the good function.

    ``route="cells"`` streams over all ``8**n`` cells with integer
    arithmetic; ``route="graph"`` builds ``V_n`` and sums over its edges
    with Fractions (small ``n`` only).
    """
    _check_rational_level(n, cap)
    if route == "graph":
        return energy_D(sample(GoodFunction(), n, exact=True))
    return cellwise_energy(GoodFunction(), n)


def cantor_energy(n: int, cap: int = RATIONAL_CAP, route: str = "cells") -> Fraction:
    """Exact energy of ``u(x, y) = x`` on the Cantor-cross approximation."""
    _check_rational_level(n, cap)
    if route == "graph":
        return energy_D(sample(CoordinateX(), n, mode="cross", exact=True))
    return cellwise_energy(CoordinateX(), n, mode="cross")


def phi(x, y):
    return 3 * x * x + 2 * (x - y) ** 2 + 3 * (1 - y) ** 2


def phi_minimize() -> tuple[tuple[Fraction, Fraction], Fraction]:
    """Exact minimizer of ``phi`` from its (affine) gradient."""

    def grad(x, y):
        return (6 * x + 4 * (x - y), -4 * (x - y) - 6 * (1 - y))

    zero = Fraction(0)
    g0 = grad(zero, zero)
    cols = [grad(Fraction(1), zero), grad(zero, Fraction(1))]
    hessian = [[cols[j][i] - g0[i] for j in range(2)] for i in range(2)]
    x, y = solve_linear_system(hessian, [-g0[0], -g0[1]])
    return (x, y), phi(x, y)


# -- harmonic minimizers -------------------------------------------------------


@dataclass
class HarmonicResult:
    u: VertexFunction
    report: SolveReport
    resistance: float           # R_n^V from the boundary current

    @property
    def level(self) -> int:
        return self.u.level

    def energy(self) -> float:
        return energy_D(self.u)


def left_right_sets(n: int) -> tuple[np.ndarray, np.ndarray]:
    g = vertex_graph(n)
    x = g.coords[:, 0]
    return np.where(x == 0)[0], np.where(x == g.scale)[0]


def prolong(u: VertexFunction, n: int) -> np.ndarray:
    """Initial guess on ``V_n`` from a coarser solution: each point takes the
    value of the nearest coarse vertex of its own coarse cell."""
    g = vertex_graph(n)
    k = 3 ** (n - u.level)
    c = np.rint(g.coords / k).astype(np.int64)
    both_odd = (c[:, 0] % 2 == 1) & (c[:, 1] % 2 == 1)
    c[both_odd, 1] -= 1
    idx = u.graph.indices_of(c)
    if (idx < 0).any():
        raise InvalidInputError("prolongation hit a missing coarse vertex")
    return np.asarray(u.values, dtype=float)[idx]


def harmonic_un(n: int, tol: float = DEFAULT_TOL, method: str = "cg",
                x0: np.ndarray | None = None, maxiter: int | None = None) -> HarmonicResult:
    """Minimizer of ``D_n`` with value 0 on the left edge and 1 on the right."""
    g = vertex_graph(n)
    left, right = left_right_sets(n)
    bc = {int(i): 0.0 for i in left}
    bc.update({int(i): 1.0 for i in right})
    rep = solve_dirichlet(g, bc, tol=tol, x0=x0, method=method, maxiter=maxiter)
    current = float(np.sum((laplacian(g) @ rep.solution)[right]))
    return HarmonicResult(VertexFunction(g, rep.solution), rep, 1.0 / current)


@dataclass
class GoodFunctionFamily:
    members: list[HarmonicResult]
    sup_differences: list[float]          # sup |u_{n+1} - u_n| on the region, n = 1..
    a_values: list[float]                 # a_n(u_{n_max}) for n = 1..n_max
    rho: float
    region: tuple[float, float] = (0.25, 0.75)
    extra: dict = field(default_factory=dict)

    @property
    def a_ratio(self) -> float:
        return max(self.a_values) / min(self.a_values)


def good_function_limit(n_max: int, tol: float = DEFAULT_TOL, rho: float | None = None,
                        method: str = "cg", region=(0.25, 0.75),
                        maxiter: int | None = None) -> GoodFunctionFamily:
    """The harmonic family ``u_1..u_{n_max}`` with convergence diagnostics."""
    members: list[HarmonicResult] = []
    guess = None
    for n in range(1, n_max + 1):
        if members:
            guess = prolong(members[-1].u, n)
        members.append(harmonic_un(n, tol=tol, method=method, x0=guess, maxiter=maxiter))
    sups = []
    for lo, hi in zip(members, members[1:]):
        coarse = lo.u
        fine = restrict(hi.u, coarse.level)
        x = coarse.graph.positions()[:, 0]
        mask = (x >= region[0]) & (x <= region[1])
        sups.append(float(np.max(np.abs(fine.values[mask] - coarse.values[mask]))))
    if rho is None:
        rv = [m.resistance for m in members]
        tail = rv[1:] if len(rv) > 2 else rv
        rho = math.exp(ls_slope(np.arange(len(tail)), np.log(tail))) if len(tail) > 1 else 1.0
    top = members[-1].u
    a_vals = [float(energy_a(restrict(top, n), rho)) for n in range(1, n_max + 1)]
    return GoodFunctionFamily(members, sups, a_vals, rho, tuple(region))
