"""Exact rational identity suite (the ``identities`` command)."""

from __future__ import annotations

import time
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .energy import VertexFunction, compose_with_map
from .errors import CapacityError
from .geometry import GraphSkeleton, vertex_graph
from .special import RATIONAL_CAP, GoodFunction, cantor_energy, good_energy, phi, phi_minimize


@dataclass
class IdentityCheck:
    name: str
    expected: str
    got: str
    ok: bool
    skipped: bool = False

    def line(self) -> str:
        status = "SKIP" if self.skipped else ("PASS" if self.ok else "FAIL")
        return f"{status} {self.name}: expected {self.expected}, got {self.got}"


def _fmt(v) -> str:
    if isinstance(v, tuple):
        return "(" + ", ".join(_fmt(x) for x in v) + ")"
    return str(v)


def integer_energy(g: GraphSkeleton, values: np.ndarray) -> int:
    du = values[g.edges[:, 0]] - values[g.edges[:, 1]]
    return int(np.sum(g.weights * du * du, dtype=np.int64))


def self_similar_check(n: int, seed: int, denominator: int = 997) -> tuple[Fraction, Fraction]:
    """``D_{n+1}(u)`` and ``sum_i D_n(u o f_i)`` for random rational ``u`` on
    ``V_{n+1}`` with a common denominator."""
    g = vertex_graph(n + 1)
    rng = np.random.default_rng(seed)
    nums = rng.integers(-denominator, denominator + 1, size=g.node_count, dtype=np.int64)
    u = VertexFunction(g, nums)
    whole = Fraction(integer_energy(g, nums), denominator**2)
    parts = sum(integer_energy(compose_with_map(u, i).graph, compose_with_map(u, i).values)
                for i in range(8))
    return whole, Fraction(parts, denominator**2)


def _corrupted_good_energy(n: int) -> Fraction:
    # negative control: one horizontal edge weight bumped by one
    g = vertex_graph(n)
    w = g.weights.copy()
    horizontal = np.where(g.coords[g.edges[:, 0], 0] != g.coords[g.edges[:, 1], 0])[0]
    w[horizontal[0]] += 1
    bad = GraphSkeleton(g.kind, g.level, g.mode, g.coords, g.edges, w)
    num, den = GoodFunction().numerators(g.coords[:, 0], g.coords[:, 1], n)
    return Fraction(integer_energy(bad, np.asarray(num, dtype=np.int64)), den * den)


def run_identities(max_level: int = 8, cap: int = RATIONAL_CAP, seed: int = 0,
                   self_similar_max: int = 4, corrupt: bool = False) -> list[IdentityCheck]:
    checks: list[IdentityCheck] = []
    for n in range(1, max_level + 1):
        for name, func, ratio in (("good_energy", good_energy, Fraction(6, 7)),
                                  ("cantor_energy", cantor_energy, Fraction(2, 3))):
            expected = ratio**n
            try:
                got = _corrupted_good_energy(n) if corrupt and name == "good_energy" and n <= 3 \
                    else func(n, cap=cap)
            except CapacityError as exc:
                checks.append(IdentityCheck(f"{name}({n})", _fmt(expected), str(exc), True, True))
                continue
            checks.append(IdentityCheck(f"{name}({n})", _fmt(expected), _fmt(got), got == expected))
    point, value = phi_minimize()
    want = ((Fraction(2, 7), Fraction(5, 7)), Fraction(6, 7))
    checks.append(IdentityCheck("phi_minimize", _fmt(want), _fmt((point, value)),
                                (point, value) == want and phi(*point) == value))
    for n in range(1, self_similar_max + 1):
        whole, parts = self_similar_check(n, seed + n)
        checks.append(IdentityCheck(f"self_similar(D_{n + 1} = sum D_{n} o f_i)", _fmt(whole),
                                    _fmt(parts), whole == parts))
    return checks


def timed_identities(**kw) -> tuple[list[IdentityCheck], float]:
    t = time.perf_counter()
    checks = run_identities(**kw)
    return checks, time.perf_counter() - t
