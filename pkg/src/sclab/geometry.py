"""Exact combinatorics of the Sierpinski carpet approximation graphs.

Coordinates are integers. A point of ``V_n`` is stored as ``(X, Y)`` with
geometric position ``(X, Y) / (2 * 3**n)``; corners have both coordinates
even and edge midpoints exactly one odd coordinate. Points of the infinite
graphical carpet use the same convention with ``n = 0`` and no upper bound.

Two modes are supported: ``"sc"`` (the carpet, digits 0..7) and ``"cross"``
(the Cantor cross ``[0,1] x C``, digits 0,1,2,4,5,6).
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple, Sequence

import numpy as np

from .errors import CapacityError, InvalidInputError

# 2 * p_i for the eight boundary points p_0..p_7 of the unit square, listed
# counter-clockwise from the origin. Doubles as the offset of f_i in units
# of 1/3.
POINT_OFFSETS = np.array(
    [(0, 0), (1, 0), (2, 0), (2, 1), (2, 2), (1, 2), (0, 2), (0, 1)], dtype=np.int64
)
ALPHABETS = {"sc": (0, 1, 2, 3, 4, 5, 6, 7), "cross": (0, 1, 2, 4, 5, 6)}
# perimeter pairs of V_0 at distance 1/2, as indices into POINT_OFFSETS
RING_PAIRS = tuple((i, (i + 1) % 8) for i in range(8))

MAX_LEVEL = {"vertex": 7, "cell": 7}
MAX_BALL_NODES = 2_000_000


class LatticePoint(NamedTuple):
    x: int
    y: int
    level: int


class CellOrigin(NamedTuple):
    column: int
    row: int
    level: int


def _check_mode(mode: str) -> tuple[int, ...]:
    try:
        return ALPHABETS[mode]
    except KeyError:
        raise InvalidInputError(f"unknown mode {mode!r}") from None


def check_word(word: Sequence[int], mode: str = "sc") -> tuple[int, ...]:
    alphabet = _check_mode(mode)
    word = tuple(int(d) for d in word)
    for d in word:
        if d not in alphabet:
            raise InvalidInputError(f"digit {d} not allowed in {mode} mode")
    return word


def cell_origin(word: Sequence[int], mode: str = "sc") -> CellOrigin:
    """Lower-left corner of ``K_w`` in units of ``3**-n``."""
    word = check_word(word, mode)
    col = row = 0
    for d in word:
        col = 3 * col + int(POINT_OFFSETS[d, 0])
        row = 3 * row + int(POINT_OFFSETS[d, 1])
    return CellOrigin(col, row, len(word))


def word_of_origin(column: int, row: int, level: int) -> tuple[int, ...] | None:
    """Inverse of :func:`cell_origin` for the carpet; ``None`` for removed cells."""
    lookup = {tuple(int(v) for v in off): d for d, off in enumerate(POINT_OFFSETS)}
    digits = []
    for _ in range(level):
        column, cd = divmod(column, 3)
        row, rd = divmod(row, 3)
        if (cd, rd) == (1, 1):
            return None
        digits.append(lookup[(cd, rd)])
    if column or row:
        return None
    return tuple(reversed(digits))


def vertex_indices(mode: str) -> tuple[int, ...]:
    """Which of p_0..p_7 belong to the level-0 vertex set in ``mode``."""
    _check_mode(mode)
    return (0, 1, 2, 4, 5, 6) if mode == "cross" else tuple(range(8))


def cell_vertices(word: Sequence[int], mode: str = "sc") -> list[LatticePoint]:
    origin = cell_origin(word, mode)
    n = origin.level
    return [
        LatticePoint(2 * origin.column + int(POINT_OFFSETS[i, 0]),
                     2 * origin.row + int(POINT_OFFSETS[i, 1]), n)
        for i in vertex_indices(mode)
    ]


def cell_pairs(mode: str) -> list[tuple[int, int]]:
    """Perimeter pairs of a single cell with both endpoints present."""
    present = set(vertex_indices(mode))
    return [(i, j) for i, j in RING_PAIRS if i in present and j in present]


@lru_cache(maxsize=16)
def all_words(n: int, mode: str = "sc") -> np.ndarray:
    """All level-``n`` words as rows of digits, in lexicographic order."""
    alphabet = np.array(_check_mode(mode), dtype=np.int8)
    k = len(alphabet)
    idx = np.arange(k**n, dtype=np.int64)
    out = np.empty((k**n, n), dtype=np.int8)
    for pos in range(n - 1, -1, -1):
        idx, digit = np.divmod(idx, k)
        out[:, pos] = alphabet[digit]
    out.setflags(write=False)
    return out


@lru_cache(maxsize=16)
def all_origins(n: int, mode: str = "sc") -> np.ndarray:
    """Cell origins of all level-``n`` words (same order as :func:`all_words`)."""
    offsets = POINT_OFFSETS[list(_check_mode(mode))]
    origins = np.zeros((1, 2), dtype=np.int64)
    for _ in range(n):
        origins = (3 * origins[:, None, :] + offsets[None, :, :]).reshape(-1, 2)
    origins.setflags(write=False)
    return origins


@dataclass(frozen=True)
class GraphSkeleton:
    """Immutable weighted graph.

    ``coords`` holds integer lattice coordinates (vertex graphs and balls)
    or cell origins (cell graphs). ``edges`` is an ``(E, 2)`` array with
    ``i < j``; ``weights`` are conductances (edge multiplicities for the
    vertex graph).
    """

    kind: str
    level: int | None
    mode: str
    coords: np.ndarray
    edges: np.ndarray
    weights: np.ndarray
    boundary: np.ndarray | None = None
    distance: np.ndarray | None = None
    center: int | None = None
    _index: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def node_count(self) -> int:
        return len(self.coords)

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    @property
    def scale(self) -> int:
        """Denominator turning ``coords`` into geometric positions."""
        if self.kind == "vertex":
            return 2 * 3**self.level
        if self.kind == "cell":
            return 3**self.level
        return 2

    def positions(self) -> np.ndarray:
        return self.coords / self.scale

    def index_of(self, x: int, y: int) -> int:
        """Node index of the coordinate pair; ``KeyError`` if absent."""
        keys = self._keys()
        key = int(x) * self._key_base() + int(y)
        pos = int(np.searchsorted(keys, key))
        if pos >= len(keys) or keys[pos] != key:
            raise KeyError((x, y))
        return pos

    def indices_of(self, coords: np.ndarray) -> np.ndarray:
        """Vectorized :meth:`index_of`; absent points map to -1."""
        coords = np.asarray(coords, dtype=np.int64).reshape(-1, 2)
        keys = self._keys()
        query = coords[:, 0] * self._key_base() + coords[:, 1]
        pos = np.searchsorted(keys, query)
        pos = np.minimum(pos, len(keys) - 1)
        return np.where(keys[pos] == query, pos, -1)

    def _key_base(self) -> int:
        if "base" not in self._index:
            self._index["base"] = int(self.coords[:, 1].max()) + 1 if len(self.coords) else 1
        return self._index["base"]

    def _keys(self) -> np.ndarray:
        if self.kind == "cell":
            raise InvalidInputError("cell graphs are indexed by word, not coordinates")
        if "keys" not in self._index:
            self._index["keys"] = self.coords[:, 0] * self._key_base() + self.coords[:, 1]
        return self._index["keys"]

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.node_count, dtype=float)
        np.add.at(deg, self.edges[:, 0], self.weights)
        np.add.at(deg, self.edges[:, 1], self.weights)
        return deg

    def edge_set(self) -> dict[tuple[int, int], float]:
        return {(int(i), int(j)): w for (i, j), w in zip(self.edges, self.weights.tolist())}


def _freeze(*arrays):
    for a in arrays:
        if a is not None:
            a.setflags(write=False)


def _check_level(n: int, kind: str) -> None:
    if n < 1:
        raise InvalidInputError("level must be at least 1")
    if n > MAX_LEVEL[kind]:
        raise CapacityError(f"level {n} exceeds the {kind}-graph cap {MAX_LEVEL[kind]}")


@lru_cache(maxsize=8)
def vertex_graph(n: int, mode: str = "sc") -> GraphSkeleton:
    """The graph on ``V_n`` weighted by how many cells contain each edge."""
    _check_level(n, "vertex")
    origins = all_origins(n, mode)
    present = list(vertex_indices(mode))
    pts = 2 * origins[:, None, :] + POINT_OFFSETS[present][None, :, :]
    base = 2 * 3**n + 1
    keys = (pts[..., 0] * base + pts[..., 1]).ravel()
    uniq, inverse = np.unique(keys, return_inverse=True)
    inverse = inverse.reshape(len(origins), len(present))
    del keys, pts
    local = {p: k for k, p in enumerate(present)}
    pairs = cell_pairs(mode)
    a = np.concatenate([inverse[:, local[i]] for i, _ in pairs])
    b = np.concatenate([inverse[:, local[j]] for _, j in pairs])
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    pair_keys = lo * len(uniq) + hi
    del a, b, lo, hi
    ukeys, counts = np.unique(pair_keys, return_counts=True)
    edges = np.stack(np.divmod(ukeys, len(uniq)), axis=1).astype(np.int64)
    coords = np.stack(np.divmod(uniq, base), axis=1).astype(np.int64)
    weights = counts.astype(np.int64)
    _freeze(coords, edges, weights)
    return GraphSkeleton("vertex", n, mode, coords, edges, weights)


@lru_cache(maxsize=8)
def cell_graph(n: int, mode: str = "sc") -> GraphSkeleton:
    """The graph on ``W_n`` joining cells that share a full side."""
    _check_level(n, "cell")
    origins = all_origins(n, mode)
    side = 3**n
    grid = np.full((side + 1, side + 1), -1, dtype=np.int64)
    grid[origins[:, 0], origins[:, 1]] = np.arange(len(origins))
    edges = []
    for dx, dy in ((1, 0), (0, 1)):
        nb = grid[origins[:, 0] + dx, origins[:, 1] + dy]
        ok = nb >= 0
        src = np.arange(len(origins))[ok]
        edges.append(np.stack([np.minimum(src, nb[ok]), np.maximum(src, nb[ok])], axis=1))
    edges = np.concatenate(edges)
    edges = edges[np.lexsort((edges[:, 1], edges[:, 0]))]
    weights = np.ones(len(edges), dtype=np.int64)
    coords = origins.copy()
    _freeze(coords, edges, weights)
    return GraphSkeleton("cell", n, mode, coords, edges, weights)


def word_index(word: Sequence[int], mode: str = "sc") -> int:
    """Position of ``word`` in the lexicographic order of its level."""
    alphabet = _check_mode(mode)
    idx = 0
    for d in check_word(word, mode):
        idx = idx * len(alphabet) + alphabet.index(d)
    return idx


# -- infinite graphical carpet ------------------------------------------------


def in_carpet_cell(i: int, j: int) -> bool:
    """True if the unit cell with integer origin (i, j) survives in V_inf."""
    if i < 0 or j < 0:
        return False
    while i or j:
        i, a = divmod(i, 3)
        j, b = divmod(j, 3)
        if a == 1 and b == 1:
            return False
    return True


def _candidate_cells(x: int, y: int):
    xs = (x // 2 - 1, x // 2) if x % 2 == 0 else ((x - 1) // 2,)
    ys = (y // 2 - 1, y // 2) if y % 2 == 0 else ((y - 1) // 2,)
    return [(i, j) for i in xs for j in ys]


def vinfty_member(x: int, y: int) -> bool:
    """Membership of the half-integer point ``(x/2, y/2)`` in ``V_inf``."""
    if x < 0 or y < 0 or (x % 2 and y % 2):
        return False
    return any(in_carpet_cell(i, j) for i, j in _candidate_cells(x, y))


def vinfty_ball(z: tuple[int, int], r: int) -> GraphSkeleton:
    """Closed graph-distance ball of radius ``r`` around ``z`` in ``V_inf``.

    Coordinates are doubled (edges have length 1). Nodes at distance
    exactly ``r`` are flagged in ``boundary``.
    """
    z = (int(z[0]), int(z[1]))
    if not vinfty_member(*z):
        raise InvalidInputError(f"{z} is not a vertex of the infinite carpet")
    if r < 0:
        raise InvalidInputError("radius must be nonnegative")
    dist = {z: 0}
    queue = deque([z])
    while queue:
        p = queue.popleft()
        d = dist[p]
        if d == r:
            continue
        x, y = p
        for q in ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)):
            if q not in dist and vinfty_member(*q):
                dist[q] = d + 1
                queue.append(q)
                if len(dist) > MAX_BALL_NODES:
                    raise CapacityError("ball exceeds node cap")
    pts = sorted(dist)
    coords = np.array(pts, dtype=np.int64).reshape(-1, 2)
    distance = np.array([dist[p] for p in pts], dtype=np.int64)
    index = {p: k for k, p in enumerate(pts)}
    edges = []
    for k, (x, y) in enumerate(pts):
        for q in ((x + 1, y), (x, y + 1)):
            m = index.get(q)
            if m is not None:
                edges.append((k, m))
    edges = np.array(sorted(edges), dtype=np.int64).reshape(-1, 2)
    weights = np.ones(len(edges), dtype=np.int64)
    boundary = distance == r
    _freeze(coords, edges, weights, boundary, distance)
    return GraphSkeleton("ball", 0, "sc", coords, edges, weights,
                         boundary=boundary, distance=distance, center=index[z])


# -- symmetry and export ------------------------------------------------------

DIHEDRAL_GENERATORS = ("flip_x", "flip_y", "swap")


def transform_coords(coords: np.ndarray, extent: int, op: str) -> np.ndarray:
    """Apply a square symmetry to integer coordinates in ``[0, extent]``."""
    x, y = coords[:, 0], coords[:, 1]
    if op == "flip_x":
        return np.stack([extent - x, y], axis=1)
    if op == "flip_y":
        return np.stack([x, extent - y], axis=1)
    if op == "swap":
        return np.stack([y, x], axis=1)
    raise InvalidInputError(f"unknown symmetry {op!r}")


def symmetry_permutation(g: GraphSkeleton, op: str) -> np.ndarray:
    """Node permutation induced by a square symmetry (vertex or cell graphs)."""
    if g.kind == "vertex":
        return g.indices_of(transform_coords(g.coords, g.scale, op))
    if g.kind == "cell":
        side = 3**g.level
        moved = transform_coords(g.coords, side - 1, op)
        grid = np.full((side, side), -1, dtype=np.int64)
        grid[g.coords[:, 0], g.coords[:, 1]] = np.arange(g.node_count)
        return grid[moved[:, 0], moved[:, 1]]
    raise InvalidInputError("symmetries are defined for vertex and cell graphs only")


def write_graph(g: GraphSkeleton, path) -> None:
    """Write the line-oriented export: JSON header, node count, ``i j weight`` lines."""
    header = {"kind": g.kind, "level": g.level, "mode": g.mode, "scale": g.scale,
              "edges": g.edge_count}
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        fh.write(f"{g.node_count}\n")
        for (i, j), w in zip(g.edges.tolist(), g.weights.tolist()):
            fh.write(f"{i} {j} {w}\n")


def read_graph(path) -> tuple[dict, int, np.ndarray, np.ndarray]:
    with open(path, encoding="ascii") as fh:
        header = json.loads(fh.readline())
        count = int(fh.readline())
        rows = np.loadtxt(fh, dtype=np.int64, ndmin=2)
    if rows.size == 0:
        rows = np.zeros((0, 3), dtype=np.int64)
    return header, count, rows[:, :2], rows[:, 2]
