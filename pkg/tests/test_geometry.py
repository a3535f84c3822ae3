from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sclab.errors import CapacityError, InvalidInputError
from sclab.geometry import (DIHEDRAL_GENERATORS, POINT_OFFSETS, all_origins, all_words,
                            cell_graph, cell_origin, cell_vertices, check_word, in_carpet_cell,
                            read_graph, symmetry_permutation, vertex_graph, vinfty_ball,
                            vinfty_member, word_index, word_of_origin, write_graph)

# (nodes, edges) counted by brute-force enumeration of distinct points and pairs
VERTEX_SIZES = {1: (40, 48), 2: (264, 336), 3: (1960, 2544), 4: (15240, 19920)}
CELL_SIZES = {1: (8, 8), 2: (64, 88), 3: (512, 776), 4: (4096, 6424)}


def brute_vertex_graph(n):
    """Independent construction: every cell, its 8 perimeter points, and the
    8 ring pairs, accumulated in a dict keyed by geometric position."""
    pts, pairs = set(), {}
    ring = [(0, 0), (1, 0), (2, 0), (2, 1), (2, 2), (1, 2), (0, 2), (0, 1)]

    def cells(level):
        if level == 0:
            yield (0, 0)
            return
        for cx, cy in cells(level - 1):
            for dx, dy in ring:
                yield (3 * cx + dx, 3 * cy + dy)

    for cx, cy in cells(n):
        loop = [(2 * cx + a, 2 * cy + b) for a, b in ring]
        pts.update(loop)
        for k in range(8):
            p, q = sorted((loop[k], loop[(k + 1) % 8]))
            pairs[(p, q)] = pairs.get((p, q), 0) + 1
    return pts, pairs


@pytest.mark.parametrize("n", [1, 2, 3])
def test_vertex_graph_matches_brute_force(n):
    pts, pairs = brute_vertex_graph(n)
    g = vertex_graph(n)
    assert g.node_count == len(pts)
    got = {}
    for (i, j), w in g.edge_set().items():
        p, q = sorted((tuple(g.coords[i]), tuple(g.coords[j])))
        got[(p, q)] = w
    assert got == pairs


@pytest.mark.parametrize("n", sorted(VERTEX_SIZES))
def test_sizes(n):
    g = vertex_graph(n)
    assert (g.node_count, g.edge_count) == VERTEX_SIZES[n]
    w = cell_graph(n)
    assert (w.node_count, w.edge_count) == CELL_SIZES[n]


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_total_multiplicity_is_eight_pairs_per_cell(n):
    assert vertex_graph(n).weights.sum() == 8 ** (n + 1)


def test_multiplicities_one_or_two():
    g = vertex_graph(3)
    assert set(np.unique(g.weights).tolist()) == {1, 2}


def test_midpoints_have_two_neighbours():
    g = vertex_graph(3)
    x, y = g.coords.T
    mid = (x % 2) != (y % 2)
    assert (np.bincount(g.edges.ravel(), minlength=g.node_count)[mid] == 2).all()


def test_edges_have_half_mesh_length():
    g = vertex_graph(2)
    d = np.abs(g.coords[g.edges[:, 0]] - g.coords[g.edges[:, 1]]).sum(axis=1)
    assert (d == 1).all()


def test_cell_graph_cross_mode_level_two():
    w = cell_graph(2, "cross")
    assert w.node_count == 36


def test_vertex_graph_cross_mode_has_no_side_points():
    g = vertex_graph(1, "cross")
    x, y = g.coords.T
    assert not ((x == 6) & (y == 3)).any()


def test_level_zero_rejected():
    with pytest.raises(InvalidInputError):
        vertex_graph(0)
    with pytest.raises(CapacityError):
        cell_graph(8)


def test_word_validation():
    with pytest.raises(InvalidInputError):
        check_word([8])
    with pytest.raises(InvalidInputError):
        check_word([3], mode="cross")


def test_cell_vertices_of_root_cells():
    pts = cell_vertices((0,))
    assert [(p.x, p.y) for p in pts] == [tuple(v) for v in POINT_OFFSETS]
    assert all(p.level == 1 for p in pts)


@given(st.lists(st.integers(0, 7), min_size=1, max_size=6))
def test_word_origin_roundtrip(word):
    o = cell_origin(word)
    assert word_of_origin(o.column, o.row, o.level) == tuple(word)


@given(st.integers(0, 26), st.integers(0, 26))
def test_origin_membership_agrees_with_digit_rule(i, j):
    inside = word_of_origin(i, j, 3) is not None
    assert inside == in_carpet_cell(i, j)


def test_word_order_matches_origins():
    words, origins = all_words(2), all_origins(2)
    for k in (0, 9, 63):
        assert tuple(cell_origin(words[k])[:2]) == tuple(origins[k])
        assert word_index(words[k]) == k


@pytest.mark.parametrize("op", DIHEDRAL_GENERATORS)
@pytest.mark.parametrize("build", [vertex_graph, cell_graph])
def test_symmetries_are_automorphisms(op, build):
    g = build(2)
    perm = symmetry_permutation(g, op)
    assert (perm >= 0).all() and len(set(perm.tolist())) == g.node_count
    mapped = {tuple(sorted((int(perm[i]), int(perm[j])))): w for (i, j), w in g.edge_set().items()}
    assert mapped == g.edge_set()


def test_self_similar_decomposition_of_vertices():
    # V_{n+1} is the union of the eight scaled copies of V_n
    n = 2
    small, big = vertex_graph(n), vertex_graph(n + 1)
    images = set()
    for off in POINT_OFFSETS:
        for x, y in small.coords:
            images.add((int(x + off[0] * 2 * 3**n), int(y + off[1] * 2 * 3**n)))
    assert images == {tuple(map(int, p)) for p in big.coords}


def test_vinfty_membership():
    assert vinfty_member(0, 0)
    assert vinfty_member(1, 0)
    assert not vinfty_member(1, 1)            # cell centre
    assert not vinfty_member(-1, 0)
    assert not vinfty_member(7, 7)            # inside the first hole
    assert vinfty_member(6, 6)                # its corner


def test_vinfty_ball_radius_one_at_origin():
    b = vinfty_ball((0, 0), 1)
    assert {tuple(p) for p in b.coords.tolist()} == {(0, 0), (1, 0), (0, 1)}
    assert b.boundary.sum() == 2
    assert tuple(b.coords[b.center]) == (0, 0)


def test_vinfty_ball_rejects_non_member():
    with pytest.raises(InvalidInputError):
        vinfty_ball((1, 1), 2)


def test_vinfty_ball_matches_scaled_vertex_graph():
    # a ball that stays inside the unit square is a subgraph of V_n scaled by 3**n
    n, r = 3, 5
    b = vinfty_ball((12, 6), r)
    g = vertex_graph(n)
    idx = g.indices_of(b.coords)
    assert (idx >= 0).all()


def test_graph_export_roundtrip(tmp_path):
    g = vertex_graph(1)
    path = tmp_path / "g.txt"
    write_graph(g, path)
    header, count, edges, weights = read_graph(path)
    assert header["kind"] == "vertex" and count == 40
    assert np.array_equal(edges, g.edges) and np.array_equal(weights, g.weights)


@settings(max_examples=30)
@given(st.integers(0, 39))
def test_positions_are_half_triadic(i):
    g = vertex_graph(1)
    x, y = g.positions()[i]
    assert Fraction(x).limit_denominator(6) * 6 == round(x * 6)
