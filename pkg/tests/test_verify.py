import math
from fractions import Fraction

import numpy as np
import pytest

from sclab.energy import ALPHA, CellFunction, Constant, CoordinateX
from sclab.errors import InvalidInputError
from sclab.special import GoodFunction, harmonic_un
from sclab.verify import (Windows, approx_local, ball_domain, besov_blowup, critical_exponent,
                          equivalence_EvsFrakE, harnack_ratios, holder_exponent, holder_vertex,
                          indicator_cell, monotonicity_B, monotonicity_a, random_cells)


def test_coordinate_ratios_are_geometric():
    # a_n(x) = (8 rho / 9)**n, so a_n / a_{n+m} = (9 / (8 rho))**m exactly
    rep = monotonicity_a(CoordinateX(), 1.25, 4)
    for inst in rep.instances:
        assert inst["ratio"] == pytest.approx((9 / 10) ** inst["m"])
    assert rep.passed and rep.statistics["drift"] == pytest.approx(0.0)


def test_constant_excluded():
    assert monotonicity_a(Constant(2), 1.25, 3).statistics["excluded"]
    c = CellFunction(2, np.ones(64))
    assert monotonicity_B([c], 1.25).statistics["excluded"]


def test_monotonicity_B_random_and_indicator():
    cells = [random_cells(n, seed) for n in (2, 3) for seed in range(3)]
    rep = monotonicity_B(cells, 1.25)
    assert all(math.isfinite(r) and r > 0 for r in rep.ratios)
    ind = monotonicity_B([indicator_cell(2, 0), indicator_cell(3, 0)], 1.25)
    assert all(r > 0 for r in ind.ratios)


def test_indicator_cell_exact():
    c = indicator_cell(1, 3)
    assert c.exact and sum(c.values) == 1 and c.values[3] == Fraction(1)


def test_random_cells_cross_mode():
    assert len(random_cells(2, 0, mode="cross").values) == 36


def test_report_serialization():
    rep = monotonicity_a(CoordinateX(), 1.25, 3)
    d = rep.to_dict()
    assert d["max"] == rep.max and d["min"] == rep.min
    assert rep.to_csv().splitlines()[0] == "function,m,n,ratio"


def test_ball_domain_validation():
    with pytest.raises(InvalidInputError):
        ball_domain(2, (0.5, 0.5), 0.05, 0.5)            # inside the central hole
    with pytest.raises(InvalidInputError):
        ball_domain(2, (0.1, 0.1), 0.1, 1.5)


def test_harnack_constant_data_gives_one():
    rep = harnack_ratios([3], [(1 / 6, 1 / 6)], 1 / 6, draws=2, epsilon=0.0)
    assert rep.ratios == pytest.approx([1.0, 1.0])


def test_harnack_small_run():
    rep = harnack_ratios([3], [(1 / 6, 1 / 6)], 1 / 6, draws=3, seed=1)
    assert all(1 <= r < 50 for r in rep.ratios)


def test_equivalence_for_coordinate():
    rep = equivalence_EvsFrakE(CoordinateX(), [ALPHA + 0.05, 2.0], 2, quad_depth=3)
    assert rep.passed
    assert {i["pair"] for i in rep.instances} == {"E/frakE", "E/quad", "frakE/quad"}


def test_holder_exponent_of_linear_function():
    pts = np.array([[0.0, 0], [0.1, 0], [0.3, 0], [0.9, 0]])
    vals = pts[:, 0] * 2
    est = holder_exponent(pts, vals, np.array([[0, 1], [0, 2], [0, 3]]))
    assert est.theta == pytest.approx(1.0)
    with pytest.raises(InvalidInputError):
        holder_exponent(pts, np.zeros(4), np.array([[0, 1], [0, 2]]))


def test_holder_of_harmonic_is_positive():
    est = holder_vertex(harmonic_un(4).u)
    assert 0 < est.theta <= 1.2


def test_blowup_above_threshold():
    rep = besov_blowup(CoordinateX(), 2.3, 5, label="x")
    # exact rate 3**(2.3 - alpha) * 8/9 = 3**0.3
    assert rep.statistics["growth_rate"] == pytest.approx(3**0.3, rel=1e-9)
    assert rep.passed
    assert not besov_blowup(GoodFunction(), 2.0, 4).passed


def test_critical_exponent():
    assert critical_exponent(8 / 9) == pytest.approx(2.0)


def test_local_closed_form_limit():
    b = critical_exponent(6 / 7)
    rep = approx_local(None, b, [b - 1e-6], growth=6 / 7)
    assert rep.ratios[0] == pytest.approx(1 / math.log(3), rel=1e-5)
    with pytest.raises(InvalidInputError):
        approx_local(None, b + 0.1, [b], growth=6 / 7)


def test_local_truncated_matches_closed_form():
    b = critical_exponent(6 / 7)
    betas = [b - 0.5, b - 0.3]
    closed = approx_local(None, b, betas, growth=6 / 7)
    trunc = approx_local(lambda n: (6 / 7) ** n, b, betas, n_max=200)
    assert trunc.ratios == pytest.approx(closed.ratios, rel=1e-9)


def test_windows_defaults():
    w = Windows()
    assert w.drift == 0.2 and w.stability_factor == 2.0
