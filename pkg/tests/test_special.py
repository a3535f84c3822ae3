from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sclab.energy import energy_D, sample
from sclab.errors import CapacityError, InvalidInputError
from sclab.geometry import symmetry_permutation
from sclab.special import (GoodFunction, cantor_energy, f_at, f_ifs, f_numerators, f_triadic,
                           good_energy, good_function_limit, harmonic_un, phi, phi_minimize,
                           prolong)


def test_first_level_values():
    assert [f_triadic(i, 1) for i in range(4)] == [0, Fraction(2, 7), Fraction(5, 7), 1]


def test_midpoint_convention():
    assert f_at(Fraction(1, 2)) == Fraction(1, 2)
    assert f_at(Fraction(1, 6)) == Fraction(1, 7)


def test_rejects_non_triadic():
    with pytest.raises(InvalidInputError):
        f_at(Fraction(1, 5))
    with pytest.raises(InvalidInputError):
        f_at(Fraction(4, 3))
    with pytest.raises(InvalidInputError):
        f_triadic(10, 2)


def test_numerator_table_matches_recursion():
    t = f_numerators(4)
    assert [Fraction(int(v), 7**4) for v in t] == [f_triadic(i, 4) for i in range(82)]


def test_strictly_increasing():
    t = f_numerators(6)
    assert (np.diff(t) > 0).all()


@given(st.integers(0, 3**6))
def test_odd_symmetry(i):
    assert f_triadic(i, 6) + f_triadic(3**6 - i, 6) == 1


@given(st.integers(0, 3**5))
def test_affine_iteration_agrees(i):
    assert f_ifs(Fraction(i, 3**5), 5) == f_triadic(i, 5)


def test_good_function_values():
    u = sample(GoodFunction(), 1, exact=True)
    xs = u.graph.coords[:, 0]
    assert {int(x): v for x, v in zip(xs, u.values)}[3] == Fraction(1, 2)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_good_energy_two_routes(n):
    want = Fraction(6, 7) ** n
    assert good_energy(n) == want
    assert good_energy(n, route="graph") == want
    assert energy_D(sample(GoodFunction(), n, exact=True)) == want


@pytest.mark.parametrize("n", [1, 2, 3])
def test_cantor_energy(n):
    assert cantor_energy(n) == Fraction(2, 3) ** n
    assert cantor_energy(n, route="graph") == Fraction(2, 3) ** n


def test_capacity():
    with pytest.raises(CapacityError):
        good_energy(9)
    with pytest.raises(InvalidInputError):
        cantor_energy(0)


def test_quadratic_minimum():
    (x, y), v = phi_minimize()
    assert (x, y) == (Fraction(2, 7), Fraction(5, 7)) and v == Fraction(6, 7)
    # compare with nearby rational points
    for dx in (-1, 0, 1):
        for dy in (-1, 0, 1):
            assert phi(x + Fraction(dx, 100), y + Fraction(dy, 100)) >= v


def test_harmonic_symmetries():
    h = harmonic_un(3, tol=1e-12)
    u = h.u.values
    g = h.u.graph
    assert np.max(np.abs(u[symmetry_permutation(g, "flip_y")] - u)) < 1e-9
    assert np.max(np.abs(u[symmetry_permutation(g, "flip_x")] + u - 1)) < 1e-9
    # the resistance from the current and the reciprocal energy coincide
    assert h.resistance * h.energy() == pytest.approx(1.0, abs=1e-8)


def test_harmonic_exact_level_one():
    assert harmonic_un(1, tol=1e-13).resistance == pytest.approx(13 / 11, rel=1e-10)


def test_prolongation_is_reasonable_guess():
    coarse = harmonic_un(2).u
    guess = prolong(coarse, 3)
    assert guess.min() >= 0 and guess.max() <= 1
    direct = harmonic_un(3, method="direct")
    warm = harmonic_un(3, x0=guess)
    assert np.allclose(direct.u.values, warm.u.values, atol=1e-8)


def test_limit_family_diagnostics():
    fam = good_function_limit(4, rho=1.25)
    assert len(fam.members) == 4 and len(fam.sup_differences) == 3
    assert fam.sup_differences[-1] < fam.sup_differences[0]
    assert fam.a_ratio >= 1
