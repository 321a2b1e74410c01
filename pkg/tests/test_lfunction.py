import math
import random

import pytest
from sympy import Poly, symbols

from algebra import CycloInt, Place
from errors import InfeasibleError
from lfunction import (
    check_feasible,
    coordinate_traces,
    interior_unit_root_constant,
    l_polynomial,
    l_value_valuation,
    orbit_product,
    power_sum,
    power_sum_from_closed_points,
    unit_root_count,
)
from tower import CharacterIndex, l_degree, level_orbits, load_tower


_u = symbols("u")


def _integers(L):
    assert all(c.is_rational() for c in L.coeffs)
    return [c.coeffs[0] for c in L.coeffs]


# --- power sums ---

def test_power_sum_of_x3_at_level_one():
    spec = load_tower("x3")
    chi = CharacterIndex((1,), 1, 2)
    # N_1 = 3 points on y^2 + y = x^3 over F_2, so S_1 = N_1 - 1 - q = 0
    assert power_sum(spec, chi, 1).value == CycloInt.from_int(2, 1, 0)
    assert power_sum(spec, chi, 2).value == CycloInt.from_int(2, 1, 4)


@pytest.mark.parametrize("name", ["x3", "x3_plus_x", "x3_plus_inv_x", "x2_p3", "x3_and_inv_x"])
def test_power_sums_match_euler_product(name):
    spec = load_tower(name)
    rng = random.Random(name)
    for n in range(1, 3):
        orbits = level_orbits(spec, n)
        for orbit in rng.sample(orbits, min(3, len(orbits))):
            chi = orbit.representative
            for m in range(1, 5):
                assert power_sum(spec, chi, m).value == power_sum_from_closed_points(spec, chi, m)


def test_power_sum_rejects_trivial_character():
    with pytest.raises(ValueError):
        power_sum(load_tower("x3"), CharacterIndex((0,), 1, 2), 1)


def test_coordinate_traces_mark_poles():
    spec = load_tower("x3_plus_inv_x")
    table = coordinate_traces(spec, 0, 1, 1)
    assert table.values[0] == -1
    assert table.values[1] >= 0
    assert table.infinity is None


def test_check_feasible():
    spec = load_tower("x3")
    check_feasible(spec, 10)
    with pytest.raises(InfeasibleError):
        check_feasible(spec, 30)
    with pytest.raises(InfeasibleError):
        check_feasible(spec, 5, bound=16)


# --- L-polynomials ---

def test_l_polynomial_of_x3_order_two():
    L = l_polynomial(load_tower("x3"), CharacterIndex((1,), 1, 2))
    assert _integers(L) == [1, 0, 2]
    assert L.slopes() == (0.5, 0.5)
    assert unit_root_count(L) == 0
    assert l_value_valuation(L) == 0


def test_orbit_product_p3():
    spec = load_tower("x2_p3")
    (orbit,) = level_orbits(spec, 1)
    assert orbit.size == 2
    L = l_polynomial(spec, orbit.representative)
    assert L.degree == 1
    assert orbit_product(L) == (1, 0, 3)


@pytest.mark.parametrize("name,levels", [("x3", 3), ("x3_plus_x", 3), ("x3_plus_inv_x", 3), ("x2_p3", 2)])
def test_degree_matches_conductor(name, levels):
    spec = load_tower(name)
    for n in range(1, levels + 1):
        for orbit in level_orbits(spec, n):
            L = l_polynomial(spec, orbit.representative)
            assert L.degree == l_degree(spec, orbit.representative)
            assert not L.coeffs[-1].is_zero()


@pytest.mark.parametrize("name,levels", [("x3", 3), ("x3_plus_inv_x", 3), ("x2_p3", 2)])
def test_interior_unit_roots(name, levels):
    spec = load_tower(name)
    full = frozenset(spec.ramified_places)
    constant = interior_unit_root_constant(full)
    for n in range(1, levels + 1):
        for orbit in level_orbits(spec, n):
            if orbit.locus == full:
                assert unit_root_count(l_polynomial(spec, orbit.representative)) == constant


def test_interior_unit_root_constant():
    assert interior_unit_root_constant(frozenset({Place.infinity()})) == 0
    assert interior_unit_root_constant(frozenset({Place.infinity(), Place.rational(0, 2)})) == 1


def _trace_polynomial(product, q):
    """h(u) with P(1/T) T^(2g) = T^g h(T + q/T); needs c_{2g-i} = q^(g-i) c_i."""
    g, rem = divmod(len(product) - 1, 2)
    assert rem == 0
    assert all(product[2 * g - i] == q ** (g - i) * product[i] for i in range(g + 1))
    # T^j + (q/T)^j as a polynomial in u
    dickson = [Poly(2, _u), Poly(_u, _u)]
    for _ in range(2, g + 1):
        dickson.append(dickson[-1] * Poly(_u, _u) - q * dickson[-2])
    h = Poly(product[g], _u)
    for j in range(1, g + 1):
        h += product[g - j] * dickson[j]
    return h


@pytest.mark.parametrize("name", ["x3", "x3_plus_inv_x", "x2_p3"])
def test_orbit_products_are_weil_pure(name):
    spec = load_tower(name)
    bound = 2 * math.sqrt(spec.q) + 1e-6
    for n in range(1, spec.n_max + 1):
        for orbit in level_orbits(spec, n):
            product = orbit_product(l_polynomial(spec, orbit.representative))
            h = _trace_polynomial(product, spec.q)
            # |alpha| = sqrt(q) for every reciprocal root iff h splits over [-2 sqrt q, 2 sqrt q]
            roots = h.real_roots()
            assert len(roots) == h.degree()
            assert all(abs(float(r.evalf(30))) <= bound for r in roots)


def test_slopes_are_symmetric():
    spec = load_tower("x3_plus_inv_x")
    for orbit in level_orbits(spec, 2):
        slopes = l_polynomial(spec, orbit.representative).slopes()
        assert sorted(slopes) == sorted(1 - s for s in slopes)


def test_conjugate_l_polynomial_is_galois_image():
    spec = load_tower("x3")
    L = l_polynomial(spec, CharacterIndex((1,), 2, 2))
    assert L.conjugate(3) == l_polynomial(spec, CharacterIndex((3,), 2, 2))
