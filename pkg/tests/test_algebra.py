import random
from fractions import Fraction

import pytest
from sympy import primerange

from algebra import (
    INF,
    CycloInt,
    Place,
    RatFunc,
    cyclo_norm,
    embed,
    get_field,
    irreducible_enumerate,
    is_irreducible,
    mobius_count,
    newton_polygon,
    padic_valuation_cyclo,
    poly_divmod,
    poly_gcd,
    poly_mul,
    vp,
)
from errors import ConsistencyError


# --- vp ---

def test_vp_of_integers():
    assert vp(8, 2) == 3
    assert vp(-12, 2) == 2
    assert vp(7, 3) == 0
    assert vp(0, 5) == INF


# --- finite fields ---

def test_field_modulus_is_smallest_irreducible():
    assert get_field(2, 2).modulus == (1, 1, 1)
    assert get_field(3, 2).modulus == (1, 0, 1)
    assert get_field(2, 3).modulus == (1, 1, 0, 1)


def test_prime_field_arithmetic():
    F = get_field(5, 1)
    assert F.mul(3, 4) == 2
    assert F.inv(2) == 3
    assert F.sub(1, 3) == 3


def test_gf4_multiplication_table():
    F = get_field(2, 2)
    # x * (x + 1) = x^2 + x = 1 mod x^2 + x + 1
    assert F.mul(2, 3) == 1
    assert F.mul(2, 2) == 3
    assert F.inv(2) == 3


@pytest.mark.parametrize("p,r", [(2, 3), (2, 5), (3, 2), (5, 2), (7, 1)])
def test_field_axioms_random(p, r):
    F = get_field(p, r)
    rng = random.Random(p * 100 + r)
    for _ in range(300):
        a, b, c = (rng.randrange(F.order) for _ in range(3))
        assert F.mul(a, F.mul(b, c)) == F.mul(F.mul(a, b), c)
        assert F.mul(a, F.add(b, c)) == F.add(F.mul(a, b), F.mul(a, c))
        assert F.mul(a, b) == F._mul_slow(a, b)
        if a:
            assert F.mul(a, F.inv(a)) == 1
            assert F.pow(a, F.order - 1) == 1


def _fields_up_to(bound):
    for p in primerange(2, 2**8):
        r = 1
        while p**r <= bound:
            yield p, r
            r += 1


def test_every_element_satisfies_the_field_equation():
    for p, r in _fields_up_to(2**16):
        F = get_field(p, r)
        if r == 1:
            assert all(F._pow_slow(a, p) == a for a in F.elements())
            continue
        # the tables cover every unit once and close up under the slow product
        exp, _ = F.tables()
        assert sorted(exp) == list(range(1, F.order))
        assert F._mul_slow(exp[-1], F.primitive_element()) == 1
        assert all(F.pow(a, F.order) == a and F.frobenius(a, r) == a for a in F.elements())


def test_frobenius_is_additive_and_fixes_prime_field():
    F = get_field(3, 3)
    rng = random.Random(7)
    for _ in range(100):
        a, b = rng.randrange(F.order), rng.randrange(F.order)
        assert F.frobenius(F.add(a, b)) == F.add(F.frobenius(a), F.frobenius(b))
    for c in range(3):
        assert F.frobenius(c) == c
    assert F.frobenius(5, 3) == 5


def test_trace_lands_in_prime_field():
    F = get_field(2, 3)
    assert F.trace(1) == 1
    assert {F.trace(a) for a in F.elements()} == {0, 1}
    assert sum(1 for a in F.elements() if F.trace(a) == 0) == 4


def test_trace_to_non_subfield_raises():
    with pytest.raises(ValueError):
        get_field(2, 3).trace(1, sub_degree=2)


def test_embedding_is_a_ring_map():
    small, big = get_field(2, 2), get_field(2, 4)
    for a in small.elements():
        for b in small.elements():
            assert embed(2, 2, 2, small.mul(a, b)) == big.mul(embed(2, 2, 2, a), embed(2, 2, 2, b))
            assert embed(2, 2, 2, small.add(a, b)) == big.add(embed(2, 2, 2, a), embed(2, 2, 2, b))


# --- polynomials and irreducibles ---

def test_irreducible_enumerate_small():
    assert irreducible_enumerate(2, 1, 2) == [(0, 1), (1, 1), (1, 1, 1)]


@pytest.mark.parametrize("p,k,max_deg", [(2, 1, 5), (3, 1, 3), (2, 2, 3)])
def test_irreducible_counts_match_mobius(p, k, max_deg):
    polys = irreducible_enumerate(p, k, max_deg)
    for deg in range(1, max_deg + 1):
        assert sum(1 for f in polys if len(f) - 1 == deg) == mobius_count(p**k, deg)


def test_mobius_count_values():
    assert mobius_count(2, 4) == 3
    assert mobius_count(3, 2) == 3
    assert mobius_count(4, 1) == 4


def test_product_of_irreducibles_is_not_irreducible():
    F = get_field(3, 1)
    f = poly_mul(F, [1, 0, 1], [1, 1])
    assert not is_irreducible(F, f)
    quot, rem = poly_divmod(F, f, [1, 1])
    assert quot == [1, 0, 1] and rem == []


def test_prime_field_polynomials_use_least_residues():
    F3, F5 = get_field(3, 1), get_field(5, 1)
    assert poly_mul(F3, [2, 2], [2]) == [1, 1]
    assert poly_divmod(F5, [3, 1, 1], [4, 1]) == ([2, 1], [])
    # (x + 4)(x + 2) and 2(x + 4)(x + 3)
    assert poly_gcd(F5, [3, 1, 1], [4, 4, 2]) == [4, 1]
    assert poly_gcd(F5, [], []) == []


def test_irreducibility_over_gf4():
    F = get_field(2, 2)
    # x^2 + x + c splits over GF(4) iff c has trace 0
    assert is_irreducible(F, [2, 1, 1])
    assert not is_irreducible(F, [1, 1, 1])
    assert poly_gcd(F, poly_mul(F, [2, 1], [3, 1]), [2, 1]) == [2, 1]


# --- cyclotomic integers ---

def test_zeta_powers_reduce():
    assert CycloInt.zeta(2, 1).coeffs == (-1,)
    assert CycloInt.zeta(2, 2, 2).coeffs == (-1, 0)
    assert CycloInt.zeta(3, 1, 2).coeffs == (-1, -1)


@pytest.mark.parametrize("p,level", [(2, 1), (2, 2), (2, 3), (3, 1), (3, 2), (5, 1)])
def test_norm_of_one_minus_zeta_is_p(p, level):
    one = CycloInt.from_int(p, level, 1)
    assert cyclo_norm(one - CycloInt.zeta(p, level)) == p
    assert padic_valuation_cyclo(one - CycloInt.zeta(p, level)) == Fraction(1, (p - 1) * p ** (level - 1))


def test_norm_is_multiplicative_and_galois_invariant():
    rng = random.Random(11)
    for _ in range(1000):
        a = CycloInt(2, 3, tuple(rng.randrange(-4, 5) for _ in range(4)))
        b = CycloInt(2, 3, tuple(rng.randrange(-4, 5) for _ in range(4)))
        assert cyclo_norm(a * b) == cyclo_norm(a) * cyclo_norm(b)
        assert cyclo_norm(a.galois(3)) == cyclo_norm(a)


def test_rational_norm_and_zero():
    assert cyclo_norm(CycloInt.from_int(2, 2, 3)) == 9
    assert cyclo_norm(CycloInt.from_int(2, 2, 0)) == 0
    assert padic_valuation_cyclo(CycloInt.from_int(2, 2, 0)) == INF


def test_lift_keeps_value():
    z = CycloInt.zeta(2, 1)
    assert z.lift(2) == CycloInt.zeta(2, 2, 2)


def test_exact_div_raises_on_remainder():
    assert CycloInt(2, 2, (4, 6)).exact_div(2) == CycloInt(2, 2, (2, 3))
    with pytest.raises(ConsistencyError):
        CycloInt(2, 2, (4, 5)).exact_div(2)


def test_mixed_levels_raise():
    with pytest.raises(ValueError):
        CycloInt.zeta(2, 1) + CycloInt.zeta(2, 2)


# --- Newton polygons ---

def test_newton_polygon_slopes():
    polygon = newton_polygon([(0, 0), (1, 0), (2, 1)])
    assert polygon.slopes == (0, 1)
    assert polygon.multiplicity(0) == 1


def test_newton_polygon_normalizer_and_infinite_points():
    assert newton_polygon([(0, 0), (2, 2)], 2).slopes == (Fraction(1, 2), Fraction(1, 2))
    assert newton_polygon([(0, 0), (1, INF), (2, 1)]).slopes == (Fraction(1, 2), Fraction(1, 2))


def test_newton_polygon_drops_points_above_hull():
    polygon = newton_polygon([(0, 0), (1, 3), (2, 1), (3, 3)])
    assert polygon.vertices == ((0, Fraction(0)), (2, Fraction(1)), (3, Fraction(3)))
    assert polygon.slopes == (Fraction(1, 2), Fraction(1, 2), Fraction(2))


def test_newton_polygon_ignores_unit_factors():
    rng = random.Random(17)
    units = [1, 2, 4, 5, 7, 8, -1, -2]
    for _ in range(200):
        coeffs = [1] + [rng.randrange(-60, 61) for _ in range(rng.randrange(0, 6))] + [rng.choice([3, 9, 27, 2])]
        scaled = list(coeffs)
        i = rng.randrange(len(coeffs))
        scaled[i] *= rng.choice(units)
        before = newton_polygon(enumerate(vp(c, 3) for c in coeffs))
        assert newton_polygon(enumerate(vp(c, 3) for c in scaled)) == before


def test_newton_polygon_of_cyclotomic_coefficients_ignores_units():
    p, level = 3, 2
    coeffs = [CycloInt.from_int(p, level, 1), CycloInt.reduce(p, level, (3, 1)), CycloInt.from_int(p, level, 9)]
    # 1 + zeta = (1 - zeta^2) / (1 - zeta) is a unit for odd p
    scaled = [coeffs[0], coeffs[1] * (CycloInt.zeta(p, level) + 1), coeffs[2] * CycloInt.zeta(p, level, 4)]
    polygon = newton_polygon(enumerate(padic_valuation_cyclo(c) for c in coeffs))
    assert newton_polygon(enumerate(padic_valuation_cyclo(c) for c in scaled)) == polygon


def test_newton_polygon_rejects_bad_input():
    with pytest.raises(ValueError):
        newton_polygon([(0, INF), (1, 0)])
    with pytest.raises(ValueError):
        newton_polygon([(0, 0), (1, -1), (2, 0)])
    with pytest.raises(ValueError):
        newton_polygon([(0, 0), (1, INF)])


# --- places and rational functions ---

def test_place_labels_and_roots():
    assert Place.infinity().label == "inf"
    assert Place.rational(0, 2).label == "x"
    assert Place.rational(1, 3).label == "x+2"
    assert Place.rational(1, 3).root(3) == 1
    with pytest.raises(ValueError):
        Place.infinity().root(3)


def test_ratfunc_poles_and_orders():
    f = RatFunc.from_coeffs(2, [1, 0, 0, 0, 1], [0, 1])  # x^3 + 1/x
    zero = Place.rational(0, 2)
    assert f.poles() == (zero, Place.infinity())
    assert f.pole_order(zero) == 1
    assert f.pole_order(Place.infinity()) == 3
    assert str(f) == "(x^4+1)/(x)"


def test_ratfunc_eval_and_infinity():
    F = get_field(3, 1)
    f = RatFunc.from_coeffs(3, [1, 1], [2, 1])  # (x + 1)/(x + 2)
    assert f.eval(F, 1) is None
    assert f.eval(F, 0) == F.div(1, 2)
    assert f.value_at_infinity() == 1
    assert RatFunc.from_coeffs(3, [0, 1], [0, 0, 1]).value_at_infinity() == 0


def test_ratfunc_lowest_terms():
    f = RatFunc.from_coeffs(2, [1, 0, 1], [1, 1])  # (x^2 + 1)/(x + 1) = x + 1 over F_2
    assert f.den == (1,)
    assert f.num == (1, 1)
    assert f.poles() == (Place.infinity(),)


def test_ratfunc_zero_denominator():
    with pytest.raises(ZeroDivisionError):
        RatFunc.from_coeffs(2, [1], [2])
