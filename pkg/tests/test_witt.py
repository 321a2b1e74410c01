import json
import random
from itertools import product

import pytest

import witt
from algebra import Place, RatFunc, get_field
from errors import InfeasibleError
from witt import (
    WittVec,
    frobenius,
    get_rational_functions,
    get_witt_cache_path,
    teichmuller_trace_table,
    verschiebung,
    witt_arith,
    witt_frobenius_trace,
    witt_from_coordinate,
    witt_pole_order,
    witt_polynomials,
    witt_residue,
    witt_scale,
    witt_trace_closed_form,
)


def _residue_table(p, length):
    """Map residue -> Witt vector over F_p."""
    F = get_field(p, 1)
    table = {}
    for comps in product(range(p), repeat=length):
        w = WittVec(comps, F)
        table[witt_residue(w)] = w
    return table


# --- residues and ring structure over F_p ---

def test_residue_examples():
    F = get_field(2, 1)
    assert witt_residue(WittVec((0, 1), F)) == 2
    assert witt_residue(WittVec((1, 1), F)) == 3
    assert witt_residue(WittVec((1, 0, 0), F)) == 1


@pytest.mark.parametrize("p,length", [(2, 3), (3, 2), (2, 4), (5, 2)])
def test_residue_is_a_ring_isomorphism(p, length):
    table = _residue_table(p, length)
    modulus = p**length
    assert sorted(table) == list(range(modulus))
    rng = random.Random(p * 10 + length)
    for _ in range(200):
        a, b = rng.randrange(modulus), rng.randrange(modulus)
        assert witt_residue(witt_arith(table[a], table[b])) == (a + b) % modulus
        assert witt_residue(witt_arith(table[a], table[b], "mul")) == a * b % modulus


def test_scale_matches_integer_multiple():
    table = _residue_table(3, 3)
    for a in (1, 5, 13, 26):
        for e in (0, 1, 2, 7, 27, 30):
            assert witt_residue(witt_scale(table[a], e)) == a * e % 27


def test_verschiebung_is_multiplication_by_p():
    table = _residue_table(2, 4)
    for a in range(16):
        assert witt_residue(verschiebung(table[a])) == 2 * a % 16
    assert verschiebung(table[3], 0) == table[3]


def test_teichmuller_sum_in_gf4():
    F = get_field(2, 2)
    # [omega] + [omega^2] = -1 in W_2(F_4)
    total = witt_arith(WittVec((2, 0), F), WittVec((3, 0), F))
    assert total.components == (1, 1)
    assert witt_residue(total) == 3


def test_length_mismatch_raises():
    F = get_field(2, 1)
    with pytest.raises(ValueError):
        witt_arith(WittVec((1,), F), WittVec((1, 0), F))


def test_unknown_operation_raises():
    with pytest.raises(ValueError):
        witt_polynomials(2, 2, "div")


def test_length_above_cap_is_infeasible():
    with pytest.raises(InfeasibleError):
        witt_polynomials(2, 6, "add", length_cap=5)


def _integer_value(terms, values):
    total = 0
    for c, exps in terms:
        term = c
        for i, e in exps:
            term *= values[i] ** e
        total += term
    return total


def _ghost(components, n, p):
    return sum(p**i * components[i] ** p ** (n - i) for i in range(n + 1))


@pytest.mark.parametrize("p,length", [(2, 4), (3, 3), (5, 2)])
def test_universal_polynomials_respect_ghost_components(p, length):
    # tables are reduced mod p, so the ghost identities hold mod p^(n+1)
    add = witt_polynomials(p, length, "add")
    mul = witt_polynomials(p, length, "mul")
    rng = random.Random(p * 7 + length)
    for _ in range(50):
        x = [rng.randrange(-20, 21) for _ in range(length)]
        y = [rng.randrange(-20, 21) for _ in range(length)]
        s = [_integer_value(terms, x + y) for terms in add]
        m = [_integer_value(terms, x + y) for terms in mul]
        for n in range(length):
            modulus = p ** (n + 1)
            assert (_ghost(s, n, p) - _ghost(x, n, p) - _ghost(y, n, p)) % modulus == 0
            assert (_ghost(m, n, p) - _ghost(x, n, p) * _ghost(y, n, p)) % modulus == 0


# --- traces ---

def _random_vector(F, length, rng):
    return WittVec(tuple(rng.randrange(F.order) for _ in range(length)), F)


@pytest.mark.parametrize("p,r,length", [(2, 4, 3), (3, 2, 2), (2, 6, 2), (5, 2, 2)])
def test_frobenius_trace_is_additive(p, r, length):
    F = get_field(p, r)
    rng = random.Random(p * 31 + r + length)
    modulus = p**length
    for _ in range(50):
        u, v = _random_vector(F, length, rng), _random_vector(F, length, rng)
        assert witt_frobenius_trace(witt_arith(u, v)) == (witt_frobenius_trace(u) + witt_frobenius_trace(v)) % modulus


@pytest.mark.parametrize("p,r", [(2, 4), (3, 3), (5, 2)])
def test_frobenius_has_order_r(p, r):
    F = get_field(p, r)
    rng = random.Random(p + r)
    for _ in range(50):
        w = _random_vector(F, 3, rng)
        assert frobenius(w, r) == w
        assert frobenius(frobenius(w), r - 1) == w


@pytest.mark.parametrize("p,r,s", [(2, 6, 2), (2, 6, 3), (3, 4, 2)])
def test_frobenius_trace_is_transitive(p, r, s):
    F = get_field(p, r)
    rng = random.Random(p * 13 + r * s)
    for _ in range(20):
        w = _random_vector(F, 2, rng)
        inner, twist = w, w
        for _ in range(1, r // s):
            twist = frobenius(twist, s)
            inner = witt_arith(inner, twist)
        # the partial trace lands in W_2(GF(p^s))
        assert frobenius(inner, s) == inner
        outer, twist = inner, inner
        for _ in range(1, s):
            twist = frobenius(twist)
            outer = witt_arith(outer, twist)
        assert witt_residue(outer) == witt_frobenius_trace(w)


@pytest.mark.parametrize("p,r,length", [(2, 3, 3), (2, 4, 2), (3, 2, 2), (3, 3, 1), (5, 2, 2)])
def test_closed_form_trace_matches_frobenius_sum(p, r, length):
    F = get_field(p, r)
    rng = random.Random(p + r + length)
    for _ in range(100):
        w = WittVec(tuple(rng.randrange(F.order) for _ in range(length)), F)
        assert witt_trace_closed_form(w) == witt_frobenius_trace(w)


def test_trace_of_one():
    F = get_field(2, 3)
    assert witt_frobenius_trace(WittVec((1, 0, 0), F)) == 3
    assert int(teichmuller_trace_table(2, 3, 3)[1]) == 3


def test_trace_over_prime_field_is_residue():
    table = _residue_table(3, 2)
    for a, w in table.items():
        assert witt_frobenius_trace(w) == a


def test_teichmuller_table_is_read_only():
    tau = teichmuller_trace_table(3, 2, 2)
    assert tau[0] == 0
    with pytest.raises(ValueError):
        tau[0] = 1


# --- rational function coefficients ---

def test_pole_orders_of_scaled_coordinate():
    R = get_rational_functions(2)
    x3 = RatFunc.from_coeffs(2, [0, 0, 0, 1], [1])
    w = witt_from_coordinate((x3,), R, 2)
    assert witt_pole_order(w, Place.infinity()) == (3, 0)
    # [3](f, 0) = (f, f^2) over F_2(x)
    assert witt_pole_order(witt_scale(w, 3), Place.infinity()) == (3, 6)


def test_rational_function_roundtrip():
    R = get_rational_functions(3)
    f = RatFunc.from_coeffs(3, [1, 0, 2], [0, 1])
    assert R.to_ratfunc(R.from_ratfunc(f)) == f


# --- disk cache of universal polynomials ---

def test_polynomials_are_cached_on_disk(tmp_path, monkeypatch):
    monkeypatch.setattr(witt, "cache_root", tmp_path)
    monkeypatch.setattr(witt, "_tables", {})
    tables = witt_polynomials(2, 3, "mul")
    path = get_witt_cache_path(2, 3, "mul", tmp_path)
    assert path.exists()
    saved = json.loads(path.read_text())
    assert saved["version"] == 1
    assert (saved["p"], saved["length"], saved["kind"]) == (2, 3, "mul")
    assert witt._load_polynomials(path, 2, 3, "mul") == tables


def test_corrupt_cache_is_rebuilt(tmp_path, monkeypatch):
    monkeypatch.setattr(witt, "cache_root", tmp_path)
    monkeypatch.setattr(witt, "_tables", {})
    path = get_witt_cache_path(3, 2, "add", tmp_path)
    path.parent.mkdir(parents=True)
    path.write_text("{not json")
    assert witt._load_polynomials(path, 3, 2, "add") is None
    tables = witt_polynomials(3, 2, "add")
    # S_0 = X0 + Y0
    assert sorted(tables[0]) == [(1, ((0, 1),)), (1, ((2, 1),))]
    assert json.loads(path.read_text())["kind"] == "add"


def test_shorter_tables_derive_from_longer(monkeypatch, tmp_path):
    monkeypatch.setattr(witt, "cache_root", tmp_path)
    monkeypatch.setattr(witt, "_tables", {})
    witt_polynomials(2, 3, "add")
    short = witt_polynomials(2, 2, "add")
    assert short == witt._build_polynomials(2, 2, "add")
