"""T-adic L-series of the tower over U = P^1 minus its ramified places.

    S_m(T) = sum over points a of U(F_{q^m}) of prod_i (1 + T_i)^(c_i(a)),
    L(T, s) = exp(sum_m S_m(T) s^m / m),

with c_i(a) the trace of coordinate i at a, taken in Z/p^N. The series is
kept modulo p^N' and total T-degree M, and in s up to degree s_max.
Exponents come from Teichmüller traces in the Galois ring, so the Witt
length N is not bounded by the universal-polynomial cap.
"""

import logging
import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction

from sympy import ZZ
from sympy.polys.rings import ring

from algebra import CycloInt, FieldDesc, Place, get_field, padic_valuation_cyclo, vp
from errors import ConsistencyError, InvalidSpecError
from lfunction import character_exponent, check_feasible, l_polynomial
from tower import CharacterIndex, TowerSpec, character_locus
from witt import teichmuller_trace_table

_logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class Precision:
    """Target precision: digits N' (p-adic), t_degree M (total T-degree), s_max."""

    digits: int = 4
    t_degree: int = 8
    s_max: int = 16

    def guard(self, p: int) -> int:
        """v_p(s_max!), the digits lost dividing by m in the exponential."""
        return sum(self.s_max // p**i for i in range(1, self.s_max.bit_length() + 1))

    def work_digits(self, p: int) -> int:
        return self.digits + self.guard(p)

    def witt_length(self, p: int) -> int:
        extra, power = 0, 1
        while power < self.t_degree:
            power *= p
            extra += 1
        return self.work_digits(p) + extra


@dataclass(frozen=True)
class TruncatedSeries:
    """L(T, s) = sum_k c_k(T) s^k with c_k given as {T-exponent tuple: coefficient mod p^digits}."""

    p: int
    d: int
    precision: Precision
    coefficients: tuple[dict[tuple[int, ...], int], ...]

    def coeff(self, k: int) -> dict[tuple[int, ...], int]:
        return self.coefficients[k]

    def constant_terms(self) -> tuple[int, ...]:
        zero = (0,) * self.d
        return tuple(c.get(zero, 0) for c in self.coefficients)


@dataclass(frozen=True)
class SpecializationReport:
    exponents: tuple[int, ...]
    retained_precision: Fraction
    ok: bool
    mismatched_degrees: tuple[int, ...]
    l_value_valuation: Fraction | None = None
    l_value_agrees: bool | None = None


@dataclass(frozen=True)
class CongruenceReport:
    ok: bool
    mismatched_degrees: tuple[int, ...]
    expected: tuple[int, ...]


def _series_ring(d: int):
    R, *_ = ring([f"T{i + 1}" for i in range(d)], ZZ)
    return R


def _truncate(R, poly, M: int, P: int):
    return R({m: int(c) % P for m, c in poly.items() if sum(m) < M and int(c) % P})


def _exponent_counts(spec: TowerSpec, m: int, N: int) -> Counter:
    """Multiset of exponent tuples (c_1, ..., c_d) over U(F_{q^m})."""
    check_feasible(spec, m)
    F = FieldDesc(spec.p, spec.k, m).field
    tau = teichmuller_trace_table(spec.p, F.r, N)
    P = spec.p**N
    coords = spec.geometric_coords

    def exponents(values: list[list[int]]) -> tuple[int, ...]:
        return tuple(sum(spec.p**i * int(tau[v]) for i, v in enumerate(comps)) % P for comps in values)

    counts: Counter = Counter()
    done = bytearray(F.order)
    for a in F.elements():
        if done[a]:
            continue
        orbit, b = 0, a
        while True:
            done[b] = 1
            orbit += 1
            b = F.frobenius(b)
            if b == a:
                break
        values = [[f.eval(F, a) for f in coord[:N]] for coord in coords]
        if any(None in comps for comps in values):
            continue
        counts[exponents(values)] += orbit

    if Place.infinity() not in spec.ramified_places:
        values = [[f.value_at_infinity() for f in coord[:N]] for coord in coords]
        counts[exponents(values)] += 1
    return counts


def tadic_power_sum(spec: TowerSpec, m: int, precision: Precision, witt_length: int | None = None):
    """S_m(T) mod (p^work_digits, T^M) as a sympy polynomial over ZZ. Constant coordinates are left out."""
    p, M = spec.p, precision.t_degree
    N = precision.witt_length(p) if witt_length is None else witt_length
    P_work = p ** precision.work_digits(p)
    d = len(spec.geometric)
    R = _series_ring(d)
    monomials = [e for e in _monomials(d, M)]
    binomials: dict[int, list[int]] = {}

    def binom_row(c: int) -> list[int]:
        row = binomials.get(c)
        if row is None:
            row = [math.comb(c, a) % P_work for a in range(M)]
            binomials[c] = row
        return row

    terms: dict[tuple[int, ...], int] = {}
    for exps, count in _exponent_counts(spec, m, N).items():
        rows = [binom_row(c) for c in exps]
        for mono in monomials:
            value = count
            for row, a in zip(rows, mono):
                value *= row[a]
                if not value:
                    break
            if value:
                terms[mono] = (terms.get(mono, 0) + value) % P_work
    return R({mono: c for mono, c in terms.items() if c})


def _monomials(d: int, M: int):
    """Exponent tuples of total degree < M."""
    if d == 0:
        yield ()
        return
    for a in range(M):
        for rest in _monomials(d - 1, M - a):
            yield (a,) + rest


def tadic_l_series(spec: TowerSpec, precision: Precision | None = None, witt_length: int | None = None) -> TruncatedSeries:
    """L(T, s) up to s^s_max, reported mod (p^digits, T^M).

    There is one T variable per geometric coordinate. A constant coordinate
    gets no variable: the series is that of the geometric subtower over F_q(x).
    """
    precision = precision or Precision(digits=spec.precision_digits)
    check_feasible(spec, precision.s_max)
    p, M = spec.p, precision.t_degree
    A = precision.work_digits(p)
    P_work = p**A
    d = len(spec.geometric)
    R = _series_ring(d)
    _logger.info(
        "T-adic series: p=%d, N'=%d, M=%d, s_max=%d, Witt length %d",
        p, precision.digits, M, precision.s_max,
        precision.witt_length(p) if witt_length is None else witt_length,
    )
    sums = [R.zero]
    coeffs = [R.one]
    for k in range(1, precision.s_max + 1):
        sums.append(tadic_power_sum(spec, k, precision, witt_length))
        rhs = R.zero
        for i in range(1, k + 1):
            rhs += sums[i] * coeffs[k - i]
        rhs = _truncate(R, rhs, M, P_work)
        coeffs.append(_divide(R, rhs, k, p, P_work))

    P_out = p**precision.digits
    reported = tuple({m: int(c) % P_out for m, c in poly.items() if int(c) % P_out} for poly in coeffs)
    return TruncatedSeries(p, d, precision, reported)


def _divide(R, poly, k: int, p: int, modulus: int):
    """poly / k mod modulus, the p-part of k taken out exactly."""
    v = int(vp(k, p))
    unit = k // p**v
    inverse = pow(unit, -1, modulus)
    out = {}
    for m, c in poly.items():
        c = int(c)
        if c % p**v:
            raise ConsistencyError(f"T-adic coefficient not divisible by {p}^{v} at s^{k}: guard digits insufficient")
        value = (c // p**v) * inverse % modulus
        if value:
            out[m] = value
    return R(out)


# --- checks ---

def _correction_factor(spec: TowerSpec, chi: CharacterIndex) -> list[CycloInt]:
    """prod of (1 - chi(Frob_x) s^deg x) over ramified places of the tower outside the locus of chi."""
    p, j = spec.p, chi.j
    zero = CycloInt.from_int(p, j, 0)
    locus = character_locus(spec, chi)
    factor = [CycloInt.from_int(p, j, 1)]
    for place in spec.ramified_places:
        if place in locus:
            continue
        point = None if place.is_infinite else place.root(p)
        e = character_exponent(spec, chi, get_field(p, spec.k), point)
        if e is None:
            raise ConsistencyError(f"{chi.exponents} is ramified at {place.label} outside its locus")
        value = CycloInt.zeta(p, j, e)
        deg = place.degree
        padded = factor + [zero] * deg
        factor = [padded[i] - (value * padded[i - deg] if i >= deg else zero) for i in range(len(padded))]
    return factor


def _multiply(f: list[CycloInt], g: list[CycloInt]) -> list[CycloInt]:
    zero = CycloInt.from_int(f[0].p, f[0].level, 0)
    out = [zero] * (len(f) + len(g) - 1)
    for i, a in enumerate(f):
        for b_idx, b in enumerate(g):
            out[i + b_idx] = out[i + b_idx] + a * b
    return out


def _substitute(poly: dict[tuple[int, ...], int], chi: CharacterIndex, p: int) -> CycloInt:
    """Evaluate a T-polynomial at T_i = zeta^(u_i) - 1."""
    j = chi.j
    one = CycloInt.from_int(p, j, 1)
    points = [CycloInt.zeta(p, j, u) - one for u in chi.units]
    total = CycloInt.from_int(p, j, 0)
    for mono, c in poly.items():
        term = CycloInt.from_int(p, j, c)
        for t, a in zip(points, mono):
            for _ in range(a):
                term = term * t
        total = total + term
    return total


def specialize_check(spec: TowerSpec, chi: CharacterIndex, series: TruncatedSeries) -> SpecializationReport:
    """Compare L(T, s) at T = zeta - 1 with L(chi, s) times the Euler factors removed by U."""
    if chi.is_trivial():
        raise InvalidSpecError("specialize_check needs a nontrivial character")
    prec = series.precision
    p, j = spec.p, chi.j
    retained = min(Fraction(prec.digits), Fraction(prec.t_degree, (p - 1) * p ** (j - 1)))
    L = l_polynomial(spec, chi)
    expected = _multiply(list(L.coeffs), _correction_factor(spec, chi))
    zero = CycloInt.from_int(p, j, 0)

    mismatched = []
    specialized_total = zero
    for k in range(prec.s_max + 1):
        value = _substitute(series.coeff(k), chi, p)
        specialized_total = specialized_total + value
        target = expected[k] if k < len(expected) else zero
        if padic_valuation_cyclo(value - target) < retained:
            mismatched.append(k)

    l_val = agrees = None
    if len(expected) <= prec.s_max + 1:
        at_one = zero
        for c in expected:
            at_one = at_one + c
        l_val = padic_valuation_cyclo(at_one)
        if l_val < retained:
            agrees = padic_valuation_cyclo(specialized_total) == l_val
    return SpecializationReport(
        exponents=chi.exponents,
        retained_precision=retained,
        ok=not mismatched and agrees is not False,
        mismatched_degrees=tuple(mismatched),
        l_value_valuation=l_val,
        l_value_agrees=agrees,
    )


def _expected_mod_t(spec: TowerSpec, s_max: int) -> list[int]:
    """Zeta series of U: prod (1 - s^deg x) / ((1 - s)(1 - q s)), with P(K_0, s) = 1."""
    series = [1] + [0] * s_max
    for place in spec.ramified_places:
        deg = place.degree
        series = [series[i] - (series[i - deg] if i >= deg else 0) for i in range(s_max + 1)]
    for root in (1, spec.q):
        for i in range(1, s_max + 1):
            series[i] += root * series[i - 1]
    return series


def modT_congruence_check(spec: TowerSpec, series: TruncatedSeries) -> CongruenceReport:
    """L(0, s) must equal the zeta function of U modulo p^digits."""
    P = spec.p**series.precision.digits
    expected = tuple(c % P for c in _expected_mod_t(spec, series.precision.s_max))
    got = series.constant_terms()
    mismatched = tuple(k for k, (a, b) in enumerate(zip(got, expected)) if a % P != b)
    return CongruenceReport(not mismatched, mismatched, expected)


def series_to_json(series: TruncatedSeries) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "p": series.p,
        "variables": [f"T{i + 1}" for i in range(series.d)],
        "precision": {
            "digits": series.precision.digits,
            "t_degree": series.precision.t_degree,
            "s_max": series.precision.s_max,
        },
        "coefficients": [
            [{"exponents": list(m), "value": c} for m, c in sorted(poly.items())]
            for poly in series.coefficients
        ],
    }
