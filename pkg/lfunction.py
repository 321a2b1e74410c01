"""Character sums and L-polynomials of tower characters.

For a character chi of exact order p^j,

    S_m(chi) = sum over P^1(F_{q^m}) minus the locus of chi of zeta^(Tr w_chi(P))

and L(chi, s) = sum c_k s^k follows from k c_k = sum_{i<=k} S_i c_{k-i}.
Traces of each coordinate are computed once per (coordinate, m, length)
and shared by every character of the level.
"""

import functools
import logging
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from algebra import (
    CycloInt,
    FieldDesc,
    Place,
    embed,
    get_field,
    irreducible_enumerate,
    newton_polygon,
    padic_valuation_cyclo,
    poly_eval,
    cyclo_norm,
    vp,
)
from errors import ConsistencyError, InfeasibleError
from tower import CharacterIndex, Orbit, TowerSpec, character_locus, l_degree
from witt import WittVec, witt_frobenius_trace

_logger = logging.getLogger(__name__)

# Largest field size q^m enumerated by the character-sum kernel.
FEASIBILITY_BOUND = 2**24


@dataclass(frozen=True)
class TraceTable:
    """Trace mod p^length of one coordinate at every element of F_{q^m} (-1 at poles)."""

    values: np.ndarray
    infinity: int | None


@dataclass(frozen=True)
class PowerSum:
    m: int
    value: CycloInt


@dataclass(frozen=True)
class LPolynomial:
    character: CharacterIndex
    coeffs: tuple[CycloInt, ...]
    locus: frozenset[Place]

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def p(self) -> int:
        return self.character.p

    def value_at_one(self) -> CycloInt:
        total = self.coeffs[0]
        for c in self.coeffs[1:]:
            total = total + c
        return total

    def valuations(self) -> list[Fraction | float]:
        return [padic_valuation_cyclo(c) for c in self.coeffs]

    def slopes(self, k: int = 1) -> tuple[Fraction, ...]:
        """q-adic slopes of the reciprocal roots (v_q = v_p / k)."""
        return newton_polygon(enumerate(self.valuations()), k).slopes

    def conjugate(self, u: int) -> "LPolynomial":
        return LPolynomial(self.character.conjugate(u), tuple(c.galois(u) for c in self.coeffs), self.locus)

    def coefficient_lists(self) -> list[list[int]]:
        return [list(c.coeffs) for c in self.coeffs]


def check_feasible(spec: TowerSpec, m: int, bound: int | None = None) -> None:
    bound = FEASIBILITY_BOUND if bound is None else bound
    if spec.q**m > bound:
        raise InfeasibleError(f"q^m = {spec.q}^{m} exceeds the enumeration bound {bound}")


@functools.lru_cache(maxsize=512)
def coordinate_traces(spec: TowerSpec, coord_index: int, m: int, length: int) -> TraceTable:
    """Tr_{F_{q^m}/F_p} of coordinate coord_index, as an element of Z/p^length.

    Coordinates have F_p coefficients, so a Frobenius orbit shares one value
    and is evaluated once.
    """
    check_feasible(spec, m)
    F = FieldDesc(spec.p, spec.k, m).field
    coord = list(spec.coords[coord_index][:length])
    Q = F.order
    values = np.full(Q, -1, dtype=np.int64)
    done = bytearray(Q)
    for a in range(Q):
        if done[a]:
            continue
        comps = [f.eval(F, a) for f in coord]
        if None in comps:
            trace = -1
        else:
            comps += [0] * (length - len(comps))
            trace = witt_frobenius_trace(WittVec(tuple(comps), F))
        b = a
        while True:
            values[b] = trace
            done[b] = 1
            b = F.frobenius(b)
            if b == a:
                break

    at_inf = [f.value_at_infinity() for f in coord]
    infinity = None
    if None not in at_inf:
        at_inf += [0] * (length - len(at_inf))
        infinity = witt_frobenius_trace(WittVec(tuple(at_inf), F))
    _logger.debug("traces of coordinate %d over F_{%d^%d} at length %d", coord_index, spec.q, m, length)
    return TraceTable(values, infinity)


def power_sum(spec: TowerSpec, chi: CharacterIndex, m: int) -> PowerSum:
    """S_m(chi) in Z[zeta_{p^j}], j the exact order exponent of chi."""
    j = chi.j
    P = spec.p**j
    if j == 0:
        raise ValueError("power sums are defined for nontrivial characters")
    Q = spec.q**m
    exponent = np.zeros(Q, dtype=np.int64)
    mask = np.ones(Q, dtype=bool)
    at_inf = 0
    for coord_index, u in zip(spec.geometric, chi.units):
        u %= P
        if not u:
            continue
        table = coordinate_traces(spec, coord_index, m, chi.level)
        mask &= table.values >= 0
        exponent = (exponent + u * (table.values % P)) % P
        if table.infinity is not None:
            at_inf += u * table.infinity
    counts = np.bincount(exponent[mask], minlength=P).tolist()
    if Place.infinity() not in character_locus(spec, chi):
        counts[at_inf % P] += 1
    return PowerSum(m, CycloInt.reduce(spec.p, j, counts))


def power_sum_from_closed_points(spec: TowerSpec, chi: CharacterIndex, m: int) -> CycloInt:
    """S_m(chi) from the Euler product: sum over closed points x with deg x | m."""
    p, k, j = spec.p, spec.k, chi.j
    P = p**j
    counts = [0] * P
    for pi in irreducible_enumerate(p, k, m):
        delta = len(pi) - 1
        if m % delta:
            continue
        F = get_field(p, k * delta)
        lifted = [embed(p, k, delta, c) for c in pi]
        root = next(a for a in F.elements() if poly_eval(F, lifted, a) == 0)
        e = character_exponent(spec, chi, F, root)
        if e is not None:
            counts[e * (m // delta) % P] += delta
    e = character_exponent(spec, chi, get_field(p, k), None)
    if e is not None:
        counts[e * m % P] += 1
    return CycloInt.reduce(p, j, counts)


def character_exponent(spec: TowerSpec, chi: CharacterIndex, F, a: int | None) -> int | None:
    """sum_i u_i Tr(w_i(a)) mod p^j over the residue field F; a None is infinity."""
    P = spec.p**chi.j
    total = 0
    for coord_index, u in zip(spec.geometric, chi.units):
        if not u % P:
            continue
        coord = spec.coords[coord_index][: chi.j]
        comps = [f.value_at_infinity() if a is None else f.eval(F, a) for f in coord]
        if None in comps:
            return None
        comps += [0] * (chi.j - len(comps))
        total += u * witt_frobenius_trace(WittVec(tuple(comps), F))
    return total % P


def _newton_step(sums: list[CycloInt], coeffs: list[CycloInt], k: int) -> CycloInt:
    acc = sums[1] * coeffs[k - 1]
    for i in range(2, k + 1):
        acc = acc + sums[i] * coeffs[k - i]
    return acc


def l_polynomial(spec: TowerSpec, chi: CharacterIndex, verify: bool = True) -> LPolynomial:
    """L(chi, s) with coefficients in Z[zeta_{p^j}], checked against S_{D+1}."""
    D = l_degree(spec, chi)
    if D < 0:
        raise ConsistencyError(f"negative L-degree {D} for {chi.exponents}")
    check_feasible(spec, D)
    one = CycloInt.from_int(spec.p, chi.j, 1)
    sums: list[CycloInt] = [one]
    coeffs: list[CycloInt] = [one]
    for k in range(1, D + 1):
        sums.append(power_sum(spec, chi, k).value)
        rhs = _newton_step(sums, coeffs, k)
        try:
            coeffs.append(rhs.exact_div(k))
        except ConsistencyError as e:
            raise ConsistencyError(f"Newton identity for {chi.exponents} failed at k={k}: {e}") from e

    if verify:
        if spec.q ** (D + 1) <= FEASIBILITY_BOUND:
            direct = power_sum(spec, chi, D + 1).value
            # c_{D+1} = 0 forces S_{D+1} = -sum_{i<=D} S_i c_{D+1-i}
            predicted = CycloInt.from_int(spec.p, chi.j, 0)
            for i in range(1, D + 1):
                predicted = predicted - sums[i] * coeffs[D + 1 - i]
            if predicted != direct:
                raise ConsistencyError(
                    f"S_{D + 1} check failed for {chi.exponents}: predicted {predicted}, direct {direct}"
                )
        else:
            _logger.warning("skipping S_%d check for %s: beyond the enumeration bound", D + 1, chi.exponents)
    return LPolynomial(chi, tuple(coeffs), character_locus(spec, chi))


def unit_root_count(L: LPolynomial, k: int = 1) -> int:
    """Number of slope-0 reciprocal roots."""
    return sum(1 for s in L.slopes(k) if s == 0)


def l_value_valuation(L: LPolynomial) -> int:
    """v_p of the product of L(chi', 1) over the Galois orbit of chi."""
    norm = cyclo_norm(L.value_at_one())
    if norm == 0:
        raise ConsistencyError(f"L({L.character.exponents}, 1) vanishes")
    return int(vp(norm, L.p))


def orbit_l_value_valuation(spec: TowerSpec, orbit: Orbit) -> int:
    return l_value_valuation(l_polynomial(spec, orbit.representative))


def interior_unit_root_constant(locus: frozenset[Place]) -> int:
    """Predicted unit-root count r_p(P^1) - 1 + sum deg x for interior characters on locus."""
    return -1 + sum(pl.degree for pl in locus)


def orbit_product(L: LPolynomial) -> tuple[int, ...]:
    """prod over Galois conjugates of L(chi', s): an integer polynomial."""
    j = L.character.j
    units = [u for u in range(1, L.p**j) if u % L.p]
    total = [CycloInt.from_int(L.p, j, 1)]
    for u in units:
        conj = L.conjugate(u).coeffs
        prod = [CycloInt.from_int(L.p, j, 0)] * (len(total) + len(conj) - 1)
        for a_idx, a in enumerate(total):
            if a.is_zero():
                continue
            for b_idx, b in enumerate(conj):
                prod[a_idx + b_idx] = prod[a_idx + b_idx] + a * b
        total = prod
    out = []
    for c in total:
        if not c.is_rational():
            raise ConsistencyError(f"orbit product of {L.character.exponents} is not rational")
        out.append(c.coeffs[0])
    return tuple(out)
