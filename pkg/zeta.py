"""Per-level invariants of the tower: class-number valuation, p-rank, slopes, zeta.

The zeta numerator of K_n factors as the product of L(chi, s) over the
nontrivial characters of level n; grouping characters into Galois orbits
gives integer polynomials whose product is P(K_n, s).
"""

import logging
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from multiprocessing import get_context
from typing import Sequence

from sympy import Poly, symbols

from algebra import FieldDesc, Place, newton_polygon, sorted_places, vp
from errors import ConsistencyError, InvalidSpecError
from lfunction import (
    LPolynomial,
    check_feasible,
    interior_unit_root_constant,
    l_polynomial,
    l_value_valuation,
    orbit_product,
    unit_root_count,
)
from tower import Orbit, TowerSpec, characters, genus, level_orbits

_logger = logging.getLogger(__name__)

# Largest deg P(K_n, s) multiplied out explicitly.
ASSEMBLY_DEGREE_CAP = 2000

_s = symbols("s")


@dataclass(frozen=True)
class OrbitData:
    orbit: Orbit
    l_poly: LPolynomial
    product: tuple[int, ...]
    l_value_valuation: int
    unit_roots: int
    slopes: tuple[Fraction, ...]


@dataclass(frozen=True)
class ZetaLevel:
    n: int
    genus: int
    orbits: tuple[OrbitData, ...]
    vp_class_number: int
    p_rank: int
    slopes: tuple[Fraction, ...]
    zeta_numerator: tuple[int, ...] | None = None
    class_number: int | None = None
    seconds: float = 0.0


# --- integer polynomial helpers ---

def poly_multiply(f: Sequence[int], g: Sequence[int]) -> tuple[int, ...]:
    out = [0] * (len(f) + len(g) - 1)
    for i, a in enumerate(f):
        if a:
            for j, b in enumerate(g):
                out[i + j] += a * b
    return tuple(out)


def _power_sums_from_poly(H: Sequence[int], count: int) -> list[int]:
    """p_k = sum alpha^k for H(s) = prod (1 - alpha s), k = 1..count."""
    sums = [0]
    for k in range(1, count + 1):
        h_k = H[k] if k < len(H) else 0
        acc = -k * h_k - sum(sums[i] * (H[k - i] if k - i < len(H) else 0) for i in range(1, k))
        sums.append(acc)
    return sums


def _poly_from_power_sums(sums: Sequence[int], degree: int) -> tuple[int, ...]:
    coeffs = [1]
    for k in range(1, degree + 1):
        acc = -sum(sums[i] * coeffs[k - i] for i in range(1, k + 1))
        if acc % k:
            raise ConsistencyError(f"power sums do not define an integer polynomial (k={k})")
        coeffs.append(acc // k)
    return tuple(coeffs)


def adams(H: Sequence[int], e: int) -> tuple[int, ...]:
    """prod (1 - alpha^e s) for H(s) = prod (1 - alpha s)."""
    if H[0] != 1:
        raise ValueError("adams expects constant term 1")
    degree = len(H) - 1
    sums = _power_sums_from_poly(H, e * degree)
    return _poly_from_power_sums([sums[e * k] if k else 0 for k in range(degree + 1)], degree)


def roots_of_unity_product(H: Sequence[int], e: int) -> int:
    """prod over eta^e = 1 of H(eta), as Res(s^e - 1, H)."""
    unity = Poly(_s**e - 1, _s)
    target = Poly(list(reversed(H)), _s)
    if target.degree() <= 0:
        return int(H[0]) ** e
    return int(unity.resultant(target))


def _compare_sqrt(x: int, y: int, q: int) -> int:
    """Sign of x + y*sqrt(q)."""
    if x >= 0 and y >= 0:
        return 0 if x == 0 and y == 0 else 1
    if x <= 0 and y <= 0:
        return -1
    lhs, rhs = x * x, y * y * q
    if lhs == rhs:
        return 0
    return (1 if lhs > rhs else -1) * (1 if x > 0 else -1)


def _quadratic_power(q: int, g: int, sign: int) -> tuple[int, int]:
    """(A, B) with (q + 1 + sign*2*sqrt(q))^g = A + B*sqrt(q)."""
    A, B = 1, 0
    a, b = q + 1, 2 * sign
    for _ in range(g):
        A, B = A * a + B * b * q, A * b + B * a
    return A, B


def weil_bounds_hold(h: int, q: int, g: int) -> bool:
    """(sqrt q - 1)^(2g) <= h <= (sqrt q + 1)^(2g), exactly."""
    lo_a, lo_b = _quadratic_power(q, g, -1)
    hi_a, hi_b = _quadratic_power(q, g, 1)
    return _compare_sqrt(h - lo_a, -lo_b, q) >= 0 and _compare_sqrt(hi_a - h, hi_b, q) >= 0


# --- per-orbit and per-level computations ---

def compute_orbit(spec: TowerSpec, orbit: Orbit, verify: bool = True) -> OrbitData:
    """Everything the level assembly needs from one Galois orbit."""
    L = l_polynomial(spec, orbit.representative, verify=verify)
    return OrbitData(
        orbit=orbit,
        l_poly=L,
        product=orbit_product(L),
        l_value_valuation=l_value_valuation(L),
        unit_roots=unit_root_count(L, spec.k),
        slopes=L.slopes(spec.k),
    )


def _compute_orbit_job(args: tuple[TowerSpec, Orbit, bool]) -> OrbitData:
    return compute_orbit(*args)


def compute_orbits(spec: TowerSpec, orbits: list[Orbit], workers: int = 1, verify: bool = True) -> list[OrbitData]:
    """Orbit data in the order of orbits, optionally on a process pool."""
    jobs = [(spec, orbit, verify) for orbit in orbits]
    if workers <= 1 or len(jobs) <= 1:
        return [_compute_orbit_job(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers, mp_context=get_context("spawn")) as pool:
        return list(pool.map(_compute_orbit_job, jobs))


def zeta_level(
    spec: TowerSpec,
    n: int,
    workers: int = 1,
    verify: bool = True,
    degree_cap: int | None = None,
) -> ZetaLevel:
    """Assemble level n; P(K_n, s) is multiplied out when deg <= degree_cap."""
    if n == 0:
        # K_0 = F_q(x): genus 0, P = 1, h = 1
        return ZetaLevel(
            n=0, genus=0, orbits=(), vp_class_number=0, p_rank=0, slopes=(), zeta_numerator=(1,), class_number=1
        )
    cap = ASSEMBLY_DEGREE_CAP if degree_cap is None else degree_cap
    start = time.perf_counter()
    orbits = level_orbits(spec, n)
    _logger.info("level %d: %d orbits", n, len(orbits))
    data = compute_orbits(spec, orbits, workers=workers, verify=verify)

    g = genus(spec, n)
    total_degree = sum(od.orbit.size * od.l_poly.degree for od in data)
    if total_degree != 2 * g:
        raise ConsistencyError(f"level {n}: L-degrees sum to {total_degree}, expected 2g = {2 * g}")

    p_rank_value = sum(od.orbit.size * od.unit_roots for od in data)
    slopes = tuple(sorted(s for od in data for _ in range(od.orbit.size) for s in od.slopes))

    if spec.constant_coord is None:
        vp_h = sum(od.l_value_valuation for od in data)
    else:
        vp_h = _constant_valuation(spec, n, data)

    numerator = class_number = None
    if 2 * g <= cap:
        numerator = (1,)
        for od in data:
            numerator = poly_multiply(numerator, od.product)
        if spec.constant_coord is not None:
            numerator = adams(numerator, spec.p**n)
        class_number = sum(numerator)
        q_level = spec.q if spec.constant_coord is None else spec.q ** (spec.p**n)
        _check_assembled(spec, n, g, numerator, class_number, vp_h, p_rank_value, q_level)
    else:
        _logger.info("level %d: deg P = %d above the assembly cap, keeping orbit factors only", n, 2 * g)

    return ZetaLevel(
        n=n,
        genus=g,
        orbits=tuple(data),
        vp_class_number=vp_h,
        p_rank=p_rank_value,
        slopes=slopes,
        zeta_numerator=numerator,
        class_number=class_number,
        seconds=time.perf_counter() - start,
    )


def _check_assembled(
    spec: TowerSpec,
    n: int,
    g: int,
    numerator: tuple[int, ...],
    h: int,
    vp_h: int,
    p_rank_value: int,
    q_level: int,
) -> None:
    if len(numerator) - 1 != 2 * g:
        raise ConsistencyError(f"level {n}: deg P = {len(numerator) - 1}, expected {2 * g}")
    if vp(h, spec.p) != vp_h:
        raise ConsistencyError(f"level {n}: v_p(h) = {vp(h, spec.p)} from P(1), {vp_h} from L-values")
    if not weil_bounds_hold(h, q_level, g):
        raise ConsistencyError(f"level {n}: class number {h} violates the Weil bounds")
    k_level = spec.k if spec.constant_coord is None else spec.k * spec.p**n
    polygon = newton_polygon(((i, vp(c, spec.p)) for i, c in enumerate(numerator)), k_level)
    assembled_rank = polygon.multiplicity(0)
    if assembled_rank != p_rank_value:
        raise ConsistencyError(f"level {n}: p-rank {p_rank_value} from orbits, {assembled_rank} from P(K_n, s)")


def _constant_valuation(spec: TowerSpec, n: int, data: list[OrbitData]) -> int:
    e = spec.p**n
    total = 0
    for od in data:
        res = roots_of_unity_product(od.product, e)
        if res == 0:
            raise ConsistencyError(f"orbit {od.orbit.representative.exponents} vanishes at a {e}-th root of unity")
        total += vp(res, spec.p)
    return total


def class_number_valuation(spec: TowerSpec, n: int, workers: int = 1) -> int:
    """v_p(h(K_n)), 0 at the base level P^1."""
    if n == 0:
        return 0
    return zeta_level(spec, n, workers=workers, degree_cap=0).vp_class_number


def p_rank(spec: TowerSpec, n: int, workers: int = 1) -> int:
    """p-rank of the Jacobian of K_n."""
    if n == 0:
        return 0
    return zeta_level(spec, n, workers=workers, degree_cap=0).p_rank


def constant_tower_valuation(spec: TowerSpec, n: int, workers: int = 1) -> int:
    """v_p(h(K_n)) for a tower with a constant coordinate."""
    if spec.constant_coord is None:
        raise InvalidSpecError("constant_tower_valuation needs a constant coordinate")
    if n == 0:
        return 0
    orbits = level_orbits(spec, n)
    return _constant_valuation(spec, n, compute_orbits(spec, orbits, workers=workers))


def block_valuations(spec: TowerSpec, n: int, level: ZetaLevel | None = None) -> list[dict]:
    """Per ramification block S: |X*_{n,S}|, v_p of prod L(chi, 1), the unit-root constant."""
    level = level if level is not None else zeta_level(spec, n, degree_cap=0)
    by_locus: dict[frozenset[Place], list[OrbitData]] = {}
    for od in level.orbits:
        by_locus.setdefault(od.orbit.locus, []).append(od)
    rows = []
    for S, chars in characters(spec, n).items():
        if not S:
            continue
        ods = by_locus.get(S, [])
        rows.append(
            {
                "locus": [pl.label for pl in sorted_places(S)],
                "characters": len(chars),
                "vp_l_values": sum(od.l_value_valuation for od in ods),
                "unit_roots_per_character": interior_unit_root_constant(S),
            }
        )
    return rows


def slope_ranks(level: ZetaLevel, p: int) -> list[tuple[Fraction, Fraction, int]]:
    """(slope, p^n * slope, multiplicity) for the slopes of P(K_n, s)."""
    counts = Counter(level.slopes)
    return [(s, s * p**level.n, counts[s]) for s in sorted(counts)]


# --- point-count oracle for one-coordinate towers ---

def point_counts(spec: TowerSpec, m: int) -> int:
    """#K_1(F_{q^m}) by brute force over the Artin–Schreier curve y^p - y = f(x)."""
    if len(spec.geometric) != 1 or spec.constant_coord is not None:
        raise InvalidSpecError("the point-count oracle handles one-coordinate towers only")
    check_feasible(spec, m)
    f = spec.geometric_coords[0][0]
    F = FieldDesc(spec.p, spec.k, m).field
    image = Counter(F.sub(F.pow(y, spec.p), y) for y in F.elements())
    total = 0
    for a in F.elements():
        value = f.eval(F, a)
        if value is None:
            total += 1
        else:
            total += image[value]
    at_inf = f.value_at_infinity()
    if at_inf is None:
        total += 1
    else:
        total += image[at_inf]
    return total


def oracle_zeta(spec: TowerSpec) -> tuple[int, ...]:
    """P(K_1, s) from point counts N_1..N_g and the functional equation."""
    g = genus(spec, 1)
    q = spec.q
    sums = [0] + [point_counts(spec, m) - 1 - q**m for m in range(1, g + 1)]
    coeffs = [1]
    for k in range(1, g + 1):
        acc = sum(sums[i] * coeffs[k - i] for i in range(1, k + 1))
        if acc % k:
            raise ConsistencyError(f"point counts give a non-integral zeta coefficient at k={k}")
        coeffs.append(acc // k)
    for i in range(g + 1, 2 * g + 1):
        coeffs.append(q ** (i - g) * coeffs[2 * g - i])
    return tuple(coeffs)


def oracle_check(spec: TowerSpec, level: ZetaLevel | None = None) -> tuple[int, ...]:
    """Compare P(K_1, s) from the L-functions with the point-count oracle."""
    level = level if level is not None else zeta_level(spec, 1)
    expected = oracle_zeta(spec)
    if level.zeta_numerator != expected:
        raise ConsistencyError(f"P(K_1, s) = {level.zeta_numerator} but point counts give {expected}")
    return expected
