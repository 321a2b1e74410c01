"""Exact arithmetic foundations for the tower pipeline.

Finite fields GF(p^r) with a canonical modulus, polynomial helpers over
them, cyclotomic integers Z[zeta_{p^j}] with exact norms and p-adic
valuations, and Newton polygons.

Field elements are plain integers 0 .. p^r - 1 whose base-p digits are the
coefficients of the polynomial basis, lowest degree first. The prime field
sits inside every GF(p^r) as the integers 0 .. p-1.
"""

import functools
import logging
import math
import threading
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from sympy import Poly, cyclotomic_poly, divisors, factorint, isprime, mobius, multiplicity, symbols

from errors import ConsistencyError

_logger = logging.getLogger(__name__)

# Fields up to this order get log/antilog tables.
TABLE_LIMIT = 2**20

INF = math.inf

_X = symbols("x")


def vp(n: int, p: int) -> float | int:
    """p-adic valuation of an integer, INF for zero."""
    if n == 0:
        return INF
    return int(multiplicity(p, abs(n)))


class FiniteField:
    """GF(p^r) defined by a monic irreducible modulus over F_p."""

    def __init__(self, p: int, r: int, modulus: tuple[int, ...]):
        self.p = p
        self.r = r
        self.order = p**r
        self.modulus = modulus
        self.zero = 0
        self.one = 1
        self._mod_bits = sum(c << i for i, c in enumerate(modulus)) if p == 2 else 0
        self._tables: tuple[list[int], list[int]] | None = None
        self._primitive: int | None = None
        self._lock = threading.Lock()

    def __repr__(self) -> str:
        return f"GF({self.p}^{self.r})"

    def __reduce__(self):
        return (get_field, (self.p, self.r))

    def elements(self) -> range:
        return range(self.order)

    def digits(self, a: int) -> list[int]:
        out = []
        for _ in range(self.r):
            a, c = divmod(a, self.p)
            out.append(c)
        return out

    def from_digits(self, coeffs: Iterable[int]) -> int:
        value = 0
        for c in reversed(list(coeffs)):
            value = value * self.p + c % self.p
        return value

    def scalar(self, c: int) -> int:
        """Image of an integer in the prime field."""
        return c % self.p

    # --- additive structure ---

    def add(self, a: int, b: int) -> int:
        if self.p == 2:
            return a ^ b
        if self.r == 1:
            return (a + b) % self.p
        p = self.p
        out, scale = 0, 1
        while a or b:
            a, x = divmod(a, p)
            b, y = divmod(b, p)
            out += ((x + y) % p) * scale
            scale *= p
        return out

    def neg(self, a: int) -> int:
        if self.p == 2:
            return a
        if self.r == 1:
            return -a % self.p
        return self.from_digits(-c for c in self.digits(a))

    def sub(self, a: int, b: int) -> int:
        return self.add(a, self.neg(b))

    # --- multiplicative structure ---

    def tables(self) -> tuple[list[int], list[int]] | None:
        """(exp, log) tables for a fixed primitive element, built on first use."""
        if self.r == 1 or self.order > TABLE_LIMIT:
            return None
        if self._tables is None:
            with self._lock:
                if self._tables is None:
                    self._tables = self._build_tables()
        return self._tables

    def primitive_element(self) -> int:
        if self._primitive is None:
            q1 = self.order - 1
            primes = list(factorint(q1)) if q1 > 1 else []
            g = 1 if self.order == 2 else 2
            while not all(self._pow_slow(g, q1 // ell) != 1 for ell in primes):
                g += 1
            self._primitive = g
        return self._primitive

    def _build_tables(self) -> tuple[list[int], list[int]]:
        q1 = self.order - 1
        g = self.primitive_element()
        exp = [0] * q1
        log = [0] * self.order
        x = 1
        for i in range(q1):
            exp[i] = x
            log[x] = i
            x = self._mul_slow(x, g)
        _logger.debug("built log tables for %r (generator %d)", self, g)
        return exp, log

    def _mul_slow(self, a: int, b: int) -> int:
        if self.r == 1:
            return a * b % self.p
        if self.p == 2:
            r, mod = self.r, self._mod_bits
            res = 0
            while b:
                if b & 1:
                    res ^= a
                b >>= 1
                a <<= 1
                if (a >> r) & 1:
                    a ^= mod
            return res
        p, r, mod = self.p, self.r, self.modulus
        da, db = self.digits(a), self.digits(b)
        prod = [0] * (2 * r - 1)
        for i, x in enumerate(da):
            if x:
                for j, y in enumerate(db):
                    prod[i + j] += x * y
        for t in range(2 * r - 2, r - 1, -1):
            c = prod[t] % p
            if c:
                for i in range(r):
                    prod[t - r + i] -= c * mod[i]
            prod[t] = 0
        return self.from_digits(prod[:r])

    def _pow_slow(self, a: int, e: int) -> int:
        result = 1
        while e:
            if e & 1:
                result = self._mul_slow(result, a)
            a = self._mul_slow(a, a)
            e >>= 1
        return result

    def mul(self, a: int, b: int) -> int:
        if a == 0 or b == 0:
            return 0
        t = self.tables()
        if t is not None:
            exp, log = t
            return exp[(log[a] + log[b]) % (self.order - 1)]
        return self._mul_slow(a, b)

    def pow(self, a: int, e: int) -> int:
        if e == 0:
            return 1
        if a == 0:
            if e < 0:
                raise ZeroDivisionError("zero has no inverse in a finite field")
            return 0
        q1 = self.order - 1
        e %= q1
        t = self.tables()
        if t is not None:
            exp, log = t
            return exp[log[a] * e % q1]
        return self._pow_slow(a, e)

    def inv(self, a: int) -> int:
        if a == 0:
            raise ZeroDivisionError("zero has no inverse in a finite field")
        return self.pow(a, -1)

    def div(self, a: int, b: int) -> int:
        return self.mul(a, self.inv(b))

    def frobenius(self, a: int, times: int = 1) -> int:
        """a^(p^times)."""
        if a == 0:
            return 0
        return self.pow(a, pow(self.p, times, self.order - 1) or self.order - 1)

    def trace(self, a: int, sub_degree: int = 1) -> int:
        """Trace down to GF(p^sub_degree); sub_degree must divide r."""
        if self.r % sub_degree:
            raise ValueError(f"GF({self.p}^{sub_degree}) is not a subfield of {self!r}")
        total, x = 0, a
        for _ in range(self.r // sub_degree):
            total = self.add(total, x)
            x = self.frobenius(x, sub_degree)
        return total


# --- polynomials over a FiniteField (coefficient tuples, lowest degree first) ---
#
# Over the prime field these go through sympy's GF(p)[x]; over GF(p^r) with
# r > 1 the coefficients are packed field elements sympy cannot represent.

def _trim(f: list[int]) -> list[int]:
    while f and f[-1] == 0:
        f.pop()
    return f


def _gf_poly(F: FiniteField, f: Sequence[int]) -> Poly:
    return Poly(list(reversed(f)) or [0], _X, modulus=F.p)


def _gf_coeffs(F: FiniteField, P: Poly) -> list[int]:
    return _trim([int(c) % F.p for c in reversed(P.all_coeffs())])


def poly_mul(F: FiniteField, f: Sequence[int], g: Sequence[int]) -> list[int]:
    if not f or not g:
        return []
    if F.r == 1:
        return _gf_coeffs(F, _gf_poly(F, f) * _gf_poly(F, g))
    out = [0] * (len(f) + len(g) - 1)
    for i, a in enumerate(f):
        if a:
            for j, b in enumerate(g):
                if b:
                    out[i + j] = F.add(out[i + j], F.mul(a, b))
    return _trim(out)


def poly_divmod(F: FiniteField, f: Sequence[int], g: Sequence[int]) -> tuple[list[int], list[int]]:
    g = _trim(list(g))
    if not g:
        raise ZeroDivisionError("polynomial division by zero")
    if F.r == 1:
        quot, rem = _gf_poly(F, f).div(_gf_poly(F, g))
        return _gf_coeffs(F, quot), _gf_coeffs(F, rem)
    rem = _trim(list(f))
    if len(rem) < len(g):
        return [], rem
    lead_inv = F.inv(g[-1])
    quot = [0] * (len(rem) - len(g) + 1)
    while len(rem) >= len(g):
        shift = len(rem) - len(g)
        c = F.mul(rem[-1], lead_inv)
        quot[shift] = c
        for i, b in enumerate(g):
            rem[shift + i] = F.sub(rem[shift + i], F.mul(c, b))
        _trim(rem)
    return _trim(quot), rem


def poly_gcd(F: FiniteField, f: Sequence[int], g: Sequence[int]) -> list[int]:
    """Monic gcd."""
    if F.r == 1:
        return _gf_coeffs(F, _gf_poly(F, f).gcd(_gf_poly(F, g)))
    a, b = _trim(list(f)), _trim(list(g))
    while b:
        a, b = b, poly_divmod(F, a, b)[1]
    if not a:
        return []
    lead_inv = F.inv(a[-1])
    return [F.mul(c, lead_inv) for c in a]


def poly_powmod(F: FiniteField, base: Sequence[int], e: int, mod: Sequence[int]) -> list[int]:
    result = [1]
    base = poly_divmod(F, base, mod)[1]
    while e:
        if e & 1:
            result = poly_divmod(F, poly_mul(F, result, base), mod)[1]
        base = poly_divmod(F, poly_mul(F, base, base), mod)[1]
        e >>= 1
    return result


def poly_eval(F: FiniteField, f: Sequence[int], a: int) -> int:
    value = 0
    for c in reversed(f):
        value = F.add(F.mul(value, a), c)
    return value


def is_irreducible(F: FiniteField, f: Sequence[int]) -> bool:
    """Irreducibility over F; Ben-Or (no factor of degree <= deg/2) when F is not prime."""
    f = _trim(list(f))
    n = len(f) - 1
    if n < 1:
        return False
    if n == 1:
        return True
    if F.r == 1:
        return _gf_poly(F, f).is_irreducible
    h = [0, 1]
    for _ in range(n // 2):
        h = poly_powmod(F, h, F.order, f)
        diff = list(h) + [0] * max(0, 2 - len(h))
        diff[1] = F.sub(diff[1], 1)
        if len(poly_gcd(F, f, _trim(diff))) > 1:
            return False
    return True


@functools.lru_cache(maxsize=None)
def get_field(p: int, r: int) -> FiniteField:
    """GF(p^r) with the lexicographically smallest monic irreducible modulus."""
    if not isprime(p):
        raise ValueError(f"p must be prime, got {p}")
    if r < 1:
        raise ValueError(f"extension degree must be positive, got {r}")
    if r == 1:
        return FiniteField(p, 1, (0, 1))
    base = get_field(p, 1)
    for low in range(p**r):
        coeffs = []
        v = low
        for _ in range(r):
            v, c = divmod(v, p)
            coeffs.append(c)
        if coeffs[0] == 0:
            continue
        candidate = tuple(coeffs) + (1,)
        if is_irreducible(base, candidate):
            return FiniteField(p, r, candidate)
    raise ConsistencyError(f"no irreducible polynomial of degree {r} over F_{p}")


@dataclass(frozen=True)
class FieldDesc:
    """The field F_{q^m} with q = p^k, realised as GF(p^(k*m))."""

    p: int
    k: int
    m: int = 1

    @property
    def q(self) -> int:
        return self.p**self.k

    @property
    def degree(self) -> int:
        return self.k * self.m

    @property
    def order(self) -> int:
        return self.p ** (self.k * self.m)

    @property
    def field(self) -> FiniteField:
        return get_field(self.p, self.k * self.m)

    @property
    def modulus(self) -> tuple[int, ...]:
        return self.field.modulus


@functools.lru_cache(maxsize=None)
def embedding_root(p: int, k: int, m: int) -> int:
    """Smallest root in GF(p^(km)) of the modulus of GF(p^k)."""
    small, big = get_field(p, k), get_field(p, k * m)
    for a in big.elements():
        if poly_eval(big, small.modulus, a) == 0:
            return a
    raise ConsistencyError(f"modulus of GF({p}^{k}) has no root in GF({p}^{k * m})")


def embed(p: int, k: int, m: int, a: int) -> int:
    """Image of a in GF(p^k) inside GF(p^(km))."""
    small, big = get_field(p, k), get_field(p, k * m)
    return poly_eval(big, small.digits(a), embedding_root(p, k, m))


def irreducible_enumerate(p: int, k: int, max_deg: int) -> list[tuple[int, ...]]:
    """Monic irreducible polynomials over F_q, q = p^k, of degree 1..max_deg.

    Ordered by degree, then by the lower coefficients read as base-q digits.
    """
    F = get_field(p, k)
    q = F.order
    out: list[tuple[int, ...]] = []
    for deg in range(1, max_deg + 1):
        for low in range(q**deg):
            coeffs = []
            v = low
            for _ in range(deg):
                v, c = divmod(v, q)
                coeffs.append(c)
            candidate = tuple(coeffs) + (1,)
            if is_irreducible(F, candidate):
                out.append(candidate)
    return out


def mobius_count(q: int, n: int) -> int:
    """Number of monic irreducibles of degree n over F_q."""
    total = sum(int(mobius(d)) * q ** (n // d) for d in divisors(n))
    return total // n


# --- cyclotomic integers ---

def euler_phi(p: int, level: int) -> int:
    return 1 if level == 0 else (p - 1) * p ** (level - 1)


def _reduce_cyclotomic(p: int, level: int, coeffs: Iterable[int]) -> tuple[int, ...]:
    n = p**level
    folded = [0] * n
    for i, c in enumerate(coeffs):
        if c:
            folded[i % n] += c
    if level == 0:
        return (folded[0],)
    step = n // p
    phi = n - step
    for s in range(step):
        c = folded[phi + s]
        if c:
            for i in range(p - 1):
                folded[s + i * step] -= c
    return tuple(folded[:phi])


@dataclass(frozen=True)
class CycloInt:
    """Element of Z[zeta_{p^level}] in the power basis 1, zeta, ..., zeta^(phi-1)."""

    p: int
    level: int
    coeffs: tuple[int, ...]

    @classmethod
    def reduce(cls, p: int, level: int, coeffs: Iterable[int]) -> "CycloInt":
        """Reduce an arbitrary sum of zeta powers (coeffs indexed by exponent)."""
        return cls(p, level, _reduce_cyclotomic(p, level, coeffs))

    @classmethod
    def from_int(cls, p: int, level: int, value: int) -> "CycloInt":
        return cls(p, level, (value,) + (0,) * (euler_phi(p, level) - 1))

    @classmethod
    def zeta(cls, p: int, level: int, e: int = 1) -> "CycloInt":
        n = p**level
        powers = [0] * n
        powers[e % n] = 1
        return cls.reduce(p, level, powers)

    @property
    def phi(self) -> int:
        return euler_phi(self.p, self.level)

    def is_zero(self) -> bool:
        return not any(self.coeffs)

    def is_rational(self) -> bool:
        return not any(self.coeffs[1:])

    def _check(self, other: "CycloInt") -> None:
        if (self.p, self.level) != (other.p, other.level):
            raise ValueError(
                f"cyclotomic levels differ: {self.p}^{self.level} vs {other.p}^{other.level}"
            )

    def __add__(self, other: "CycloInt | int") -> "CycloInt":
        if isinstance(other, int):
            other = CycloInt.from_int(self.p, self.level, other)
        self._check(other)
        return CycloInt(self.p, self.level, tuple(a + b for a, b in zip(self.coeffs, other.coeffs)))

    __radd__ = __add__

    def __neg__(self) -> "CycloInt":
        return CycloInt(self.p, self.level, tuple(-a for a in self.coeffs))

    def __sub__(self, other: "CycloInt | int") -> "CycloInt":
        return self + (-other)

    def __rsub__(self, other: int) -> "CycloInt":
        return (-self) + other

    def __mul__(self, other: "CycloInt | int") -> "CycloInt":
        if isinstance(other, int):
            return CycloInt(self.p, self.level, tuple(a * other for a in self.coeffs))
        self._check(other)
        prod = [0] * (2 * self.phi - 1)
        for i, a in enumerate(self.coeffs):
            if a:
                for j, b in enumerate(other.coeffs):
                    if b:
                        prod[i + j] += a * b
        return CycloInt.reduce(self.p, self.level, prod)

    __rmul__ = __mul__

    def exact_div(self, k: int) -> "CycloInt":
        """Coefficientwise division; raises ConsistencyError if inexact."""
        if any(a % k for a in self.coeffs):
            raise ConsistencyError(f"{self} is not divisible by {k}")
        return CycloInt(self.p, self.level, tuple(a // k for a in self.coeffs))

    def galois(self, u: int) -> "CycloInt":
        """Image under zeta -> zeta^u."""
        n = self.p**self.level
        powers = [0] * n
        for i, a in enumerate(self.coeffs):
            if a:
                powers[i * u % n] += a
        return CycloInt.reduce(self.p, self.level, powers)

    def lift(self, level: int) -> "CycloInt":
        """Same number viewed in Z[zeta_{p^level}], level >= self.level."""
        if level < self.level:
            raise ValueError("cannot lower the cyclotomic level")
        n = self.p**level
        scale = self.p ** (level - self.level)
        powers = [0] * n
        for i, a in enumerate(self.coeffs):
            powers[i * scale] += a
        return CycloInt.reduce(self.p, level, powers)

    def __str__(self) -> str:
        terms = [f"{a}*z^{i}" if i else str(a) for i, a in enumerate(self.coeffs) if a]
        return " + ".join(terms) or "0"


def cyclo_norm(a: CycloInt) -> int:
    """Norm from Q(zeta_{p^j}) to Q, as the resultant Res(Phi_{p^j}, a)."""
    if a.level == 0:
        return a.coeffs[0]
    if a.is_zero():
        return 0
    if a.is_rational():
        return a.coeffs[0] ** a.phi
    phi_poly = Poly(cyclotomic_poly(a.p**a.level, _X), _X)
    a_poly = Poly(list(reversed(a.coeffs)), _X)
    return int(phi_poly.resultant(a_poly))


def padic_valuation_cyclo(a: CycloInt) -> Fraction | float:
    """v_p normalised so that v_p(p) = 1; INF for zero."""
    norm = cyclo_norm(a)
    if norm == 0:
        return INF
    return Fraction(vp(norm, a.p), a.phi)


# --- Newton polygons ---

@dataclass(frozen=True)
class NewtonPolygon:
    vertices: tuple[tuple[int, Fraction], ...]
    slopes: tuple[Fraction, ...]

    def multiplicity(self, slope: Fraction | int) -> int:
        return sum(1 for s in self.slopes if s == slope)


def newton_polygon(
    points: Iterable[tuple[int, Fraction | int | float]],
    q_normalizer: Fraction | int = 1,
) -> NewtonPolygon:
    """Lower convex hull of (index, valuation / q_normalizer).

    Points with infinite valuation are skipped; the index-0 point and the
    point of largest index must be finite.
    """
    pts = sorted(points)
    if not pts:
        raise ValueError("newton_polygon needs at least one point")
    if pts[0][0] != 0 or pts[0][1] == INF:
        raise ValueError("newton_polygon needs a finite point at index 0")
    if pts[-1][1] == INF:
        raise ValueError("newton_polygon endpoint has infinite valuation")
    finite = []
    for i, v in pts:
        if v == INF:
            continue
        if v < 0:
            raise ValueError(f"negative valuation {v} at index {i}")
        finite.append((i, Fraction(v) / Fraction(q_normalizer)))

    hull: list[tuple[int, Fraction]] = []
    for pt in finite:
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            # drop hull[-1] unless it lies strictly below the chord to pt
            if (y2 - y1) * (pt[0] - x1) >= (pt[1] - y1) * (x2 - x1):
                hull.pop()
            else:
                break
        hull.append(pt)

    slopes: list[Fraction] = []
    for (x1, y1), (x2, y2) in zip(hull, hull[1:]):
        slopes.extend([(y2 - y1) / (x2 - x1)] * (x2 - x1))
    return NewtonPolygon(tuple(hull), tuple(slopes))


# --- the function field F_p(x) and closed points of P^1 ---

def _monomial_label(c: int, i: int) -> str:
    if i == 0:
        return str(c)
    power = "x" if i == 1 else f"x^{i}"
    return power if c == 1 else f"{c}*{power}"


def poly_label(coeffs: Sequence[int]) -> str:
    terms = [_monomial_label(c, i) for i, c in reversed(list(enumerate(coeffs))) if c]
    return "+".join(terms) or "0"


@dataclass(frozen=True)
class Place:
    """Closed point of P^1 over F_p: a monic irreducible polynomial, or infinity (poly None)."""

    poly: tuple[int, ...] | None = None

    @classmethod
    def infinity(cls) -> "Place":
        return cls(None)

    @classmethod
    def rational(cls, a: int, p: int) -> "Place":
        return cls((-a % p, 1))

    @property
    def is_infinite(self) -> bool:
        return self.poly is None

    @property
    def degree(self) -> int:
        return 1 if self.poly is None else len(self.poly) - 1

    def root(self, p: int) -> int:
        """The F_p-point of a finite place of degree 1."""
        if self.poly is None or self.degree != 1:
            raise ValueError(f"{self.label} is not a finite rational place")
        return -self.poly[0] % p

    @property
    def sort_key(self) -> tuple:
        if self.poly is None:
            return (1, 0, ())
        return (0, self.degree, self.poly)

    @property
    def label(self) -> str:
        return "inf" if self.poly is None else poly_label(self.poly)

    def __str__(self) -> str:
        return self.label


def sorted_places(places: Iterable[Place]) -> tuple[Place, ...]:
    return tuple(sorted(places, key=lambda pl: pl.sort_key))


@dataclass(frozen=True)
class RatFunc:
    """num/den over F_p in lowest terms with den monic (coefficients lowest degree first)."""

    p: int
    num: tuple[int, ...]
    den: tuple[int, ...]

    @classmethod
    def from_coeffs(cls, p: int, num: Sequence[int], den: Sequence[int]) -> "RatFunc":
        F = get_field(p, 1)
        num = _trim([c % p for c in num])
        den = _trim([c % p for c in den])
        if not den:
            raise ZeroDivisionError("rational function with zero denominator")
        if not num:
            return cls(p, (), (1,))
        g = poly_gcd(F, num, den)
        num = poly_divmod(F, num, g)[0]
        den = poly_divmod(F, den, g)[0]
        lead_inv = F.inv(den[-1])
        return cls(p, tuple(F.mul(c, lead_inv) for c in num), tuple(F.mul(c, lead_inv) for c in den))

    @classmethod
    def constant(cls, p: int, c: int) -> "RatFunc":
        return cls.from_coeffs(p, [c], [1])

    def is_zero(self) -> bool:
        return not self.num

    def is_constant(self) -> bool:
        return self.den == (1,) and len(self.num) <= 1

    def eval(self, F: FiniteField, a: int) -> int | None:
        """Value at a in F, None at a pole."""
        d = poly_eval(F, self.den, a)
        if d == 0:
            return None
        return F.div(poly_eval(F, self.num, a), d)

    def value_at_infinity(self) -> int | None:
        if not self.num:
            return 0
        dn, dd = len(self.num) - 1, len(self.den) - 1
        if dn > dd:
            return None
        return self.num[-1] if dn == dd else 0

    def pole_order(self, place: Place) -> int:
        if not self.num:
            return 0
        if place.is_infinite:
            return max(0, len(self.num) - len(self.den))
        F = get_field(self.p, 1)
        order, rest = 0, list(self.den)
        while True:
            quot, rem = poly_divmod(F, rest, place.poly)
            if rem:
                return order
            order += 1
            rest = quot

    def poles(self) -> tuple[Place, ...]:
        places = []
        if len(self.den) > 1:
            x_poly = Poly(list(reversed(self.den)), _X, modulus=self.p)
            for factor, _ in x_poly.factor_list()[1]:
                coeffs = [int(c) % self.p for c in reversed(factor.all_coeffs())]
                lead_inv = pow(coeffs[-1], -1, self.p)
                places.append(Place(tuple(c * lead_inv % self.p for c in coeffs)))
        if self.pole_order(Place.infinity()):
            places.append(Place.infinity())
        return sorted_places(places)

    def __str__(self) -> str:
        if self.den == (1,):
            return poly_label(self.num)
        return f"({poly_label(self.num)})/({poly_label(self.den)})"
