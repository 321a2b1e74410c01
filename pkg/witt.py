"""Truncated p-typical Witt vectors over F_p-algebras.

Sum and product of Witt vectors go through the universal polynomials
S_i, P_i, obtained by ghost-component inversion over the integers and
reduced mod p. They are cached in memory and on disk per (p, length, kind).

Two coefficient rings are used: finite fields (algebra.FiniteField) for
character values, and F_p(x) (RationalFunctions, sympy) for pole orders
and Swan conductors. Both expose add/mul/pow/scalar/zero/one.
"""

import functools
import json
import logging
import os
import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from sympy import QQ
from sympy.polys.domains import GF
from sympy.polys.fields import field as sympy_field
from sympy.polys.rings import ring

from algebra import FiniteField, Place, RatFunc, get_field
from errors import ConsistencyError, InfeasibleError

_logger = logging.getLogger(__name__)

DEFAULT_LENGTH_CAP = 5
CACHE_VERSION = 1

cache_root = Path(os.environ.get("ASW_IWASAWA_HOME", Path.home() / ".asw-iwasawa"))

# (coeff mod p, ((variable index, exponent), ...)); X_i is index i, Y_i is length + i
Term = tuple[int, tuple[tuple[int, int], ...]]

_tables: dict[tuple[int, int, str], tuple[tuple[Term, ...], ...]] = {}
_tables_lock = threading.Lock()


class RationalFunctions:
    """F_p(x) via sympy's rational function field, with FiniteField method names."""

    def __init__(self, p: int):
        self.p = p
        self.field, self.x = sympy_field("x", GF(p, symmetric=False))
        self.zero = self.field.zero
        self.one = self.field.one

    def __reduce__(self):
        return (get_rational_functions, (self.p,))

    def add(self, a, b):
        return a + b

    def sub(self, a, b):
        return a - b

    def neg(self, a):
        return -a

    def mul(self, a, b):
        return a * b

    def pow(self, a, e: int):
        return a**e

    def scalar(self, c: int):
        return self.one * (c % self.p)

    def from_ratfunc(self, f: RatFunc):
        x = self.x
        num = sum((c * x**i for i, c in enumerate(f.num) if c), self.zero)
        den = sum((c * x**i for i, c in enumerate(f.den) if c), self.zero)
        return num / den

    def to_ratfunc(self, a) -> RatFunc:
        def coeffs(poly) -> list[int]:
            out = [0] * (poly.degree() + 1 if poly else 0)
            for (deg,), c in poly.terms():
                out[deg] = int(c) % self.p
            return out

        return RatFunc.from_coeffs(self.p, coeffs(a.numer), coeffs(a.denom))


@functools.lru_cache(maxsize=None)
def get_rational_functions(p: int) -> RationalFunctions:
    return RationalFunctions(p)


@dataclass(frozen=True)
class WittVec:
    """(w_0, ..., w_{L-1}) with components in ring."""

    components: tuple
    ring: object = field(compare=False, repr=False)

    @property
    def length(self) -> int:
        return len(self.components)

    @property
    def p(self) -> int:
        return self.ring.p

    def truncate(self, length: int) -> "WittVec":
        return WittVec(self.components[:length], self.ring)

    def is_zero(self) -> bool:
        return all(c == self.ring.zero for c in self.components)


def zero_vector(ring_, length: int) -> WittVec:
    return WittVec((ring_.zero,) * length, ring_)


# --- universal polynomials ---

def get_witt_cache_path(p: int, length: int, kind: str, root: Path | None = None) -> Path:
    """Disk location of the cached universal polynomials."""
    root = cache_root if root is None else root
    return root / "witt" / f"witt-{p}-{length}-{kind}.json"


def _build_polynomials(p: int, length: int, kind: str) -> tuple[tuple[Term, ...], ...]:
    names = [f"X{i}" for i in range(length)] + [f"Y{i}" for i in range(length)]
    _, *gens = ring(names, QQ)
    X, Y = gens[:length], gens[length:]
    out = []
    if kind == "add":
        # individual summands are not integral, only their total
        for n in range(length):
            s_n = X[n] + Y[n]
            for i in range(n):
                e = p ** (n - i)
                s_n += (X[i] ** e + Y[i] ** e - out[i] ** e) * QQ(1, e)
            out.append(s_n)
    else:
        for n in range(length):
            x_ghost = sum(p**i * X[i] ** p ** (n - i) for i in range(n + 1))
            y_ghost = sum(p**i * Y[i] ** p ** (n - i) for i in range(n + 1))
            carry = sum((p**i * out[i] ** p ** (n - i) for i in range(n)), 0)
            out.append((x_ghost * y_ghost - carry) * QQ(1, p**n))

    tables = []
    for n, poly in enumerate(out):
        terms = []
        for monom, coeff in sorted(poly.terms()):
            if coeff.denominator != 1:
                raise ConsistencyError(f"Witt {kind} polynomial {n} for p={p} is not integral")
            c = int(coeff.numerator) % p
            if c:
                terms.append((c, tuple((i, e) for i, e in enumerate(monom) if e)))
        tables.append(tuple(terms))
    return tuple(tables)


def _load_polynomials(path: Path, p: int, length: int, kind: str):
    """Read a cache file; None if missing, corrupt or for other parameters."""
    if not path.exists():
        return None
    try:
        raw = json.loads(path.read_text())
    except (json.JSONDecodeError, OSError):
        return None
    if raw.get("version") != CACHE_VERSION or (raw.get("p"), raw.get("length"), raw.get("kind")) != (p, length, kind):
        return None
    try:
        return tuple(
            tuple((int(c), tuple((int(i), int(e)) for i, e in exps)) for c, exps in component)
            for component in raw["polynomials"]
        )
    except (KeyError, TypeError, ValueError):
        return None


def _save_polynomials(path: Path, p: int, length: int, kind: str, tables) -> None:
    payload = {
        "version": CACHE_VERSION,
        "p": p,
        "length": length,
        "kind": kind,
        "polynomials": [[[c, [list(ie) for ie in exps]] for c, exps in comp] for comp in tables],
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(f".tmp{os.getpid()}")
    tmp.write_text(json.dumps(payload))
    os.replace(tmp, path)


def witt_polynomials(p: int, length: int, kind: str = "add", length_cap: int = DEFAULT_LENGTH_CAP):
    """S_0..S_{L-1} (kind="add") or P_0..P_{L-1} (kind="mul") reduced mod p."""
    if kind not in ("add", "mul"):
        raise ValueError(f"unknown Witt operation {kind!r}")
    if length > length_cap:
        raise InfeasibleError(f"Witt length {length} exceeds the universal polynomial cap {length_cap}")
    key = (p, length, kind)
    cached = _tables.get(key)
    if cached is not None:
        return cached
    for (p2, length2, kind2), tables in list(_tables.items()):
        if (p2, kind2) == (p, kind) and length2 > length:
            _tables[key] = _reindex(tables[:length], length2, length)
            return _tables[key]
    with _tables_lock:
        if key not in _tables:
            path = get_witt_cache_path(p, length, kind)
            tables = _load_polynomials(path, p, length, kind)
            if tables is None:
                _logger.info("building Witt %s polynomials for p=%d, length %d", kind, p, length)
                tables = _build_polynomials(p, length, kind)
                try:
                    _save_polynomials(path, p, length, kind, tables)
                except OSError as e:
                    _logger.warning("could not write Witt polynomial cache %s: %s", path, e)
            _tables[key] = tables
        return _tables[key]


def _reindex(tables, old_length: int, new_length: int):
    """Renumber Y variables when slicing tables built for a longer length."""
    if old_length == new_length:
        return tables
    shift = old_length - new_length

    def move(i: int) -> int:
        return i if i < old_length else i - shift

    return tuple(
        tuple((c, tuple((move(i), e) for i, e in exps)) for c, exps in comp) for comp in tables
    )


def _evaluate(terms: tuple[Term, ...], values: list, R) -> object:
    if isinstance(R, FiniteField):
        t = R.tables()
        if t is not None:
            exp, log = t
            q1 = R.order - 1
            logs = [None if v == 0 else log[v] for v in values]
            total = 0
            for c, exps in terms:
                acc = 0
                for i, e in exps:
                    lv = logs[i]
                    if lv is None:
                        break
                    acc += lv * e
                else:
                    value = exp[acc % q1]
                    total = R.add(total, value if c == 1 else R.mul(c, value))
            return total
    total = R.zero
    for c, exps in terms:
        term = R.scalar(c)
        for i, e in exps:
            v = values[i]
            if v == R.zero:
                term = R.zero
                break
            term = R.mul(term, R.pow(v, e))
        total = R.add(total, term)
    return total


def witt_arith(u: WittVec, v: WittVec, which: str = "add") -> WittVec:
    """Sum or product in W_L of the common coefficient ring."""
    if u.length != v.length:
        raise ValueError(f"Witt vector lengths differ: {u.length} vs {v.length}")
    R = u.ring
    tables = witt_polynomials(R.p, u.length, which)
    values = list(u.components) + list(v.components)
    return WittVec(tuple(_evaluate(terms, values, R) for terms in tables), R)


def witt_scale(w: WittVec, e: int) -> WittVec:
    """[e]·w for an integer e >= 0, by a binary chain of Witt additions."""
    e %= w.p**w.length
    result, base = zero_vector(w.ring, w.length), w
    while e:
        if e & 1:
            result = witt_arith(result, base)
        e >>= 1
        if e:
            base = witt_arith(base, base)
    return result


def verschiebung(w: WittVec, s: int = 1) -> WittVec:
    """V^s shifts components right, keeping the length."""
    if s <= 0:
        return w
    return WittVec((w.ring.zero,) * s + w.components[: max(0, w.length - s)], w.ring)


def frobenius(w: WittVec, times: int = 1) -> WittVec:
    """Componentwise p^times power (finite field coefficients)."""
    R = w.ring
    return WittVec(tuple(R.frobenius(c, times) for c in w.components), R)


def witt_residue(w: WittVec) -> int:
    """The ring isomorphism W_n(F_p) -> Z/p^n.

    Computed as the last ghost component sum_i p^i x_i^(p^(n-1-i)) of integer
    lifts, reduced mod p^n.
    """
    p, n = w.p, w.length
    for c in w.components:
        if not isinstance(c, int) or not 0 <= c < p:
            raise ValueError(f"component {c!r} is not in F_{p}")
    modulus = p**n
    return sum(p**i * pow(x, p ** (n - 1 - i), modulus) for i, x in enumerate(w.components)) % modulus


def witt_frobenius_trace(w: WittVec) -> int:
    """Trace W_L(GF(p^r)) -> W_L(F_p) = Z/p^L as the Witt sum of all r Frobenius twists."""
    F = w.ring
    total, twist = w, w
    for _ in range(1, F.r):
        twist = frobenius(twist)
        total = witt_arith(total, twist)
    return witt_residue(total)


def witt_pole_order(w: WittVec, place: Place) -> tuple[int, ...]:
    """Pole order of every component at place, 0 where regular."""
    R = w.ring
    return tuple(R.to_ratfunc(c).pole_order(place) if c != R.zero else 0 for c in w.components)


def witt_from_coordinate(coord: tuple[RatFunc, ...], R: RationalFunctions, length: int) -> WittVec:
    """Witt vector over F_p(x) of a coordinate, padded with zeros or truncated to length."""
    comps = [R.from_ratfunc(f) for f in coord[:length]]
    comps += [R.zero] * (length - len(comps))
    return WittVec(tuple(comps), R)


# --- Teichmüller traces through the Galois ring GR(p^N, r) ---

def _gr_mul(a: list[int], b: list[int], mod: tuple[int, ...], P: int) -> list[int]:
    r = len(mod) - 1
    prod = [0] * (2 * r - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                prod[i + j] += x * y
    for t in range(2 * r - 2, r - 1, -1):
        c = prod[t] % P
        if c:
            for i in range(r):
                prod[t - r + i] -= c * mod[i]
    return [x % P for x in prod[:r]]


def _gr_pow(a: list[int], e: int, mod: tuple[int, ...], P: int) -> list[int]:
    r = len(mod) - 1
    result = [1] + [0] * (r - 1)
    while e:
        if e & 1:
            result = _gr_mul(result, a, mod, P)
        a = _gr_mul(a, a, mod, P)
        e >>= 1
    return result


def _root_power_sums(mod: tuple[int, ...], count: int) -> list[int]:
    """Traces of X^k, k < count, for the monic lift mod (Newton's identities)."""
    r = len(mod) - 1
    s = [r]
    for k in range(1, count):
        acc = sum(mod[r - i] * s[k - i] for i in range(1, min(k - 1, r) + 1))
        if k <= r:
            acc += k * mod[r - k]
        s.append(-acc)
    return s


@functools.lru_cache(maxsize=64)
def teichmuller_trace_table(p: int, r: int, N: int) -> np.ndarray:
    """tau[b] = Tr(Teichmüller(b)) mod p^N for every b in GF(p^r).

    The trace of a Witt vector (w_0, ..., w_{N-1}) over GF(p^r) is then
    sum_i p^i tau[w_i] mod p^N.
    """
    F = get_field(p, r)
    P = p**N
    Q = F.order
    mod = F.modulus
    gen = F.primitive_element()

    t = [c for c in F.digits(gen)]
    for _ in range(r * (N - 1)):
        t = _gr_pow(t, p, mod, P)
    one = [1] + [0] * (r - 1)
    if _gr_pow(t, Q - 1, mod, P) != one:
        raise ConsistencyError(f"Teichmüller lift in GR({p}^{N}, {r}) has the wrong order")

    s = _root_power_sums(mod, 2 * r - 1)
    dtype = np.int64 if r * P * P < 2**62 else object
    gram = np.array([[s[i + j] % P for j in range(r)] for i in range(r)], dtype=dtype)

    count = Q - 1
    block = int(np.ceil(np.sqrt(count)))
    columns, x = [], one
    for _ in range(block):
        columns.append(x)
        x = _gr_mul(x, t, mod, P)
    step = x
    rows, y = [], one
    for _ in range(-(-count // block)):
        rows.append(y)
        y = _gr_mul(y, step, mod, P)
    V = np.array(columns, dtype=dtype).T
    B = np.array(rows, dtype=dtype)
    traces = ((B @ gram) % P @ V % P).reshape(-1)[:count]

    tables = F.tables()
    if tables is not None:
        powers = tables[0]
    else:
        powers, x = [], 1
        for _ in range(count):
            powers.append(x)
            x = F.mul(x, gen)
    tau = np.zeros(Q, dtype=np.int64)
    tau[np.array(powers, dtype=np.int64)] = np.array(traces, dtype=np.int64)
    tau.setflags(write=False)
    return tau


def witt_trace_closed_form(w: WittVec) -> int:
    """Same value as witt_frobenius_trace, from Teichmüller trace tables."""
    F = w.ring
    tau = teichmuller_trace_table(F.p, F.r, w.length)
    P = F.p**w.length
    return sum(F.p**i * int(tau[c]) for i, c in enumerate(w.components)) % P
