"""Z_p^d towers over F_q(x): description files, characters, conductors, genus.

A tower is given by d coordinates, each a truncated Witt vector of rational
functions with integer coefficients read mod p. Towers are loaded from JSON
files; a handful ship in towers/ and can be referred to by name.
"""

import functools
import hashlib
import json
import logging
import re
from dataclasses import dataclass, field, replace
from itertools import product
from pathlib import Path

from sympy import Poly, fraction, isprime, symbols, together
from sympy.parsing.sympy_parser import (
    convert_xor,
    implicit_multiplication,
    parse_expr,
    standard_transformations,
)

from algebra import Place, RatFunc, sorted_places, vp
from errors import ConsistencyError, InvalidSpecError
from witt import (
    DEFAULT_LENGTH_CAP,
    WittVec,
    get_rational_functions,
    verschiebung,
    witt_arith,
    witt_from_coordinate,
    witt_pole_order,
    witt_scale,
    zero_vector,
)

_logger = logging.getLogger(__name__)

TOWERS_DIR = Path(__file__).parent / "towers"

_BUNDLED: dict[str, Path] | None = None

_x = symbols("x")
_ALLOWED = re.compile(r"^[0-9x+\-*/^() ]+$")
_TRANSFORMATIONS = standard_transformations + (implicit_multiplication, convert_xor)


@dataclass(frozen=True)
class TowerSpec:
    p: int
    k: int
    coords: tuple[tuple[RatFunc, ...], ...]
    constant_coord: int | None = None
    n_max: int = 3
    precision_digits: int = 4
    name: str = "tower"
    # filled in by tower_validate: poles of the first component, per coordinate
    ram_loci: tuple[frozenset[Place], ...] = field(default=(), compare=False)

    @property
    def q(self) -> int:
        return self.p**self.k

    @property
    def d(self) -> int:
        return len(self.coords)

    @property
    def geometric(self) -> tuple[int, ...]:
        """Indices of the non-constant coordinates."""
        return tuple(i for i in range(self.d) if i != self.constant_coord)

    @property
    def geometric_coords(self) -> tuple[tuple[RatFunc, ...], ...]:
        return tuple(self.coords[i] for i in self.geometric)

    @property
    def geometric_loci(self) -> tuple[frozenset[Place], ...]:
        return tuple(self.ram_loci[i] for i in self.geometric)

    @property
    def ramified_places(self) -> tuple[Place, ...]:
        """P - U: every place where some geometric coordinate ramifies."""
        return sorted_places(set().union(*self.geometric_loci))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "p": self.p,
            "k": self.k,
            "d": self.d,
            "coords": [[str(f) for f in coord] for coord in self.coords],
            "constant_coord": self.constant_coord,
            "n_max": self.n_max,
            "precision_digits": self.precision_digits,
        }

    @property
    def digest(self) -> str:
        """Content address of the field data; name, n_max and precision are not part of it."""
        data = {
            "p": self.p,
            "k": self.k,
            "coords": [[str(f) for f in coord] for coord in self.coords],
            "constant_coord": self.constant_coord,
        }
        canonical = json.dumps(data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()[:16]


@dataclass(frozen=True, order=True)
class CharacterIndex:
    """chi(Frob) = zeta_{p^level}^(sum_i exponents_i * c_i) over the geometric coordinates."""

    exponents: tuple[int, ...]
    level: int
    p: int

    @property
    def j(self) -> int:
        """Exact order is p^j."""
        return max((self.level - vp(e, self.p) for e in self.exponents if e), default=0)

    @property
    def order(self) -> int:
        return self.p**self.j

    @property
    def units(self) -> tuple[int, ...]:
        """u_i with e_i = p^(level - j) u_i."""
        shift = self.p ** (self.level - self.j)
        return tuple(e // shift for e in self.exponents)

    def is_trivial(self) -> bool:
        return not any(self.exponents)

    def conjugate(self, u: int) -> "CharacterIndex":
        modulus = self.p**self.level
        return CharacterIndex(tuple(e * u % modulus for e in self.exponents), self.level, self.p)


@dataclass(frozen=True)
class Orbit:
    """Galois orbit of characters of exact order p^j under (Z/p^j)^x."""

    representative: CharacterIndex
    members: tuple[CharacterIndex, ...]
    locus: frozenset[Place]

    @property
    def size(self) -> int:
        return len(self.members)

    @property
    def j(self) -> int:
        return self.representative.j


# --- description files ---

def parse_rational(text: str, p: int) -> RatFunc:
    """Parse an integer-coefficient rational function in x and reduce it mod p."""
    if not isinstance(text, str) or not text.strip() or not _ALLOWED.match(text):
        raise InvalidSpecError(f"Invalid rational function {text!r}: use integers, x, + - * / ^ and parentheses")
    try:
        expr = parse_expr(text, local_dict={"x": _x}, transformations=_TRANSFORMATIONS)
    except Exception as e:
        raise InvalidSpecError(f"Invalid rational function {text!r}: {e}") from e
    if expr.free_symbols - {_x}:
        raise InvalidSpecError(f"Invalid rational function {text!r}: only the variable x is allowed")
    num, den = fraction(together(expr))
    try:
        num_coeffs = [int(c) for c in reversed(Poly(num, _x, domain="ZZ").all_coeffs())]
        den_coeffs = [int(c) for c in reversed(Poly(den, _x, domain="ZZ").all_coeffs())]
    except Exception as e:
        raise InvalidSpecError(f"Invalid rational function {text!r}: not a quotient of integer polynomials") from e
    try:
        return RatFunc.from_coeffs(p, num_coeffs, den_coeffs)
    except ZeroDivisionError as e:
        raise InvalidSpecError(f"Invalid rational function {text!r}: denominator vanishes mod {p}") from e


def tower_from_dict(data: dict) -> TowerSpec:
    """Build and validate a tower from its JSON form."""
    if not isinstance(data, dict):
        raise InvalidSpecError("Tower description must be a JSON object")
    # "coordinates" and "constant_coordinate" are accepted as older spellings
    coordinates = data.get("coords", data.get("coordinates"))
    try:
        p = int(data["p"])
    except (KeyError, TypeError, ValueError) as e:
        raise InvalidSpecError(f"Tower description needs 'p' and 'coords': {e}") from e
    if coordinates is None:
        raise InvalidSpecError("Tower description needs 'p' and 'coords': 'coords' is missing")
    if not isprime(p):
        raise InvalidSpecError(f"p must be prime, got {p}")
    if not isinstance(coordinates, list) or not all(isinstance(c, list) and c for c in coordinates):
        raise InvalidSpecError("'coords' must be a list of non-empty lists of strings")
    try:
        k = int(data.get("k", 1))
        d = int(data.get("d", len(coordinates)))
        n_max = int(data.get("n_max", 3))
        digits = int(data.get("precision_digits", 4))
    except (TypeError, ValueError) as e:
        raise InvalidSpecError(f"Invalid numeric field: {e}") from e
    if d != len(coordinates):
        raise InvalidSpecError(f"d = {d} but {len(coordinates)} coordinates are given")
    constant = data.get("constant_coord", data.get("constant_coordinate"))
    spec = TowerSpec(
        p=p,
        k=k,
        coords=tuple(tuple(parse_rational(s, p) for s in coord) for coord in coordinates),
        constant_coord=None if constant is None else int(constant),
        n_max=n_max,
        precision_digits=digits,
        name=str(data.get("name", "tower")),
    )
    return tower_validate(spec)


def _bundled_towers() -> dict[str, Path]:
    global _BUNDLED
    if _BUNDLED is None:
        _BUNDLED = {path.stem: path for path in sorted(TOWERS_DIR.glob("*.json"))}
    return _BUNDLED


def bundled_tower_names() -> list[str]:
    return list(_bundled_towers())


def build_spec_error(source: str) -> str:
    """Helpful message for an unknown tower file or name."""
    names = ", ".join(bundled_tower_names()) or "none"
    return f"No tower file or bundled tower named '{source}'. Bundled towers: {names}."


def load_tower(source: str | Path) -> TowerSpec:
    """Load a tower from a JSON file path or the name of a bundled tower."""
    path = Path(source)
    if not path.exists():
        path = _bundled_towers().get(str(source))
        if path is None:
            raise InvalidSpecError(build_spec_error(str(source)))
    try:
        data = json.loads(path.read_text())
    except (json.JSONDecodeError, OSError) as e:
        raise InvalidSpecError(f"Could not read tower file {path}: {e}") from e
    spec = tower_from_dict(data)
    _logger.info("loaded tower %s (p=%d, q=%d, d=%d)", spec.name, spec.p, spec.q, spec.d)
    return spec


# --- validation ---

def tower_validate(spec: TowerSpec) -> TowerSpec:
    """Check the ASW data and attach the ramification loci."""
    p = spec.p
    if spec.k < 1:
        raise InvalidSpecError(f"k must be positive, got {spec.k}")
    if spec.d == 0:
        raise InvalidSpecError("Tower needs at least one coordinate")
    if not 1 <= spec.n_max <= DEFAULT_LENGTH_CAP:
        raise InvalidSpecError(f"n_max must lie in 1..{DEFAULT_LENGTH_CAP}, got {spec.n_max}")
    if spec.precision_digits < 1:
        raise InvalidSpecError("precision_digits must be positive")

    if spec.constant_coord is not None:
        if not 0 <= spec.constant_coord < spec.d:
            raise InvalidSpecError(f"constant_coord {spec.constant_coord} out of range")
        coord = spec.coords[spec.constant_coord]
        if not coord[0].is_constant() or any(not f.is_zero() for f in coord[1:]):
            raise InvalidSpecError("The constant coordinate must be a single constant")
        c = coord[0].num[0] if coord[0].num else 0
        if (spec.k * c) % p == 0:
            raise InvalidSpecError(f"Constant coordinate {c} has zero trace to F_{p}: the extension is trivial")
    if not spec.geometric:
        raise InvalidSpecError("Tower has no geometric (non-constant) coordinate")

    loci = []
    for i, coord in enumerate(spec.coords):
        if i == spec.constant_coord:
            loci.append(frozenset())
            continue
        base_poles = set(coord[0].poles())
        if not base_poles:
            raise InvalidSpecError(
                f"Coordinate {i} has an empty ramification locus; mark it as constant_coord if intended"
            )
        for c_idx, f in enumerate(coord):
            poles = f.poles()
            for place in poles:
                if place.degree != 1:
                    raise InvalidSpecError(
                        f"Coordinate {i} component {c_idx} has a pole at {place.label}; only rational places are supported"
                    )
                if place not in base_poles:
                    raise InvalidSpecError(
                        f"Coordinate {i} component {c_idx} has a pole at {place.label} outside the locus of its first component"
                    )
                if f.pole_order(place) % p == 0:
                    raise InvalidSpecError(
                        f"Coordinate {i} component {c_idx} is not reduced: pole order at {place.label} divisible by {p}"
                    )
        loci.append(frozenset(base_poles))
    validated = replace(spec, ram_loci=tuple(loci))
    _check_independent(validated)
    return validated


def _check_independent(spec: TowerSpec) -> None:
    """Every nonzero F_p-combination of first components must stay ramified."""
    R = get_rational_functions(spec.p)
    firsts = [R.from_ratfunc(coord[0]) for coord in spec.geometric_coords]
    for u in product(range(spec.p), repeat=len(firsts)):
        nonzero = [c for c in u if c]
        if not nonzero or nonzero[0] != 1:
            continue
        combo = R.to_ratfunc(sum((c * f for c, f in zip(u, firsts) if c), R.zero))
        if not any(combo.pole_order(pl) % spec.p for pl in combo.poles()):
            raise InvalidSpecError(
                f"Coordinates are not independent: combination {u} of first components is unramified or not reduced"
            )


# --- characters ---

def characters(spec: TowerSpec, n: int) -> dict[frozenset[Place], tuple[CharacterIndex, ...]]:
    """Characters of Gal(L_n/L_0) grouped by their ramification locus.

    Blocks are keyed by the locus S and ordered by (|S|, place labels), so the
    block of the trivial character (S empty) comes first. Only the geometric
    coordinates are enumerated; a constant coordinate is handled in zeta.
    """
    if not 1 <= n <= spec.n_max:
        raise InvalidSpecError(f"Level {n} outside 1..{spec.n_max}")
    modulus = spec.p**n
    loci = spec.geometric_loci
    blocks: dict[frozenset[Place], list[CharacterIndex]] = {}
    for exps in product(range(modulus), repeat=len(loci)):
        chi = CharacterIndex(exps, n, spec.p)
        blocks.setdefault(character_locus(spec, chi), []).append(chi)
    ordered = sorted(blocks, key=lambda S: (len(S), [pl.sort_key for pl in sorted_places(S)]))
    return {S: tuple(sorted(blocks[S])) for S in ordered}


def character_locus(spec: TowerSpec, chi: CharacterIndex) -> frozenset[Place]:
    loci = spec.geometric_loci
    return frozenset().union(*(loci[i] for i, e in enumerate(chi.exponents) if e))


def galois_orbits(chars: tuple[CharacterIndex, ...], spec: TowerSpec) -> list[Orbit]:
    """Split a block into orbits; the representative is the smallest member.

    The block must be closed under chi -> chi^u for units u.
    """
    block = set(chars)
    seen: set[CharacterIndex] = set()
    orbits = []
    for chi in sorted(block):
        if chi in seen:
            continue
        units = [u for u in range(1, chi.order) if u % spec.p] or [1]
        members = tuple(sorted({chi.conjugate(u) for u in units}))
        missing = [m.exponents for m in members if m not in block]
        if missing:
            raise InvalidSpecError(
                f"Block is not closed under the Galois action: {chi.exponents} has conjugates {missing}"
            )
        seen.update(members)
        orbits.append(Orbit(members[0], members, character_locus(spec, chi)))
    return orbits


def level_orbits(spec: TowerSpec, n: int) -> list[Orbit]:
    """All nontrivial orbits at level n, block by block."""
    return [
        orbit for S, chars in characters(spec, n).items() if S for orbit in galois_orbits(chars, spec)
    ]


# --- conductors ---

@functools.lru_cache(maxsize=4096)
def combined_witt_vector(spec: TowerSpec, chi: CharacterIndex) -> WittVec:
    """Reduced Witt vector over F_p(x) of length j defining chi.

    A unit u_i = p^s * u' contributes V^s([u'] * coord_i); this has the same
    traces as the integer multiple and keeps the pole orders reduced.
    """
    R = get_rational_functions(spec.p)
    j = chi.j
    total = zero_vector(R, j)
    for coord, u in zip(spec.geometric_coords, chi.units):
        if u % spec.p**j == 0:
            continue
        s = vp(u, spec.p)
        unit = u // spec.p**s
        scaled = witt_scale(witt_from_coordinate(coord, R, j - s), unit)
        shifted = verschiebung(WittVec(scaled.components + (R.zero,) * s, R), s)
        total = witt_arith(total, shifted)
    return total


def swan_conductor(spec: TowerSpec, chi: CharacterIndex, place: Place) -> int:
    """Swan conductor of chi at place: max_k p^(j-1-k) d_k over the components."""
    if chi.is_trivial():
        return 0
    w = combined_witt_vector(spec, chi)
    orders = witt_pole_order(w, place)
    j = chi.j
    weights = [spec.p ** (j - 1 - k) * d for k, d in enumerate(orders)]
    top = max(weights)
    if top == 0:
        return 0
    if not any(w_k == top and orders[k] % spec.p for k, w_k in enumerate(weights)):
        raise ConsistencyError(
            f"Combined Witt vector of {chi.exponents} needs reduction at {place.label} (pole orders {orders})"
        )
    return top


def conductor_degree(spec: TowerSpec, chi: CharacterIndex) -> int:
    """sum over the locus of deg(P) * (1 + Swan_P)."""
    return sum(pl.degree * (1 + swan_conductor(spec, chi, pl)) for pl in character_locus(spec, chi))


def l_degree(spec: TowerSpec, chi: CharacterIndex) -> int:
    """Degree of L(chi, s) for nontrivial chi over P^1."""
    return conductor_degree(spec, chi) - 2


def genus(spec: TowerSpec, n: int) -> int:
    """Genus of the level-n curve by the conductor-discriminant formula."""
    if n == 0:
        return 0
    total = -2 * spec.p ** (len(spec.geometric) * n)
    for orbit in level_orbits(spec, n):
        total += orbit.size * conductor_degree(spec, orbit.representative)
    if total % 2:
        raise ConsistencyError(f"Odd 2g-2 = {total} at level {n}")
    return total // 2 + 1
