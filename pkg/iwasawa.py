"""Exact stability fits and slope statistics.

Stability laws are polynomials E(x, y) in x = p^n and y = n that reproduce a
sequence of level invariants from some onset n_0 on. Fits are solved exactly
over the rationals; nothing here uses floating point.
"""

import csv
import io
import logging
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from sympy import Matrix, Rational, symbols

_logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

_X, _Y = symbols("x y")

Monomial = tuple[int, int]


@dataclass(frozen=True)
class FitResult:
    """E(x, y) = sum coeff * x^a y^b, exact on the data from n = onset on.

    A fit with onset None found no polynomial in the allowed family; the
    residuals are then the values themselves. determined is False when the
    tail has no point beyond the number of monomials, so the fit is an
    interpolation rather than a confirmed law.
    """

    p: int
    x_deg_bound: int
    y_deg_bound: int
    monomials: tuple[Monomial, ...]
    coefficients: dict[Monomial, Fraction]
    onset: int | None
    residuals: tuple[tuple[int, Fraction], ...]
    determined: bool

    @property
    def fitted(self) -> bool:
        return self.onset is not None

    @property
    def total_degree(self) -> int:
        return max((a + b for a, b in self.coefficients), default=0)

    @property
    def y_degree(self) -> int:
        return max((b for _, b in self.coefficients), default=0)

    def evaluate(self, n: int) -> Fraction:
        x = self.p**n
        return sum((c * x**a * n**b for (a, b), c in self.coefficients.items()), Fraction(0))

    def expression(self):
        """The fit as a sympy expression in x and y."""
        return sum(
            (Rational(c.numerator, c.denominator) * _X**a * _Y**b for (a, b), c in self.coefficients.items()),
            Rational(0),
        )

    def __str__(self) -> str:
        return str(self.expression()) if self.fitted else "no fit"


@dataclass(frozen=True)
class SlopeStats:
    slopes: tuple[Fraction, ...]
    bins: int
    histogram: tuple[int, ...]
    ks_discrepancy: Fraction
    symmetry_defect: Fraction

    @property
    def size(self) -> int:
        return len(self.slopes)


def _candidate_families(x_deg_bound: int, y_deg_bound: int, max_size: int) -> list[tuple[int, int, tuple[Monomial, ...]]]:
    """(total degree, y-degree, monomials) for every admissible family, smallest first."""
    families = []
    for t in range(x_deg_bound + 1):
        for yb in range(min(y_deg_bound, t) + 1):
            monos = tuple(sorted((a, b) for b in range(yb + 1) for a in range(t - b + 1)))
            if len(monos) <= max_size:
                families.append((t, yb, monos))
    return families


def _solve(points: Sequence[tuple[int, Fraction]], monos: Sequence[Monomial], p: int) -> dict[Monomial, Fraction] | None:
    """Exact solution on the given points, free parameters at 0; None if inconsistent."""
    A = Matrix([[Rational(p**n) ** a * Rational(n) ** b for a, b in monos] for n, _ in points])
    rhs = Matrix([Rational(v.numerator, v.denominator) for _, v in points])
    try:
        solution, params = A.gauss_jordan_solve(rhs)
    except ValueError:
        return None
    if params.shape[0]:
        solution = solution.subs({tau: 0 for tau in params})
    coeffs = {}
    for mono, value in zip(monos, solution):
        value = Rational(value)
        if value:
            coeffs[mono] = Fraction(int(value.p), int(value.q))
    return coeffs


def _value(coeffs: dict[Monomial, Fraction], n: int, p: int) -> Fraction:
    return sum((c * p ** (n * a) * n**b for (a, b), c in coeffs.items()), Fraction(0))


def fit_stability(
    points: Iterable[tuple[int, int | Fraction]],
    p: int,
    x_deg_bound: int,
    y_deg_bound: int = 1,
) -> FitResult:
    """Fit data (n, value) by E(p^n, n) with total degree <= x_deg_bound and y-degree <= y_deg_bound.

    Each family is solved on its last len(monomials) points and the tail is
    extended downward while the same polynomial stays exact. The smallest
    onset wins, then the smallest total degree, then the smallest y-degree.

    Args:
        points: (n, value) pairs with distinct n.
        p: The prime; x stands for p^n.
        x_deg_bound: Bound on the total degree.
        y_deg_bound: Bound on the degree in y = n (0 or 1 in practice).
    """
    data = sorted((int(n), Fraction(v)) for n, v in points)
    if not data:
        raise ValueError("fit_stability needs at least one data point")
    if len({n for n, _ in data}) != len(data):
        raise ValueError("fit_stability needs distinct levels n")
    if x_deg_bound < 0 or y_deg_bound < 0:
        raise ValueError("degree bounds must be non-negative")

    best: tuple | None = None
    for t, yb, monos in _candidate_families(x_deg_bound, y_deg_bound, len(data)):
        coeffs = _solve(data[-len(monos):], monos, p)
        if coeffs is None:
            continue
        start = len(data) - len(monos)
        while start > 0 and _value(coeffs, data[start - 1][0], p) == data[start - 1][1]:
            start -= 1
        key = (start, t, yb)
        if best is None or key < best[0]:
            best = (key, monos, coeffs)

    if best is None:
        _logger.info("no polynomial of total degree <= %d fits the last points", x_deg_bound)
        return FitResult(p, x_deg_bound, y_deg_bound, (), {}, None, tuple(data), False)

    (start, _, _), monos, coeffs = best
    tail = len(data) - start
    residuals = tuple((n, v - _value(coeffs, n, p)) for n, v in data)
    determined = tail > len(monos)
    if not determined:
        _logger.info("fit on %d points with %d monomials is an interpolation", tail, len(monos))
    return FitResult(
        p=p,
        x_deg_bound=x_deg_bound,
        y_deg_bound=y_deg_bound,
        monomials=monos,
        coefficients=coeffs,
        onset=data[start][0],
        residuals=residuals,
        determined=determined,
    )


def iwasawa_invariants(fit: FitResult) -> tuple[Fraction, Fraction, Fraction] | None:
    """(mu, lambda, nu) of a fit mu x + lambda y + nu, or None if the fit has another shape."""
    if not fit.fitted or any(m not in {(0, 0), (1, 0), (0, 1)} for m in fit.coefficients):
        return None
    c = fit.coefficients
    return c.get((1, 0), Fraction(0)), c.get((0, 1), Fraction(0)), c.get((0, 0), Fraction(0))


def slope_statistics(slopes: Iterable[Fraction | int], bins: int = 10) -> SlopeStats:
    """Histogram, Kolmogorov-Smirnov distance to uniform and reflection defect of a slope multiset."""
    values = tuple(sorted(Fraction(s) for s in slopes))
    if not values:
        raise ValueError("slope_statistics needs a non-empty multiset")
    if values[0] < 0 or values[-1] > 1:
        raise ValueError("slopes must lie in [0, 1]")
    if bins < 1:
        raise ValueError("bins must be positive")
    N = len(values)

    indices = np.array([min(int(s * bins), bins - 1) for s in values], dtype=np.int64)
    histogram = tuple(int(c) for c in np.bincount(indices, minlength=bins))

    ks = max(max(Fraction(i + 1, N) - s, s - Fraction(i, N)) for i, s in enumerate(values))

    mass: dict[Fraction, int] = {}
    for s in values:
        mass[s] = mass.get(s, 0) + 1
    support = set(mass) | {1 - s for s in mass}
    defect = sum((abs(mass.get(s, 0) - mass.get(1 - s, 0)) for s in support), 0)
    return SlopeStats(values, bins, histogram, ks, Fraction(defect, 2 * N))


# --- CSV and JSON ---

def read_points(path: str | Path) -> list[tuple[int, Fraction]]:
    """Rows (n, value) from a CSV file with a header; values may be integers or a/b."""
    rows = []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path} is empty")
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                rows.append((int(row[0]), Fraction(row[1])))
            except (IndexError, ValueError) as e:
                raise ValueError(f"{path}:{line}: expected 'n,value', got {row}") from e
    return rows


def rows_to_csv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def fit_to_json(fit: FitResult) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "p": fit.p,
        "x_deg_bound": fit.x_deg_bound,
        "y_deg_bound": fit.y_deg_bound,
        "fitted": fit.fitted,
        "expression": str(fit),
        "coefficients": [
            {"x_degree": a, "y_degree": b, "value": str(c)} for (a, b), c in sorted(fit.coefficients.items())
        ],
        "onset": fit.onset,
        "determined": fit.determined,
        "residuals": [{"n": n, "value": str(r)} for n, r in fit.residuals],
    }


def stats_to_json(stats: SlopeStats) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "size": stats.size,
        "bins": stats.bins,
        "histogram": list(stats.histogram),
        "ks_discrepancy": str(stats.ks_discrepancy),
        "symmetry_defect": str(stats.symmetry_defect),
    }

