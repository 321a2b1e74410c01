"""Command-line front end.

    python cli.py classnum --spec x3 --n-max 3
    python cli.py fit --csv classnum.csv --p 2 --x-degree 1 --y-degree 1

Data goes to standard output (or --out); diagnostics go to standard error.
Exit codes: 0 success, 2 invalid tower, 3 failed consistency check,
4 infeasible size or precision, 1 anything else.
"""

import argparse
import json
import logging
import sys
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Sequence

from algebra import INF, sorted_places
from cache import default_cache_dir, level_record, load_record, record_slopes, save_record
from errors import ConsistencyError, InvalidSpecError, TowerError
from iwasawa import (
    fit_stability,
    fit_to_json,
    iwasawa_invariants,
    read_points,
    rows_to_csv,
    slope_statistics,
    stats_to_json,
)
from lfunction import interior_unit_root_constant
from tadic import Precision, modT_congruence_check, series_to_json, specialize_check, tadic_l_series
from tower import TowerSpec, genus, level_orbits, load_tower
from zeta import oracle_zeta, zeta_level

_logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
LOG_FORMAT = "[asw-iwasawa] %(levelname)s %(name)s: %(message)s"
TADIC_DEFAULT_LEVELS = 2

COMMANDS = ("validate", "lfun", "zeta", "classnum", "prank", "genus", "slopes", "fit", "tadic", "oracle", "report")


@dataclass(frozen=True)
class RunConfig:
    command: str
    spec: str | None = None
    n_min: int = 1
    n_max: int | None = None
    workers: int = 1
    precision_digits: int | None = None
    t_degree: int = 8
    s_max: int = 16
    cache_dir: Path | None = None
    use_cache: bool = True
    out: Path | None = None
    stats_out: Path | None = None
    csv: Path | None = None
    p: int | None = None
    x_degree: int = 1
    y_degree: int = 1
    bins: int = 10


class _StderrHandler(logging.StreamHandler):
    """Writes to whatever sys.stderr is at emit time."""

    @property
    def stream(self):
        return sys.stderr

    @stream.setter
    def stream(self, value):
        pass


def configure_logging(verbose: bool = False) -> None:
    root = logging.getLogger()
    for handler in list(root.handlers):
        if isinstance(handler, _StderrHandler):
            root.removeHandler(handler)
    handler = _StderrHandler()
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    root.addHandler(handler)
    root.setLevel(logging.DEBUG if verbose else logging.INFO)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--spec", help="tower JSON file or bundled tower name")
    common.add_argument("--n-min", type=int, default=1)
    common.add_argument("--n-max", type=int, default=None, help="default: the tower's n_max")
    common.add_argument("--threads", type=int, default=1, help="worker processes for the orbit stage")
    common.add_argument("--precision", type=int, default=None, help="p-adic digits of the T-adic series")
    common.add_argument("--t-degree", type=int, default=8, help="total T-degree bound of the T-adic series")
    common.add_argument("--s-max", type=int, default=16, help="s-degree bound of the T-adic series")
    common.add_argument("--cache-dir", type=Path, default=None)
    common.add_argument("--no-cache", action="store_true")
    common.add_argument("--out", type=Path, default=None, help="output file (default: standard output)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="asw-iwasawa", description="Iwasawa theory of Artin-Schreier-Witt towers")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        cmd = sub.add_parser(name, parents=[common])
        if name == "slopes":
            cmd.add_argument("--stats-out", type=Path, default=None, help="write slope statistics JSON here")
            cmd.add_argument("--bins", type=int, default=10)
        if name == "fit":
            cmd.add_argument("--csv", type=Path, required=True, help="CSV with header and rows n,value")
            cmd.add_argument("--p", type=int, required=True)
            cmd.add_argument("--x-degree", type=int, default=1)
            cmd.add_argument("--y-degree", type=int, default=1)
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    if args.threads < 1:
        raise InvalidSpecError(f"--threads must be at least 1, got {args.threads}")
    if args.command != "fit" and not args.spec:
        raise InvalidSpecError(f"'{args.command}' needs --spec")
    return RunConfig(
        command=args.command,
        spec=args.spec,
        n_min=args.n_min,
        n_max=args.n_max,
        workers=args.threads,
        precision_digits=args.precision,
        t_degree=args.t_degree,
        s_max=args.s_max,
        cache_dir=args.cache_dir,
        use_cache=not args.no_cache,
        out=args.out,
        stats_out=getattr(args, "stats_out", None),
        csv=getattr(args, "csv", None),
        p=getattr(args, "p", None),
        x_degree=getattr(args, "x_degree", 1),
        y_degree=getattr(args, "y_degree", 1),
        bins=getattr(args, "bins", 10),
    )


# --- helpers ---

def format_polynomial(coeffs: Sequence[int], var: str = "s") -> str:
    """1 + 2s^2 style rendering of an integer polynomial."""
    terms = []
    for i, c in enumerate(coeffs):
        if not c:
            continue
        mono = "" if i == 0 else var if i == 1 else f"{var}^{i}"
        body = str(abs(c)) if i == 0 or abs(c) != 1 else ""
        terms.append(("-" if c < 0 else "+", body + mono))
    if not terms:
        return "0"
    sign, text = terms[0]
    out = ("-" if sign == "-" else "") + text
    for sign, text in terms[1:]:
        out += f" {sign} {text}"
    return out


def _levels(config: RunConfig, spec: TowerSpec, default_max: int | None = None) -> range:
    if config.n_max is not None:
        n_max = config.n_max
    else:
        n_max = spec.n_max if default_max is None else min(default_max, spec.n_max)
    if not 1 <= config.n_min <= n_max <= spec.n_max:
        raise InvalidSpecError(f"Level range {config.n_min}..{n_max} must lie within 1..{spec.n_max}")
    return range(config.n_min, n_max + 1)


def _emit(config: RunConfig, text: str) -> None:
    if config.out is None:
        sys.stdout.write(text)
    else:
        config.out.parent.mkdir(parents=True, exist_ok=True)
        config.out.write_text(text)
        _logger.info("wrote %s", config.out)


def _emit_json(config: RunConfig, payload: dict) -> None:
    _emit(config, json.dumps(payload, indent=2) + "\n")


def _valuation_text(v: Fraction | float | None) -> str | None:
    if v is None:
        return None
    return "inf" if v == INF else str(v)


def level_records(config: RunConfig, spec: TowerSpec, levels: range) -> list[dict]:
    """Level records from the cache where present, computed (and stored) otherwise."""
    cache_dir = config.cache_dir or default_cache_dir()
    records = []
    for n in levels:
        record = load_record(cache_dir, spec.digest, n) if config.use_cache else None
        if record is None:
            level = zeta_level(spec, n, workers=config.workers)
            _logger.info("level %d: genus %d, %d orbits, %.2fs", n, level.genus, len(level.orbits), level.seconds)
            record = level_record(spec, level)
            if config.use_cache:
                try:
                    save_record(cache_dir, spec.digest, record)
                except OSError as e:
                    _logger.warning("could not write cache record for level %d: %s", n, e)
        records.append(record)
    return records


def _header(spec: TowerSpec) -> dict:
    return {"schema_version": SCHEMA_VERSION, "tower": spec.name, "digest": spec.digest}


# --- commands ---

def cmd_validate(config: RunConfig) -> int:
    spec = load_tower(config.spec)
    _emit_json(
        config,
        {
            **_header(spec),
            "p": spec.p,
            "k": spec.k,
            "q": spec.q,
            "d": spec.d,
            "constant_coord": spec.constant_coord,
            "n_max": spec.n_max,
            "ramified_places": [pl.label for pl in spec.ramified_places],
            "loci": [[pl.label for pl in sorted_places(locus)] for locus in spec.ram_loci],
        },
    )
    return 0


def cmd_lfun(config: RunConfig) -> int:
    spec = load_tower(config.spec)
    records = level_records(config, spec, _levels(config, spec))
    _emit_json(config, {**_header(spec), "levels": [{"n": r["n"], "orbits": r["orbits"]} for r in records]})
    return 0


def cmd_zeta(config: RunConfig) -> int:
    spec = load_tower(config.spec)
    records = level_records(config, spec, _levels(config, spec))
    fields = ("n", "genus", "zeta_numerator", "class_number", "vp_class_number", "p_rank")
    _emit_json(config, {**_header(spec), "levels": [{f: r[f] for f in fields} for r in records]})
    return 0


def _csv_command(config: RunConfig, column: str) -> int:
    spec = load_tower(config.spec)
    records = level_records(config, spec, _levels(config, spec))
    _emit(config, rows_to_csv(["n", column], [(r["n"], r[column]) for r in records]))
    return 0


def cmd_classnum(config: RunConfig) -> int:
    return _csv_command(config, "vp_class_number")


def cmd_prank(config: RunConfig) -> int:
    return _csv_command(config, "p_rank")


def cmd_genus(config: RunConfig) -> int:
    spec = load_tower(config.spec)
    rows = [(n, genus(spec, n)) for n in _levels(config, spec)]
    _emit(config, rows_to_csv(["n", "genus"], rows))
    return 0


def cmd_slopes(config: RunConfig) -> int:
    spec = load_tower(config.spec)
    records = level_records(config, spec, _levels(config, spec))
    rows, stats = [], []
    for r in records:
        slopes = record_slopes(r)
        counts = Counter(slopes)
        rows.extend((r["n"], s.numerator, s.denominator, counts[s]) for s in sorted(counts))
        if slopes:
            level_stats = slope_statistics(slopes, bins=config.bins)
            _logger.info(
                "level %d: %d slopes, KS %s, symmetry defect %s",
                r["n"], level_stats.size, level_stats.ks_discrepancy, level_stats.symmetry_defect,
            )
            stats.append({"n": r["n"], **stats_to_json(level_stats)})
    _emit(config, rows_to_csv(["n", "slope_numerator", "slope_denominator", "multiplicity"], rows))
    if config.stats_out is not None:
        config.stats_out.write_text(json.dumps({**_header(spec), "levels": stats}, indent=2) + "\n")
    return 0


def cmd_fit(config: RunConfig) -> int:
    try:
        points = read_points(config.csv)
    except ValueError as e:
        raise InvalidSpecError(str(e)) from e
    try:
        fit = fit_stability(points, config.p, config.x_degree, config.y_degree)
    except ValueError as e:
        raise InvalidSpecError(str(e)) from e
    _logger.info("fit: %s, onset %s", fit, fit.onset)
    _emit_json(config, fit_to_json(fit))
    return 0


def cmd_tadic(config: RunConfig) -> int:
    spec = load_tower(config.spec)
    precision = Precision(
        digits=config.precision_digits or spec.precision_digits,
        t_degree=config.t_degree,
        s_max=config.s_max,
    )
    series = tadic_l_series(spec, precision)
    congruence = modT_congruence_check(spec, series)
    reports = []
    for n in _levels(config, spec, TADIC_DEFAULT_LEVELS):
        for orbit in level_orbits(spec, n):
            if orbit.j == n:
                reports.extend(specialize_check(spec, chi, series) for chi in orbit.members)
    payload = {
        **_header(spec),
        "series": series_to_json(series),
        "checks": {
            "mod_t": {"ok": congruence.ok, "mismatched_degrees": list(congruence.mismatched_degrees)},
            "specializations": [
                {
                    "exponents": list(r.exponents),
                    "retained_precision": str(r.retained_precision),
                    "ok": r.ok,
                    "mismatched_degrees": list(r.mismatched_degrees),
                    "l_value_valuation": _valuation_text(r.l_value_valuation),
                    "l_value_agrees": r.l_value_agrees,
                }
                for r in reports
            ],
        },
    }
    _emit_json(config, payload)
    failed = [r.exponents for r in reports if not r.ok]
    if not congruence.ok:
        raise ConsistencyError(f"L(0, s) differs from the zeta function of U at degrees {congruence.mismatched_degrees}")
    if failed:
        raise ConsistencyError(f"specialization failed for {len(failed)} characters, first {failed[0]}")
    return 0


def _oracle_line(spec: TowerSpec, record: dict) -> str:
    expected = oracle_zeta(spec)
    got = record["zeta_numerator"]
    if got is None or tuple(got) != expected:
        raise ConsistencyError(
            f"P(K_1,s) = {format_polynomial(got or ())} but point counts give {format_polynomial(expected)}"
        )
    return f"P(K_1,s) = {format_polynomial(expected)} (match)"


def cmd_oracle(config: RunConfig) -> int:
    spec = load_tower(config.spec)
    (record,) = level_records(config, spec, range(1, 2))
    _emit(config, _oracle_line(spec, record) + "\n")
    return 0


def _check_interior(spec: TowerSpec, record: dict) -> None:
    full = [pl.label for pl in spec.ramified_places]
    expected = interior_unit_root_constant(frozenset(spec.ramified_places))
    for orbit in record["orbits"]:
        if orbit["locus"] == full and orbit["unit_roots"] != expected:
            raise ConsistencyError(
                f"level {record['n']}: interior character {orbit['representative']} has "
                f"{orbit['unit_roots']} unit roots, expected {expected}"
            )


def _fit_line(label: str, points: list[tuple[int, int]], p: int, x_degree: int, y_degree: int) -> str:
    fit = fit_stability(points, p, x_degree, y_degree)
    if not fit.fitted:
        return f"  {label}: no fit of total degree <= {x_degree}"
    note = "" if fit.determined else " (interpolation, not confirmed)"
    line = f"  {label} = {fit} exact on n >= {fit.onset}{note}"
    invariants = iwasawa_invariants(fit) if len(points) > 1 else None
    if invariants is not None and y_degree:
        mu, lam, nu = invariants
        line += f"; mu = {mu}, lambda = {lam}, nu = {nu}"
    return line


def cmd_report(config: RunConfig) -> int:
    spec = load_tower(config.spec)
    levels = _levels(config, spec)
    records = level_records(config, spec, levels)
    lines = [
        f"Tower {spec.name}: p = {spec.p}, q = {spec.q}, d = {spec.d}, digest {spec.digest}",
        f"Ramified places: {', '.join(pl.label for pl in spec.ramified_places)}",
        "",
    ]
    for r in records:
        _check_interior(spec, r)
        lines.append(f"Level {r['n']}: genus {r['genus']}, v_p(h) = {r['vp_class_number']}, p-rank {r['p_rank']}")
        if r["zeta_numerator"] is not None:
            lines.append(f"  P(K_{r['n']},s) = {format_polynomial(r['zeta_numerator'])}")
            lines.append(f"  h = {r['class_number']}")
        for block in r["blocks"]:
            lines.append(
                f"  block {{{', '.join(block['locus'])}}}: {block['characters']} characters, "
                f"v_p(prod L(chi,1)) = {block['vp_l_values']}, "
                f"unit roots per character {block['unit_roots_per_character']}"
            )
        slopes = record_slopes(r)
        if slopes:
            stats = slope_statistics(slopes)
            lines.append(f"  slopes: KS {stats.ks_discrepancy}, symmetry defect {stats.symmetry_defect}")
    lines.append("")

    if len(spec.geometric) == 1 and spec.constant_coord is None:
        level_one = next((r for r in records if r["n"] == 1), None) or level_records(config, spec, range(1, 2))[0]
        lines.append(f"Oracle: {_oracle_line(spec, level_one)}")
    else:
        lines.append("Oracle: skipped (point counts need a one-coordinate tower)")

    lines.append("Stability fits (x = p^n, y = n):")
    d = spec.d
    lines.append(_fit_line("v_p(h_n)", [(r["n"], r["vp_class_number"]) for r in records], spec.p, d, 1))
    lines.append(_fit_line("p-rank", [(r["n"], r["p_rank"]) for r in records], spec.p, d, 0))
    lines.append(_fit_line("genus", [(r["n"], r["genus"]) for r in records], spec.p, d + 1, 0))
    lines.append("All consistency checks passed.")
    _emit(config, "\n".join(lines) + "\n")
    return 0


HANDLERS = {
    "validate": cmd_validate,
    "lfun": cmd_lfun,
    "zeta": cmd_zeta,
    "classnum": cmd_classnum,
    "prank": cmd_prank,
    "genus": cmd_genus,
    "slopes": cmd_slopes,
    "fit": cmd_fit,
    "tadic": cmd_tadic,
    "oracle": cmd_oracle,
    "report": cmd_report,
}


def run(config: RunConfig) -> int:
    return HANDLERS[config.command](config)


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)
    try:
        return run(config_from_args(args))
    except TowerError as e:
        _logger.error("%s", e)
        return e.exit_code
    except OSError as e:
        _logger.error("%s", e)
        return 1


if __name__ == "__main__":
    sys.exit(main())
