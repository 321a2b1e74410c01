"""Persistent per-level records, keyed by the tower digest.

A record holds everything the CLI emits for one level, so a cache hit and a
recomputation give the same outputs. Files live under
<cache_dir>/<tower digest>/level-<n>.json and carry a checksum of their body.
"""

import hashlib
import json
import logging
import os
from fractions import Fraction
from pathlib import Path

import witt
from algebra import sorted_places
from tower import TowerSpec
from zeta import ZetaLevel, block_valuations

_logger = logging.getLogger(__name__)

RECORD_VERSION = 1


def default_cache_dir() -> Path:
    return witt.cache_root / "levels"


def get_level_path(cache_dir: Path, digest: str, n: int) -> Path:
    """Return the record path for one level of one tower."""
    return Path(cache_dir) / digest / f"level-{n}.json"


def _fraction(c: Fraction) -> list[int]:
    return [c.numerator, c.denominator]


def level_record(spec: TowerSpec, level: ZetaLevel) -> dict:
    """Plain-JSON summary of a computed level."""
    return {
        "n": level.n,
        "genus": level.genus,
        "vp_class_number": level.vp_class_number,
        "p_rank": level.p_rank,
        "slopes": [_fraction(s) for s in level.slopes],
        "zeta_numerator": None if level.zeta_numerator is None else list(level.zeta_numerator),
        "class_number": level.class_number,
        "blocks": block_valuations(spec, level.n, level),
        "orbits": [
            {
                "representative": list(od.orbit.representative.exponents),
                "size": od.orbit.size,
                "locus": [pl.label for pl in sorted_places(od.orbit.locus)],
                "l_coefficients": od.l_poly.coefficient_lists(),
                "product": list(od.product),
                "l_value_valuation": od.l_value_valuation,
                "unit_roots": od.unit_roots,
                "slopes": [_fraction(s) for s in od.slopes],
            }
            for od in level.orbits
        ],
    }


def record_slopes(record: dict) -> list[Fraction]:
    return [Fraction(a, b) for a, b in record["slopes"]]


def _checksum(body: dict) -> str:
    canonical = json.dumps(body, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def save_record(cache_dir: Path, digest: str, record: dict) -> Path:
    """Write a level record atomically."""
    path = get_level_path(cache_dir, digest, record["n"])
    payload = {"version": RECORD_VERSION, "digest": digest, "checksum": _checksum(record), "record": record}
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(f".tmp{os.getpid()}")
    tmp.write_text(json.dumps(payload, indent=2))
    os.replace(tmp, path)
    return path


def load_record(cache_dir: Path, digest: str, n: int) -> dict | None:
    """Load a level record. Returns None if missing, corrupt or written for another tower."""
    path = get_level_path(cache_dir, digest, n)
    if not path.exists():
        return None
    try:
        payload = json.loads(path.read_text())
        record = payload["record"]
        valid = (
            payload.get("version") == RECORD_VERSION
            and payload.get("digest") == digest
            and payload.get("checksum") == _checksum(record)
            and record.get("n") == n
        )
    except (json.JSONDecodeError, OSError, KeyError, TypeError, AttributeError):
        valid = False
    if not valid:
        _logger.warning("discarding corrupt cache record %s, recomputing", path)
        return None
    _logger.debug("cache hit %s", path)
    return record
