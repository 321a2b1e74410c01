"""ASW Iwasawa MCP Server.

Exposes the tower pipeline as tools: validate a tower, compute class-number
valuations, p-ranks and genera level by level, fit stability laws, and run
the point-count oracle. Towers are given as JSON text or a bundled name.
"""

import asyncio
import json

from fastmcp import FastMCP

from errors import InvalidSpecError, TowerError
from iwasawa import fit_stability, iwasawa_invariants
from tower import TowerSpec, bundled_tower_names, genus, load_tower, tower_from_dict
from zeta import class_number_valuation, oracle_check, p_rank, zeta_level

mcp = FastMCP("asw-iwasawa")


def _load(tower: str) -> TowerSpec:
    """A bundled tower name, a path, or the JSON text of a tower."""
    text = tower.strip()
    if text.startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise InvalidSpecError(f"Tower JSON does not parse: {e}") from e
        return tower_from_dict(data)
    return load_tower(text)


def _format_error(e: Exception) -> str:
    return f"Error ({type(e).__name__}): {e}"


async def _list_towers() -> str:
    names = bundled_tower_names()
    if not names:
        return "No bundled towers found."
    return "Bundled towers:\n" + "\n".join(f"- {name}" for name in names)


async def _validate_tower(tower: str) -> str:
    try:
        spec = _load(tower)
    except TowerError as e:
        return _format_error(e)
    places = ", ".join(pl.label for pl in spec.ramified_places)
    return (
        f"Tower {spec.name} is valid: p={spec.p}, q={spec.q}, d={spec.d}, "
        f"ramified at {places}, levels 1..{spec.n_max}, digest {spec.digest}"
    )


async def _sequence(tower: str, n_max: int | None, compute, label: str) -> str:
    """Shared implementation for per-level sequence tools."""
    try:
        spec = _load(tower)
        top = spec.n_max if n_max is None else n_max
        if not 1 <= top <= spec.n_max:
            return f"n_max must lie in 1..{spec.n_max} for tower {spec.name}"
        values = [await asyncio.to_thread(compute, spec, n) for n in range(1, top + 1)]
    except TowerError as e:
        return _format_error(e)
    lines = [f"{label} for tower {spec.name} (p={spec.p}):"]
    lines += [f"- n={n}: {v}" for n, v in enumerate(values, start=1)]
    return "\n".join(lines)


async def _fit(values: list[int], p: int, x_degree: int, y_degree: int, n_start: int) -> str:
    try:
        result = fit_stability(list(enumerate(values, start=n_start)), p, x_degree, y_degree)
    except ValueError as e:
        return _format_error(e)
    if not result.fitted:
        return f"No polynomial of total degree <= {x_degree} fits the data."
    text = f"E(x, y) = {result} exact for n >= {result.onset}"
    if not result.determined:
        text += " (interpolation: no point beyond the number of monomials)"
    invariants = iwasawa_invariants(result)
    if invariants is not None and y_degree:
        mu, lam, nu = invariants
        text += f"\nmu = {mu}, lambda = {lam}, nu = {nu}"
    return text


async def _oracle(tower: str) -> str:
    try:
        spec = _load(tower)
        level = await asyncio.to_thread(zeta_level, spec, 1)
        expected = await asyncio.to_thread(oracle_check, spec, level)
    except TowerError as e:
        return _format_error(e)
    return f"P(K_1,s) coefficients {list(expected)} (match)"


# --- MCP Tools ---


@mcp.tool()
async def list_towers() -> str:
    """List the bundled example towers."""
    return await _list_towers()


@mcp.tool()
async def validate_tower(tower: str) -> str:
    """Check a tower description and report its ramification data.

    Args:
        tower: Bundled tower name (see list_towers) or the tower JSON text,
            e.g. '{"p": 2, "d": 1, "coords": [["x^3"]]}'
    """
    return await _validate_tower(tower)


@mcp.tool()
async def class_numbers(tower: str, n_max: int | None = None) -> str:
    """p-adic valuation of the class number at each level.

    Args:
        tower: Bundled tower name or tower JSON text
        n_max: Highest level (default: the tower's n_max)
    """
    return await _sequence(tower, n_max, class_number_valuation, "v_p(h_n)")


@mcp.tool()
async def p_ranks(tower: str, n_max: int | None = None) -> str:
    """p-rank of the Jacobian at each level.

    Args:
        tower: Bundled tower name or tower JSON text
        n_max: Highest level (default: the tower's n_max)
    """
    return await _sequence(tower, n_max, p_rank, "p-rank")


@mcp.tool()
async def genera(tower: str, n_max: int | None = None) -> str:
    """Genus at each level, from the conductor-discriminant formula.

    Args:
        tower: Bundled tower name or tower JSON text
        n_max: Highest level (default: the tower's n_max)
    """
    return await _sequence(tower, n_max, genus, "genus")


@mcp.tool()
async def fit(values: list[int], p: int, x_degree: int = 1, y_degree: int = 1, n_start: int = 1) -> str:
    """Fit a level sequence by a polynomial in x = p^n and y = n.

    Examples:
        values [1, 3, 7], p 2, y_degree 0  ->  E(x, y) = x - 1

    Args:
        values: Sequence values for consecutive levels n_start, n_start+1, ...
        p: The prime of the tower
        x_degree: Bound on the total degree (default 1)
        y_degree: Bound on the degree in y = n (default 1)
        n_start: Level of the first value (default 1)
    """
    return await _fit(values, p, x_degree, y_degree, n_start)


@mcp.tool()
async def oracle(tower: str) -> str:
    """Compare P(K_1, s) from the L-functions with brute-force point counts.

    Args:
        tower: Bundled tower name or tower JSON text of a one-coordinate tower
    """
    return await _oracle(tower)


if __name__ == "__main__":
    mcp.run()
