"""Exception hierarchy shared by the library, the CLI and the MCP server.

Each class carries the process exit code the CLI maps it to.
"""


class TowerError(Exception):
    """Base class for every error raised by the tower pipeline."""

    exit_code = 1


class InvalidSpecError(TowerError, ValueError):
    """Malformed or unsupported tower description."""

    exit_code = 2


class ConsistencyError(TowerError):
    """An internal cross-check failed (division, verification, oracle)."""

    exit_code = 3


class InfeasibleError(TowerError):
    """The requested computation exceeds a configured feasibility bound."""

    exit_code = 4
