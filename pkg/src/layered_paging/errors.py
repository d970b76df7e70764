from typing import Optional


class TraceFormatError(ValueError):
    """Malformed trace file. ``line`` is 1-indexed within the source."""

    def __init__(self, message: str, line: Optional[int] = None, source: Optional[str] = None):
        self.line = line
        self.source = source
        where = ""
        if source is not None:
            where = f"{source}:"
        if line is not None:
            where += f"{line}: "
        elif where:
            where += " "
        super().__init__(where + message)


class ConfigError(ValueError):
    """Invalid parameters for a policy, generator or experiment."""


class SimulationFault(RuntimeError):
    """A policy broke the engine contract (e.g. named a non-resident victim)."""


class OracleCapExceeded(ValueError):
    """Instance too large for the exhaustive optimum search."""
