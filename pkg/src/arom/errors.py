from __future__ import annotations


class AromError(Exception):
    """Base class for all solver errors."""


class PositivityError(AromError):
    """Density or pressure not strictly positive."""

    def __init__(self, cell: int, what: str = "state"):
        self.cell = int(cell)
        super().__init__(f"non-admissible {what} at cell {self.cell}")


class FluxError(PositivityError):
    """Roe average or reconstructed face state not admissible."""

    def __init__(self, cell: int, axis: int):
        self.axis = axis
        super().__init__(cell, what=f"face state (axis {axis}, left cell)")


class SolverError(AromError):
    """Newton failed to reach its tolerance."""

    def __init__(self, message: str, residual: float = float("nan"), step: int | None = None):
        self.residual = residual
        self.step = step
        super().__init__(message)


class RankDeficientError(AromError):
    """Sampled basis rows do not have full column rank."""


class ConfigError(AromError):
    def __init__(self, message: str, key: str | None = None, line: int | None = None):
        self.key = key
        self.line = line
        where = ""
        if line is not None:
            where = f"line {line}: "
        super().__init__(f"{where}{message}")
