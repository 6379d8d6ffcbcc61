"""Error types raised by the ft-optsim library modules.

Command functions in ``commands/`` catch these at the boundary and map them
to exit codes; everything below them raises.
"""
from typing import Optional


class FtOptSimError(Exception):
    """Base class for all simulator errors."""


class PreconditionError(FtOptSimError, ValueError):
    """An operation was called with arguments outside its domain."""


class InvalidGraph(PreconditionError):
    """Graph has self-loops, out-of-range labels or no vertices."""


class EnumerationBudgetExceeded(FtOptSimError):
    """A reduced-graph family would exceed the enumeration cap."""

    def __init__(self, count: int, budget: int, what: str = "reduced graphs"):
        self.count = count
        self.budget = budget
        super().__init__(f"{what}: {count} exceeds enumeration budget {budget}")


class TooFewValues(FtOptSimError):
    """Too few values to cut f from each side."""

    def __init__(self, have: int, f: int):
        self.have = have
        self.f = f
        super().__init__(f"cannot trim {f} from each side of {have} values")


class IncompatibleScenario(FtOptSimError):
    """Algorithm, fault model and graph do not fit together."""


class TraceMismatch(FtOptSimError):
    """A trace does not match the algorithm that is asked to read it."""


class ReconstructionFailed(FtOptSimError):
    """A transition matrix could not reproduce the recorded update."""

    def __init__(self, t: int, residual: float, detail: str = ""):
        self.t = t
        self.residual = residual
        message = f"round {t}: reconstruction residual {residual:.3e}"
        if detail:
            message = f"{message} ({detail})"
        super().__init__(message)


class IndexOutOfRange(FtOptSimError, IndexError):
    """Round index outside the recorded chain."""


class NotConverged(FtOptSimError):
    """Rows of a backward product have not merged within tolerance."""

    def __init__(self, residual: float, threshold: float):
        self.residual = residual
        self.threshold = threshold
        super().__init__(f"row spread {residual:.3e} above threshold {threshold:.1e}")


class CurvatureUnsupported(FtOptSimError):
    """Closed-form optimum interval needs unit curvature."""


class InvalidParams(FtOptSimError, ValueError):
    """beta/gamma outside their admissible range."""


class ParseError(FtOptSimError):
    """Input file could not be parsed."""

    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}:"
        if line is not None:
            where = f"{where}{line}:"
        super().__init__(f"{where} {message}" if where else message)
