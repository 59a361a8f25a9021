"""Exception types raised by the scattering library.

Each error subclasses the builtin exception a caller would naturally catch
(ValueError for bad input, RuntimeError for numerical failure) so plain
``except ValueError`` handlers keep working.
"""
from typing import Optional


class ScatteringError(Exception):
    """Base class for all scattering-library errors."""


class DomainError(ScatteringError, ValueError):
    """Argument outside the domain of a function (z = 0, x <= 0, bad l)."""


class SingularSystemError(ScatteringError, RuntimeError):
    """Linear system could not be solved reliably.

    Attributes:
        radius: Radius (fm) at which the solve failed, if any
        condition: Condition-number estimate of the failing matrix
    """

    def __init__(
        self,
        message: str,
        radius: Optional[float] = None,
        condition: Optional[float] = None,
    ):
        self.radius = radius
        self.condition = condition
        details = []
        if radius is not None:
            details.append(f"r={radius:.6g} fm")
        if condition is not None:
            details.append(f"cond={condition:.3e}")
        if details:
            message = f"{message} ({', '.join(details)})"
        super().__init__(message)


class RealAxisPoleError(ScatteringError, ValueError):
    """S-matrix denominator vanishes too close to the real momentum axis."""


class ContourError(ScatteringError, RuntimeError):
    """Laurent-coefficient contour quadrature failed its validation."""


class PoleCountError(ScatteringError, RuntimeError):
    """Fitted S-matrix zeros do not match the Levinson offset of the curve."""


class TailFitError(ScatteringError, RuntimeError):
    """No model potential reproduces the data near the end of the data range."""


class ParametrizationError(ScatteringError, ValueError):
    """Input row cannot be expressed in the requested S-matrix convention."""


class ConvergenceError(ScatteringError, RuntimeError):
    """Iterative procedure or ODE integration did not converge."""


class AsymmetryError(ScatteringError, RuntimeError):
    """Reconstructed coupled potential is not symmetric within tolerance."""


class SchemaError(ScatteringError, ValueError):
    """Input file does not match the declared schema.

    Attributes:
        row: 1-based data row number (header excluded), if known
        column: Offending column name, if known
    """

    def __init__(self, message: str, row: Optional[int] = None, column: Optional[str] = None):
        self.row = row
        self.column = column
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column '{column}'")
        if where:
            message = f"{message} at {', '.join(where)}"
        super().__init__(message)


class StageError(ScatteringError):
    """Pipeline stage failure; wraps the underlying error with the stage name."""

    def __init__(self, stage: str, error: Exception):
        self.stage = stage
        self.error = error
        super().__init__(f"stage '{stage}' failed: {error}")
