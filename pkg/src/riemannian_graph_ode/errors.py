"""Exception hierarchy shared by every module of the package."""

from typing import Optional


class RiemannianODEError(Exception):
    """Base class for all errors raised by riemannian_graph_ode."""


class ManifoldDomainError(RiemannianODEError, ValueError):
    """Input lies outside the domain an operation is defined on."""


class SingularityError(RiemannianODEError, ArithmeticError):
    """A Möbius denominator vanished (antipodal configuration for κ > 0)."""


class ChartOverflowError(RiemannianODEError, ArithmeticError):
    """A κ > 0 tangent norm left the period of tan_κ."""


class DegenerateAggregationError(RiemannianODEError, ArithmeticError):
    """Gyro-midpoint denominator is zero."""


class ContractViolationError(RiemannianODEError, ValueError):
    """A caller-supplied argument breaks an operation's precondition."""


class EigenSolverError(RiemannianODEError, ArithmeticError):
    def __init__(self, message: str, sweeps: int):
        super().__init__(f"{message} (after {sweeps} sweeps)")
        self.sweeps = sweeps


class NumericError(RiemannianODEError, ArithmeticError):
    def __init__(self, message: str, parameter: Optional[str] = None):
        if parameter is not None:
            message = f"{message}: {parameter}"
        super().__init__(message)
        self.parameter = parameter


class DatasetParseError(RiemannianODEError, ValueError):
    """Dataset file violates the JSON schema; carries line/field context."""

    def __init__(self, message: str, line: Optional[int] = None, field: Optional[str] = None):
        context = []
        if line is not None:
            context.append(f"line {line}")
        if field:
            context.append(f"field {field}")
        if context:
            message = f"{message} ({', '.join(context)})"
        super().__init__(message)
        self.line = line
        self.field = field
