"""Exception hierarchy.

Every error carries a ``kind`` (used by the CLI for exit codes and the
machine-readable error document) and the name of the module that raised it.
"""


class BivTodaError(Exception):
    kind = "error"

    def __init__(self, message, module=None):
        super().__init__(message)
        self.module = module or "bivtoda"

    def to_dict(self):
        return {"kind": self.kind, "message": str(self), "module": self.module}


class ParameterError(BivTodaError, ValueError):
    kind = "parameter"


class DomainError(BivTodaError, ValueError):
    kind = "domain"


class CapacityError(BivTodaError):
    kind = "capacity"


class AccuracyError(BivTodaError):
    kind = "accuracy"


class UnsupportedOracleError(ParameterError):
    kind = "unsupported-oracle"


class DegeneracyError(BivTodaError, ArithmeticError):
    kind = "degeneracy"


class StructuralError(BivTodaError):
    kind = "structural"


class TruncationError(ParameterError):
    kind = "truncation-insufficient"


class BoundaryError(ParameterError):
    kind = "boundary"


class ConvergenceDomainError(DomainError):
    kind = "convergence-domain"


class DivergenceError(BivTodaError, ArithmeticError):
    kind = "divergence"


class NumericalError(BivTodaError, ArithmeticError):
    kind = "numerical"
