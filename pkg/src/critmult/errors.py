"""Exception hierarchy shared by all modules."""


class CritMultError(Exception):
    """Base class for every error raised by critmult."""


class DimensionMismatch(CritMultError, ValueError):
    pass


class DomainError(CritMultError, ArithmeticError):
    """Expression evaluated outside its natural domain (log of nonpositive, division by zero)."""


class NotOnGraph(CritMultError, ValueError):
    pass


class NotInSet(CritMultError, ValueError):
    pass


class NotInDomain(CritMultError, ValueError):
    pass


class Unsupported(CritMultError):
    pass


class BranchLimitExceeded(CritMultError):
    pass


class VertexEnumerationLimit(CritMultError):
    """Raised with the (vertex-free) description attached as ``.polytope``."""

    def __init__(self, message, polytope=None):
        super().__init__(message)
        self.polytope = polytope


class NotAMultiplier(CritMultError, ValueError):
    pass


class NotStationary(CritMultError, ValueError):
    pass


class SingularSystem(CritMultError, ArithmeticError):
    pass


class DegenerateBranch(CritMultError, ValueError):
    pass


class NotEqualityOnly(CritMultError, ValueError):
    pass


class BaseNotInSet(CritMultError, ValueError):
    pass


class UnknownExperiment(CritMultError, KeyError):
    pass


class ProblemFileError(CritMultError, ValueError):
    pass


class SingularA(SingularSystem):
    pass


class SingularJacobian(SingularSystem):
    pass


class ExprSyntaxError(CritMultError, SyntaxError):
    pass


class UnknownVariable(ExprSyntaxError):
    pass


class NonIntegerExponent(ExprSyntaxError):
    pass
