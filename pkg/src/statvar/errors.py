"""Exception and warning types raised across the toolkit."""


class StatVarError(Exception):
    """Base class for all toolkit errors."""


class OrderExceeded(StatVarError):
    pass


class OutOfDomain(StatVarError):
    pass


class DomainError(StatVarError):
    """Component function undefined at the requested point (log/sqrt of a
    non-positive number, division by zero)."""


class ParseError(StatVarError):
    def __init__(self, message, position=None):
        self.position = position
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)


class SingularMetric(StatVarError):
    pass


class EmptyGrid(StatVarError):
    pass


class EmptyQuadrature(StatVarError):
    pass


class NotConvex(StatVarError):
    pass


class SupportViolation(StatVarError):
    pass


class ModeMismatch(StatVarError):
    pass


class ComplexRoots(StatVarError):
    pass


class DegenerateSupport(StatVarError):
    pass


class UnknownEntry(StatVarError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class BadParams(StatVarError, ValueError):
    pass


class DomainEscape(StatVarError):
    pass


class ConfigError(StatVarError):
    def __init__(self, message, field=None, line=None):
        self.field = field
        self.line = line
        where = []
        if field is not None:
            where.append(f"field '{field}'")
        if line is not None:
            where.append(f"line {line}")
        if where:
            message = f"{message} [{', '.join(where)}]"
        super().__init__(message)


class NotHessianWarning(UserWarning):
    """Hessian curvature requested on a chart whose curvature does not vanish."""


class BiharmonicityViolation(UserWarning):
    """Second variation evaluated for a map whose bi-tension is not small."""
