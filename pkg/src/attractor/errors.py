"""Exception hierarchy shared by all modules."""


class AttractorError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(AttractorError, ValueError):
    pass


class DomainViolation(AttractorError, ValueError):
    """A mapping was evaluated outside its domain."""

    def __init__(self, x, message=None):
        self.x = x
        super().__init__(message or f"point {list(x)} is outside the mapping domain")


class UnknownMapping(AttractorError, KeyError):
    pass


class EmptyReferenceSet(AttractorError, ValueError):
    pass


class NoGenerators(AttractorError, ValueError):
    pass


class DegenerateConstraint(AttractorError, ValueError):
    pass


class ProjectionNotConverged(AttractorError, RuntimeError):
    pass


class AttractorEmpty(AttractorError, RuntimeError):
    pass


class NumericalDivergence(AttractorError, FloatingPointError):
    """Non-finite iterate. ``step`` is the index of the offending iterate and
    ``trace`` the partial trace recorded up to it."""

    def __init__(self, step, trace=None):
        self.step = step
        self.trace = trace
        super().__init__(f"non-finite iterate at step {step}")


class ConfigError(AttractorError):
    pass


class ConfigSyntaxError(ConfigError, ValueError):
    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(message + where)


class ConfigSemanticError(ConfigError, ValueError):
    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")
