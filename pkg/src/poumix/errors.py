"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Array shapes or dimensions violate an operation's contract."""


class InputError(ValueError):
    """Input values are unusable (non-finite, empty, out of range)."""


class ParseError(ValueError):
    """A data or checkpoint file could not be parsed.

    Carries the offending path and, when known, the 1-based line number.
    """

    def __init__(self, message, *, path=None, line=None):
        self.path = path
        self.line = line
        prefix = ""
        if path is not None:
            prefix = f"{path}: "
        if line is not None:
            prefix += f"line {line}: "
        super().__init__(prefix + message)


class SchemaError(ValueError):
    """A checkpoint violates the expected schema (version or fields)."""


class NumericalError(RuntimeError):
    """A numerical routine failed to produce a usable result."""


class NonFiniteGradientError(NumericalError):
    """A gradient block became NaN or infinite."""

    def __init__(self, block):
        self.block = block
        super().__init__(f"non-finite gradient in parameter block '{block}'")


class TrainingAbort(NumericalError):
    """Training hit a non-finite loss or gradient and stopped.

    ``last_good`` holds the most recent finite parameter values so callers
    can inspect or checkpoint the state preceding the failure.
    """

    def __init__(self, stage, *, iteration, block=None, last_good=None):
        self.stage = stage
        self.iteration = iteration
        self.block = block
        self.last_good = last_good
        detail = f"stage '{stage}' aborted at iteration {iteration}"
        if block is not None:
            detail += f" (parameter block '{block}')"
        super().__init__(detail)
