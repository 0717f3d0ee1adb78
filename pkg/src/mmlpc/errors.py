"""Exception hierarchy shared across the package."""


class MmlpcError(Exception):
    """Base class for all library errors."""


class ParameterError(MmlpcError, ValueError):
    """A caller-supplied argument violates an operation's contract."""


class ValidationError(MmlpcError, ValueError):
    """Input data failed structural or range validation."""


class MalformedInputError(ValidationError):
    """A byte stream cannot be parsed (wrong size, bad magic, truncation)."""


class DegenerateInputError(MmlpcError, ValueError):
    """Numerically degenerate input (all-zero spectrum, r[0] <= 0, ...)."""


class NumericError(MmlpcError, ArithmeticError):
    """A computation produced non-finite or otherwise unusable values."""


class StateError(MmlpcError, RuntimeError):
    """Mutable stream state used before initialization or inconsistently."""


class DegenerateAlignmentError(NumericError):
    """Alignment recursion collapsed (normalizer underflow)."""
