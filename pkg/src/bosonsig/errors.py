"""Exception types shared across the package."""


class BosonSigError(Exception):
    """Base class for package errors."""


class InvalidArgument(BosonSigError, ValueError):
    """An argument violates an operation's precondition."""


class SizeLimitError(InvalidArgument):
    """A request exceeds a hard size guard (e.g. permanent order)."""


class FormatError(BosonSigError, ValueError):
    """A file or record does not match its schema."""


class InconsistencyError(BosonSigError, RuntimeError):
    """Internal invariant violated by the data being processed."""
