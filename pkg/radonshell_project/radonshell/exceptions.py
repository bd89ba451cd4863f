"""
Exception hierarchy shared by the numerical modules and the harness.
"""


class RadonShellError(Exception):
    """Base class for every error raised by radonshell."""


class InvalidInputError(RadonShellError, ValueError):
    """Arguments violate an operation's preconditions."""


class DegenerateGeometryError(RadonShellError):
    """A configuration lacks the affine hull an operation needs."""


class UnsupportedDimensionError(InvalidInputError):
    """The ambient dimension is outside what an operation supports."""
