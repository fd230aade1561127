from typing import Any


class SdpError(Exception):
    """Base class for every error raised by this package."""


class InvalidInput(SdpError, ValueError):
    """
    Input violates a precondition: wrong dimensions, non-finite entries,
    parameters out of range or an unsupported instance family.
    """


class ParseError(SdpError):
    """A file or document could not be parsed."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class Infeasible(SdpError):
    """The primal problem appears to be infeasible."""


class Unbounded(SdpError):
    """The primal objective appears to be unbounded below."""


class NumericalBreakdown(SdpError):
    """A factorization failed or an iterate left its manifold."""


class CertificateFailure(SdpError):
    """A dual certificate construction did not contract."""

    def __init__(self, message: str, diagnostics: dict[str, Any] | None = None):
        self.diagnostics = diagnostics or {}
        super().__init__(message)


class DegenerateInputWarning(UserWarning):
    """Rank estimates are not trustworthy at the accuracy of the given solution."""
