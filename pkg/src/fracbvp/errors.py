"""Exception hierarchy.

Every error raised on purpose by the package derives from :class:`FracBVPError`
and carries an ``exit_code`` used by the command-line front end.
"""

from __future__ import annotations


class FracBVPError(Exception):
    """Base class for all package errors."""

    exit_code = 5


class DomainError(FracBVPError, ValueError):
    """An argument lies outside the domain of an operation."""


class ResolutionError(FracBVPError):
    """A sampled function is too coarse for the requested operation."""


class ContractError(FracBVPError):
    """A required input channel or invariant is missing."""


class QuadratureError(FracBVPError):
    """Numerical integration failed."""


class QuadratureBudgetError(QuadratureError):
    """The node budget was exhausted before reaching the tolerance."""

    def __init__(self, message: str, estimate: float, error_estimate: float):
        super().__init__(message)
        self.estimate = estimate
        self.error_estimate = error_estimate


class ParseError(FracBVPError):
    """A problem document is malformed."""

    exit_code = 2

    def __init__(self, message: str, location: str | None = None):
        self.location = location
        if location:
            message = f"{location}: {message}"
        super().__init__(message)


class AdmissibilityError(FracBVPError):
    """The problem violates one of the standing hypotheses on ``h`` or ``f``."""

    exit_code = 2


class CertificateError(FracBVPError):
    """A certificate could not be constructed or failed verification."""

    exit_code = 4


class PreconditionError(CertificateError):
    """The nonlinearity is not in the growth class an operation requires."""


class AsymptoteNotDetected(CertificateError):
    """A threshold scan reached its cap without seeing the expected tail."""

    def __init__(self, message: str, cap: float):
        super().__init__(f"{message} (scan cap {cap:g})")
        self.cap = cap


class NonconvergenceError(FracBVPError):
    """The fixed-point iteration did not converge; ``report`` holds diagnostics."""

    exit_code = 3

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report
