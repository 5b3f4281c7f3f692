class LabError(Exception):
    """Base class of every error raised by fbm_lab."""


class DomainError(LabError, ValueError):
    """An argument lies outside the domain of an operation."""


class RegimeError(DomainError):
    """The model parameters violate a regime condition (Hd < 1 or Hd < p*)."""


class MembershipError(DomainError):
    """A function does not meet the sufficient condition for RKHS membership."""


class SizeLimitError(LabError, ValueError):
    """A grid or a problem size exceeds the enforced cost limits."""


class NonPSDError(LabError, ArithmeticError):
    """A covariance matrix could not be factorized, even with jitter."""
