"""Exception hierarchy shared by every module.

The CLI maps these onto exit codes, so the split matters: bad inputs are
``ValidationError`` (exit 2), closed forms asked to work outside the regime
where their filter is valid are ``RegimeError`` (exit 3), and a filter that
fails its own achievability check is ``CertificateError`` (exit 1).
"""


class PrivGuessError(Exception):
    """Base class for all library errors."""


class ValidationError(PrivGuessError, ValueError):
    """An input violates a documented precondition."""


class DomainError(ValidationError):
    """A privacy threshold lies outside the domain of the tradeoff function."""


class RegimeError(PrivGuessError):
    """A closed form was evaluated outside the regime where it is certified."""


class CertificateError(PrivGuessError, AssertionError):
    """A constructed filter did not reproduce its claimed (privacy, utility)."""
