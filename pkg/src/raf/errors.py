"""Exception hierarchy shared across the package.

Every failure a verifier can produce maps to one of these classes so that
callers (the HTTP service, the CLI, the game harness) can dispatch on the
kind of failure without string matching.
"""

from __future__ import annotations

__all__ = [
    "TokenError",
    "FormatError",
    "AuthenticityError",
    "ExpiredError",
    "SizeError",
    "DepthError",
    "KeyGenerationError",
    "RoutingError",
    "KeyLookupError",
    "PolicyConfigError",
    "BlacklistUnavailableError",
]


class TokenError(Exception):
    """Base class for every token processing failure."""


class FormatError(TokenError):
    """Token bytes do not parse: bad version, bad base64, truncation, bad padding.

    ``offset`` is the byte position where parsing gave up, when known.
    """

    def __init__(self, message: str, offset: int | None = None):
        super().__init__(message)
        self.offset = offset


class AuthenticityError(TokenError):
    """A MAC tag does not match the recomputed value."""


class ExpiredError(TokenError):
    """A token layer's expiry is not in the future.

    ``depth`` names the offending layer: 0 is the root payload, 1 the
    innermost recursive layer, and so on outward.
    """

    def __init__(self, message: str, depth: int = 0):
        super().__init__(message)
        self.depth = depth


class SizeError(TokenError):
    """A field exceeds the bounds the wire format can carry."""


class DepthError(TokenError):
    """Recursion depth exceeds the configured maximum."""


class KeyGenerationError(TokenError):
    """The entropy source failed to deliver enough key material."""


class RoutingError(TokenError):
    """No service route matches a command's endpoint path."""


class KeyLookupError(TokenError):
    """A key index is outside the configured key set."""


class PolicyConfigError(Exception):
    """A policy document failed to load or validate."""


class BlacklistUnavailableError(Exception):
    """The replay store cannot currently answer; callers must fail closed."""
