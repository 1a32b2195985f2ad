"""Base64url serialization helpers.

Tokens travel as unpadded url-safe base64 text; key files keep their
padding. ``restore_padding`` reverses the stripping before decoding.
"""

from __future__ import annotations

import base64
import binascii

from .errors import FormatError

__all__ = ["restore_padding", "b64url_encode", "b64url_decode"]


def restore_padding(token: str) -> str:
    """Re-append the '=' padding stripped from a base64url string.

    If the length is already a multiple of four the input is returned
    unchanged.
    """
    remainder = len(token) % 4
    if remainder:
        token += "=" * (4 - remainder)
    return token


def b64url_encode(data: bytes) -> str:
    """Serialize bytes as unpadded url-safe base64 text."""
    return base64.urlsafe_b64encode(data).rstrip(b"=").decode("ascii")


def b64url_decode(text: str | bytes) -> bytes:
    """Decode url-safe base64 text, padded or not. Strict alphabet."""
    if isinstance(text, bytes):
        try:
            text = text.decode("ascii")
        except UnicodeDecodeError as exc:
            raise FormatError(f"token is not ascii: {exc}") from exc
    padded = restore_padding(text)
    try:
        return base64.b64decode(padded.encode("ascii"), altchars=b"-_", validate=True)
    except (binascii.Error, ValueError) as exc:
        raise FormatError(f"invalid base64url data: {exc}") from exc
