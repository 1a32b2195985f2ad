"""Fernet base tokens: AES-128-CBC + HMAC-SHA256 over a versioned layout.

Wire layout of the decoded token::

    0x80 | timestamp u64be | iv (16) | ciphertext (n*16) | hmac tag (32)

The 32-byte key splits into a signing half (first 16 bytes, HMAC) and an
encryption half (last 16 bytes, AES). The tag covers everything before it.
Serialized form is unpadded base64url.
"""

from __future__ import annotations

import hmac
import os
import struct
from dataclasses import dataclass
from hashlib import sha256
from typing import Callable

from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

from .codec import b64url_decode, b64url_encode
from .errors import (
    AuthenticityError,
    ExpiredError,
    FormatError,
    KeyGenerationError,
    SizeError,
)
from .payload import TokenPayload

__all__ = [
    "FERNET_VERSION",
    "FernetKey",
    "FernetToken",
    "gen_fernet_key",
    "fernet_issue",
    "fernet_verify",
]

FERNET_VERSION = 0x80
_BLOCK = 16
_TAG_LEN = 32
_HEADER = struct.Struct(">BQ")
# version + timestamp + iv + one cipher block + tag
_MIN_TOKEN_LEN = 1 + 8 + 16 + 16 + 32
_MAX_PAYLOAD = 0xFFFF  # keeps the message embeddable as a recursive parent


@dataclass(frozen=True)
class FernetKey:
    """A 32-byte secret split into signing and encryption halves."""

    raw: bytes

    def __post_init__(self):
        if not isinstance(self.raw, bytes) or len(self.raw) != 32:
            raise KeyGenerationError("fernet key must be exactly 32 bytes")

    @property
    def signing_half(self) -> bytes:
        return self.raw[:16]

    @property
    def encryption_half(self) -> bytes:
        return self.raw[16:]

    @classmethod
    def from_encoded(cls, text: str) -> "FernetKey":
        raw = b64url_decode(text.strip())
        if len(raw) != 32:
            raise KeyGenerationError(
                f"encoded key decodes to {len(raw)} bytes, expected 32"
            )
        return cls(raw)

    def encode(self) -> str:
        # keys keep their '=' padding; only tokens travel stripped
        import base64

        return base64.urlsafe_b64encode(self.raw).decode("ascii")


def gen_fernet_key(entropy: Callable[[int], bytes] = os.urandom) -> FernetKey:
    """Draw 32 bytes from ``entropy`` and wrap them as a key."""
    material = entropy(32)
    if not isinstance(material, (bytes, bytearray)) or len(material) < 32:
        raise KeyGenerationError("entropy source returned fewer than 32 bytes")
    return FernetKey(bytes(material[:32]))


@dataclass(frozen=True)
class FernetToken:
    """Decoded structural view of a base token."""

    timestamp: int
    iv: bytes
    ciphertext: bytes
    tag: bytes

    @property
    def message(self) -> bytes:
        """Everything the tag covers: version, timestamp, iv, ciphertext."""
        return _HEADER.pack(FERNET_VERSION, self.timestamp) + self.iv + self.ciphertext

    def to_bytes(self) -> bytes:
        return self.message + self.tag

    def encode(self) -> str:
        return b64url_encode(self.to_bytes())

    @classmethod
    def parse(cls, raw: bytes) -> "FernetToken":
        if len(raw) < _MIN_TOKEN_LEN:
            raise FormatError(
                f"fernet token of {len(raw)} bytes is shorter than {_MIN_TOKEN_LEN}",
                offset=len(raw),
            )
        if raw[0] != FERNET_VERSION:
            raise FormatError(f"bad fernet version byte 0x{raw[0]:02x}", offset=0)
        (_, timestamp) = _HEADER.unpack_from(raw)
        iv = raw[9:25]
        ciphertext = raw[25:-_TAG_LEN]
        if len(ciphertext) % _BLOCK != 0:
            raise FormatError(
                f"ciphertext length {len(ciphertext)} is not a multiple of {_BLOCK}",
                offset=25,
            )
        return cls(timestamp, iv, ciphertext, raw[-_TAG_LEN:])


def _pkcs7_pad(data: bytes) -> bytes:
    fill = _BLOCK - len(data) % _BLOCK
    return data + bytes([fill]) * fill


def _pkcs7_unpad(data: bytes) -> bytes:
    if not data:
        raise FormatError("cannot unpad empty plaintext")
    fill = data[-1]
    if not 1 <= fill <= _BLOCK or data[-fill:] != bytes([fill]) * fill:
        raise FormatError("invalid block padding")
    return data[:-fill]


def _aes_cbc(key: bytes, iv: bytes):
    return Cipher(algorithms.AES(key), modes.CBC(iv))


def fernet_issue(key: FernetKey, payload: TokenPayload, now: int, iv: bytes) -> str:
    """Seal ``payload`` under ``key`` and return the serialized token.

    The caller supplies the clock and the IV so issuance is deterministic
    and testable; production callers pass ``os.urandom(16)``.
    """
    if len(iv) != 16:
        raise FormatError(f"iv must be 16 bytes, got {len(iv)}")
    plaintext = payload.serialize()
    if len(plaintext) > _MAX_PAYLOAD:
        raise SizeError(f"payload of {len(plaintext)} bytes exceeds {_MAX_PAYLOAD}")
    if payload.expires_at <= now:
        raise ExpiredError("payload expiry is not in the future", depth=0)
    encryptor = _aes_cbc(key.encryption_half, iv).encryptor()
    ciphertext = encryptor.update(_pkcs7_pad(plaintext)) + encryptor.finalize()
    message = _HEADER.pack(FERNET_VERSION, int(now)) + iv + ciphertext
    tag = hmac.new(key.signing_half, message, sha256).digest()
    return b64url_encode(message + tag)


def _verify_decoded(key: FernetKey, raw: bytes, now: int) -> TokenPayload:
    token = FernetToken.parse(raw)
    expected = hmac.new(key.signing_half, token.message, sha256).digest()
    if not hmac.compare_digest(expected, token.tag):
        raise AuthenticityError("fernet tag mismatch")
    decryptor = _aes_cbc(key.encryption_half, token.iv).decryptor()
    plaintext = _pkcs7_unpad(decryptor.update(token.ciphertext) + decryptor.finalize())
    payload = TokenPayload.deserialize(plaintext)
    if payload.expires_at <= now:
        raise ExpiredError("base payload expired", depth=0)
    return payload


def fernet_verify(key: FernetKey, token: str, now: int) -> TokenPayload:
    """Check authenticity then expiry; return the sealed payload.

    Raises FormatError, AuthenticityError or ExpiredError.
    """
    return _verify_decoded(key, b64url_decode(token), now)
