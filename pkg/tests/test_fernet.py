from __future__ import annotations

import base64
import hmac
from hashlib import sha256

import pytest
from cryptography.fernet import Fernet

from raf.codec import b64url_decode, b64url_encode, restore_padding
from raf.errors import (
    AuthenticityError,
    ExpiredError,
    FormatError,
    KeyGenerationError,
    SizeError,
)
from raf.fernet import FernetKey, FernetToken, fernet_issue, fernet_verify, gen_fernet_key
from raf.payload import TokenPayload
from tests.conftest import NOW

# Expected output for key=bytes(range(32)), iv=bytes(range(16)), now=NOW and the
# shared payload fixture. Frozen after checking that the independent Fernet
# implementation in `cryptography` decrypts it to the same payload bytes; the
# live check below re-establishes that on every run.
FROZEN_TOKEN = (
    "gAAAAABlU_EAAAECAwQFBgcICQoLDA0ODznLTSqHiFGlTQ-IMRLV1VzJY1AOGc-Z5jcEyFYU"
    "1Itt674xaDYWSxVEwc0TUNnFQDOUzkKGYKxoB5l2qpyUSSjlXakHlEGoLEjExwrCFso6"
)


def _reference_fernet(key: FernetKey) -> Fernet:
    return Fernet(base64.urlsafe_b64encode(key.raw))


def test_issue_matches_frozen_token(key, payload):
    assert fernet_issue(key, payload, NOW, bytes(range(16))) == FROZEN_TOKEN


def test_reference_implementation_accepts_our_token(key, payload, fernet_token):
    plaintext = _reference_fernet(key).decrypt(restore_padding(fernet_token).encode())
    assert plaintext == payload.serialize()


def test_we_accept_reference_implementation_token(key, payload):
    theirs = _reference_fernet(key).encrypt_at_time(payload.serialize(), NOW).decode()
    assert fernet_verify(key, theirs, NOW) == payload


def test_layout(key, fernet_token):
    raw = b64url_decode(fernet_token)
    assert raw[0] == 0x80
    assert int.from_bytes(raw[1:9], "big") == NOW
    assert raw[9:25] == bytes(range(16))
    assert len(raw[25:-32]) % 16 == 0
    # tag covers everything before it, under the first half of the key
    assert raw[-32:] == hmac.new(key.raw[:16], raw[:-32], sha256).digest()


def test_serialization_has_no_padding(fernet_token):
    assert "=" not in fernet_token


def test_issue_is_deterministic(key, payload):
    a = fernet_issue(key, payload, NOW, b"\xaa" * 16)
    b = fernet_issue(key, payload, NOW, b"\xaa" * 16)
    assert a == b


def test_round_trip(key, payload, fernet_token):
    assert fernet_verify(key, fernet_token, NOW) == payload


def test_key_halves():
    key = FernetKey(bytes(range(32)))
    assert key.signing_half == bytes(range(16))
    assert key.encryption_half == bytes(range(16, 32))
    assert len(key.encode()) == 44
    assert FernetKey.from_encoded(key.encode()) == key


def test_gen_key_uses_entropy_source():
    key = gen_fernet_key(lambda n: b"\x42" * n)
    assert key.raw == b"\x42" * 32


def test_gen_key_entropy_failure():
    with pytest.raises(KeyGenerationError):
        gen_fernet_key(lambda n: b"\x00" * 5)


def test_wrong_size_key_rejected():
    with pytest.raises(KeyGenerationError):
        FernetKey(b"\x00" * 31)
    with pytest.raises(KeyGenerationError):
        FernetKey.from_encoded(b64url_encode(b"\x00" * 16))


def test_bit_flip_sweep_rejects_every_position(key, fernet_token):
    # exhaustive single-bit tamper over the decoded token
    raw = bytearray(b64url_decode(fernet_token))
    for i in range(len(raw)):
        for bit in range(8):
            raw[i] ^= 1 << bit
            with pytest.raises((FormatError, AuthenticityError, ExpiredError)):
                fernet_verify(key, b64url_encode(bytes(raw)), NOW)
            raw[i] ^= 1 << bit
    # untouched token still verifies
    fernet_verify(key, b64url_encode(bytes(raw)), NOW)


def test_tag_covers_timestamp(key, fernet_token):
    raw = bytearray(b64url_decode(fernet_token))
    raw[5] ^= 0xFF
    with pytest.raises(AuthenticityError):
        fernet_verify(key, b64url_encode(bytes(raw)), NOW)


def test_wrong_key_rejected(fernet_token):
    with pytest.raises(AuthenticityError):
        fernet_verify(FernetKey(b"\x07" * 32), fernet_token, NOW)


def test_expired_payload(key, payload, fernet_token):
    with pytest.raises(ExpiredError) as err:
        fernet_verify(key, fernet_token, payload.expires_at)
    assert err.value.depth == 0


def test_expiry_boundary_is_strict(key, payload, fernet_token):
    # valid strictly before expiry, invalid at and after it
    assert fernet_verify(key, fernet_token, payload.expires_at - 1) == payload
    with pytest.raises(ExpiredError):
        fernet_verify(key, fernet_token, payload.expires_at + 1)


def test_issue_rejects_non_future_expiry(key, payload):
    with pytest.raises(ExpiredError):
        fernet_issue(key, payload, payload.expires_at, bytes(16))


def test_issue_rejects_bad_iv(key, payload):
    with pytest.raises(FormatError):
        fernet_issue(key, payload, NOW, b"\x00" * 15)


def test_issue_rejects_oversized_payload(key, now):
    big = TokenPayload("u" * 60_000, "p" * 10_000, ("m",), now + 10, "")
    with pytest.raises(SizeError):
        fernet_issue(key, big, now, bytes(16))


def test_verify_rejects_bad_version(key, fernet_token):
    raw = bytearray(b64url_decode(fernet_token))
    raw[0] = 0x81
    with pytest.raises(FormatError):
        fernet_verify(key, b64url_encode(bytes(raw)), NOW)


def test_verify_rejects_truncated_token(key, fernet_token):
    raw = b64url_decode(fernet_token)
    with pytest.raises(FormatError):
        fernet_verify(key, b64url_encode(raw[:40]), NOW)


def test_verify_rejects_ragged_ciphertext(key, fernet_token):
    raw = b64url_decode(fernet_token)
    clipped = raw[:-32][:-3] + raw[-32:]
    with pytest.raises(FormatError):
        fernet_verify(key, b64url_encode(clipped), NOW)


def test_parse_round_trip(fernet_token):
    raw = b64url_decode(fernet_token)
    token = FernetToken.parse(raw)
    assert token.to_bytes() == raw
    assert token.encode() == fernet_token
