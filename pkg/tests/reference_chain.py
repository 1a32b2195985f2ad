"""Test-local reference construction of recursive token chains.

Straight-line struct/hmac code, deliberately independent of the package
internals: nothing here is imported from ``raf``. Tests freeze digests of
this construction and require the package to reproduce them byte for byte.

Layer layout::

    0x91 | len(parent) u16be | parent message | expires u64be | rand (8) | command

User-tied chain: tag_0 = HMAC(fernet_signing_half, root_message); each
layer is MACed under the first 16 bytes of the previous tag. Fully-tied:
depth 1 as user-tied; deeper layers are MACed under the owning service's
key with the previous tag appended to the MAC input.
"""

from __future__ import annotations

import hmac
import struct
from hashlib import sha256


def layer_message(parent_message: bytes, expires_at: int, randomizer: bytes, command: bytes) -> bytes:
    return (
        struct.pack(">BH", 0x91, len(parent_message))
        + parent_message
        + struct.pack(">Q", expires_at)
        + randomizer
        + command
    )


def user_tied_chain(fernet_key_raw: bytes, root_message: bytes, steps) -> bytes:
    """steps: [(expires_at, randomizer, command)] innermost first.

    Returns the decoded outer token: message plus 32-byte tag.
    """
    tag = hmac.new(fernet_key_raw[:16], root_message, sha256).digest()
    message = root_message
    for expires_at, randomizer, command in steps:
        key = tag[:16]
        message = layer_message(message, expires_at, randomizer, command)
        tag = hmac.new(key, message, sha256).digest()
    return message + tag


def fully_tied_chain(fernet_key_raw: bytes, root_message: bytes, steps) -> bytes:
    """steps: [(expires_at, randomizer, command, service_key_or_None)].

    service key None means depth 1 (derived key, no tag appended).
    """
    tag = hmac.new(fernet_key_raw[:16], root_message, sha256).digest()
    message = root_message
    for expires_at, randomizer, command, service_key in steps:
        message = layer_message(message, expires_at, randomizer, command)
        if service_key is None:
            tag = hmac.new(tag[:16], message, sha256).digest()
        else:
            tag = hmac.new(service_key, message + tag, sha256).digest()
    return message + tag
