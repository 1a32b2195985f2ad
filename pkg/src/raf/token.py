"""Recursive augmented tokens: one-time, command-carrying children of a
Fernet base token.

Each layer embeds its parent's message (never the parent's tag) plus an
expiry, an 8-byte randomizer and a command::

    0x91 | len(parent) u16be | parent message | expires u64be | rand (8) | command

followed by a 32-byte HMAC-SHA256 tag over the whole message. Two tying
disciplines share this layout and differ only in how layer tags are keyed:

* user-tied: the key for layer j is the first 16 bytes of layer j-1's tag
  (the root key being the first 16 bytes of the Fernet token's tag), so
  holding a token is enough to derive children from it;
* fully-tied: depth 1 works exactly as user-tied, but every deeper layer
  is MACed under the key of the service that owns its command, with the
  parent tag appended to the MAC input, so derivation requires the
  service key.

``tag_bytes`` below is a harness-only knob that truncates recursive-layer
tags for forgery-rate experiments; the service layer never threads it
through, so deployments always run at the full 32 bytes.
"""

from __future__ import annotations

import enum
import hmac
import struct
from dataclasses import dataclass
from hashlib import sha256

from .codec import b64url_decode, b64url_encode
from .errors import (
    AuthenticityError,
    DepthError,
    ExpiredError,
    FormatError,
    KeyLookupError,
    SizeError,
)
from .fernet import FERNET_VERSION, FernetKey, _verify_decoded
from .payload import TokenPayload
from .policy import PolicyRuleSet, find_service_key

__all__ = [
    "RAF_VERSION",
    "TAG_LEN",
    "DEFAULT_MAX_DEPTH",
    "Variant",
    "RafLayer",
    "CommandChain",
    "ServiceKeySet",
    "is_raf",
    "user_issue",
    "service_issue_ut",
    "service_issue_ft",
    "verify_ut",
    "verify_ft",
    "extract_base_raf",
]

RAF_VERSION = 0x91
TAG_LEN = 32
DEFAULT_MAX_DEPTH = 16
_PREFIX = struct.Struct(">BH")
_U64 = struct.Struct(">Q")
_RAND_LEN = 8
_HEADER_LEN = 19  # version + parent length + expiry + randomizer
_MAX_PARENT = 0xFFFF


class Variant(str, enum.Enum):
    USER_TIED = "user-tied"
    FULLY_TIED = "fully-tied"


@dataclass(frozen=True)
class RafLayer:
    """Structural view of one decoded recursive layer."""

    message: bytes
    parent: bytes
    expires_at: int
    randomizer: bytes
    command: bytes


@dataclass(frozen=True)
class CommandChain:
    """Verification output: the full command history of a token.

    ``commands`` is ordered base-first (index 0 is the user's own command);
    ``effective_expiry`` is the minimum over every layer and the root
    payload, so verification at any time >= it always fails.
    """

    root_message: bytes
    commands: tuple[bytes, ...]
    effective_expiry: int
    root_payload: TokenPayload

    @property
    def depth(self) -> int:
        return len(self.commands)


@dataclass(frozen=True)
class ServiceKeySet:
    """Ordered key material for a fully-tied deployment.

    ``keys[0]`` is the identity root (the raw 32-byte Fernet key); the
    rest are per-service MAC secrets addressed by the policy's key_index.
    """

    keys: tuple[bytes, ...]

    def __post_init__(self):
        if not self.keys:
            raise KeyLookupError("key set is empty")
        for i, key in enumerate(self.keys):
            if not isinstance(key, bytes) or len(key) != 32:
                raise KeyLookupError(f"key {i} must be exactly 32 bytes")

    @classmethod
    def assemble(cls, root: FernetKey, service_keys) -> "ServiceKeySet":
        return cls((root.raw, *service_keys))

    @property
    def root_key(self) -> FernetKey:
        return FernetKey(self.keys[0])

    def key(self, index: int) -> bytes:
        if not 0 <= index < len(self.keys):
            raise KeyLookupError(f"key index {index} outside 0..{len(self.keys) - 1}")
        return self.keys[index]


def _coerce_command(command: bytes | str) -> bytes:
    return command.encode("utf-8") if isinstance(command, str) else bytes(command)


def _decode_token(token: str | bytes) -> bytes:
    raw = b64url_decode(token)
    if not raw:
        raise FormatError("empty token", offset=0)
    return raw


def is_raf(token: str | bytes) -> bool:
    """True when the serialized token is a recursive token (not bare Fernet)."""
    return _decode_token(token)[0] == RAF_VERSION


def _parse_layer(message: bytes) -> RafLayer:
    if len(message) < _PREFIX.size:
        raise FormatError(
            f"layer truncated at offset {len(message)}: header needs 3 bytes",
            offset=len(message),
        )
    _, parent_len = _PREFIX.unpack_from(message)
    end_of_fixed = _HEADER_LEN + parent_len
    if len(message) < end_of_fixed:
        raise FormatError(
            f"layer truncated at offset {len(message)}: "
            f"parent of {parent_len} bytes plus header needs {end_of_fixed}",
            offset=len(message),
        )
    parent = message[3 : 3 + parent_len]
    if not parent:
        raise FormatError("layer has an empty parent message", offset=3)
    (expires_at,) = _U64.unpack_from(message, 3 + parent_len)
    randomizer = message[11 + parent_len : 19 + parent_len]
    command = message[end_of_fixed:]
    return RafLayer(message, parent, expires_at, randomizer, command)


def _peel(message: bytes, max_depth: int) -> tuple[list[RafLayer], bytes]:
    """Unnest layers outermost-first down to the Fernet root message."""
    layers: list[RafLayer] = []
    current = message
    while True:
        version = current[0]
        if version == RAF_VERSION:
            if len(layers) >= max_depth:
                raise DepthError(f"token nests deeper than max depth {max_depth}")
            layer = _parse_layer(current)
            layers.append(layer)
            current = layer.parent
        elif version == FERNET_VERSION:
            return layers, current
        else:
            raise FormatError(
                f"unknown version byte 0x{version:02x} under {len(layers)} layers",
                offset=0,
            )


def _split_message_tag(raw: bytes, tag_bytes: int) -> tuple[bytes, bytes]:
    if len(raw) <= tag_bytes:
        raise FormatError(
            f"token of {len(raw)} bytes cannot carry a {tag_bytes}-byte tag",
            offset=len(raw),
        )
    message, tag = raw[:-tag_bytes], raw[-tag_bytes:]
    if message[0] != RAF_VERSION:
        raise FormatError(f"not a recursive token: version 0x{message[0]:02x}", offset=0)
    return message, tag


def _build_message(
    parent_message: bytes,
    command: bytes,
    lifetime: int,
    now: int,
    randomizer: bytes,
) -> bytes:
    if len(parent_message) > _MAX_PARENT:
        raise SizeError(
            f"parent message of {len(parent_message)} bytes exceeds {_MAX_PARENT}"
        )
    if lifetime <= 0:
        raise ValueError("lifetime must be positive")
    if len(randomizer) != _RAND_LEN:
        raise FormatError(f"randomizer must be {_RAND_LEN} bytes, got {len(randomizer)}")
    return (
        _PREFIX.pack(RAF_VERSION, len(parent_message))
        + parent_message
        + _U64.pack(int(now) + int(lifetime))
        + randomizer
        + command
    )


def _mac(key: bytes, data: bytes, tag_bytes: int) -> bytes:
    return hmac.new(key, data, sha256).digest()[:tag_bytes]


def user_issue(
    parent: str | bytes,
    command: bytes | str,
    lifetime: int,
    now: int,
    randomizer: bytes,
    *,
    tag_bytes: int = TAG_LEN,
) -> str:
    """Derive a depth-1 token from one's own Fernet token.

    Needs no key: the signing key is the first 16 bytes of the parent's
    tag, which the token holder possesses by definition.
    """
    raw = _decode_token(parent)
    if raw[0] != FERNET_VERSION:
        raise FormatError(
            f"user issuance requires a fernet parent, got version 0x{raw[0]:02x}",
            offset=0,
        )
    if len(raw) <= TAG_LEN:
        raise FormatError("fernet parent shorter than its tag", offset=len(raw))
    parent_message, parent_tag = raw[:-TAG_LEN], raw[-TAG_LEN:]
    message = _build_message(parent_message, _coerce_command(command), lifetime, now, randomizer)
    return b64url_encode(message + _mac(parent_tag[:16], message, tag_bytes))


def service_issue_ut(
    parent: str | bytes,
    command: bytes | str,
    lifetime: int,
    now: int,
    randomizer: bytes,
    *,
    verify_key: FernetKey | None = None,
    max_depth: int = DEFAULT_MAX_DEPTH,
    tag_bytes: int = TAG_LEN,
) -> str:
    """Derive a child from a user-tied token.

    Possession of the parent is sufficient; passing ``verify_key`` enables
    the optional verification gate (off in deployments, where services do
    not hold the root key).
    """
    if verify_key is not None:
        verify_ut(verify_key, parent, now, max_depth=max_depth, tag_bytes=tag_bytes)
    raw = _decode_token(parent)
    message_part, parent_tag = _split_message_tag(raw, tag_bytes)
    message = _build_message(message_part, _coerce_command(command), lifetime, now, randomizer)
    return b64url_encode(message + _mac(parent_tag[:16], message, tag_bytes))


def service_issue_ft(
    service_index: int,
    keys: ServiceKeySet,
    routing: PolicyRuleSet,
    parent: str | bytes,
    command: bytes | str,
    lifetime: int,
    now: int,
    randomizer: bytes,
    *,
    max_depth: int = DEFAULT_MAX_DEPTH,
    tag_bytes: int = TAG_LEN,
) -> str:
    """Derive a child under a service's own key (fully-tied discipline).

    The parent is verified first: a fully-tied service holds the key set,
    so the verification gate is always on. The parent tag is appended to
    the MAC input rather than embedded in the message.
    """
    if service_index < 1:
        raise KeyLookupError("service keys start at index 1; 0 is the identity root")
    signing_key = keys.key(service_index)
    verify_ft(keys, routing, parent, now, max_depth=max_depth, tag_bytes=tag_bytes)
    raw = _decode_token(parent)
    message_part, parent_tag = _split_message_tag(raw, tag_bytes)
    message = _build_message(message_part, _coerce_command(command), lifetime, now, randomizer)
    return b64url_encode(message + _mac(signing_key, message + parent_tag, tag_bytes))


def _peel_and_check_expiry(
    raw: bytes, now: int, max_depth: int, tag_bytes: int
) -> tuple[list[RafLayer], bytes, bytes]:
    message, tag = _split_message_tag(raw, tag_bytes)
    layers, root = _peel(message, max_depth)
    depth = len(layers)
    for i, layer in enumerate(layers):
        if layer.expires_at <= now:
            raise ExpiredError(
                f"layer {depth - i} expired at {layer.expires_at}", depth=depth - i
            )
    return layers, root, tag


def _finish_chain(
    key: FernetKey,
    layers: list[RafLayer],
    root: bytes,
    root_tag: bytes,
    now: int,
) -> CommandChain:
    payload = _verify_decoded(key, root + root_tag, now)
    commands = tuple(layer.command for layer in reversed(layers))
    effective = min([payload.expires_at] + [layer.expires_at for layer in layers])
    return CommandChain(
        root_message=root,
        commands=commands,
        effective_expiry=effective,
        root_payload=payload,
    )


def verify_ut(
    key: FernetKey,
    token: str | bytes,
    now: int,
    *,
    max_depth: int = DEFAULT_MAX_DEPTH,
    tag_bytes: int = TAG_LEN,
) -> CommandChain:
    """Verify a user-tied token bottom-up and return its command chain.

    Raises FormatError, DepthError, ExpiredError or AuthenticityError.
    """
    raw = _decode_token(token)
    layers, root, tag = _peel_and_check_expiry(raw, now, max_depth, tag_bytes)
    root_tag = hmac.new(key.signing_half, root, sha256).digest()
    chain_key = root_tag[:16]
    computed = b""
    for layer in reversed(layers):
        computed = _mac(chain_key, layer.message, tag_bytes)
        chain_key = computed[:16]
    if not hmac.compare_digest(computed, tag):
        raise AuthenticityError("recursive tag mismatch")
    return _finish_chain(key, layers, root, root_tag, now)


def verify_ft(
    keys: ServiceKeySet,
    routing: PolicyRuleSet,
    token: str | bytes,
    now: int,
    *,
    max_depth: int = DEFAULT_MAX_DEPTH,
    tag_bytes: int = TAG_LEN,
) -> CommandChain:
    """Verify a fully-tied token bottom-up and return its command chain.

    Commands above depth 1 are routed to their owning service's key; an
    unroutable command fails verification with RoutingError.
    """
    raw = _decode_token(token)
    layers, root, tag = _peel_and_check_expiry(raw, now, max_depth, tag_bytes)
    root_key = keys.root_key
    previous = hmac.new(root_key.signing_half, root, sha256).digest()
    root_tag = previous
    computed = b""
    for depth, layer in enumerate(reversed(layers), start=1):
        if depth == 1:
            computed = _mac(previous[:16], layer.message, tag_bytes)
        else:
            service_key = keys.key(find_service_key(routing, layer.command))
            computed = _mac(service_key, layer.message + previous, tag_bytes)
        previous = computed
    if not hmac.compare_digest(computed, tag):
        raise AuthenticityError("recursive tag mismatch")
    return _finish_chain(root_key, layers, root, root_tag, now)


def extract_base_raf(
    token: str | bytes,
    *,
    max_depth: int = DEFAULT_MAX_DEPTH,
    tag_bytes: int = TAG_LEN,
) -> tuple[bytes, int]:
    """Identify the innermost recursive layer without verifying anything.

    Returns (sha256 of the base layer's message, its expiry): the
    replay-prevention identity of every token derived from that base.
    """
    raw = _decode_token(token)
    message, _ = _split_message_tag(raw, tag_bytes)
    layers, _root = _peel(message, max_depth)
    base = layers[-1]
    return sha256(base.message).digest(), base.expires_at
