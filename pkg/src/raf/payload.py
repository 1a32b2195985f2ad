"""Canonical binary encoding of the identity payload carried by base tokens.

The record is length-prefixed and fixed-order (user_id, project_id,
methods, expires_at, audit_id), so any two distinct payloads serialize to
distinct byte strings and decoding is exact: trailing bytes are rejected.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

from .errors import FormatError, SizeError

__all__ = ["TokenPayload"]

_U16 = struct.Struct(">H")
_U64 = struct.Struct(">Q")
_MAX_FIELD = 0xFFFF


def _pack_str(value: str) -> bytes:
    raw = value.encode("utf-8")
    if len(raw) > _MAX_FIELD:
        raise SizeError(f"string field of {len(raw)} bytes exceeds {_MAX_FIELD}")
    return _U16.pack(len(raw)) + raw


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise FormatError(
                f"payload truncated at offset {self.pos}: need {n} more bytes",
                offset=self.pos,
            )
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def take_str(self) -> str:
        (length,) = _U16.unpack(self.take(2))
        raw = self.take(length)
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FormatError(f"payload field is not utf-8: {exc}") from exc


@dataclass(frozen=True)
class TokenPayload:
    """Identity attributes sealed inside a base token."""

    user_id: str
    project_id: str
    methods: tuple[str, ...] = field(default=("password",))
    expires_at: int = 0
    audit_id: str = ""

    def __post_init__(self):
        # dataclass field order is also the wire order
        object.__setattr__(self, "methods", tuple(self.methods))
        if not 0 <= int(self.expires_at) <= 0xFFFFFFFFFFFFFFFF:
            raise SizeError("expires_at outside unsigned 64-bit range")

    def serialize(self) -> bytes:
        if len(self.methods) > _MAX_FIELD:
            raise SizeError("too many methods")
        parts = [_pack_str(self.user_id), _pack_str(self.project_id)]
        parts.append(_U16.pack(len(self.methods)))
        parts.extend(_pack_str(m) for m in self.methods)
        parts.append(_U64.pack(int(self.expires_at)))
        parts.append(_pack_str(self.audit_id))
        return b"".join(parts)

    @classmethod
    def deserialize(cls, data: bytes) -> "TokenPayload":
        reader = _Reader(data)
        user_id = reader.take_str()
        project_id = reader.take_str()
        (count,) = _U16.unpack(reader.take(2))
        methods = tuple(reader.take_str() for _ in range(count))
        (expires_at,) = _U64.unpack(reader.take(8))
        audit_id = reader.take_str()
        if reader.pos != len(data):
            raise FormatError(
                f"{len(data) - reader.pos} trailing bytes after payload",
                offset=reader.pos,
            )
        return cls(user_id, project_id, methods, expires_at, audit_id)
