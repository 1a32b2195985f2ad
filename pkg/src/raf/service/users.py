"""Flat-file credential store with salted password hashes.

One record per line::

    username:domain:project:user_id:project_id:iterations:salt_hex:hash_hex

Blank lines and ``#`` comments are skipped. Hashes are PBKDF2-HMAC-SHA256;
authentication compares digests in constant time.
"""

from __future__ import annotations

import hashlib
import hmac
import os
from dataclasses import dataclass
from pathlib import Path

__all__ = ["UserRecord", "UserStore", "hash_password", "make_user_line"]

DEFAULT_ITERATIONS = 100_000
_FIELDS = 8


def hash_password(password: str, salt: bytes, iterations: int = DEFAULT_ITERATIONS) -> bytes:
    return hashlib.pbkdf2_hmac("sha256", password.encode("utf-8"), salt, iterations)


def make_user_line(
    username: str,
    password: str,
    domain: str,
    project_name: str,
    user_id: str,
    project_id: str,
    iterations: int = DEFAULT_ITERATIONS,
    salt: bytes | None = None,
) -> str:
    """Render one store line for the given credential."""
    for field in (username, domain, project_name, user_id, project_id):
        if ":" in field:
            raise ValueError(f"field may not contain ':': {field!r}")
    salt = os.urandom(16) if salt is None else salt
    digest = hash_password(password, salt, iterations)
    return ":".join(
        [username, domain, project_name, user_id, project_id, str(iterations), salt.hex(), digest.hex()]
    )


@dataclass(frozen=True)
class UserRecord:
    username: str
    domain: str
    project_name: str
    user_id: str
    project_id: str
    iterations: int
    salt: bytes
    pw_hash: bytes


class UserStore:
    def __init__(self, records: list[UserRecord]):
        self._records = {(r.username, r.domain, r.project_name): r for r in records}

    @classmethod
    def load(cls, path: str | Path) -> "UserStore":
        records = []
        with open(path, "r", encoding="utf-8") as handle:
            for lineno, line in enumerate(handle, start=1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                parts = line.split(":")
                if len(parts) != _FIELDS:
                    raise ValueError(f"{path}:{lineno}: expected {_FIELDS} fields, got {len(parts)}")
                username, domain, project, user_id, project_id, iters, salt, digest = parts
                records.append(
                    UserRecord(
                        username,
                        domain,
                        project,
                        user_id,
                        project_id,
                        int(iters),
                        bytes.fromhex(salt),
                        bytes.fromhex(digest),
                    )
                )
        return cls(records)

    def authenticate(
        self, username: str, password: str, domain: str, project_name: str
    ) -> UserRecord | None:
        record = self._records.get((username, domain, project_name))
        if record is None:
            return None
        candidate = hash_password(password, record.salt, record.iterations)
        if not hmac.compare_digest(candidate, record.pw_hash):
            return None
        return record

    def __len__(self) -> int:
        return len(self._records)
