"""Replay prevention: an at-most-once admission store.

Admission is keyed by (base token digest, caller service), so one base
token buys exactly one use per service. Entries die with the base token's
expiry; expired entries never block a fresh admission. ``check_and_insert``
is linearizable: for concurrent identical calls exactly one wins.

The store is in-memory with an optional append-only journal. Journal
write failures surface as BlacklistUnavailableError so the caller can
fail closed rather than admit a possible replay.
"""

from __future__ import annotations

import enum
import json
import threading
from dataclasses import dataclass
from pathlib import Path

from .errors import BlacklistUnavailableError

__all__ = ["AdmitDecision", "BlacklistEntry", "Blacklist"]

DEFAULT_SWEEP_INTERVAL = 60.0


class AdmitDecision(enum.Enum):
    ADMITTED = "admitted"
    REPLAYED = "replayed"


@dataclass(frozen=True)
class BlacklistEntry:
    """One admission: which base token, asked by which service, until when."""

    base_digest: bytes
    service_id: str
    expires_at: int


class Blacklist:
    """In-memory admission store with an optional append-only journal."""

    def __init__(self, journal_path: str | Path | None = None):
        self._lock = threading.Lock()
        self._entries: dict[tuple[bytes, str], int] = {}
        self._journal_path = Path(journal_path) if journal_path else None
        if self._journal_path is not None and self._journal_path.exists():
            self._replay_journal()

    def _replay_journal(self) -> None:
        try:
            with open(self._journal_path, "r", encoding="utf-8") as handle:
                for line in handle:
                    line = line.strip()
                    if not line:
                        continue
                    record = json.loads(line)
                    key = (bytes.fromhex(record["digest"]), record["service"])
                    self._entries[key] = int(record["expires_at"])
        except (OSError, ValueError, KeyError) as exc:
            raise BlacklistUnavailableError(f"journal unreadable: {exc}") from exc

    def _append_journal(self, entry: BlacklistEntry) -> None:
        if self._journal_path is None:
            return
        record = {
            "digest": entry.base_digest.hex(),
            "service": entry.service_id,
            "expires_at": entry.expires_at,
        }
        try:
            with open(self._journal_path, "a", encoding="utf-8") as handle:
                handle.write(json.dumps(record) + "\n")
        except OSError as exc:
            raise BlacklistUnavailableError(f"journal write failed: {exc}") from exc

    def check_and_insert(self, entry: BlacklistEntry, now: int) -> AdmitDecision:
        """Admit the entry unless a live entry with the same key exists.

        The check and the insert happen under one lock: of N concurrent
        identical calls exactly one is admitted. Expired occupants are
        overwritten (lazy pruning). Raises BlacklistUnavailableError when
        the journal cannot record the admission; nothing is admitted then.
        """
        key = (entry.base_digest, entry.service_id)
        with self._lock:
            existing = self._entries.get(key)
            if existing is not None and existing > now:
                return AdmitDecision.REPLAYED
            self._append_journal(entry)
            self._entries[key] = entry.expires_at
            return AdmitDecision.ADMITTED

    def prune(self, now: int) -> int:
        """Drop entries whose base token can no longer verify anyway."""
        with self._lock:
            dead = [key for key, expiry in self._entries.items() if expiry <= now]
            for key in dead:
                del self._entries[key]
            return len(dead)

    def __len__(self) -> int:
        with self._lock:
            return len(self._entries)
