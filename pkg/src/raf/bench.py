"""Latency benchmarks over a running identity service.

Three loop shapes, timed wall-clock and reported per run:

* fernet-roundtrip: grant a base token over HTTP per operation (add
  ``validate=True`` to also validate each one);
* raf-local-issue: grant once, then derive recursive tokens locally,
  no network, no identity service involvement per token;
* raf-roundtrip: grant once, then derive locally and validate over HTTP
  per operation, with a configurable command length.

Ratios compare per-token means across the modes of one invocation, so the
hardware-independent quantity (local issuance vs a full grant round trip)
falls straight out of the report.
"""

from __future__ import annotations

import dataclasses
import os
import time

from .service.config import DEMO_DOMAIN, DEMO_PASSWORD, DEMO_PROJECT, DEMO_USERNAME
from .token import user_issue

__all__ = ["BENCH_MODES", "BenchError", "BenchReport", "bench_command", "run_bench"]

TOKEN_PATH = "/identity/v3/auth/tokens"

BENCH_MODES = ("fernet-roundtrip", "raf-local-issue", "raf-roundtrip")


class BenchError(Exception):
    """The service answered, but not the way a benchmark op requires."""


@dataclasses.dataclass(frozen=True)
class BenchReport:
    """Wall times for one mode: ``runs`` holds per-run seconds (each run is
    ``count`` operations), ``average`` their arithmetic mean, ``ratios``
    per-token comparisons against the other modes of the same invocation."""

    mode: str
    count: int
    runs: tuple[float, ...]
    average: float
    ratios: dict

    @property
    def per_token(self) -> float:
        return self.average / self.count if self.count else 0.0

    def as_dict(self) -> dict:
        plain = dataclasses.asdict(self)
        plain["runs"] = list(self.runs)
        plain["per_token"] = self.per_token
        return plain


def bench_command(length: int) -> str:
    """A routable command padded to exactly ``length`` bytes (0 = empty)."""
    prefix = "compute/v2.1/servers"
    if length <= 0:
        return ""
    if length <= len(prefix):
        return prefix[:length]
    return prefix + " " + "x" * (length - len(prefix) - 1)


def _grant(client) -> str:
    response = client.post(
        TOKEN_PATH,
        json={
            "auth": {
                "identity": {
                    "methods": ["password"],
                    "password": {
                        "user": {
                            "domain": {"name": DEMO_DOMAIN},
                            "name": DEMO_USERNAME,
                            "password": DEMO_PASSWORD,
                        }
                    },
                },
                "scope": {
                    "project": {"domain": {"name": DEMO_DOMAIN}, "name": DEMO_PROJECT}
                },
            }
        },
    )
    if response.status_code != 201:
        raise BenchError(f"grant failed with {response.status_code}: {response.text[:200]}")
    return response.headers["X-Subject-Token"]


def _validate(client, token: str) -> None:
    response = client.get(
        TOKEN_PATH,
        headers={"X-Subject-Token": token, "X-Service-Id": "bench-client"},
    )
    if response.status_code != 200:
        raise BenchError(
            f"validation failed with {response.status_code}: {response.text[:200]}"
        )


def _run_fernet_roundtrip(client, count: int, validate: bool) -> float:
    start = time.perf_counter()
    for _ in range(count):
        token = _grant(client)
        if validate:
            _validate(client, token)
    return time.perf_counter() - start


def _run_raf_local_issue(client, count: int, command: str) -> float:
    base = _grant(client)
    now = int(time.time())
    start = time.perf_counter()
    for _ in range(count):
        user_issue(base, command, 600, now, os.urandom(8))
    return time.perf_counter() - start


def _run_raf_roundtrip(client, count: int, command: str) -> float:
    base = _grant(client)
    start = time.perf_counter()
    for _ in range(count):
        token = user_issue(base, command, 600, int(time.time()), os.urandom(8))
        _validate(client, token)
    return time.perf_counter() - start


def run_bench(
    modes,
    count: int,
    client,
    *,
    command_length: int = 30,
    validate: bool = False,
    repeat: int = 1,
) -> list:
    """Time each requested mode ``repeat`` times over ``client`` and return
    one BenchReport per mode. count=0 produces empty reports."""
    modes = list(modes)
    for mode in modes:
        if mode not in BENCH_MODES:
            raise ValueError(f"unknown bench mode {mode!r}; choose from {BENCH_MODES}")
    if count < 0:
        raise ValueError("count must be >= 0")
    if repeat < 1:
        raise ValueError("repeat must be >= 1")
    command = bench_command(command_length)
    reports = []
    for mode in modes:
        runs = []
        if count:
            for _ in range(repeat):
                if mode == "fernet-roundtrip":
                    runs.append(_run_fernet_roundtrip(client, count, validate))
                elif mode == "raf-local-issue":
                    runs.append(_run_raf_local_issue(client, count, command))
                else:
                    runs.append(_run_raf_roundtrip(client, count, command))
        average = sum(runs) / len(runs) if runs else 0.0
        reports.append(
            BenchReport(mode=mode, count=count, runs=tuple(runs), average=average, ratios={})
        )
    for report in reports:
        if not report.per_token:
            continue
        for other in reports:
            if other is report or not other.per_token:
                continue
            report.ratios[f"{other.mode}/{report.mode}"] = other.per_token / report.per_token
    return reports
