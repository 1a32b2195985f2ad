"""End-to-end delegation scenarios against a running identity service.

Mock services model the cloud-side actors (compute, volume, image,
network): each one receives a request carrying a token, sends it to the
identity service for validation under its own service id, and (in the
delegation flow) derives a child token for the next hop. Scenarios
assert the expected admit/reject decision at every step and come out as a
machine-checkable report.
"""

from __future__ import annotations

import dataclasses
import os
import time

from ..service.config import DEMO_DOMAIN, DEMO_PASSWORD, DEMO_PROJECT, DEMO_USERNAME
from ..token import service_issue_ut, user_issue

__all__ = ["SCENARIOS", "MockService", "FlowStep", "FlowReport", "run_flow"]

TOKEN_PATH = "/identity/v3/auth/tokens"

SCENARIOS = ("create-vm", "replay", "figure-3")

CREATE_SERVER = 'compute/v2.1/servers {"server": {"name": "demo-vm"}}'
CREATE_PORT = 'network/v2.0/ports {"port": {"network_id": "net-1"}}'
LIST_IMAGES = "image/v2/images"
DELETE_SERVER = "compute/v2.1/servers/5a2b3c"


@dataclasses.dataclass(frozen=True)
class FlowStep:
    step: str
    expected: str
    actual: str
    ok: bool
    detail: str = ""


@dataclasses.dataclass(frozen=True)
class FlowReport:
    scenario: str
    passed: bool
    steps: tuple


class MockService:
    """One cloud service: validates inbound tokens, derives outbound ones."""

    def __init__(self, service_id: str, identity):
        self.service_id = service_id
        self.identity = identity

    def handle(self, headers: dict):
        """Process an inbound request; returns the identity service's
        validation response for the token it carried."""
        token = headers.get("X-RAFT-Token") or headers.get("X-Auth-Token")
        if token is None:
            raise ValueError(f"{self.service_id}: request carried no token")
        return self.identity.get(
            TOKEN_PATH,
            headers={
                "X-Subject-Token": token,
                "X-Auth-Token": token,
                "X-Service-Id": self.service_id,
            },
        )

    def extend(self, parent: str, command: str, lifetime: int, now: int) -> str:
        """Derive the next-hop token (user-tied possession rule)."""
        return service_issue_ut(parent, command, lifetime, now, os.urandom(8))


def _grant(client):
    return client.post(
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


def _describe(response) -> tuple[str, str]:
    """(summary, detail) for a validation/grant response."""
    if response.status_code in (200, 201):
        body = response.json()
        detail = ""
        if "commands" in body:
            detail = "commands: " + ", ".join(body["commands"])
        return str(response.status_code), detail
    try:
        error = response.json()["error"]
        summary = f"{response.status_code} {error['code']}"
        detail = error.get("message", "")
        if "failing_pair" in error:
            detail = f"failing_pair: {error['failing_pair']}"
    except Exception:
        summary, detail = str(response.status_code), response.text[:200]
    return summary, detail


def run_flow(scenario: str, client, *, clock=time.time) -> FlowReport:
    """Execute one named scenario against the identity service behind
    ``client`` (any httpx-compatible client with a base URL)."""
    if scenario not in SCENARIOS:
        raise ValueError(f"unknown scenario {scenario!r}; choose from {SCENARIOS}")
    runner = {
        "create-vm": _flow_create_vm,
        "replay": _flow_replay,
        "figure-3": _flow_figure_3,
    }[scenario]
    steps = runner(client, int(clock()))
    return FlowReport(scenario=scenario, passed=all(s.ok for s in steps), steps=tuple(steps))


def _check(steps: list, step: str, expected: str, response):
    actual, detail = _describe(response)
    steps.append(
        FlowStep(step=step, expected=expected, actual=actual, ok=actual == expected, detail=detail)
    )
    return response


def _flow_create_vm(client, now: int) -> list:
    """Delegated VM creation: user -> compute -> network, every hop admitted."""
    compute = MockService("compute", client)
    network = MockService("network", client)
    steps: list[FlowStep] = []
    granted = _check(steps, "grant identity token", "201", _grant(client))
    if granted.status_code != 201:
        return steps
    base = granted.headers["X-Subject-Token"]
    boot_token = user_issue(base, CREATE_SERVER, 600, now, os.urandom(8))
    _check(steps, "compute admits the boot request", "200", compute.handle({"X-RAFT-Token": boot_token}))
    port_token = compute.extend(boot_token, CREATE_PORT, 500, now)
    _check(steps, "network admits compute's port request", "200", network.handle({"X-RAFT-Token": port_token}))
    return steps


def _flow_replay(client, now: int) -> list:
    """A captured token replays nowhere: second presentation is rejected,
    while a different service still gets its own first admission."""
    compute = MockService("compute", client)
    volume = MockService("volume", client)
    steps: list[FlowStep] = []
    granted = _check(steps, "grant identity token", "201", _grant(client))
    if granted.status_code != 201:
        return steps
    base = granted.headers["X-Subject-Token"]
    token = user_issue(base, CREATE_SERVER, 600, now, os.urandom(8))
    _check(steps, "compute admits the first presentation", "200", compute.handle({"X-RAFT-Token": token}))
    _check(
        steps,
        "compute rejects the captured replay",
        "401 replayed-token",
        compute.handle({"X-RAFT-Token": token}),
    )
    _check(steps, "volume still admits it once", "200", volume.handle({"X-RAFT-Token": token}))
    return steps


def _flow_figure_3(client, now: int) -> list:
    """A leaked image-scoped token is extended with a destructive compute
    command; the policy gate rejects the pair and the legitimate token
    keeps working."""
    compute = MockService("compute", client)
    image = MockService("image", client)
    steps: list[FlowStep] = []
    granted = _check(steps, "grant identity token", "201", _grant(client))
    if granted.status_code != 201:
        return steps
    base = granted.headers["X-Subject-Token"]
    leaked = user_issue(base, LIST_IMAGES, 600, now, os.urandom(8))
    forged = service_issue_ut(leaked, DELETE_SERVER, 500, now, os.urandom(8))
    _check(
        steps,
        "compute rejects the forged delete-server child",
        "403 policy-violation",
        compute.handle({"X-RAFT-Token": forged}),
    )
    _check(steps, "image still admits the original token", "200", image.handle({"X-RAFT-Token": leaked}))
    return steps
