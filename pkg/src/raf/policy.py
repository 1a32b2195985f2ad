"""Command-compatibility policy and command-to-service routing.

A policy document is YAML with three parts::

    mode: pairwise          # or: transitive
    services:               # routing table for key lookup
      - service_id: compute
        key_index: 1
        path_prefixes: ["compute/"]
    rules:                  # which child commands a parent command may spawn
      - parent: "compute/*"
        children: ["network/*"]

Patterns are shell globs matched against the command's endpoint path (the
part before the first space); command bodies are never pattern-matched.
A chain with no matching rule is rejected: default deny.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fnmatch import fnmatchcase, translate
from importlib import resources
from typing import Sequence

import yaml

from .errors import PolicyConfigError, RoutingError

__all__ = [
    "ServiceRoute",
    "CompatibilityRule",
    "PolicyRuleSet",
    "PolicyDecision",
    "command_path",
    "load_policy",
    "load_policy_file",
    "find_service",
    "find_service_key",
    "check_chain",
    "sample_policy_text",
    "sample_policy",
]


@dataclass(frozen=True)
class ServiceRoute:
    service_id: str
    key_index: int
    path_prefixes: tuple[str, ...]


@dataclass(frozen=True)
class CompatibilityRule:
    parent: str
    children: tuple[str, ...]


@dataclass(frozen=True)
class PolicyRuleSet:
    services: tuple[ServiceRoute, ...]
    rules: tuple[CompatibilityRule, ...]
    transitive: bool = False


@dataclass(frozen=True)
class PolicyDecision:
    allowed: bool
    failing_pair: tuple[str, str] | None = None

    def __bool__(self) -> bool:
        return self.allowed


def command_path(command: bytes | str) -> str:
    """The endpoint path of a command: everything before the first space.

    Commands are UTF-8 "path body"; undecodable bytes are replaced so a
    mangled command simply matches nothing.
    """
    if isinstance(command, str):
        command = command.encode("utf-8")
    return command.split(b" ", 1)[0].decode("utf-8", errors="replace")


def _check_glob(pattern: str, where: str) -> None:
    if not isinstance(pattern, str) or not pattern:
        raise PolicyConfigError(f"{where}: pattern must be a non-empty string")
    try:
        re.compile(translate(pattern))
    except re.error as exc:
        raise PolicyConfigError(f"{where}: bad glob {pattern!r}: {exc}") from exc


def load_policy(document: str) -> PolicyRuleSet:
    """Parse and validate a policy document. Raises PolicyConfigError."""
    try:
        data = yaml.safe_load(document)
    except yaml.YAMLError as exc:
        raise PolicyConfigError(f"policy is not valid yaml: {exc}") from exc
    if not isinstance(data, dict):
        raise PolicyConfigError("policy document must be a mapping")

    mode = data.get("mode", "pairwise")
    if mode not in ("pairwise", "transitive"):
        raise PolicyConfigError(f"mode must be pairwise or transitive, got {mode!r}")

    raw_services = data.get("services")
    if not isinstance(raw_services, list) or not raw_services:
        raise PolicyConfigError("policy must list at least one service")
    services: list[ServiceRoute] = []
    seen_prefixes: dict[str, str] = {}
    seen_ids: set[str] = set()
    seen_indices: set[int] = set()
    for pos, entry in enumerate(raw_services):
        where = f"services[{pos}]"
        if not isinstance(entry, dict):
            raise PolicyConfigError(f"{where}: must be a mapping")
        service_id = entry.get("service_id")
        if not isinstance(service_id, str) or not service_id:
            raise PolicyConfigError(f"{where}: service_id must be a non-empty string")
        if service_id in seen_ids:
            raise PolicyConfigError(f"{where}: duplicate service_id {service_id!r}")
        seen_ids.add(service_id)
        key_index = entry.get("key_index")
        if not isinstance(key_index, int) or isinstance(key_index, bool) or key_index < 1:
            raise PolicyConfigError(f"{where}: key_index must be an integer >= 1")
        if key_index in seen_indices:
            raise PolicyConfigError(f"{where}: duplicate key_index {key_index}")
        seen_indices.add(key_index)
        prefixes = entry.get("path_prefixes")
        if not isinstance(prefixes, list) or not prefixes:
            raise PolicyConfigError(f"{where}: path_prefixes must be a non-empty list")
        for prefix in prefixes:
            if not isinstance(prefix, str) or not prefix:
                raise PolicyConfigError(f"{where}: prefixes must be non-empty strings")
            if prefix in seen_prefixes:
                raise PolicyConfigError(
                    f"{where}: prefix {prefix!r} already routes to "
                    f"{seen_prefixes[prefix]!r}"
                )
            seen_prefixes[prefix] = service_id
        services.append(ServiceRoute(service_id, key_index, tuple(prefixes)))

    # key indices must be dense so they line up with a key file
    if sorted(seen_indices) != list(range(1, len(seen_indices) + 1)):
        raise PolicyConfigError(
            f"key indices must be dense 1..{len(seen_indices)}, got {sorted(seen_indices)}"
        )

    raw_rules = data.get("rules", []) or []
    if not isinstance(raw_rules, list):
        raise PolicyConfigError("rules must be a list")
    rules: list[CompatibilityRule] = []
    for pos, entry in enumerate(raw_rules):
        where = f"rules[{pos}]"
        if not isinstance(entry, dict):
            raise PolicyConfigError(f"{where}: must be a mapping")
        parent = entry.get("parent")
        _check_glob(parent, f"{where}.parent")
        children = entry.get("children")
        if not isinstance(children, list) or not children:
            raise PolicyConfigError(f"{where}: children must be a non-empty list")
        for i, child in enumerate(children):
            _check_glob(child, f"{where}.children[{i}]")
        rules.append(CompatibilityRule(parent, tuple(children)))

    return PolicyRuleSet(tuple(services), tuple(rules), transitive=(mode == "transitive"))


def load_policy_file(path) -> PolicyRuleSet:
    with open(path, "r", encoding="utf-8") as handle:
        return load_policy(handle.read())


def find_service(policy: PolicyRuleSet, command: bytes | str) -> ServiceRoute:
    """Route a command to a service by longest matching path prefix."""
    path = command_path(command)
    best: ServiceRoute | None = None
    best_len = -1
    for service in policy.services:
        for prefix in service.path_prefixes:
            if path.startswith(prefix) and len(prefix) > best_len:
                best, best_len = service, len(prefix)
    if best is None:
        raise RoutingError(f"no service route for command path {path!r}")
    return best


def find_service_key(policy: PolicyRuleSet, command: bytes | str) -> int:
    return find_service(policy, command).key_index


def _pair_allowed(policy: PolicyRuleSet, parent: bytes | str, child: bytes | str) -> bool:
    parent_path = command_path(parent)
    child_path = command_path(child)
    for rule in policy.rules:
        if fnmatchcase(parent_path, rule.parent):
            if any(fnmatchcase(child_path, glob) for glob in rule.children):
                return True
    return False


def check_chain(policy: PolicyRuleSet, commands: Sequence[bytes | str]) -> PolicyDecision:
    """Decide whether a derivation chain is compatible.

    Consecutive pairs are always checked; a one-command chain is always
    allowed. In transitive mode the base command must additionally be
    compatible with every later command.
    """
    if len(commands) <= 1:
        return PolicyDecision(True)
    pairs = list(zip(commands, commands[1:]))
    if policy.transitive:
        pairs.extend((commands[0], later) for later in commands[2:])
    for parent, child in pairs:
        if not _pair_allowed(policy, parent, child):
            return PolicyDecision(
                False,
                failing_pair=(
                    command_path(parent) or _lossy(parent),
                    command_path(child) or _lossy(child),
                ),
            )
    return PolicyDecision(True)


def _lossy(command: bytes | str) -> str:
    if isinstance(command, str):
        return command
    return command.decode("utf-8", errors="replace")


def sample_policy_text() -> str:
    """The policy document shipped with the package."""
    return resources.files("raf.data").joinpath("sample-policy.yaml").read_text("utf-8")


def sample_policy() -> PolicyRuleSet:
    return load_policy(sample_policy_text())
