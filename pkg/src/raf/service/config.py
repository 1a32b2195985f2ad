"""Service configuration: a YAML file with environment overrides.

Every key in the file has an ``RAF_*`` environment twin that wins when
set, so containerized deployments can override paths and flags without
editing the file. ``scaffold_demo`` writes a complete runnable deployment
(keys, users, policy, config) into a directory.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import yaml

from ..blacklist import DEFAULT_SWEEP_INTERVAL
from ..fernet import FernetKey, gen_fernet_key
from ..policy import sample_policy_text
from ..token import DEFAULT_MAX_DEPTH, ServiceKeySet, Variant
from .users import make_user_line

__all__ = ["ServiceConfig", "load_config", "load_service_keys", "scaffold_demo"]

_ENV_PREFIX = "RAF_"


@dataclass(frozen=True)
class ServiceConfig:
    fernet_key_path: Path
    users_path: Path
    policy_path: Path
    service_keys_path: Path | None = None
    listen_host: str = "127.0.0.1"
    listen_port: int = 8080
    variant: Variant = Variant.USER_TIED
    accept_fernet: bool = True
    token_lifetime: int = 3600
    max_depth: int = DEFAULT_MAX_DEPTH
    blacklist_journal: Path | None = None
    sweep_interval: float = DEFAULT_SWEEP_INTERVAL


_BOOL_TRUE = {"1", "true", "yes", "on"}
_BOOL_FALSE = {"0", "false", "no", "off"}


def _as_bool(value, where: str) -> bool:
    if isinstance(value, bool):
        return value
    if isinstance(value, str):
        lowered = value.strip().lower()
        if lowered in _BOOL_TRUE:
            return True
        if lowered in _BOOL_FALSE:
            return False
    raise ValueError(f"{where}: expected a boolean, got {value!r}")


def load_config(path: str | Path | None = None, env: Mapping[str, str] | None = None) -> ServiceConfig:
    """Read the config file (if any), then apply RAF_* environment overrides."""
    env = os.environ if env is None else env
    data: dict = {}
    base = Path(".")
    if path is not None:
        base = Path(path).parent
        with open(path, "r", encoding="utf-8") as handle:
            loaded = yaml.safe_load(handle.read())
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ValueError(f"{path}: config must be a mapping")
        data = loaded

    def pick(key: str, default=None):
        override = env.get(_ENV_PREFIX + key.upper())
        if override is not None:
            return override
        return data.get(key, default)

    def pick_path(key: str, required: bool, default=None) -> Path | None:
        value = pick(key, default)
        if value is None:
            if required:
                raise ValueError(f"config is missing required key {key!r}")
            return None
        candidate = Path(str(value))
        if not candidate.is_absolute():
            candidate = base / candidate
        return candidate

    variant = Variant(str(pick("variant", Variant.USER_TIED.value)))
    return ServiceConfig(
        fernet_key_path=pick_path("fernet_key_path", required=True),
        users_path=pick_path("users_path", required=True),
        policy_path=pick_path("policy_path", required=True),
        service_keys_path=pick_path("service_keys_path", required=False),
        listen_host=str(pick("listen_host", "127.0.0.1")),
        listen_port=int(pick("listen_port", 8080)),
        variant=variant,
        accept_fernet=_as_bool(pick("accept_fernet", True), "accept_fernet"),
        token_lifetime=int(pick("token_lifetime", 3600)),
        max_depth=int(pick("max_depth", DEFAULT_MAX_DEPTH)),
        blacklist_journal=pick_path("blacklist_journal", required=False),
        sweep_interval=float(pick("sweep_interval", DEFAULT_SWEEP_INTERVAL)),
    )


def load_service_keys(root: FernetKey, path: str | Path, expected: int) -> ServiceKeySet:
    """Assemble the key set from the root key plus one encoded key per line.

    Line N of the file is key index N; the policy's highest index must
    match the line count exactly so misaligned files fail fast.
    """
    keys: list[bytes] = []
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            keys.append(FernetKey.from_encoded(line).raw)
    if len(keys) != expected:
        raise ValueError(
            f"{path}: has {len(keys)} service keys but the policy routes {expected} indices"
        )
    return ServiceKeySet.assemble(root, keys)


DEMO_USERNAME = "alice"
DEMO_PASSWORD = "wonderland"
DEMO_DOMAIN = "Default"
DEMO_PROJECT = "demo"


def scaffold_demo(directory: str | Path, variant: Variant = Variant.USER_TIED) -> Path:
    """Write a runnable demo deployment and return the config file path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    (directory / "fernet.key").write_text(gen_fernet_key().encode() + "\n", "utf-8")
    service_keys = "\n".join(gen_fernet_key().encode() for _ in range(4))
    (directory / "service.keys").write_text(service_keys + "\n", "utf-8")
    (directory / "policy.yaml").write_text(sample_policy_text(), "utf-8")
    users = [
        make_user_line(DEMO_USERNAME, DEMO_PASSWORD, DEMO_DOMAIN, DEMO_PROJECT, "u-alice-001", "p-demo-001"),
        make_user_line("bob", "builder", DEMO_DOMAIN, "ops", "u-bob-002", "p-ops-002"),
    ]
    (directory / "users.txt").write_text("\n".join(users) + "\n", "utf-8")

    config = {
        "fernet_key_path": "fernet.key",
        "users_path": "users.txt",
        "policy_path": "policy.yaml",
        "service_keys_path": "service.keys",
        "listen_host": "127.0.0.1",
        "listen_port": 8080,
        "variant": variant.value,
        "accept_fernet": True,
        "token_lifetime": 3600,
    }
    config_path = directory / "config.yaml"
    config_path.write_text(yaml.safe_dump(config, sort_keys=False), "utf-8")
    return config_path
