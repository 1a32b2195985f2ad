from __future__ import annotations

import threading
import time

import pytest

from raf.fernet import FernetKey, fernet_issue
from raf.payload import TokenPayload

# fixed logical clock for deterministic tokens; all expiries sit above it
NOW = 1_700_000_000


@pytest.fixture(scope="session")
def live_server(tmp_path_factory):
    """A real identity service on a loopback socket (demo deployment,
    wall clock), for benchmarks and CLI round trips."""
    import uvicorn

    from raf.service.app import create_app
    from raf.service.config import load_config, scaffold_demo

    config_path = scaffold_demo(tmp_path_factory.mktemp("live") / "deploy")
    config = load_config(config_path, env={})
    app = create_app(config)
    server = uvicorn.Server(
        uvicorn.Config(app, host="127.0.0.1", port=0, log_level="warning")
    )
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.time() + 15
    while not server.started:
        if time.time() > deadline or not thread.is_alive():
            raise RuntimeError("identity service failed to start")
        time.sleep(0.02)
    port = server.servers[0].sockets[0].getsockname()[1]
    yield f"http://127.0.0.1:{port}"
    server.should_exit = True
    thread.join(timeout=10)


@pytest.fixture
def now() -> int:
    return NOW


@pytest.fixture
def key() -> FernetKey:
    return FernetKey(bytes(range(32)))


@pytest.fixture
def payload() -> TokenPayload:
    return TokenPayload(
        user_id="u-1234",
        project_id="p-5678",
        methods=("password",),
        expires_at=NOW + 3600,
        audit_id="audit-1",
    )


@pytest.fixture
def fernet_token(key, payload) -> str:
    return fernet_issue(key, payload, NOW, bytes(range(16)))
