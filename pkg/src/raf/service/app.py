"""The identity service: grants base tokens, validates anything derived.

Endpoints follow the classic identity API shape:

* ``POST /identity/v3/auth/tokens`` authenticates a password credential
  and answers 201 with the new base token in the ``X-Subject-Token``
  response header;
* ``GET /identity/v3/auth/tokens`` validates the token in the
  ``X-Subject-Token`` request header. The caller names itself with
  ``X-Service-Id`` (replay admissions are per service).

Validation order is fixed: dispatch on token kind, cryptographic
verification, command-compatibility policy, then the one-time admission
check. A token failing early never consumes its admission.
"""

from __future__ import annotations

import asyncio
import contextlib
import os
import time
from dataclasses import dataclass
from typing import Annotated, Callable

from fastapi import FastAPI, Header, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from ..blacklist import AdmitDecision, Blacklist, BlacklistEntry
from ..codec import b64url_encode
from ..errors import BlacklistUnavailableError, TokenError
from ..fernet import FernetKey, fernet_issue, fernet_verify
from ..payload import TokenPayload
from ..policy import PolicyRuleSet, check_chain, load_policy_file
from ..token import (
    CommandChain,
    ServiceKeySet,
    Variant,
    extract_base_raf,
    is_raf,
    verify_ft,
    verify_ut,
)
from .config import ServiceConfig, load_service_keys
from .schemas import (
    GrantRequest,
    GrantResponse,
    ServiceInfo,
    TokenInfo,
    ValidationResponse,
)
from .users import UserStore

__all__ = ["RuntimeState", "create_app"]

DEFAULT_CALLER = "default"


@dataclass
class RuntimeState:
    config: ServiceConfig
    fernet_key: FernetKey
    users: UserStore
    policy: PolicyRuleSet
    keyset: ServiceKeySet | None
    blacklist: Blacklist
    clock: Callable[[], float]
    entropy: Callable[[int], bytes]

    @classmethod
    def from_config(
        cls,
        config: ServiceConfig,
        clock: Callable[[], float] = time.time,
        entropy: Callable[[int], bytes] = os.urandom,
    ) -> "RuntimeState":
        fernet_key = FernetKey.from_encoded(
            config.fernet_key_path.read_text("utf-8").strip()
        )
        policy = load_policy_file(config.policy_path)
        keyset = None
        if config.variant is Variant.FULLY_TIED:
            if config.service_keys_path is None:
                raise ValueError("fully-tied deployments need service_keys_path")
            highest = max(s.key_index for s in policy.services)
            keyset = load_service_keys(fernet_key, config.service_keys_path, highest)
        return cls(
            config=config,
            fernet_key=fernet_key,
            users=UserStore.load(config.users_path),
            policy=policy,
            keyset=keyset,
            blacklist=Blacklist(config.blacklist_journal),
            clock=clock,
            entropy=entropy,
        )


def _error(status: int, code: str, message: str, **extra) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": {"code": code, "message": message, **extra}})


def _token_info(payload: TokenPayload) -> TokenInfo:
    return TokenInfo(
        user_id=payload.user_id,
        project_id=payload.project_id,
        methods=list(payload.methods),
        expires_at=payload.expires_at,
        audit_id=payload.audit_id,
    )


def create_app(
    config: ServiceConfig,
    *,
    clock: Callable[[], float] = time.time,
    entropy: Callable[[int], bytes] = os.urandom,
) -> FastAPI:
    state = RuntimeState.from_config(config, clock=clock, entropy=entropy)

    @contextlib.asynccontextmanager
    async def lifespan(app: FastAPI):
        async def sweep():
            while True:
                await asyncio.sleep(config.sweep_interval)
                state.blacklist.prune(int(state.clock()))

        task = asyncio.create_task(sweep())
        try:
            yield
        finally:
            task.cancel()
            with contextlib.suppress(asyncio.CancelledError):
                await task

    app = FastAPI(title="raf identity service", lifespan=lifespan)
    app.state.runtime = state

    @app.exception_handler(RequestValidationError)
    async def malformed_request(_request: Request, exc: RequestValidationError):
        return _error(400, "malformed-request", str(exc.errors()[:3]))

    @app.get("/", response_model=ServiceInfo)
    def info() -> ServiceInfo:
        return ServiceInfo(
            service="raf-identity",
            variant=config.variant.value,
            accept_fernet=config.accept_fernet,
            max_depth=config.max_depth,
        )

    @app.post("/identity/v3/auth/tokens", response_model=GrantResponse, status_code=201)
    def grant(body: GrantRequest, response: Response):
        identity = body.auth.identity
        if "password" not in identity.methods:
            return _error(400, "malformed-request", "only password authentication is supported")
        user = identity.password.user
        record = state.users.authenticate(
            username=user.name,
            password=user.password,
            domain=user.domain.name,
            project_name=body.auth.scope.project.name,
        )
        if record is None:
            return _error(401, "invalid-credentials", "authentication failed")
        now = int(state.clock())
        payload = TokenPayload(
            user_id=record.user_id,
            project_id=record.project_id,
            methods=tuple(identity.methods),
            expires_at=now + config.token_lifetime,
            audit_id=b64url_encode(state.entropy(12)),
        )
        token = fernet_issue(state.fernet_key, payload, now, state.entropy(16))
        response.headers["X-Subject-Token"] = token
        return GrantResponse(token=_token_info(payload))

    @app.get("/identity/v3/auth/tokens", response_model=ValidationResponse)
    def validate(
        x_subject_token: Annotated[str, Header()],
        x_service_id: Annotated[str | None, Header()] = None,
        x_auth_token: Annotated[str | None, Header()] = None,
    ):
        now = int(state.clock())
        caller = x_service_id or DEFAULT_CALLER
        try:
            recursive = is_raf(x_subject_token)
            if not recursive:
                if not config.accept_fernet:
                    return _error(401, "invalid-token", "bare base tokens are not accepted here")
                payload = fernet_verify(state.fernet_key, x_subject_token, now)
                return ValidationResponse(
                    token_kind="fernet",
                    payload=_token_info(payload),
                    commands=[],
                    effective_expiry=payload.expires_at,
                )
            if config.variant is Variant.USER_TIED:
                chain: CommandChain = verify_ut(
                    state.fernet_key, x_subject_token, now, max_depth=config.max_depth
                )
            else:
                chain = verify_ft(
                    state.keyset, state.policy, x_subject_token, now, max_depth=config.max_depth
                )
        except TokenError as exc:
            return _error(401, "invalid-token", str(exc))

        decision = check_chain(state.policy, chain.commands)
        if not decision.allowed:
            return _error(
                403,
                "policy-violation",
                "command chain violates compatibility policy",
                failing_pair=list(decision.failing_pair or ()),
            )

        digest, base_expiry = extract_base_raf(x_subject_token, max_depth=config.max_depth)
        entry = BlacklistEntry(digest, caller, base_expiry)
        try:
            admit = state.blacklist.check_and_insert(entry, now)
        except BlacklistUnavailableError as exc:
            return _error(503, "blacklist-unavailable", str(exc))
        if admit is AdmitDecision.REPLAYED:
            return _error(401, "replayed-token", "this base token was already used at this service")

        kind = "raf-user-tied" if config.variant is Variant.USER_TIED else "raf-fully-tied"
        return ValidationResponse(
            token_kind=kind,
            payload=_token_info(chain.root_payload),
            commands=[c.decode("utf-8", errors="replace") for c in chain.commands],
            effective_expiry=chain.effective_expiry,
        )

    return app
