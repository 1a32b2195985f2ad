"""Request and response bodies for the identity HTTP API."""

from __future__ import annotations

from pydantic import BaseModel, Field

__all__ = [
    "GrantRequest",
    "GrantResponse",
    "TokenInfo",
    "ValidationResponse",
    "ServiceInfo",
]


class DomainRef(BaseModel):
    name: str


class PasswordUser(BaseModel):
    domain: DomainRef
    name: str
    password: str


class PasswordCredentials(BaseModel):
    user: PasswordUser


class IdentityBlock(BaseModel):
    methods: list[str]
    password: PasswordCredentials


class ProjectRef(BaseModel):
    domain: DomainRef
    name: str


class ScopeBlock(BaseModel):
    project: ProjectRef


class AuthBlock(BaseModel):
    identity: IdentityBlock
    scope: ScopeBlock


class GrantRequest(BaseModel):
    auth: AuthBlock


class TokenInfo(BaseModel):
    user_id: str
    project_id: str
    methods: list[str]
    expires_at: int
    audit_id: str


class GrantResponse(BaseModel):
    token: TokenInfo


class ValidationResponse(BaseModel):
    token_kind: str = Field(description="fernet, raf-user-tied or raf-fully-tied")
    payload: TokenInfo
    commands: list[str]
    effective_expiry: int


class ServiceInfo(BaseModel):
    service: str
    variant: str
    accept_fernet: bool
    max_depth: int
