"""Recursive augmented Fernet tokens.

A base Fernet token proves who you are; recursive layers derived from it
carry exactly what you asked for. Each derived token binds a command, an
expiry and a randomizer to its parent, is spendable at most once per
service, and can only chain into commands the policy says belong
together.
"""

from .blacklist import AdmitDecision, Blacklist, BlacklistEntry
from .codec import b64url_decode, b64url_encode, restore_padding
from .errors import (
    AuthenticityError,
    BlacklistUnavailableError,
    DepthError,
    ExpiredError,
    FormatError,
    KeyGenerationError,
    KeyLookupError,
    PolicyConfigError,
    RoutingError,
    SizeError,
    TokenError,
)
from .fernet import FernetKey, FernetToken, fernet_issue, fernet_verify, gen_fernet_key
from .payload import TokenPayload
from .policy import (
    CompatibilityRule,
    PolicyDecision,
    PolicyRuleSet,
    ServiceRoute,
    check_chain,
    command_path,
    find_service,
    find_service_key,
    load_policy,
    load_policy_file,
    sample_policy,
    sample_policy_text,
)
from .token import (
    DEFAULT_MAX_DEPTH,
    RAF_VERSION,
    CommandChain,
    RafLayer,
    ServiceKeySet,
    Variant,
    extract_base_raf,
    is_raf,
    service_issue_ft,
    service_issue_ut,
    user_issue,
    verify_ft,
    verify_ut,
)

__version__ = "0.1.0"

__all__ = [
    "AdmitDecision",
    "Blacklist",
    "BlacklistEntry",
    "b64url_decode",
    "b64url_encode",
    "restore_padding",
    "AuthenticityError",
    "BlacklistUnavailableError",
    "DepthError",
    "ExpiredError",
    "FormatError",
    "KeyGenerationError",
    "KeyLookupError",
    "PolicyConfigError",
    "RoutingError",
    "SizeError",
    "TokenError",
    "FernetKey",
    "FernetToken",
    "fernet_issue",
    "fernet_verify",
    "gen_fernet_key",
    "TokenPayload",
    "CompatibilityRule",
    "PolicyDecision",
    "PolicyRuleSet",
    "ServiceRoute",
    "check_chain",
    "command_path",
    "find_service",
    "find_service_key",
    "load_policy",
    "load_policy_file",
    "sample_policy",
    "sample_policy_text",
    "DEFAULT_MAX_DEPTH",
    "RAF_VERSION",
    "CommandChain",
    "RafLayer",
    "ServiceKeySet",
    "Variant",
    "extract_base_raf",
    "is_raf",
    "service_issue_ft",
    "service_issue_ut",
    "user_issue",
    "verify_ft",
    "verify_ut",
    "__version__",
]
