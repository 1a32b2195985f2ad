from .app import RuntimeState, create_app
from .config import ServiceConfig, load_config, load_service_keys, scaffold_demo
from .users import UserStore, hash_password, make_user_line

__all__ = [
    "RuntimeState",
    "create_app",
    "ServiceConfig",
    "load_config",
    "load_service_keys",
    "scaffold_demo",
    "UserStore",
    "hash_password",
    "make_user_line",
]
