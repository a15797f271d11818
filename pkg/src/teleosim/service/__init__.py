from .app import create_app
from .live import ServiceSettings

__all__ = ["create_app", "ServiceSettings"]
