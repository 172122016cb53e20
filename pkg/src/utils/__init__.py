from .loggings import setup_logging

__all__ = ["setup_logging"]
