"""Python bindings for the tsctl laboratory."""

from ._core import *  # noqa: F401,F403
from ._core import Error, ConfigError  # noqa: F401

__all__ = [name for name in dir() if not name.startswith("_")]
