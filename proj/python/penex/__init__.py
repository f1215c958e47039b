"""Penalized M-estimators, their first-order expansions and diagnostics."""

from ._penex import *  # noqa: F401,F403
from ._penex import __doc__  # noqa: F401

__all__ = [name for name in dir() if not name.startswith("_")]
