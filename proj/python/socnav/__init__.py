"""Socially compliant navigation toolkit (C++ core bindings)."""

from ._core import *  # noqa: F401,F403
