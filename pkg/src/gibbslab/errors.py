"""Exception types shared across the package."""

from __future__ import annotations


class GibbsLabError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(GibbsLabError, ValueError):
    """An input failed a mathematical precondition (shape, symmetry, closure, ...)."""


class ConfigError(GibbsLabError, ValueError):
    """A configuration file or CLI argument combination is invalid."""
