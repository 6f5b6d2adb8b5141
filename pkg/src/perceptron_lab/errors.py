"""Shared exception types, each mapped to a distinct CLI exit code."""

from __future__ import annotations

__all__ = [
    "ConfigError",
    "FeasibilityError",
    "ConditioningEmptyError",
    "CertificationError",
    "SeparationFailure",
]


class ConfigError(ValueError):
    """Invalid or unknown configuration input (CLI exit 2)."""


class FeasibilityError(RuntimeError):
    """Enumeration size cap exceeded (CLI exit 3)."""


class ConditioningEmptyError(RuntimeError):
    """A conditional estimate whose conditioning event never occurred (CLI exit 4)."""


class CertificationError(AssertionError):
    """A hard-asserted postcondition failed (CLI exit 5)."""


class SeparationFailure(CertificationError):
    """Separation pipeline exhausted its retries without a certifiable family."""
