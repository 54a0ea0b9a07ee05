"""Policy failures."""

from system.errors import TandemError


class PolicyError(TandemError):
    """Base class for policy failures."""


class RoleMismatch(PolicyError, ValueError):
    """Observation role differs from the policy role."""


class RemoteUnavailable(PolicyError):
    """Chat-completion transport failed after every retry."""


class ScriptExhausted(PolicyError):
    """Scripted policy has no step for this turn."""


class UnknownToken(PolicyError, KeyError):
    """Token outside the toy policy vocabulary."""
