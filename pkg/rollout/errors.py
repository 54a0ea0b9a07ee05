from system.errors import TandemError


class RolloutError(TandemError):
    """Base class for rollout failures."""


class EmptySelection(RolloutError, ValueError):
    """No turn qualifies for export."""
