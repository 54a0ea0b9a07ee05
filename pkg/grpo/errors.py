from system.errors import TandemError


class GrpoError(TandemError):
    """Base class for training-signal failures."""


class ZeroVariance(GrpoError, ValueError):
    """All rewards in a group are equal; the group carries no signal."""


class EmptyBatch(GrpoError, ValueError):
    """Nothing left to train on."""
