from system.errors import TandemError


class BenchError(TandemError):
    """Base class for evaluation failures."""


class KExceedsTrials(BenchError, ValueError):
    """A metric asked for more attempts than the tasks were run."""

    def __init__(self, k: int, n: int):
        super().__init__(k, n)
        self.k = k
        self.n = n

    def __str__(self):
        return f"k={self.k} exceeds n={self.n} trials"
