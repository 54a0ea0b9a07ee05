"""pass^k and pass@k over a matrix of trial outcomes."""

from dataclasses import dataclass, field
from math import comb
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from system.config import ESTIMATORS

from .errors import KExceedsTrials


@dataclass
class TaskTrials:
    task_id: str
    outcomes: List[bool]
    refs: List[str] = field(default_factory=list)
    domain: str = ""

    @property
    def n(self) -> int:
        return len(self.outcomes)

    @property
    def c(self) -> int:
        return sum(self.outcomes)


class TrialMatrix:
    """Per-task trial outcomes with the same trial count on every task."""

    def __init__(self, rows: Iterable[TaskTrials]):
        self.rows = list(rows)
        counts = {row.n for row in self.rows}
        if len(counts) > 1:
            raise ValueError(f"trial counts differ across tasks: {sorted(counts)}")
        if 0 in counts:
            raise ValueError("every task needs at least one trial")

    @classmethod
    def from_counts(cls, counts: Sequence[Tuple[int, int]], domain: str = "") -> "TrialMatrix":
        """Matrix from (n, c) pairs; successes come first in each row."""
        rows = []
        for i, (n, c) in enumerate(counts):
            if not 0 <= c <= n:
                raise ValueError(f"need 0 <= c <= n, got c={c} n={n}")
            rows.append(TaskTrials(f"task_{i}", [True] * c + [False] * (n - c), domain=domain))
        return cls(rows)

    @classmethod
    def merge(cls, matrices: Iterable["TrialMatrix"]) -> "TrialMatrix":
        return cls(row for matrix in matrices for row in matrix.rows)

    @property
    def n(self) -> int:
        return self.rows[0].n if self.rows else 0

    @property
    def domains(self) -> List[str]:
        return sorted({row.domain for row in self.rows})

    def by_domain(self) -> Dict[str, "TrialMatrix"]:
        return {d: TrialMatrix(r for r in self.rows if r.domain == d) for d in self.domains}

    def to_dict(self) -> Dict[str, object]:
        return {"n": self.n, "tasks": [{"task_id": r.task_id, "domain": r.domain, "c": r.c,
                                        "outcomes": [int(o) for o in r.outcomes], "refs": r.refs}
                                       for r in self.rows]}


def _check(matrix: TrialMatrix, k: int, estimator: str):
    if estimator not in ESTIMATORS:
        raise ValueError(f"unknown estimator {estimator!r}")
    if k < 1:
        raise ValueError("k must be >= 1")
    if not matrix.rows:
        raise ValueError("empty trial matrix")
    if k > matrix.n:
        raise KExceedsTrials(k, matrix.n)


def _blocks(outcomes: Sequence[bool], k: int) -> List[Sequence[bool]]:
    return [outcomes[i:i + k] for i in range(0, len(outcomes) - k + 1, k)]


def task_pass_hat(n: int, c: int, k: int) -> float:
    """Probability that k trials drawn without replacement all succeed."""
    return comb(c, k) / comb(n, k)


def task_pass_at(n: int, c: int, k: int) -> float:
    """Probability that at least one of k trials drawn without replacement succeeds."""
    return 1.0 - comb(n - c, k) / comb(n, k)


def pass_hat_k(matrix: TrialMatrix, k: int, estimator: str = "unbiased") -> float:
    """Mean over tasks of the chance that k attempts all succeed.

    ``unbiased`` uses C(c,k)/C(n,k); ``partition`` splits each row into
    disjoint consecutive k-blocks and counts all-success blocks.

    Raises:
        KExceedsTrials: k > n
    """
    _check(matrix, k, estimator)
    if estimator == "partition":
        values = [float(np.mean([all(b) for b in _blocks(r.outcomes, k)])) for r in matrix.rows]
    else:
        values = [task_pass_hat(r.n, r.c, k) for r in matrix.rows]
    return float(np.mean(values))


def pass_at_k(matrix: TrialMatrix, k: int, estimator: str = "unbiased") -> float:
    """Mean over tasks of the chance that at least one of k attempts succeeds.

    Raises:
        KExceedsTrials: k > n
    """
    _check(matrix, k, estimator)
    if estimator == "partition":
        values = [float(np.mean([any(b) for b in _blocks(r.outcomes, k)])) for r in matrix.rows]
    else:
        values = [task_pass_at(r.n, r.c, k) for r in matrix.rows]
    return float(np.mean(values))


def metric_table(matrix: TrialMatrix, ks: Sequence[int],
                 estimator: str = "unbiased") -> Dict[str, Optional[float]]:
    """``pass^k`` for every k plus ``pass@k`` for every k, keyed ``p^k`` / ``p@k``."""
    out: Dict[str, Optional[float]] = {}
    for k in sorted(set(ks)):
        out[f"p^{k}"] = pass_hat_k(matrix, k, estimator)
    for k in sorted(set(ks)):
        out[f"p@{k}"] = pass_at_k(matrix, k, estimator)
    return out
