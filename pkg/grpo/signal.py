"""Group-relative advantages, dynamic filtering and the clipped surrogate objective."""

from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from arena.types import Role
from policy.toy import ToyPolicyParams, log_softmax, token_features
from rollout.trajectory import Group

from .errors import EmptyBatch, ZeroVariance


@dataclass
class AdvantagedGroup:
    group: Group
    mu: float
    sigma: float
    advantages: List[float]


def group_advantages(rewards: Sequence[float]) -> Tuple[float, float, List[float]]:
    """Normalize rewards against their group: (r - mean) / population std.

    Raises:
        ValueError: fewer than 2 rewards
        ZeroVariance: all rewards are equal
    """
    r = np.asarray(rewards, dtype=np.float64)
    if r.size < 2:
        raise ValueError("a group needs at least 2 rewards")
    mu = float(r.mean())
    sigma = float(r.std())
    if sigma == 0.0:
        raise ZeroVariance(f"all {r.size} rewards equal {mu}")
    return mu, sigma, list((r - mu) / sigma)


def is_degenerate(group: Group) -> bool:
    return len(set(group.rewards)) <= 1


def advantage_group(group: Group) -> AdvantagedGroup:
    mu, sigma, advantages = group_advantages(group.rewards)
    group.advantages = advantages
    return AdvantagedGroup(group, mu, sigma, advantages)


def zero_advantage_group(group: Group) -> AdvantagedGroup:
    """Degenerate group kept in the batch with zero advantages."""
    mu = float(np.mean(group.rewards))
    advantages = [0.0] * group.size
    group.advantages = advantages
    return AdvantagedGroup(group, mu, 0.0, advantages)


def dynamic_filter(groups: Sequence[Group]) -> List[Group]:
    """Drop every group whose rewards are all equal.

    Raises:
        EmptyBatch: no group survives
    """
    retained = [g for g in groups if not is_degenerate(g)]
    if not retained:
        raise EmptyBatch(f"all {len(groups)} groups are degenerate")
    return retained


def clipped_surrogate(ratio, advantage, epsilon: float):
    """min(ratio * A, clip(ratio, 1 - eps, 1 + eps) * A), elementwise."""
    ratio = np.asarray(ratio, dtype=np.float64)
    if np.any(ratio <= 0):
        raise ValueError("ratio must be positive")
    advantage = np.asarray(advantage, dtype=np.float64)
    out = np.minimum(ratio * advantage, np.clip(ratio, 1.0 - epsilon, 1.0 + epsilon) * advantage)
    return float(out) if out.ndim == 0 else out


@dataclass
class TokenBatch:
    """Agent tokens of one or more groups, one entry per token."""
    traj_ids: List[str] = field(default_factory=list)
    turns: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    positions: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    features: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    token_ids: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    old_logprobs: np.ndarray = field(default_factory=lambda: np.zeros(0))
    new_logprobs: np.ndarray = field(default_factory=lambda: np.zeros(0))
    advantages: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        n = len(self.traj_ids)
        for name in ("turns", "positions", "features", "token_ids"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.int64))
        for name in ("old_logprobs", "new_logprobs", "advantages"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        lengths = {len(getattr(self, name)) for name in
                   ("turns", "positions", "features", "token_ids", "old_logprobs",
                    "new_logprobs", "advantages")}
        if lengths != {n}:
            raise ValueError("token batch columns differ in length")

    @property
    def total_tokens(self) -> int:
        return len(self.traj_ids)

    @classmethod
    def from_group(cls, advantaged: AdvantagedGroup,
                   params: Optional[ToyPolicyParams] = None) -> "TokenBatch":
        """Token records of every agent turn that recorded token ids.

        Old logprobs are the sampling-time values; new logprobs are scored
        under ``params`` when given, otherwise equal to the old ones.
        """
        rows = {k: [] for k in ("traj_ids", "turns", "positions", "features", "token_ids",
                                "old_logprobs", "advantages")}
        for trajectory, advantage in zip(advantaged.group.trajectories, advantaged.advantages):
            traj_id = f"{trajectory.task_id}:{trajectory.seed}"
            for record in trajectory.turns:
                if record.actor is not Role.AGENT or not record.token_ids:
                    continue
                ids = list(record.token_ids)
                if params is not None:
                    ids = [params.token_id(t) for t in ids]
                    feats = token_features(params, record.context or "", ids)
                else:
                    feats = [0] * len(ids)
                for pos, (tid, feat) in enumerate(zip(ids, feats)):
                    rows["traj_ids"].append(traj_id)
                    rows["turns"].append(record.turn)
                    rows["positions"].append(pos)
                    rows["features"].append(feat)
                    rows["token_ids"].append(tid)
                    rows["old_logprobs"].append(record.token_logprobs[pos])
                    rows["advantages"].append(advantage)
        batch = cls(new_logprobs=list(rows["old_logprobs"]), **rows)
        return batch.rescored(params) if params is not None else batch

    def rescored(self, params: ToyPolicyParams) -> "TokenBatch":
        """Copy with new logprobs recomputed under ``params``."""
        if self.total_tokens == 0:
            return replace(self)
        logp = np.apply_along_axis(log_softmax, 1, params.logits[self.features])
        new = logp[np.arange(self.total_tokens), self.token_ids]
        return replace(self, new_logprobs=new)

    def ratios(self) -> np.ndarray:
        return np.exp(self.new_logprobs - self.old_logprobs)

    @classmethod
    def concat(cls, batches: Sequence["TokenBatch"]) -> "TokenBatch":
        if not batches:
            return cls()
        return cls(
            traj_ids=[t for b in batches for t in b.traj_ids],
            **{name: np.concatenate([getattr(b, name) for b in batches])
               for name in ("turns", "positions", "features", "token_ids", "old_logprobs",
                            "new_logprobs", "advantages")},
        )

    def records(self) -> List[dict]:
        """Export rows ``{traj_id, turn, pos, old_logprob, advantage}``."""
        return [
            {"traj_id": self.traj_ids[i], "turn": int(self.turns[i]), "pos": int(self.positions[i]),
             "old_logprob": float(self.old_logprobs[i]), "advantage": float(self.advantages[i])}
            for i in range(self.total_tokens)
        ]


def batch_objective(batch: TokenBatch, epsilon: float = 0.2) -> float:
    """Token-normalized clipped surrogate: sum over tokens divided by the total token count.

    Raises:
        EmptyBatch: the batch has no tokens
    """
    if batch.total_tokens == 0:
        raise EmptyBatch("token batch is empty")
    terms = clipped_surrogate(batch.ratios(), batch.advantages, epsilon)
    return float(np.sum(terms) / batch.total_tokens)


def multi_group_objective(batches: Sequence[TokenBatch], epsilon: float = 0.2) -> float:
    """Mean of per-group objectives over groups with tokens."""
    values = [batch_objective(b, epsilon) for b in batches if b.total_tokens]
    if not values:
        raise EmptyBatch("no group has tokens")
    return float(np.mean(values))
