"""Desk-scale GRPO loop over the toy policy."""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from tqdm import tqdm

from arena.environment import Environment
from arena.task import TaskSpec
from policy.base import Policy
from policy.toy import ToyPolicy
from rollout.engine import sample_group
from rollout.trajectory import Group
from system.config import GrpoConfig
from system.logs import get_logger, kv
from system.seeding import derive_seed
from system.storage import JsonlWriter
from system.workers import WorkerPool
from verifier.core import Verifier

from .errors import EmptyBatch
from .gradient import toy_policy_gradient
from .signal import (
    TokenBatch, advantage_group, dynamic_filter, is_degenerate, zero_advantage_group,
)

logger = get_logger(__name__)


@dataclass
class LearningCurve:
    points: List[Dict[str, Any]] = field(default_factory=list)
    skipped: int = 0

    @property
    def mean_rewards(self) -> List[float]:
        return [p["mean_reward"] for p in self.points]

    def auc(self) -> float:
        """Mean reward averaged over iterations."""
        return float(np.mean(self.mean_rewards)) if self.points else 0.0

    def tail_mean(self, n: int = 10) -> float:
        tail = self.mean_rewards[-n:]
        return float(np.mean(tail)) if tail else 0.0


def _pick_tasks(tasks: Sequence[TaskSpec], count: int, seed: int) -> List[TaskSpec]:
    rng = np.random.default_rng(seed)
    replace = count > len(tasks)
    return [tasks[i] for i in rng.choice(len(tasks), size=count, replace=replace)]


def train_toy(env: Environment, tasks: Sequence[TaskSpec], policy: ToyPolicy, user_policy: Policy,
              config: GrpoConfig, verifier: Verifier, pool: Optional[WorkerPool] = None,
              signal_writer: Optional[JsonlWriter] = None, progress: bool = False) -> LearningCurve:
    """Sample groups, verify, filter, normalize and take gradient ascent steps.

    Each iteration samples ``prompts_per_batch`` tasks with ``group_size``
    episodes each. With dynamic filtering, degenerate groups are dropped and
    an iteration with nothing left is skipped; without it they stay in the
    gradient average with zero advantages. ``policy.params`` is updated in
    place.

    Returns:
        Per-iteration mean reward (before filtering) and retained group counts
    """
    if not tasks:
        raise ValueError("train_toy needs at least one task")
    params = policy.params
    curve = LearningCurve()
    iterations = range(config.iterations)
    if progress:
        iterations = tqdm(iterations, desc="train", unit="it")

    for iteration in iterations:
        iteration_seed = derive_seed(config.seed, iteration)
        batch_tasks = _pick_tasks(tasks, config.prompts_per_batch, iteration_seed)
        groups: List[Group] = []
        for slot, task in enumerate(batch_tasks):
            spec = verifier.spec_for(task.id)
            groups.append(sample_group(
                env, task, config.group_size, policy, user_policy,
                base_seed=derive_seed(iteration_seed, slot, task.id),
                max_turns=config.max_turns, reward_fn=verifier.reward_fn(spec), pool=pool,
            ))
        mean_reward = float(np.mean([r for g in groups for r in g.rewards]))

        if config.dynamic_filter:
            try:
                kept = [advantage_group(g) for g in dynamic_filter(groups)]
            except EmptyBatch:
                curve.skipped += 1
                logger.warning("skipping iteration, every group is degenerate %s",
                               kv(iteration=iteration, skipped=curve.skipped))
                curve.points.append({"iteration": iteration, "mean_reward": mean_reward,
                                     "groups_retained": 0})
                continue
        else:
            kept = [zero_advantage_group(g) if is_degenerate(g) else advantage_group(g)
                    for g in groups]

        batches = [TokenBatch.from_group(ag, params) for ag in kept]
        batches = [b for b in batches if b.total_tokens]
        if signal_writer is not None:
            for batch in batches:
                signal_writer.write_many(batch.records())
        if batches:
            for _ in range(config.epochs):
                grads = [toy_policy_gradient(b, params, config.epsilon) for b in batches]
                params.logits += config.learning_rate * np.mean(grads, axis=0)
        curve.points.append({"iteration": iteration, "mean_reward": mean_reward,
                             "groups_retained": len(kept)})
        logger.debug("iteration done %s", kv(iteration=iteration, mean_reward=round(mean_reward, 4),
                                             retained=len(kept)))
        if progress:
            iterations.set_postfix(reward=f"{mean_reward:.3f}")

    logger.info("training finished %s", kv(iterations=len(curve.points), skipped=curve.skipped,
                                           final_reward=round(curve.tail_mean(), 4)))
    return curve

