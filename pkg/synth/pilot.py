"""Phase 2: small pilot batches, judged and evolved until quality settles."""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Sequence

import numpy as np

from system.config import SynthConfig
from system.logs import get_logger, kv
from system.seeding import derive_seed

from .instance import SynthesisInstance, Verdict
from .judge import Critique, judge
from .plan import MAX_EVOLUTIONS
from .prompts import PromptSet, evolve
from .workflow import Workflow

logger = get_logger(__name__)

MIN_BATCH, MAX_BATCH = 5, 20


@dataclass
class StopCriteria:
    infeasibility_max: float = 0.10
    validity_min: float = 0.95
    stability_delta: float = 0.05
    stable_window: int = 2

    @classmethod
    def from_config(cls, config: SynthConfig) -> "StopCriteria":
        return cls(config.infeasibility_max, config.validity_min, config.stability_delta)

    def stable(self, qualities: Sequence[float]) -> bool:
        """Judge-score deltas stayed under the threshold for the last ``stable_window`` iterations."""
        if len(qualities) < self.stable_window + 1:
            return False
        recent = qualities[-(self.stable_window + 1):]
        return all(abs(b - a) < self.stability_delta for a, b in zip(recent, recent[1:]))

    def met(self, history: Sequence["PilotMetrics"]) -> bool:
        if not history:
            return False
        last = history[-1]
        return (last.infeasibility <= self.infeasibility_max and last.validity >= self.validity_min
                and self.stable([m.quality for m in history]))


@dataclass
class PilotMetrics:
    iteration: int
    version: int
    infeasibility: float
    validity: float
    quality: float
    accepted: int
    discarded: int
    repair_mean: float
    categories: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return dict(self.__dict__)


@dataclass
class PilotResult:
    prompt_set: PromptSet
    history: List[PilotMetrics]
    converged: bool
    versions: List[PromptSet]

    @property
    def known_categories(self) -> List[str]:
        return sorted({c for m in self.history for c in m.categories})


def batch_metrics(iteration: int, version: int, instances: Sequence[SynthesisInstance],
                  critiques: Sequence[Critique]) -> PilotMetrics:
    total = sum(i.tool_calls_total for i in instances)
    ok = sum(i.tool_calls_ok for i in instances)
    return PilotMetrics(
        iteration=iteration,
        version=version,
        infeasibility=sum(i.first_verdict is Verdict.INFEASIBLE for i in instances) / len(instances),
        validity=ok / total if total else 1.0,
        quality=float(np.mean([c.overall for c in critiques])),
        accepted=sum(i.accepted for i in instances),
        discarded=sum(not i.accepted for i in instances),
        repair_mean=float(np.mean([i.repair_count for i in instances])),
        categories=sorted({c for i in instances for c in i.categories}),
    )


def run_pilot(workflow: Workflow, prompt_set: PromptSet, batch_size: int, criteria: StopCriteria,
              seed: int, max_iterations: int = MAX_EVOLUTIONS, start_position: int = 0) -> PilotResult:
    """Generate, judge and evolve until the stop criteria hold or the iterations run out.

    Every iteration that does not stop evolves the prompt set once, so a run
    that never converges ends at version ``max_iterations + 1``.

    Raises:
        ValueError: batch_size outside [5, 20]
    """
    if not MIN_BATCH <= batch_size <= MAX_BATCH:
        raise ValueError(f"pilot batch size must lie in [{MIN_BATCH}, {MAX_BATCH}], got {batch_size}")
    max_iterations = min(max_iterations, workflow.plan.max_evolutions)
    set_id = prompt_set.set_id
    history: List[PilotMetrics] = []
    versions = [prompt_set]
    for iteration in range(1, max_iterations + 1):
        instances = [
            workflow.produce(prompt_set, start_position + j,
                             derive_seed(seed, set_id, "pilot", start_position, iteration, j),
                             f"{set_id}_p{start_position:05d}_i{iteration:02d}_{j:02d}")
            for j in range(batch_size)
        ]
        critiques = [
            judge(inst, prompt_set.prompt("Judge"), workflow.backend,
                  derive_seed(seed, set_id, "judge", start_position, iteration, j),
                  f"{set_id}.v{prompt_set.version}.{j:02d}")
            for j, inst in enumerate(instances)
        ]
        metrics = batch_metrics(iteration, prompt_set.version, instances, critiques)
        history.append(metrics)
        logger.info("pilot iteration %s", kv(set=set_id, iteration=iteration, version=prompt_set.version,
                                             infeasibility=round(metrics.infeasibility, 3),
                                             validity=round(metrics.validity, 3),
                                             quality=round(metrics.quality, 3)))
        if criteria.met(history):
            return PilotResult(prompt_set, history, True, versions)
        prompt_set = evolve(prompt_set, critiques, workflow.backend,
                            derive_seed(seed, set_id, "evolve", start_position, iteration))
        versions.append(prompt_set)
    logger.warning("pilot did not converge %s", kv(set=set_id, iterations=max_iterations,
                                                   version=prompt_set.version))
    return PilotResult(prompt_set, history, False, versions)
