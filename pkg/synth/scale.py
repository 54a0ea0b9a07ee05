"""Phase 3: generation at scale with online auditing and drift pauses."""

from collections import deque
from dataclasses import dataclass, field
from typing import Any, Deque, Dict, List, Optional, Sequence

import numpy as np
from tqdm import tqdm

from system.config import SynthConfig
from system.logs import get_logger, kv
from system.seeding import derive_seed
from system.workers import WorkerPool

from .errors import DriftUnrecoverable
from .instance import SynthesisInstance
from .judge import judge
from .pilot import PilotResult, StopCriteria, run_pilot
from .prompts import PromptSet
from .workflow import Workflow

logger = get_logger(__name__)

REPAIR_FLOOR = 0.1


class DriftDetector:
    """Watches the trailing window of audited instances for one prompt set.

    Drift is a repair-count mean above twice the pilot baseline, an error
    category the pilot never saw, or a judge-score drop beyond ``quality_drop``.
    """

    def __init__(self, window: int, baseline: PilotResult, quality_drop: float):
        self.window_size = window
        self.quality_drop = quality_drop
        self.window: Deque[Dict[str, Any]] = deque(maxlen=window)
        self.rebase(baseline)

    def rebase(self, baseline: PilotResult):
        last = baseline.history[-1]
        self.baseline_repairs = last.repair_mean
        self.baseline_quality = last.quality
        self.known = set(baseline.known_categories)
        self.window.clear()

    def observe(self, entry: Dict[str, Any]) -> Optional[str]:
        """Record one audited instance; returns the drift reason, if any."""
        self.window.append(entry)
        fresh = sorted(set(entry["categories"]) - self.known)
        if fresh:
            return f"new error categories {fresh}"
        if len(self.window) < max(2, self.window_size // 2):
            return None
        repairs = float(np.mean([e["repair_count"] for e in self.window]))
        if repairs > 2 * max(self.baseline_repairs, REPAIR_FLOOR):
            return f"repair mean {repairs:.2f} doubled from {self.baseline_repairs:.2f}"
        quality = float(np.mean([e["quality"] for e in self.window]))
        if quality < self.baseline_quality - self.quality_drop:
            return f"judge score fell to {quality:.3f} from {self.baseline_quality:.3f}"
        return None


@dataclass
class SetOutput:
    set_id: str
    accepted: List[SynthesisInstance] = field(default_factory=list)
    audit: List[Dict[str, Any]] = field(default_factory=list)
    versions: List[PromptSet] = field(default_factory=list)
    pauses: int = 0
    discarded: int = 0
    generated: int = 0

    @property
    def prompt_set(self) -> PromptSet:
        return self.versions[-1]


@dataclass
class ScaleResult:
    sets: List[SetOutput]

    @property
    def instances(self) -> List[SynthesisInstance]:
        return [inst for out in self.sets for inst in out.accepted]

    @property
    def audit_log(self) -> List[Dict[str, Any]]:
        return [entry for out in self.sets for entry in out.audit]


def split_quota(n_target: int, k: int) -> List[int]:
    """Per-set quotas summing to ``n_target``; earlier sets take the remainder."""
    base, extra = divmod(n_target, k)
    return [base + (1 if i < extra else 0) for i in range(k)]


def scale_set(workflow: Workflow, pilot: PilotResult, quota: int, config: SynthConfig, seed: int,
              progress: Optional[tqdm] = None) -> SetOutput:
    """Generate ``quota`` accepted instances from one converged prompt set.

    Raises:
        DriftUnrecoverable: a local pilot after a drift pause fails to reconverge,
            or acceptance stalls
    """
    prompts = pilot.prompt_set
    set_id = prompts.set_id
    out = SetOutput(set_id, versions=[prompts])
    criteria = StopCriteria.from_config(config)
    detector = DriftDetector(config.drift_window, pilot, 2 * config.stability_delta)
    max_attempts = 10 * quota + 10
    position = 0
    while len(out.accepted) < quota:
        if position >= max_attempts:
            raise DriftUnrecoverable(set_id, f"only {len(out.accepted)} of {quota} instances accepted "
                                             f"after {position} attempts")
        instance = workflow.produce(prompts, position, derive_seed(seed, set_id, "scale", position),
                                    f"{set_id}_{position:05d}")
        position += 1
        out.generated += 1
        if instance.accepted:
            out.accepted.append(instance)
            if progress is not None:
                progress.update(1)
        else:
            out.discarded += 1
        audit_rng = np.random.default_rng(derive_seed(seed, set_id, "audit", instance.position))
        if config.audit_rate <= 0 or audit_rng.random() >= config.audit_rate:
            continue
        critique = judge(instance, prompts.prompt("Judge"), workflow.backend,
                         derive_seed(seed, set_id, "audit-judge", instance.position),
                         f"{set_id}.audit.{instance.position:05d}")
        entry = {
            "set_id": set_id,
            "instance_id": instance.instance_id,
            "position": instance.position,
            "version": prompts.version,
            "status": instance.status.value,
            "repair_count": instance.repair_count,
            "categories": sorted(set(instance.categories) | {f.category for f in critique.findings}),
            "quality": critique.overall,
            "critique": critique.to_dict(),
            "drift": None,
        }
        reason = detector.observe(entry)
        entry["drift"] = reason
        out.audit.append(entry)
        if reason is None:
            continue
        out.pauses += 1
        logger.warning("drift detected, pausing prompt set %s", kv(set=set_id, position=position, reason=reason))
        local = run_pilot(workflow, prompts, config.pilot_batch_size, criteria,
                          derive_seed(seed, set_id, "repilot", out.pauses),
                          config.max_pilot_iterations, start_position=position)
        out.versions.extend(local.versions[1:])
        if not local.converged:
            raise DriftUnrecoverable(set_id, f"local pilot at position {position} did not reconverge ({reason})")
        prompts = local.prompt_set
        detector.rebase(local)
        logger.info("prompt set %s resumed at v%d", set_id, prompts.version)
    return out


def run_scale(workflow: Workflow, pilots: Sequence[PilotResult], n_target: int, config: SynthConfig,
              seed: int, pool: Optional[WorkerPool] = None, progress: bool = False) -> ScaleResult:
    """Split ``n_target`` over the converged sets and generate them in parallel.

    Raises:
        ValueError: no pilot result given
        DriftUnrecoverable: see ``scale_set``
    """
    if not pilots:
        raise ValueError("run_scale needs at least one converged prompt set")
    if config.audit_rate <= 0:
        logger.warning("audit_rate is 0, drift cannot be detected during scaled generation")
    quotas = split_quota(n_target, len(pilots))
    bar = tqdm(total=n_target, desc="synth", unit="inst") if progress else None
    runner = pool or WorkerPool(1)
    try:
        outputs = runner.map(lambda job: scale_set(workflow, job[0], job[1], config, seed, bar),
                             list(zip(pilots, quotas)))
    finally:
        if bar is not None:
            bar.close()
    return ScaleResult(list(outputs))
