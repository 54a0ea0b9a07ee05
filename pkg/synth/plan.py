"""Worker workflow plans."""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Mapping, Sequence, Tuple

from arena.domain import Domain
from system.logs import get_logger

from .backends import Backend, decode_object, request_messages
from .errors import ContractViolation, InvalidPlan

logger = get_logger(__name__)


class Stage(str, Enum):
    RANDOM_POOL = "RandomPool"
    USER_INTENT = "UserIntent"
    TASK_VALIDATION = "TaskValidation"
    DIALOG_SYNTHESIS = "DialogSynthesis"
    TRAJECTORY_VALIDATION = "TrajectoryValidation"
    MODIFY = "Modify"
    VALIDATION_FUNCTION = "ValidationFunction"


CANONICAL_CHAIN: Tuple[Stage, ...] = tuple(Stage)

# worker prompts each stage runs with
STAGE_WORKERS: Dict[Stage, Tuple[str, ...]] = {
    Stage.RANDOM_POOL: ("RandomPool",),
    Stage.USER_INTENT: ("UserIntent",),
    Stage.TASK_VALIDATION: ("TaskValidation",),
    Stage.DIALOG_SYNTHESIS: ("UserSimulator", "TrajectoryAgent"),
    Stage.TRAJECTORY_VALIDATION: ("TrajectoryValidation",),
    Stage.MODIFY: ("Modify",),
    Stage.VALIDATION_FUNCTION: ("ValidationFunction",),
}

# stages whose artifacts must exist before a stage can run
PREREQUISITES: Dict[Stage, Tuple[Stage, ...]] = {
    Stage.RANDOM_POOL: (),
    Stage.USER_INTENT: (Stage.RANDOM_POOL,),
    Stage.TASK_VALIDATION: (Stage.USER_INTENT,),
    Stage.DIALOG_SYNTHESIS: (Stage.TASK_VALIDATION,),
    Stage.TRAJECTORY_VALIDATION: (Stage.DIALOG_SYNTHESIS,),
    Stage.MODIFY: (),
    Stage.VALIDATION_FUNCTION: (Stage.TRAJECTORY_VALIDATION,),
}

MAX_REPAIRS = 3
MAX_EVOLUTIONS = 16


@dataclass
class WorkflowPlan:
    """Ordered stages with their worker bindings and loop bounds."""
    stages: List[Stage] = field(default_factory=lambda: list(CANONICAL_CHAIN))
    bindings: Dict[Stage, Tuple[str, ...]] = field(default_factory=lambda: dict(STAGE_WORKERS))
    max_repairs: int = MAX_REPAIRS
    max_evolutions: int = MAX_EVOLUTIONS

    def __post_init__(self):
        self.stages = validate_stages(self.stages)
        if not 1 <= self.max_repairs <= MAX_REPAIRS:
            raise InvalidPlan(f"max_repairs must lie in [1, {MAX_REPAIRS}]")
        if not 1 <= self.max_evolutions <= MAX_EVOLUTIONS:
            raise InvalidPlan(f"max_evolutions must lie in [1, {MAX_EVOLUTIONS}]")

    @property
    def is_canonical(self) -> bool:
        return tuple(self.stages) == CANONICAL_CHAIN

    def workers(self) -> List[str]:
        return sorted({w for stage in self.stages for w in self.bindings.get(stage, ())})

    def check_prompts(self, prompts: Mapping[str, str]):
        """Every stage must have a bound prompt.

        Raises:
            InvalidPlan: a bound worker has no prompt text
        """
        for stage in self.stages:
            workers = self.bindings.get(stage, ())
            if not workers:
                raise InvalidPlan(f"stage {stage.value} has no worker binding")
            for worker in workers:
                if not prompts.get(worker):
                    raise InvalidPlan(f"stage {stage.value} is bound to {worker}, which has no prompt")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "stages": [s.value for s in self.stages],
            "bindings": {s.value: list(w) for s, w in sorted(self.bindings.items(), key=lambda kv: kv[0].value)},
            "max_repairs": self.max_repairs,
            "max_evolutions": self.max_evolutions,
        }


def validate_stages(stages: Sequence[Any]) -> List[Stage]:
    """Accept the canonical chain or a permutation of it that keeps data dependencies.

    Raises:
        InvalidPlan: unknown or repeated stage, missing stage, or broken ordering
    """
    resolved: List[Stage] = []
    for raw in stages:
        try:
            resolved.append(Stage(raw))
        except ValueError:
            raise InvalidPlan(f"unknown stage id {raw!r}") from None
    if not resolved or resolved[-1] is not Stage.VALIDATION_FUNCTION:
        raise InvalidPlan("workflow must end with ValidationFunction")
    if len(set(resolved)) != len(resolved):
        raise InvalidPlan("workflow repeats a stage")
    missing = [s.value for s in CANONICAL_CHAIN if s not in resolved]
    if missing:
        raise InvalidPlan(f"workflow lacks stages {missing}")
    position = {s: i for i, s in enumerate(resolved)}
    for stage in resolved:
        for before in PREREQUISITES[stage]:
            if position[before] > position[stage]:
                raise InvalidPlan(f"{stage.value} runs before its input stage {before.value}")
    return resolved


def plan_workflow(request: str, domain: Domain, targets: Mapping[str, Any], backend: Backend,
                  prompt: str, seed: int = 0) -> WorkflowPlan:
    """Ask the planner for a workflow and validate it against the known stages.

    Raises:
        InvalidPlan: the planner's stage list is not admissible
        BackendFailure: the backend produced nothing
    """
    payload = {
        "request": request,
        "domain": domain.name,
        "tools": [t.to_dict() for t in domain.registry],
        "rules": domain.rules.ids,
        "targets": dict(targets),
        "stage_ids": [s.value for s in CANONICAL_CHAIN],
    }
    text = backend.complete("Planner", request_messages(prompt, payload), seed)
    try:
        response = decode_object(text, "Planner")
    except ContractViolation as e:
        raise InvalidPlan(str(e)) from e
    stages = response.get("stages")
    if not isinstance(stages, list):
        raise InvalidPlan("planner response lacks a stages list")
    plan = WorkflowPlan(stages=validate_stages(stages))
    logger.info("workflow planned: %s", " -> ".join(s.value for s in plan.stages))
    return plan

