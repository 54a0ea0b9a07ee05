"""One instance through the planned worker stages."""

from typing import Optional

from arena.environment import Environment
from system.logs import get_logger, kv

from .backends import Backend
from .errors import ContractViolation
from .instance import Discard, SynthesisInstance
from .plan import Stage, WorkflowPlan
from .prompts import PromptSet
from .repair import repair_loop
from .stages import StageContext, run_stage

logger = get_logger(__name__)


class Workflow:
    """Runs the planned stages for one instance at a time."""

    def __init__(self, env: Environment, backend: Backend, plan: Optional[WorkflowPlan] = None,
                 max_turns: int = 30):
        self.env = env
        self.backend = backend
        self.plan = plan or WorkflowPlan()
        self.max_turns = max_turns

    def produce(self, prompts: PromptSet, position: int, seed: int, instance_id: str) -> SynthesisInstance:
        """Generate, validate, repair and check one instance.

        Modify is not run in sequence; it runs inside the repair loop of
        whichever validation stage fails. Contract violations discard the
        instance; backend failures propagate.
        """
        self.plan.check_prompts(prompts.prompts)
        ctx = StageContext(self.env, self.backend, prompts, seed, position, self.max_turns)
        instance = SynthesisInstance(instance_id, prompts.set_id, seed, position)
        try:
            for stage in self.plan.stages:
                if stage is Stage.MODIFY:
                    continue
                if not self._advance(stage, instance, ctx):
                    break
        except ContractViolation as e:
            instance.discard(f"contract violation in {e.stage}")
            logger.debug("discarding %s: %s", instance_id, e)
        if not instance.accepted:
            logger.warning("discarded synthesis instance %s", kv(id=instance_id, reason=instance.discard_reason,
                                                                 repairs=instance.repair_count))
        return instance

    def _repair(self, instance: SynthesisInstance, diagnostics, ctx: StageContext, through: Stage) -> bool:
        instance.note_findings(diagnostics)
        outcome = repair_loop(instance, diagnostics, ctx, self.plan.max_repairs, through)
        if isinstance(outcome, Discard):
            instance.discard(f"repair exhausted after {outcome.rounds} rounds: {outcome.reason}")
            return False
        return True

    def _advance(self, stage: Stage, instance: SynthesisInstance, ctx: StageContext) -> bool:
        if stage is Stage.RANDOM_POOL:
            instance.scenario = run_stage(stage, instance.position, ctx)
        elif stage is Stage.USER_INTENT:
            instance.task = run_stage(stage, instance.scenario, ctx, task_id=instance.instance_id)
        elif stage is Stage.TASK_VALIDATION:
            instance.task_check = run_stage(stage, instance.task, ctx)
            instance.first_verdict = instance.task_check.verdict
            if not instance.task_check.feasible:
                return self._repair(instance, instance.task_check.findings(), ctx, stage)
        elif stage is Stage.DIALOG_SYNTHESIS:
            instance.trajectory = run_stage(stage, instance, ctx)
            instance.note_dialogue(instance.trajectory)
        elif stage is Stage.TRAJECTORY_VALIDATION:
            instance.trajectory_check = run_stage(stage, instance, ctx)
            if not instance.trajectory_check.passed:
                return self._repair(instance, instance.trajectory_check.issues, ctx, stage)
        elif stage is Stage.VALIDATION_FUNCTION:
            instance.checker = run_stage(stage, instance, ctx)
            instance.task.checker_spec = instance.checker.to_dict()
            instance.accept(self.plan.max_repairs)
        return True
