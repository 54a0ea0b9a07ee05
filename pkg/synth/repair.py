"""Bounded Modify -> re-validate loop."""

from typing import List, Union

from system.logs import get_logger

from .errors import ContractViolation
from .instance import Discard, Finding, RepairMode, SynthesisInstance
from .plan import MAX_REPAIRS, Stage
from .stages import RepairRequest, StageContext, run_stage

logger = get_logger(__name__)


def repair_mode(diagnostics: List[Finding], through: Stage) -> RepairMode:
    if through is Stage.TASK_VALIDATION:
        return RepairMode.TASK
    if any(d.category == "goal_failure" for d in diagnostics):
        return RepairMode.COMBINED
    return RepairMode.TRAJECTORY


def repair_loop(instance: SynthesisInstance, diagnostics: List[Finding], ctx: StageContext,
                max_repairs: int = MAX_REPAIRS,
                through: Stage = Stage.TRAJECTORY_VALIDATION) -> Union[SynthesisInstance, Discard]:
    """Alternate Modify and re-validation until the instance passes or the rounds run out.

    ``through`` is the validation stage that failed. A repaired task is
    re-checked by TaskValidation; when the dialogue failed it is regenerated
    and validated again.

    Returns:
        The repaired instance (``repair_count`` updated) or a Discard
    """
    max_repairs = min(max_repairs, MAX_REPAIRS)
    while instance.repair_count < max_repairs:
        instance.repair_count += 1
        mode = repair_mode(diagnostics, through)
        try:
            result = run_stage(Stage.MODIFY, RepairRequest(instance, diagnostics, mode), ctx)
        except ContractViolation as e:
            logger.debug("repair round %d of %s rejected: %s", instance.repair_count, instance.instance_id, e)
            continue
        if result.task is not None:
            instance.task = result.task
            instance.task_check = run_stage(Stage.TASK_VALIDATION, instance.task, ctx)
            if not instance.task_check.feasible:
                diagnostics = instance.task_check.findings()
                instance.note_findings(diagnostics)
                continue
        if result.repair_notes:
            instance.repair_notes = list(result.repair_notes)
        if through is Stage.TASK_VALIDATION:
            return instance
        instance.trajectory = run_stage(Stage.DIALOG_SYNTHESIS, instance, ctx)
        instance.note_dialogue(instance.trajectory)
        instance.trajectory_check = run_stage(Stage.TRAJECTORY_VALIDATION, instance, ctx)
        if instance.trajectory_check.passed:
            return instance
        diagnostics = instance.trajectory_check.issues
        instance.note_findings(diagnostics)
    reason = ", ".join(sorted({d.category for d in diagnostics})) or "unrepaired"
    return Discard(instance.instance_id, reason, instance.repair_count)
