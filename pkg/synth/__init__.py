from .errors import SynthError, InvalidPlan, ContractViolation, BackendFailure, DriftUnrecoverable
from .backends import Backend, LiveBackend, ScriptedBackend, decode_json, request_messages
from .mock import MockBackend, FaultProfile
from .plan import Stage, WorkflowPlan, CANONICAL_CHAIN, plan_workflow, validate_stages
from .instance import (
    Verdict, RepairMode, Status, Finding, TaskCheck, TrajectoryCheck, Discard, SynthesisInstance,
)
from .judge import AXES, Critique, judge
from .prompts import WORKERS, PromptSet, load_default_prompts, generate_prompt_set, evolve
from .stages import StageContext, RepairRequest, ModifyResult, execute_plan, run_stage
from .repair import repair_loop
from .workflow import Workflow
from .pilot import StopCriteria, PilotMetrics, PilotResult, run_pilot
from .scale import DriftDetector, ScaleResult, run_scale, split_quota
from .archive import write_archive, load_archive_tasks
from .runner import SynthesisResult, run_synthesis

__all__ = [
    'SynthError', 'InvalidPlan', 'ContractViolation', 'BackendFailure', 'DriftUnrecoverable',
    'Backend', 'LiveBackend', 'ScriptedBackend', 'MockBackend', 'FaultProfile',
    'decode_json', 'request_messages',
    'Stage', 'WorkflowPlan', 'CANONICAL_CHAIN', 'plan_workflow', 'validate_stages',
    'Verdict', 'RepairMode', 'Status', 'Finding', 'TaskCheck', 'TrajectoryCheck', 'Discard',
    'SynthesisInstance',
    'AXES', 'Critique', 'judge',
    'WORKERS', 'PromptSet', 'load_default_prompts', 'generate_prompt_set', 'evolve',
    'StageContext', 'RepairRequest', 'ModifyResult', 'execute_plan', 'run_stage',
    'repair_loop', 'Workflow',
    'StopCriteria', 'PilotMetrics', 'PilotResult', 'run_pilot',
    'DriftDetector', 'ScaleResult', 'run_scale', 'split_quota',
    'write_archive', 'load_archive_tasks',
    'SynthesisResult', 'run_synthesis',
]
