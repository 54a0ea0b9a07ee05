"""Outcome verification against declarative checker specs."""

from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple

from arena.domain import Domain
from arena.environment import Environment
from arena.errors import ToolExecutionError
from arena.task import TaskSpec
from arena.types import EnvState, Role, ToolCall
from rollout.trajectory import Trajectory
from system.errors import TandemError
from system.logs import get_logger

from .checker import (
    CheckerSpec, FunctionCall, derive_key_functions, extract_function_calls, match_key_functions,
)
from .errors import CheckerSpecError
from .fields import DEFAULT_THRESHOLD, deep_compare
from .policy import PolicyReport, check_policies
from .report import VerificationReport

logger = get_logger(__name__)


def _snapshot(state: EnvState) -> EnvState:
    """Entities-only copy of a state, as stored in checker specs."""
    return EnvState(domain=state.domain, task_id=state.task_id, entities=state.entities)


def evaluate_submission(domain: Domain, spec: CheckerSpec, evaluated: Trajectory) -> VerificationReport:
    """Score a trajectory against a checker spec.

    Runs the state diff, key-function matching and policy checks. The reward
    is 1 only when all three score 1.0. Unusable input yields reward 0 with a
    diagnostic instead of an exception.
    """
    task_id = getattr(evaluated, "task_id", "")
    seed = getattr(evaluated, "seed", 0)
    try:
        if evaluated.final_state is None:
            return VerificationReport.failed("trajectory has no final state", task_id, seed)
        calls = extract_function_calls(evaluated)
        state = deep_compare(spec.reference_final_state, evaluated.final_state,
                             spec.field_overrides, spec.threshold)
        functions = match_key_functions(spec.reference_calls, calls, spec)
        policy = check_policies(domain, calls, evaluated.initial_state, evaluated.final_state,
                                spec.policy_focuses)
    except (TandemError, AttributeError, KeyError, TypeError, ValueError) as e:
        logger.debug("unverifiable trajectory %s: %s", task_id, e)
        return VerificationReport.failed(f"{type(e).__name__}: {e}", task_id, seed)
    return VerificationReport(
        component_scores={"state": state.score, "functions": functions.score,
                          "policy": policy.score},
        checks_state=state.checks,
        checks_functions=functions.checks,
        checks_policy=policy.checks,
        task_id=task_id,
        seed=seed,
    )


def build_checker(environment: Environment, task: TaskSpec, calls: Sequence[FunctionCall],
                  final_state: EnvState, policy_focuses: Optional[Sequence[str]] = None,
                  field_overrides: Optional[Mapping[str, str]] = None,
                  threshold: float = DEFAULT_THRESHOLD) -> CheckerSpec:
    """Checker spec from a validated call trace and the final state it produced.

    Policy focuses default to every rule of the domain.
    """
    domain = environment.domain
    spec = CheckerSpec(
        reference_final_state=_snapshot(final_state),
        key_functions=derive_key_functions(calls, task.must_have_functions, domain.registry),
        policy_focuses=list(domain.rules.ids if policy_focuses is None else policy_focuses),
        field_overrides=dict(field_overrides or {}),
        threshold=threshold,
        reference_calls=list(calls),
    )
    spec.validate(domain)
    return spec


def replay_trace(environment: Environment, task: TaskSpec,
                 trace: Sequence[Mapping[str, Any]]) -> Tuple[List[FunctionCall], EnvState]:
    """Execute a reference call trace from the task's initial state.

    Returns:
        (calls, final state)

    Raises:
        CheckerSpecError: a reference call fails
    """
    state = environment.reset(task, 0)
    calls: List[FunctionCall] = []
    for i, entry in enumerate(trace):
        caller = Role(entry.get("caller", "agent"))
        call = ToolCall(entry["name"], dict(entry.get("arguments", {})), caller)
        try:
            state, _ = environment.execute_tool(state, call)
        except ToolExecutionError as e:
            raise CheckerSpecError(f"task {task.id}: reference call {i} ({call.name}) "
                                   f"fails: {e.message}") from e
        calls.append(FunctionCall(call.name, call.arguments, caller.value, True, i))
    return calls, state


def materialize_checker(environment: Environment, task: TaskSpec) -> CheckerSpec:
    """The task's checker spec, deriving it from a ``reference_trace`` when needed.

    Raises:
        CheckerSpecError: the task carries no usable checker
    """
    raw = task.checker_spec
    if not raw:
        raise CheckerSpecError(f"task {task.id} has no checker spec")
    if "reference_final_state" in raw:
        spec = CheckerSpec.from_dict(raw)
        spec.validate(environment.domain)
        return spec
    if "reference_trace" not in raw:
        raise CheckerSpecError(f"task {task.id}: checker needs reference_final_state or reference_trace")
    calls, final_state = replay_trace(environment, task, raw["reference_trace"])
    return build_checker(environment, task, calls, final_state,
                         policy_focuses=raw.get("policy_focuses"),
                         field_overrides=raw.get("field_overrides"),
                         threshold=float(raw.get("threshold", DEFAULT_THRESHOLD)))


class Verifier:
    """Checker runs bound to one domain."""

    def __init__(self, domain: Domain):
        self.domain = domain
        self._specs: Dict[str, CheckerSpec] = {}

    def register(self, task_id: str, spec: CheckerSpec):
        spec.validate(self.domain)
        self._specs[task_id] = spec

    def spec_for(self, task_id: str) -> CheckerSpec:
        try:
            return self._specs[task_id]
        except KeyError:
            raise CheckerSpecError(f"no checker registered for task {task_id}") from None

    def prepare(self, environment: Environment, tasks: Sequence[TaskSpec]):
        """Materialize and register the checker of every task."""
        for task in tasks:
            self.register(task.id, materialize_checker(environment, task))

    def evaluate(self, spec: CheckerSpec, trajectory: Trajectory) -> VerificationReport:
        return evaluate_submission(self.domain, spec, trajectory)

    def check_policies(self, trajectory: Trajectory, rule_ids: Sequence[str],
                       final_state: Optional[EnvState] = None) -> PolicyReport:
        return check_policies(self.domain, extract_function_calls(trajectory),
                              trajectory.initial_state, final_state or trajectory.final_state,
                              rule_ids)

    def verify(self, trajectory: Trajectory) -> VerificationReport:
        """Evaluate against the registered checker and attach the result to the trajectory."""
        report = self.evaluate(self.spec_for(trajectory.task_id), trajectory)
        trajectory.reward = float(report.reward)
        trajectory.report = report.to_dict()
        return report

    def reward(self, trajectory: Trajectory) -> float:
        return float(self.verify(trajectory).reward)

    def reward_fn(self, spec: CheckerSpec) -> Callable[[Trajectory], float]:
        return lambda trajectory: float(self.evaluate(spec, trajectory).reward)
