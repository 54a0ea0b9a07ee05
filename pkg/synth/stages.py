"""The seven worker stages and the dispatcher that runs them.

Backends propose; the environment decides. TaskValidation executes the
proposed plan, DialogSynthesis runs a real episode, and ValidationFunction
builds its checker from the executed trace and re-verifies against it.
"""

from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Mapping, Optional

from arena.environment import Environment
from arena.errors import FixtureError, ToolExecutionError, UnknownDomainEntity, UnknownTool
from arena.task import INTENT_FIELDS, TaskSpec
from arena.types import Observation, Role, Termination, ToolCall
from policy.base import Policy
from policy.parsing import PolicyOutput
from policy.remote import observation_messages
from rollout.engine import run_episode
from rollout.trajectory import Trajectory
from system.errors import TandemError
from system.logs import get_logger
from system.seeding import derive_seed
from system.storage import canonical_json
from verifier.checker import CheckerSpec, extract_function_calls
from verifier.core import build_checker, evaluate_submission
from verifier.fields import FieldClass, deep_compare
from verifier.policy import check_policies

from .backends import Backend, decode_object, request_messages, with_brief
from .errors import BackendFailure, ContractViolation
from .instance import (
    TRAJECTORY_CATEGORIES, Finding, RepairMode, SynthesisInstance, TaskCheck, TrajectoryCheck, Verdict,
)
from .plan import Stage
from .prompts import PromptSet

logger = get_logger(__name__)

FACTOR_POOLS: Dict[str, List[str]] = {
    "user_profiles": ["frequent traveller", "first-time customer", "small business owner",
                      "retired customer", "student on a budget"],
    "testing_objectives": ["policy adherence", "multi-step execution", "information gathering",
                           "error recovery"],
    "deception_tactics": ["none", "claims a false membership tier", "invents an earlier promise",
                          "pressures with urgency"],
    "operational_complexity": ["single action", "lookup then action", "conditional action"],
    "behavioral_patterns": ["cooperative", "impatient", "verbose", "terse"],
    "complexity_levels": ["low", "medium", "high"],
    "urgency_levels": ["low", "normal", "urgent"],
    "emotional_states": ["calm", "frustrated", "anxious", "cheerful"],
}

SCENARIO_KEYS = tuple(FACTOR_POOLS) + ("policy_focuses", "seed")


def _category_for(code: str) -> str:
    if code == "entity_not_found":
        return "missing_resource"
    if code == "policy_rejection":
        return "policy_violation"
    return "contradictory_constraints"


@dataclass
class StageContext:
    """Everything a stage needs besides its input artifact."""
    env: Environment
    backend: Backend
    prompts: PromptSet
    seed: int
    position: int = 0
    max_turns: int = 30

    def ask(self, worker: str, payload: Mapping[str, Any], salt: Any = "") -> Dict[str, Any]:
        """One JSON round trip with a worker."""
        text = self.backend.complete(worker, request_messages(self.prompts.prompt(worker), payload),
                                     derive_seed(self.seed, worker, salt))
        return decode_object(text, worker)


@dataclass
class RepairRequest:
    instance: SynthesisInstance
    diagnostics: List[Finding]
    mode: RepairMode


@dataclass
class ModifyResult:
    task: Optional[TaskSpec] = None
    repair_notes: List[str] = field(default_factory=list)


class SynthPolicy(Policy):
    """Dialogue party played by a backend worker with a JSON brief attached."""

    def __init__(self, role: Role, backend: Backend, worker: str, prompt: str, brief: Mapping[str, Any]):
        super().__init__(role)
        self.backend = backend
        self.worker = worker
        self.prompt = prompt
        self.brief = dict(brief)
        self.name = f"synth:{worker}"
        self.failures: List[BackendFailure] = []

    def _generate(self, obs: Observation, rng_seed: int) -> PolicyOutput:
        messages = observation_messages(obs)
        messages[0]["content"] = with_brief(f"{self.prompt}\n\n{messages[0]['content']}", self.brief)
        try:
            text = self.backend.complete(self.worker, messages, rng_seed)
        except BackendFailure as e:
            self.failures.append(e)
            raise
        return PolicyOutput(raw_text=text, parsed=self.parse(text))


# --- stages ---

def random_pool(position: int, ctx: StageContext) -> Dict[str, Any]:
    """Scenario seed: one value per factor plus the rules the task should stress."""
    domain = ctx.env.domain
    pools = dict(FACTOR_POOLS, policy_focuses=list(domain.rules.ids))
    scenario_seed = derive_seed(ctx.seed, "scenario", position)
    response = ctx.ask("RandomPool", {"factor_pools": pools, "seed": scenario_seed, "domain": domain.name})
    missing = [k for k in SCENARIO_KEYS if k not in response]
    if missing:
        raise ContractViolation(Stage.RANDOM_POOL.value, f"scenario lacks {missing}")
    focuses = response["policy_focuses"]
    if isinstance(focuses, str):
        focuses = [focuses]
    if not isinstance(focuses, list) or any(domain.resolve_rule(str(r)) is None for r in focuses):
        raise ContractViolation(Stage.RANDOM_POOL.value, f"unknown policy focuses {focuses!r}")
    scenario = {k: response[k] for k in SCENARIO_KEYS}
    scenario["policy_focuses"] = [str(r) for r in focuses]
    return scenario


def task_from_response(response: Mapping[str, Any], task_id: str, domain: str, stage: str) -> TaskSpec:
    missing = [k for k in INTENT_FIELDS if k not in response]
    if missing:
        raise ContractViolation(stage, f"task lacks {missing}")
    must_have = response["must_have_functions"]
    if not isinstance(must_have, list) or not all(isinstance(n, str) for n in must_have):
        raise ContractViolation(stage, "must_have_functions must be a list of tool names")
    seed_spec = response.get("initial_state_seed") or {}
    if not isinstance(seed_spec, dict) or not isinstance(response["selected_parameters"], dict):
        raise ContractViolation(stage, "initial_state_seed and selected_parameters must be objects")
    try:
        return TaskSpec(id=task_id, domain=domain, initial_state_seed=seed_spec,
                        **{k: response[k] for k in INTENT_FIELDS})
    except (TypeError, FixtureError) as e:
        raise ContractViolation(stage, str(e)) from e


def user_intent(scenario: Mapping[str, Any], ctx: StageContext, task_id: str) -> TaskSpec:
    domain = ctx.env.domain
    payload = {
        "scenario": dict(scenario),
        "domain": domain.name,
        "tools": domain.registry.names,
        "entities": sorted(domain.entities),
        "set_id": ctx.prompts.set_id,
        "prompt_version": ctx.prompts.version,
        "position": ctx.position,
    }
    response = ctx.ask("UserIntent", payload)
    return task_from_response(response, task_id, domain.name, Stage.USER_INTENT.value)


def _plan_calls(response: Mapping[str, Any], stage: str) -> List[Dict[str, Any]]:
    plan = response.get("plan")
    if not isinstance(plan, list):
        raise ContractViolation(stage, "response lacks a plan list")
    calls = []
    for step in plan:
        if not isinstance(step, Mapping) or not isinstance(step.get("name"), str) \
                or not isinstance(step.get("arguments", {}), Mapping):
            raise ContractViolation(stage, f"malformed plan step {step!r}")
        calls.append({"name": step["name"], "arguments": dict(step.get("arguments", {}))})
    return calls


def execute_plan(env: Environment, task: TaskSpec, plan: List[Dict[str, Any]]) -> TaskCheck:
    """Run a plan from the task's initial state; the outcome is the verdict."""
    try:
        state = env.reset(task, 0)
    except UnknownDomainEntity as e:
        return TaskCheck(Verdict.INFEASIBLE, plan, [{"call": None, "ok": False, "result": str(e)}],
                         "missing_resource")
    except (UnknownTool, FixtureError) as e:
        return TaskCheck(Verdict.INFEASIBLE, plan, [{"call": None, "ok": False, "result": str(e)}],
                         "contradictory_constraints")
    evidence = []
    succeeded = set()
    for step in plan:
        call = ToolCall(step["name"], step["arguments"], Role.AGENT)
        try:
            state, result = env.execute_tool(state, call)
        except ToolExecutionError as e:
            evidence.append({"call": step, "ok": False, "result": f"{e.code}: {e.message}"})
            return TaskCheck(Verdict.INFEASIBLE, plan, evidence, _category_for(e.code))
        except TandemError as e:
            evidence.append({"call": step, "ok": False, "result": str(e)})
            return TaskCheck(Verdict.INFEASIBLE, plan, evidence, "contradictory_constraints")
        evidence.append({"call": step, "ok": True, "result": result.payload})
        succeeded.add(step["name"])
    uncovered = [n for n in task.must_have_functions if n not in succeeded]
    if uncovered:
        evidence.append({"call": None, "ok": False, "result": f"plan never calls {uncovered}"})
        return TaskCheck(Verdict.INFEASIBLE, plan, evidence, "contradictory_constraints")
    return TaskCheck(Verdict.FEASIBLE, plan, evidence, None, state)


def task_validation(task: TaskSpec, ctx: StageContext) -> TaskCheck:
    payload = {"task": task.to_dict(), "tools": [t.to_dict() for t in ctx.env.domain.registry]}
    plan = _plan_calls(ctx.ask("TaskValidation", payload, salt=task.id), Stage.TASK_VALIDATION.value)
    return execute_plan(ctx.env, task, plan)


def dialog_synthesis(instance: SynthesisInstance, ctx: StageContext) -> Trajectory:
    """Run the dialogue between the simulated user and the trajectory agent."""
    if instance.task is None or instance.task_check is None or not instance.task_check.feasible:
        raise ContractViolation(Stage.DIALOG_SYNTHESIS.value, "needs a feasible, validated task")
    brief = {"position": ctx.position, "task_id": instance.task.id}
    agent = SynthPolicy(Role.AGENT, ctx.backend, "TrajectoryAgent", ctx.prompts.prompt("TrajectoryAgent"),
                        dict(brief, plan=instance.task_check.plan, repair_notes=instance.repair_notes))
    user = SynthPolicy(Role.USER, ctx.backend, "UserSimulator", ctx.prompts.prompt("UserSimulator"),
                       dict(brief, scenario=instance.task.scenario(), persona=instance.scenario))
    seed = derive_seed(ctx.seed, "dialogue", instance.repair_count)
    trajectory = run_episode(ctx.env, instance.task, agent, user, ctx.max_turns, seed)
    failures = agent.failures + user.failures
    if failures:
        raise failures[0]
    return trajectory


def _programmatic_issues(instance: SynthesisInstance, env: Environment) -> List[Finding]:
    trajectory, task = instance.trajectory, instance.task
    issues: List[Finding] = []
    calls = trajectory.tool_calls()
    for call in calls:
        if call["ok"]:
            continue
        category = "policy_violation" if call["error"] == "policy_rejection" else "function_error"
        issues.append(Finding(category, f"{call['name']} failed with {call['error']}",
                              canonical_json({"name": call["name"], "arguments": call["arguments"],
                                              "turn": call["turn"]})))
    report = check_policies(env.domain, extract_function_calls(trajectory), trajectory.initial_state,
                            trajectory.final_state, env.domain.rules.ids)
    for check in report.checks:
        if not check["pass"]:
            issues.append(Finding("policy_violation", f"rule {check['rule_id']} breached",
                                  "; ".join(check["violations"])))
    if trajectory.termination != Termination.USER_STOP.value:
        issues.append(Finding("goal_failure", "dialogue did not end with the user satisfied",
                              f"termination={trajectory.termination}"))
    done = {c["name"] for c in calls if c["ok"]}
    for name in task.must_have_functions:
        if name not in done:
            issues.append(Finding("goal_failure", f"required function {name} never succeeded", name))
    expected = instance.task_check.final_state if instance.task_check else None
    if expected is not None:
        diff = deep_compare(expected, trajectory.final_state)
        if diff.score < 1.0:
            paths = ", ".join(c["path"] for c in diff.checks[:5])
            issues.append(Finding("goal_failure", "final state differs from the validated plan", paths))
    return issues


def trajectory_validation(instance: SynthesisInstance, ctx: StageContext) -> TrajectoryCheck:
    """Programmatic trace checks combined with the backend's review."""
    if instance.trajectory is None or instance.task is None:
        raise ContractViolation(Stage.TRAJECTORY_VALIDATION.value, "needs a dialogue")
    stage = Stage.TRAJECTORY_VALIDATION.value
    issues = _programmatic_issues(instance, ctx.env)
    payload = {
        "task": instance.task.scenario(),
        "must_have_functions": instance.task.must_have_functions,
        "dialogue": [{"turn": t.turn, "actor": t.actor.value, "text": t.raw_text}
                     for t in instance.trajectory.turns],
        "tool_calls": instance.trajectory.tool_calls(),
        "programmatic_issues": [i.to_dict() for i in issues],
    }
    response = ctx.ask("TrajectoryValidation", payload, salt=(instance.task.id, instance.repair_count))
    try:
        verdict = Verdict(response.get("verdict"))
    except ValueError:
        raise ContractViolation(stage, f"verdict must be PASS or FAIL, got {response.get('verdict')!r}") from None
    if verdict not in (Verdict.PASS, Verdict.FAIL):
        raise ContractViolation(stage, f"verdict must be PASS or FAIL, got {verdict.value}")
    for item in response.get("issues") or []:
        if not isinstance(item, Mapping) or item.get("category") not in TRAJECTORY_CATEGORIES:
            raise ContractViolation(stage, f"unknown issue {item!r}")
        try:
            finding = Finding(item["category"], str(item.get("description", "")), str(item.get("evidence", "")))
        except ValueError as e:
            raise ContractViolation(stage, str(e)) from e
        if finding not in issues:
            issues.append(finding)
    if issues or verdict is Verdict.FAIL:
        return TrajectoryCheck(Verdict.FAIL, issues)
    return TrajectoryCheck(Verdict.PASS, [])


def must_have_retention(before: List[str], after: List[str]) -> float:
    if not before:
        return 1.0
    return len(set(before) & set(after)) / len(set(before))


def modify(request: RepairRequest, ctx: StageContext) -> ModifyResult:
    """Localized edit guided by diagnostics.

    Raises:
        ContractViolation: the edit is malformed or keeps under 80% of the must-have functions
    """
    stage = Stage.MODIFY.value
    instance = request.instance
    payload = {
        "mode": request.mode.value,
        "task": instance.task.to_dict(),
        "diagnostics": [d.to_dict() for d in request.diagnostics],
        "repair_round": instance.repair_count + 1,
        "domain": ctx.env.domain.name,
    }
    response = ctx.ask("Modify", payload, salt=(instance.task.id, instance.repair_count))
    result = ModifyResult()
    if request.mode in (RepairMode.TASK, RepairMode.COMBINED):
        raw = response.get("task")
        if not isinstance(raw, Mapping):
            raise ContractViolation(stage, f"{request.mode.value} repair must return a task")
        result.task = task_from_response(raw, instance.task.id, ctx.env.domain.name, stage)
        kept = must_have_retention(instance.task.must_have_functions, result.task.must_have_functions)
        if kept < 0.8:
            raise ContractViolation(stage, f"edit keeps only {kept:.0%} of must_have_functions")
    if request.mode in (RepairMode.TRAJECTORY, RepairMode.COMBINED):
        notes = response.get("repair_notes")
        if not isinstance(notes, list) or not all(isinstance(n, str) for n in notes):
            raise ContractViolation(stage, "repair_notes must be a list of text")
        result.repair_notes = list(notes)
    return result


def validation_function(instance: SynthesisInstance, ctx: StageContext) -> CheckerSpec:
    """Checker from the validated trace and final state, re-verified on its own trajectory."""
    stage = Stage.VALIDATION_FUNCTION.value
    if instance.trajectory_check is None or not instance.trajectory_check.passed:
        raise ContractViolation(stage, "needs a trajectory that passed validation")
    trajectory, domain = instance.trajectory, ctx.env.domain
    calls = [c for c in extract_function_calls(trajectory) if c.ok]
    payload = {
        "task_id": instance.task.id,
        "tool_calls": [c.to_dict() for c in calls],
        "rule_ids": domain.rules.ids,
        "policy_focuses": instance.scenario.get("policy_focuses", []),
    }
    response = ctx.ask("ValidationFunction", payload, salt=instance.task.id)
    focuses = response.get("policy_focuses", domain.rules.ids)
    overrides = response.get("field_overrides") or {}
    if not isinstance(focuses, list) or any(domain.resolve_rule(str(r)) is None for r in focuses):
        raise ContractViolation(stage, f"unknown policy focuses {focuses!r}")
    if not isinstance(overrides, Mapping) or any(v not in {c.value for c in FieldClass}
                                                 for v in overrides.values()):
        raise ContractViolation(stage, "field_overrides must map field patterns to exact, semantic or skip")
    spec = build_checker(ctx.env, instance.task, calls, trajectory.final_state,
                         policy_focuses=[str(r) for r in focuses], field_overrides=dict(overrides))
    report = evaluate_submission(domain, spec, trajectory)
    if not report.reward:
        raise ContractViolation(stage, f"checker rejects its own trajectory: {report.component_scores}")
    return spec


_DISPATCH: Dict[Stage, Callable[..., Any]] = {
    Stage.RANDOM_POOL: random_pool,
    Stage.TASK_VALIDATION: task_validation,
    Stage.DIALOG_SYNTHESIS: dialog_synthesis,
    Stage.TRAJECTORY_VALIDATION: trajectory_validation,
    Stage.MODIFY: modify,
    Stage.VALIDATION_FUNCTION: validation_function,
}

_INPUTS = {
    Stage.RANDOM_POOL: int,
    Stage.USER_INTENT: dict,
    Stage.TASK_VALIDATION: TaskSpec,
    Stage.DIALOG_SYNTHESIS: SynthesisInstance,
    Stage.TRAJECTORY_VALIDATION: SynthesisInstance,
    Stage.MODIFY: RepairRequest,
    Stage.VALIDATION_FUNCTION: SynthesisInstance,
}


def run_stage(stage: Stage, artifact: Any, ctx: StageContext, task_id: Optional[str] = None) -> Any:
    """Run one stage on its input artifact.

    Raises:
        ContractViolation: the input or output artifact breaks the stage contract
        BackendFailure: the backend produced nothing
    """
    stage = Stage(stage)
    expected = _INPUTS[stage]
    if not isinstance(artifact, expected):
        raise ContractViolation(stage.value, f"expects {expected.__name__}, got {type(artifact).__name__}")
    if stage is Stage.USER_INTENT:
        return user_intent(artifact, ctx, task_id or f"{ctx.prompts.set_id}_{ctx.position:05d}")
    return _DISPATCH[stage](artifact, ctx)
