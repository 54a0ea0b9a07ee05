"""Workflow plans, prompt sets, worker stages, repair, pilot, drift and the mock-backed pipeline."""

import json
import logging

import pytest

from arena import Environment, TaskSpec
from synth import (
    AXES, CANONICAL_CHAIN, ContractViolation, DriftDetector, DriftUnrecoverable, FaultProfile,
    InvalidPlan, MockBackend, PilotMetrics, PilotResult, PromptSet, RepairMode, RepairRequest,
    ScriptedBackend, Stage, StageContext, Status, StopCriteria, SynthesisInstance, Verdict, Workflow,
    WorkflowPlan, decode_json, evolve, execute_plan, generate_prompt_set, judge, load_archive_tasks,
    load_default_prompts, plan_workflow, repair_loop, run_pilot, run_scale, run_stage, run_synthesis,
    split_quota, validate_stages,
)
from synth.instance import Discard, Finding
from synth.judge import Critique
from synth.plan import MAX_EVOLUTIONS
from system.config import SynthConfig
from system.workers import WorkerPool
from verifier import evaluate_submission

CHAIN = [s.value for s in CANONICAL_CHAIN]


@pytest.fixture(scope="module")
def defaults():
    return load_default_prompts()


@pytest.fixture
def base_set(defaults):
    return PromptSet("set_00", dict(defaults))


# --- plans ---

@pytest.mark.parametrize("stages", [
    CHAIN[:-1],
    ["RandomPool", "UserIntent", "TaskValidation", "DialogSynthesis", "TrajectoryValidation",
     "ValidationFunction", "Modify"],
    CHAIN[:-1] + ["Modify", "ValidationFunction"],
    ["Translate"] + CHAIN,
    ["UserIntent", "RandomPool", "TaskValidation", "DialogSynthesis", "TrajectoryValidation", "Modify",
     "ValidationFunction"],
    [],
])
def test_inadmissible_stage_lists(stages):
    with pytest.raises(InvalidPlan):
        validate_stages(stages)


def test_modify_may_move():
    stages = ["Modify"] + [s for s in CHAIN if s != "Modify"]
    assert validate_stages(stages)[0] is Stage.MODIFY
    assert not WorkflowPlan(stages=stages).is_canonical
    assert WorkflowPlan().is_canonical


def test_plan_bounds():
    with pytest.raises(InvalidPlan):
        WorkflowPlan(max_repairs=4)
    with pytest.raises(InvalidPlan):
        WorkflowPlan(max_evolutions=0)


def test_check_prompts(defaults):
    plan = WorkflowPlan()
    plan.check_prompts(defaults)
    with pytest.raises(InvalidPlan):
        plan.check_prompts(dict(defaults, TrajectoryAgent=""))


def test_plan_workflow_from_planner(toy_domain, defaults):
    backend = ScriptedBackend({"Planner": ['```json\n{"stages": %s}\n```' % json.dumps(CHAIN)]})
    plan = plan_workflow("dialogues", toy_domain, {"n_target": 5}, backend, defaults["Planner"])
    assert plan.stages == list(CANONICAL_CHAIN)
    assert backend.requests[0]["purpose"] == "Planner"

    with pytest.raises(InvalidPlan):
        plan_workflow("dialogues", toy_domain, {}, ScriptedBackend({"Planner": ["no plan today"]}),
                      defaults["Planner"])
    with pytest.raises(InvalidPlan):
        plan_workflow("dialogues", toy_domain, {}, ScriptedBackend({"Planner": ['{"steps": []}']}),
                      defaults["Planner"])


def test_decode_json_tolerates_chatter():
    assert decode_json('Sure! {"a": 1} hope that helps', "X") == {"a": 1}
    with pytest.raises(ContractViolation):
        decode_json("nothing here", "X")


# --- prompt sets ---

def test_first_set_is_the_defaults(defaults):
    backend = ScriptedBackend({})
    prompt_set = generate_prompt_set(WorkflowPlan(), [], 0, backend, 0, defaults)
    assert prompt_set.set_id == "set_00"
    assert prompt_set.prompts == defaults
    assert prompt_set.version == 1
    assert backend.requests == []


def test_later_sets_see_prior_summaries(defaults):
    backend = ScriptedBackend({}, fallback=MockBackend())
    first = generate_prompt_set(WorkflowPlan(), [], 0, backend, 0, defaults)
    second = generate_prompt_set(WorkflowPlan(), [first.summary()], 1, backend, 1, defaults)
    assert second.set_id == "set_01"
    assert second.prompts != first.prompts
    payload = json.loads(backend.requests[-1]["messages"][-1]["content"])
    assert payload["prior_summaries"] == [first.summary()]
    with pytest.raises(ValueError):
        generate_prompt_set(WorkflowPlan(), [], 2, backend, 0, defaults)


def critique(critique_id, category="data_fabrication"):
    return Critique(critique_id, "inst", {a: 0.5 for a in AXES},
                    [Finding(category, "claimed a refund that never happened", "turn 3")])


def test_evolve_records_lineage(base_set):
    evolved = evolve(base_set, [critique("c1"), critique("c2")], MockBackend(), 0)
    assert evolved.version == 2
    assert evolved.lineage[-1] == {"version": 2, "parent": 1, "critiques": ["c1", "c2"]}
    assert "data_fabrication" in evolved.prompt("TrajectoryAgent")
    assert base_set.version == 1
    with pytest.raises(ValueError):
        evolve(base_set, [], MockBackend(), 0)


def test_broken_lineage(defaults):
    with pytest.raises(ValueError):
        PromptSet("set_00", defaults, version=2)


def test_critique_scores_in_range():
    with pytest.raises(ValueError):
        Critique("c", "t", {a: 1.5 for a in AXES})


# --- stages ---

def test_execute_plan_verdicts(toy_env, toy_tasks):
    task = toy_tasks[0]
    plan = [{"name": "reset_password", "arguments": {}}]
    check = execute_plan(toy_env, task, plan)
    assert check.verdict is Verdict.FEASIBLE
    assert check.final_state.entities["acct_1"]["status"] == "active"
    assert check.findings() == []

    missing = TaskSpec(id="ghost", must_have_functions=["reset_password"],
                       initial_state_seed={"requires": ["acct_9"]})
    check = execute_plan(toy_env, missing, plan)
    assert check.verdict is Verdict.INFEASIBLE
    assert check.category == "missing_resource"
    assert check.findings()[0].category == "missing_resource"

    check = execute_plan(toy_env, task, [{"name": "check_status", "arguments": {}}])
    assert not check.feasible
    assert check.category == "contradictory_constraints"


def test_execute_plan_surfaces_policy_rejection(airline_env, airline_tasks):
    check = execute_plan(airline_env, airline_tasks["airline_refuse_oldnoi"],
                         [{"name": "cancel_reservation", "arguments": {"reservation_id": "OLDNOI"}}])
    assert check.verdict is Verdict.INFEASIBLE
    assert check.category == "policy_violation"


def stage_context(env, backend, prompts, position=0):
    return StageContext(env, backend, prompts, seed=3, position=position, max_turns=12)


def test_run_stage_checks_input_type(toy_env, base_set):
    ctx = stage_context(toy_env, MockBackend(), base_set)
    with pytest.raises(ContractViolation):
        run_stage(Stage.TASK_VALIDATION, {"not": "a task"}, ctx)


def test_random_pool_rejects_unknown_focus(airline_env, base_set):
    scenario = {"user_profiles": "x", "testing_objectives": "x", "deception_tactics": "x",
                "operational_complexity": "x", "behavioral_patterns": "x", "complexity_levels": "x",
                "urgency_levels": "x", "emotional_states": "x", "policy_focuses": ["free_upgrades"],
                "seed": 1}
    ctx = stage_context(airline_env, ScriptedBackend({"RandomPool": [json.dumps(scenario)]}), base_set)
    with pytest.raises(ContractViolation):
        run_stage(Stage.RANDOM_POOL, 0, ctx)
    scenario["policy_focuses"] = ["cancellation_24h"]
    ctx = stage_context(airline_env, ScriptedBackend({"RandomPool": [json.dumps(scenario)]}), base_set)
    assert run_stage(Stage.RANDOM_POOL, 0, ctx)["policy_focuses"] == ["cancellation_24h"]


def test_modify_must_keep_most_functions(toy_env, toy_tasks, base_set):
    task = toy_tasks[0]
    instance = SynthesisInstance("i0", "set_00", 0, 0, task=task)
    edited = dict(task.to_dict(), must_have_functions=["close_account"])
    ctx = stage_context(toy_env, ScriptedBackend({"Modify": [json.dumps({"task": edited})]}), base_set)
    with pytest.raises(ContractViolation):
        run_stage(Stage.MODIFY, RepairRequest(instance, [], RepairMode.TASK), ctx)


def test_trajectory_validation_needs_known_categories(toy_env, toy_tasks, base_set):
    fail = json.dumps({"verdict": "FAIL", "issues": [
        {"category": "vibes", "description": "x", "evidence": "y"}]})
    backend = ScriptedBackend({"TrajectoryValidation": [fail]}, fallback=MockBackend())
    workflow = Workflow(toy_env, backend, max_turns=12)
    instance = workflow.produce(base_set, 0, 1, "bad_category")
    assert instance.status is Status.DISCARDED
    assert "TrajectoryValidation" in instance.discard_reason


# --- workflow and repair ---

def test_clean_instance_is_accepted(toy_env, base_set):
    workflow = Workflow(toy_env, MockBackend(), max_turns=12)
    instance = workflow.produce(base_set, 0, 5, "set_00_00000")
    assert instance.accepted
    assert instance.first_verdict is Verdict.FEASIBLE
    assert instance.repair_count == 0
    assert instance.task.checker_spec == instance.checker.to_dict()
    assert instance.tool_calls_ok == instance.tool_calls_total == 1


def test_never_passing_instance_is_discarded(toy_env, base_set):
    fail = json.dumps({"verdict": "FAIL", "issues": [
        {"category": "data_fabrication", "description": "invented a refund", "evidence": "turn 2"}]})
    backend = ScriptedBackend({"TrajectoryValidation": [fail] * 10}, fallback=MockBackend())
    workflow = Workflow(toy_env, backend, max_turns=12)
    instance = workflow.produce(base_set, 0, 5, "stubborn")
    assert instance.status is Status.DISCARDED
    assert instance.repair_count == 3
    assert "data_fabrication" in instance.discard_reason
    assert sum(r["purpose"] == "Modify" for r in backend.requests) == 3


def test_schema_fault_is_repaired(toy_env, base_set):
    backend = MockBackend(faults=FaultProfile(schema_errors_after=0))
    instance = Workflow(toy_env, backend, max_turns=12).produce(base_set, 0, 5, "healed")
    assert instance.accepted
    assert instance.repair_count == 1
    assert instance.categories == ["function_error"]
    assert instance.tool_calls_total == 3 and instance.tool_calls_ok == 2


def test_infeasible_intent_is_repaired(toy_env, base_set):
    backend = MockBackend(faults=FaultProfile(infeasible_until_version=1, infeasible_rate=1.0))
    instance = Workflow(toy_env, backend, max_turns=12).produce(base_set, 0, 5, "fixed")
    assert instance.first_verdict is Verdict.INFEASIBLE
    assert "missing_resource" in instance.categories
    assert instance.accepted
    assert instance.repair_count >= 1


def test_repair_loop_directly(toy_env, base_set):
    accepted = Workflow(toy_env, MockBackend(), max_turns=12).produce(base_set, 0, 5, "direct")
    complaint = [Finding("data_fabrication", "invented a refund", "turn 2")]

    ctx = stage_context(toy_env, MockBackend(), base_set)
    repaired = repair_loop(accepted, complaint, ctx, max_repairs=2)
    assert repaired is accepted
    assert repaired.repair_count == 1
    assert repaired.trajectory_check.passed
    assert repaired.repair_notes == ["data_fabrication: invented a refund"]

    fail = json.dumps({"verdict": "FAIL", "issues": [complaint[0].to_dict()]})
    ctx = stage_context(toy_env, ScriptedBackend({"TrajectoryValidation": [fail]}, fallback=MockBackend()),
                        base_set)
    outcome = repair_loop(repaired, complaint, ctx, max_repairs=2)
    assert isinstance(outcome, Discard)
    assert outcome.rounds == 2
    assert outcome.reason == "data_fabrication"


# --- judge ---

def test_judge_retries_garbage_then_zeroes(base_set):
    garbage = json.dumps({"scores": {a: "great" for a in AXES}})
    backend = ScriptedBackend({"Judge": [garbage, garbage]})
    instance = SynthesisInstance("i0", "set_00", 0, 0)
    result = judge(instance, base_set.prompt("Judge"), backend, 0, "c0")
    assert result.scores == {a: 0.0 for a in AXES}
    assert [json.loads(r["messages"][-1]["content"])["attempt"] for r in backend.requests] == [1, 2]


def test_judge_clamps_and_keeps_good_retry(base_set):
    good = json.dumps({"scores": {"executability": 2, "tool_correctness": 0.5, "trajectory_coherence": 1,
                                  "difficulty_coverage": -1}})
    backend = ScriptedBackend({"Judge": ["not json", good]})
    result = judge(SynthesisInstance("i0", "set_00", 0, 0), base_set.prompt("Judge"), backend, 0, "c0")
    assert result.scores == {"executability": 1.0, "tool_correctness": 0.5, "trajectory_coherence": 1.0,
                             "difficulty_coverage": 0.0}
    assert result.overall == pytest.approx(0.625)


# --- pilot ---

@pytest.fixture(scope="module")
def toy_workflow(toy_domain):
    return Workflow(Environment(toy_domain), MockBackend(seed=2), max_turns=12)


@pytest.fixture(scope="module")
def clean_pilot(toy_workflow, defaults):
    return run_pilot(toy_workflow, PromptSet("set_00", dict(defaults)), 5, StopCriteria(), seed=0,
                     max_iterations=6)


def test_pilot_batch_bounds(toy_workflow, base_set):
    for size in (4, 21):
        with pytest.raises(ValueError):
            run_pilot(toy_workflow, base_set, size, StopCriteria(), seed=0)


def test_clean_pilot_converges(clean_pilot):
    assert clean_pilot.converged
    assert len(clean_pilot.history) == 3
    last = clean_pilot.history[-1]
    assert last.infeasibility == 0.0 and last.validity == 1.0
    assert last.quality == pytest.approx(0.95)
    assert clean_pilot.prompt_set.version == 3
    assert [ps.version for ps in clean_pilot.versions] == [1, 2, 3]


def test_pilot_that_never_settles(toy_domain, defaults):
    workflow = Workflow(Environment(toy_domain), MockBackend(faults=FaultProfile(schema_errors_after=0)),
                        max_turns=12)
    result = run_pilot(workflow, PromptSet("set_00", dict(defaults)), 5, StopCriteria(), seed=0,
                       max_iterations=2)
    assert not result.converged
    assert result.prompt_set.version == 3
    assert all(m.validity < 0.95 for m in result.history)
    assert result.known_categories == ["function_error"]


def test_stop_criteria_stability():
    criteria = StopCriteria(stability_delta=0.05, stable_window=2)
    assert not criteria.stable([0.9, 0.91])
    assert criteria.stable([0.9, 0.91, 0.93])
    assert not criteria.stable([0.5, 0.9, 0.91, 0.99])


# --- drift ---

def baseline(defaults, repair_mean=0.0, quality=0.9, categories=()):
    metrics = PilotMetrics(1, 1, 0.0, 1.0, quality, 5, 0, repair_mean, list(categories))
    prompt_set = PromptSet("set_00", dict(defaults))
    return PilotResult(prompt_set, [metrics], True, [prompt_set])


def entry(repairs=0, quality=0.9, categories=()):
    return {"repair_count": repairs, "quality": quality, "categories": list(categories)}


def test_drift_on_new_category(defaults):
    detector = DriftDetector(4, baseline(defaults, categories=["goal_failure"]), 0.1)
    assert detector.observe(entry(categories=["goal_failure"])) is None
    assert "function_error" in detector.observe(entry(categories=["function_error"]))


def test_drift_on_repairs_and_quality(defaults):
    detector = DriftDetector(4, baseline(defaults, repair_mean=0.5), 0.1)
    assert detector.observe(entry(repairs=2)) is None
    assert "repair mean" in detector.observe(entry(repairs=1))

    detector = DriftDetector(4, baseline(defaults, quality=0.9), 0.1)
    assert detector.observe(entry(quality=0.85)) is None
    assert "judge score" in detector.observe(entry(quality=0.6))
    detector.rebase(baseline(defaults, quality=0.6))
    assert detector.window_size == 4 and len(detector.window) == 0


def test_split_quota():
    assert split_quota(10, 4) == [3, 3, 2, 2]
    assert sum(split_quota(7, 7)) == 7


def test_scale_without_drift(toy_workflow, clean_pilot):
    config = SynthConfig(audit_rate=1.0, n_target=4)
    result = run_scale(toy_workflow, [clean_pilot], 4, config, seed=1)
    assert len(result.instances) == 4
    assert all(inst.accepted for inst in result.instances)
    assert len(result.audit_log) == result.sets[0].generated
    assert all(e["drift"] is None for e in result.audit_log)
    assert result.sets[0].pauses == 0


def test_scale_warns_without_audit(caplog, toy_workflow, clean_pilot):
    with caplog.at_level(logging.WARNING):
        result = run_scale(toy_workflow, [clean_pilot], 2, SynthConfig(audit_rate=0.0), seed=1)
    assert result.audit_log == []
    assert "audit_rate is 0" in caplog.text


def test_unrecoverable_drift(toy_domain, defaults):
    workflow = Workflow(Environment(toy_domain), MockBackend(seed=2, faults=FaultProfile(schema_errors_after=5)),
                        max_turns=12)
    pilot = run_pilot(workflow, PromptSet("set_00", dict(defaults)), 5, StopCriteria(), seed=0, max_iterations=6)
    assert pilot.converged
    config = SynthConfig(audit_rate=1.0, n_target=8, max_pilot_iterations=2)
    with pytest.raises(DriftUnrecoverable) as info:
        run_scale(workflow, [pilot], 8, config, seed=1)
    assert info.value.set_id == "set_00"


def test_scale_needs_pilots(toy_workflow):
    with pytest.raises(ValueError):
        run_scale(toy_workflow, [], 4, SynthConfig(), seed=0)


# --- end to end ---

def synthesize(toy_domain, seed=0):
    config = SynthConfig(k_sets=2, n_target=4, audit_rate=0.5, max_turns=12, seed=seed)
    return run_synthesis(Environment(toy_domain), MockBackend(seed=seed), config)


def test_toy_synthesis(tmp_path, toy_domain):
    result = synthesize(toy_domain)
    manifest = result.manifest()
    assert manifest["counts"]["accepted"] == 4
    assert [s["set_id"] for s in manifest["prompt_sets"]] == ["set_00", "set_01"]
    assert all(s["pilot_converged"] for s in manifest["prompt_sets"])
    assert sum(s["accepted"] for s in manifest["prompt_sets"]) == 4
    for instance in result.instances:
        assert instance.accepted and instance.repair_count <= 3
        assert instance.checker is not None

    result.save(tmp_path / "archive")
    tasks = load_archive_tasks(tmp_path / "archive")
    assert [t.id for t in tasks] == manifest["instances"]
    assert all(t.checker_spec for t in tasks)
    assert (tmp_path / "archive" / "prompt_sets" / "set_00_v1.json").exists()


def test_synthesis_is_reproducible(tmp_path, toy_domain):
    synthesize(toy_domain, seed=4).save(tmp_path / "a")
    synthesize(toy_domain, seed=4).save(tmp_path / "b")
    for name in ("manifest.json", "dialogues.jsonl", "audit.jsonl"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def archive_bytes(root):
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.mark.parametrize("domain_fixture", ["toy_domain", "airline_domain"])
def test_synthesis_closure(request, tmp_path, domain_fixture):
    domain = request.getfixturevalue(domain_fixture)
    env = Environment(domain)
    config = SynthConfig(k_sets=4, n_target=50, seed=0)
    inline = run_synthesis(env, MockBackend(seed=0), config)
    with WorkerPool(4) as pool:
        pooled = run_synthesis(env, MockBackend(seed=0), config, pool=pool)

    assert len(inline.instances) >= 50
    for instance in inline.instances:
        assert instance.accepted and instance.repair_count <= config.max_repairs
        assert evaluate_submission(domain, instance.checker, instance.trajectory).reward == 1
    for pilot in inline.pilots:
        assert len(pilot.history) <= config.max_pilot_iterations
        assert len(pilot.versions) - 1 <= MAX_EVOLUTIONS
        assert all(m.accepted + m.discarded == config.pilot_batch_size for m in pilot.history)

    inline.save(tmp_path / "inline")
    pooled.save(tmp_path / "pooled")
    assert archive_bytes(tmp_path / "inline") == archive_bytes(tmp_path / "pooled")
