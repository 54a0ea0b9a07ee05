"""Episode driver, group sampling, trajectory store and SFT exports."""

import json

import numpy as np
import pytest

from arena import Role, TaskSpec, UnknownDomainEntity
from conftest import SCRIPTS
from policy import ScriptedPolicy
from rollout import (
    EmptySelection, Trajectory, concat_sft, export_sft, load_trajectories, run_episode, sample_group,
    save_trajectories, write_sft,
)
from system.storage import read_jsonl
from system.workers import WorkerPool
from verifier import Verifier


def test_solver_episode(toy_env, toy_tasks, solver, toy_user):
    trajectory = run_episode(toy_env, toy_tasks[0], solver, toy_user, max_turns=12, seed=3)
    assert trajectory.termination == "user_stop"
    assert [t.actor for t in trajectory.turns] == [Role.USER, Role.AGENT, Role.AGENT, Role.USER]
    assert [t.turn for t in trajectory.turns] == [0, 1, 2, 3]
    assert trajectory.final_state.terminal
    assert trajectory.final_state.entities["acct_1"]["status"] == "active"
    assert trajectory.initial_state.entities["acct_1"]["status"] == "locked"
    assert trajectory.tool_calls()[0]["name"] == "reset_password"
    assert trajectory.tool_calls()[0]["ok"]
    assert trajectory.agent_id == "scripted:toy_agent_solver"
    assert trajectory.error is None


def test_episodes_are_reproducible(toy_env, toy_tasks, alternating, toy_user):
    a = run_episode(toy_env, toy_tasks[1], alternating, toy_user, max_turns=12, seed=11)
    b = run_episode(toy_env, toy_tasks[1], alternating, toy_user, max_turns=12, seed=11)
    assert a.to_json() == b.to_json()


def test_turn_limit(toy_env, toy_tasks, toy_user):
    chatty = ScriptedPolicy(Role.AGENT, steps=['<function>{"name": "check_status", "arguments": {}}</function>'],
                            repeat_last=True)
    trajectory = run_episode(toy_env, toy_tasks[0], chatty, toy_user, max_turns=5, seed=0)
    assert trajectory.termination == "max_turns"
    assert len(trajectory.turns) == 5


def test_policy_failure_ends_in_error(toy_env, toy_tasks, toy_user):
    short = ScriptedPolicy(Role.AGENT, steps=["<message>hello</message>"])
    user = ScriptedPolicy(Role.USER, steps=["<answer>hi</answer>"], repeat_last=True)
    trajectory = run_episode(toy_env, toy_tasks[0], short, user, max_turns=10, seed=0)
    assert trajectory.termination == "error"
    assert "ScriptExhausted" in trajectory.error
    assert trajectory.final_state.terminal


def test_reset_errors_propagate(toy_env, solver, toy_user):
    task = TaskSpec(id="ghost", initial_state_seed={"requires": ["acct_9"]})
    with pytest.raises(UnknownDomainEntity):
        run_episode(toy_env, task, solver, toy_user, max_turns=10, seed=0)


def test_max_turns_must_be_positive(toy_env, toy_tasks, solver, toy_user):
    with pytest.raises(ValueError):
        run_episode(toy_env, toy_tasks[0], solver, toy_user, max_turns=0, seed=0)


def test_sample_group_seeds_and_rewards(toy_env, toy_tasks, alternating, toy_user, toy_verifier):
    task = toy_tasks[0]
    spec = toy_verifier.spec_for(task.id)
    group = sample_group(toy_env, task, 4, alternating, toy_user, base_seed=10, max_turns=12,
                         reward_fn=toy_verifier.reward_fn(spec))
    assert [t.seed for t in group.trajectories] == [10, 11, 12, 13]
    assert group.rewards == [1.0, 0.0, 1.0, 0.0]
    assert group.mean_reward() == 0.5


def test_sample_group_pool_matches_inline(toy_env, toy_tasks, alternating, toy_user, toy_verifier):
    task = toy_tasks[2]
    reward_fn = toy_verifier.reward_fn(toy_verifier.spec_for(task.id))
    inline = sample_group(toy_env, task, 6, alternating, toy_user, 0, 12, reward_fn)
    with WorkerPool(3) as pool:
        pooled = sample_group(toy_env, task, 6, alternating, toy_user, 0, 12, reward_fn, pool=pool)
    assert [t.to_json() for t in inline.trajectories] == [t.to_json() for t in pooled.trajectories]
    assert inline.rewards == pooled.rewards


def test_group_size_at_least_two(toy_env, toy_tasks, solver, toy_user):
    with pytest.raises(ValueError):
        sample_group(toy_env, toy_tasks[0], 1, solver, toy_user, 0, 12)


def test_store_round_trip(tmp_path, toy_env, toy_tasks, solver, toy_user):
    trajectories = [run_episode(toy_env, t, solver, toy_user, 12, seed=i) for i, t in enumerate(toy_tasks)]
    path = tmp_path / "trajectories.jsonl"
    assert save_trajectories(path, trajectories) == len(toy_tasks)
    loaded = load_trajectories(path)
    assert [t.to_json() for t in loaded] == [t.to_json() for t in trajectories]


def test_export_agent_side(toy_env, toy_tasks, solver, toy_user):
    trajectory = run_episode(toy_env, toy_tasks[0], solver, toy_user, 12, seed=0)
    records = export_sft([trajectory], Role.AGENT)
    assert [r["turn"] for r in records] == [1, 2]
    first, second = records
    assert [m["role"] for m in first["messages"]] == ["user"]
    assert [m["role"] for m in second["messages"]] == ["user", "assistant", "tool"]
    assert "reset_password" in first["target"]


def test_export_user_side_text(toy_env, toy_tasks, solver, toy_user):
    trajectory = run_episode(toy_env, toy_tasks[0], solver, toy_user, 12, seed=0)
    records = export_sft([trajectory], Role.USER, fmt="text")
    assert [r["turn"] for r in records] == [0, 3]
    assert records[0]["prompt"] == ""
    assert records[1]["prompt"].startswith("assistant: ")
    assert "###STOP###" in records[1]["target"]


def test_export_rejects_empty_and_unknown_format(toy_env, toy_tasks, solver, toy_user):
    with pytest.raises(EmptySelection):
        export_sft([], Role.AGENT)
    trajectory = run_episode(toy_env, toy_tasks[0], solver, toy_user, 12, seed=0)
    with pytest.raises(ValueError):
        export_sft([trajectory], Role.AGENT, fmt="parquet")


def test_concat_is_seeded(tmp_path):
    write_sft(tmp_path / "a.jsonl", [{"target": f"a{i}"} for i in range(5)])
    write_sft(tmp_path / "b.jsonl", [{"target": f"b{i}"} for i in range(5)])
    sources = {"airline": tmp_path / "a.jsonl", "toy": tmp_path / "b.jsonl"}
    assert concat_sft(sources, tmp_path / "one.jsonl", seed=4) == 10
    concat_sft(sources, tmp_path / "two.jsonl", seed=4)
    one = list(read_jsonl(tmp_path / "one.jsonl"))
    assert one == list(read_jsonl(tmp_path / "two.jsonl"))
    assert {r["domain"] for r in one} == {"airline", "toy"}
    assert sorted(r["target"] for r in one) == sorted([f"a{i}" for i in range(5)] + [f"b{i}" for i in range(5)])


def test_greeting_script_pair(toy_env, toy_tasks):
    agent = ScriptedPolicy.load(SCRIPTS / "greeting_agent.json", Role.AGENT)
    user = ScriptedPolicy.load(SCRIPTS / "greeting_user.json", Role.USER)
    trajectory = run_episode(toy_env, toy_tasks[0], agent, user, max_turns=10, seed=0)
    assert trajectory.termination == "user_stop"
    assert [t.actor for t in trajectory.turns] == [Role.USER, Role.AGENT, Role.USER]
    assert trajectory.tool_calls() == []


def test_single_turn_limit(toy_env, toy_tasks):
    agent = ScriptedPolicy.load(SCRIPTS / "greeting_agent.json", Role.AGENT)
    user = ScriptedPolicy(Role.USER, steps=["<answer>hi</answer>"], repeat_last=True)
    trajectory = run_episode(toy_env, toy_tasks[0], agent, user, max_turns=1, seed=0)
    assert trajectory.termination == "max_turns"
    assert len(trajectory.turns) == 1


def test_malformed_output_is_kept_as_message(toy_env, toy_tasks):
    agent = ScriptedPolicy(Role.AGENT, steps=['<function>{"name": ', "no tags at all",
                                              "<message>Sorry, here I am.</message>"])
    user = ScriptedPolicy(Role.USER, steps=["<answer>hi</answer>"], repeat_last=True)
    trajectory = run_episode(toy_env, toy_tasks[0], agent, user, max_turns=6, seed=0)
    assert trajectory.termination == "max_turns"
    assert trajectory.error is None
    agent_turns = trajectory.turns_by(Role.AGENT)
    assert [t.raw_text for t in agent_turns[:2]] == ['<function>{"name": ', "no tags at all"]
    assert all(t.tool_result is None for t in agent_turns)


# --- fuzzed scripts ---

JUNK = [5, None, True, 2.5, -1, "", "OLDNOI", "LIA200", "omar_davis_3817", "gift_card_3702", "HAT012",
        [], ["HAT012"], ["gift_card_3702", "certificate_7504"], {"id": 1}, [{"first_name": "A"}]]
MARKERS = ["###STOP###", "###TRANSFER###", "###OUT-OF-SCOPE###"]


def fuzz_output(rng, tools, role):
    tag = "message" if role is Role.AGENT else "answer"
    kind = int(rng.integers(0, 9))
    if kind < 3:
        name = str(rng.choice(sorted(tools) + ["teleport"]))
        arguments = {p: JUNK[int(rng.integers(len(JUNK)))] for p in tools.get(name, ["x"])
                     if rng.random() < 0.8}
        if rng.random() < 0.2:
            arguments["surprise"] = 1
        return "<function>" + json.dumps({"name": name, "arguments": arguments}) + "</function>"
    if kind == 3:
        return '<function>{"name": "check_status", "arguments": [1, 2]}</function>'
    if kind == 4:
        return f"<{tag}>bye {MARKERS[int(rng.integers(len(MARKERS)))]}</{tag}>"
    if kind == 5:
        return "<function>{not json"
    if kind == 6:
        return ""
    if kind == 7:
        return f"<think>checking</think><{tag}>one moment</{tag}>"
    return f"<{tag}>ok</{tag}><function>" + json.dumps({"name": "noop"}) + "</function>"


def fuzz_policy(rng, tools, role):
    steps = [fuzz_output(rng, tools, role) for _ in range(int(rng.integers(1, 7)))]
    return ScriptedPolicy(role, steps=steps, repeat_last=bool(rng.random() < 0.7))


def test_fuzzed_episodes_always_finish(toy_env, toy_tasks, toy_verifier, airline_env, airline_tasks):
    airline_suite = [airline_tasks[k] for k in ("airline_book_omar", "airline_bags_lia200",
                                                "airline_refuse_oldnoi")]
    airline_verifier = Verifier(airline_env.domain)
    airline_verifier.prepare(airline_env, airline_suite)
    suites = [(toy_env, toy_tasks, toy_verifier), (airline_env, airline_suite, airline_verifier)]
    rng = np.random.default_rng(0)
    for i in range(10_000):
        env, tasks, verifier = suites[int(i % 5 == 0)]
        registry = env.domain.registry
        tools = {name: [p.name for p in registry.get(name).params] for name in registry.names}
        task = tasks[int(rng.integers(len(tasks)))]
        max_turns = int(rng.integers(1, 10))
        trajectory = run_episode(env, task, fuzz_policy(rng, tools, Role.AGENT),
                                 fuzz_policy(rng, tools, Role.USER), max_turns, seed=i)
        assert isinstance(trajectory, Trajectory)
        assert trajectory.final_state.terminal
        assert len(trajectory.turns) <= max_turns
        report = verifier.evaluate(verifier.spec_for(task.id), trajectory)
        assert report.diagnostics == []
        assert report.reward in (0, 1)
