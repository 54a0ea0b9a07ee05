"""Environment transitions over the toy and airline fixtures."""

import pytest

from arena import (
    EMPTY, AgentMessage, BothActing, ControlSignal, Domain, EntityNotFound, FixtureError,
    InvalidJointAction, PermissionDenied, PolicyRejection, Role, SchemaViolation, Signal,
    TaskSpec, TerminalState, ToolCall, UnknownDomainEntity, UnknownTool, UserMessage,
)
from conftest import AIRLINE_RULE_CASES, booking


def test_toy_fixture_loads(toy_domain):
    assert toy_domain.registry.names == [
        "lookup_account", "check_status", "reset_password", "close_account", "apply_credit",
    ]
    assert toy_domain.rules.ids == []
    assert toy_domain.registry.mutating_names() == ["reset_password", "close_account", "apply_credit"]


def test_airline_rule_aliases_resolve(airline_domain):
    assert airline_domain.resolve_rule("passenger_max_5").rule_id == "passenger_max_five"
    assert airline_domain.resolve_rule("basic_economy_modification_prohibition").rule_id == "basic_economy_mod"
    assert airline_domain.resolve_rule("no_such_rule") is None
    assert len(airline_domain.rules.ids) == 8


def test_unknown_handler_set_is_a_fixture_error():
    with pytest.raises(FixtureError):
        Domain.from_dict({"name": "nowhere", "tools": [], "entities": {}})


def test_reset_is_deterministic(toy_env, toy_tasks):
    task = toy_tasks[0]
    a = toy_env.reset(task, 7)
    b = toy_env.reset(task, 7)
    assert a.canonical_json() == b.canonical_json()
    assert a.turn == 0 and not a.terminal and a.history == ()
    assert toy_env.reset(task, 8).meta.session_token != a.meta.session_token


def test_reset_applies_seed_patches(toy_env, toy_tasks):
    task = next(t for t in toy_tasks if t.id == "toy_002")
    state = toy_env.reset(task, 0)
    assert state.entities["session"]["account_id"] == "acct_2"
    assert toy_env.domain.entities["session"]["account_id"] == "acct_1"


def test_reset_rejects_missing_entity(toy_env):
    task = TaskSpec(id="ghost", initial_state_seed={"requires": ["acct_9"]})
    with pytest.raises(UnknownDomainEntity) as info:
        toy_env.reset(task, 0)
    assert info.value.entity_id == "acct_9"


def test_reset_rejects_unknown_must_have(toy_env):
    task = TaskSpec(id="ghost", must_have_functions=["teleport"])
    with pytest.raises(UnknownTool):
        toy_env.reset(task, 0)


def test_read_only_tool_keeps_state(toy_env, toy_tasks):
    state = toy_env.reset(toy_tasks[0], 0)
    after, result = toy_env.execute_tool(state, ToolCall("check_status"))
    assert after is state
    assert result.ok and result.data() == {"account_id": "acct_1", "status": "locked"}


def test_mutating_tool_returns_new_state(toy_env, toy_tasks):
    state = toy_env.reset(toy_tasks[0], 0)
    after, result = toy_env.execute_tool(state, ToolCall("reset_password"))
    assert after is not state
    assert after.entities["acct_1"]["status"] == "active"
    assert state.entities["acct_1"]["status"] == "locked"
    assert result.data()["status"] == "active"


def test_tool_errors_raise_from_execute(toy_env, toy_tasks):
    state = toy_env.reset(toy_tasks[0], 0)
    with pytest.raises(UnknownTool):
        toy_env.execute_tool(state, ToolCall("teleport"))
    with pytest.raises(SchemaViolation):
        toy_env.execute_tool(state, ToolCall("reset_password", {"force": True}))
    with pytest.raises(PermissionDenied):
        toy_env.execute_tool(state, ToolCall("reset_password", {}, Role.USER))


def test_step_turns_tool_errors_into_results(toy_env, toy_tasks):
    state = toy_env.reset(toy_tasks[0], 0)
    after, result = toy_env.step(state, (ToolCall("teleport"), EMPTY))
    assert not result.ok
    assert result.error == "unknown_tool"
    assert result.data()["error"] == "unknown_tool"
    assert after.entities == state.entities
    assert after.turn == 1
    assert [e.kind.value for e in after.history] == ["tool_call", "tool_result"]


def test_step_needs_exactly_one_actor(toy_env, toy_tasks):
    state = toy_env.reset(toy_tasks[0], 0)
    with pytest.raises(BothActing):
        toy_env.step(state, (AgentMessage("hi"), UserMessage("hello")))
    with pytest.raises(InvalidJointAction):
        toy_env.step(state, (EMPTY, EMPTY))
    with pytest.raises(InvalidJointAction):
        toy_env.step(state, (UserMessage("wrong slot"), EMPTY))


def test_control_signal_terminates(toy_env, toy_tasks):
    state = toy_env.reset(toy_tasks[0], 0)
    state, _ = toy_env.step(state, (EMPTY, ControlSignal(Signal.STOP, "thanks")))
    assert state.terminal
    assert state.meta.reason == "user_stop"
    assert state.history[-1].content == "###STOP###"
    with pytest.raises(TerminalState):
        toy_env.step(state, (AgentMessage("still there?"), EMPTY))


def test_terminate_is_idempotent(toy_env, toy_tasks):
    state = toy_env.reset(toy_tasks[0], 0)
    closed = toy_env.terminate(state, "max_turns")
    assert closed.terminal and closed.meta.reason == "max_turns"
    assert toy_env.terminate(closed, "error") is closed


def test_agent_observation_hides_scenario(toy_env, toy_tasks):
    state = toy_env.reset(toy_tasks[0], 0)
    agent = toy_env.observe(state, Role.AGENT)
    user = toy_env.observe(state, Role.USER)
    assert agent.scenario == {}
    assert user.scenario["reason_for_call"] == toy_tasks[0].reason_for_call
    assert toy_tasks[0].reason_for_call in user.system_context
    assert "Locked accounts" in agent.system_context


def test_cancellation_window_rule(airline_env, airline_tasks):
    state = airline_env.reset(airline_tasks["airline_refuse_oldnoi"], 0)
    with pytest.raises(PolicyRejection) as info:
        airline_env.execute_tool(state, ToolCall("cancel_reservation", {"reservation_id": "OLDNOI"}))
    assert info.value.rule_id == "cancellation_24h"

    state, result = airline_env.execute_tool(
        state, ToolCall("cancel_reservation", {"reservation_id": "NEW24H"}))
    assert result.ok
    assert state.entities["NEW24H"]["status"] == "cancelled"


def test_basic_economy_cannot_change_flights(airline_env, airline_tasks):
    state = airline_env.reset(airline_tasks["airline_refuse_oldnoi"], 0)
    state, result = airline_env.step(state, (ToolCall(
        "update_reservation_flights",
        {"reservation_id": "BE1001", "cabin": "basic_economy", "flights": ["HAT006"],
         "payment_id": "credit_card_3701"},
    ), EMPTY))
    assert not result.ok
    assert result.error == "policy_rejection"
    assert result.rule_id == "basic_economy_mod"


def test_missing_entity_reported_by_handler(airline_env, airline_tasks):
    state = airline_env.reset(airline_tasks["airline_refuse_oldnoi"], 0)
    with pytest.raises(EntityNotFound):
        airline_env.execute_tool(state, ToolCall("get_user_details", {"user_id": "nobody_0000"}))


def test_baggage_fee_charged_once(airline_env, airline_tasks):
    state = airline_env.reset(airline_tasks["airline_bags_lia200"], 0)
    state, result = airline_env.execute_tool(state, ToolCall(
        "update_reservation_baggages",
        {"reservation_id": "LIA200", "total_baggages": 3, "nonfree_baggages": 1,
         "payment_id": "credit_card_7101"},
    ))
    reservation = state.entities["LIA200"]
    assert reservation["total_baggages"] == 3
    assert reservation["payment_history"][-1] == {"payment_id": "credit_card_7101", "amount": 50}


@pytest.mark.parametrize("rule_id, name, arguments, blocked", AIRLINE_RULE_CASES)
def test_airline_rules_at_execution(airline_env, airline_tasks, rule_id, name, arguments, blocked):
    state = airline_env.reset(airline_tasks["airline_book_omar"], 0)
    if blocked:
        with pytest.raises(PolicyRejection) as info:
            airline_env.execute_tool(state, ToolCall(name, arguments))
        assert info.value.rule_id == rule_id
    else:
        after, result = airline_env.execute_tool(state, ToolCall(name, arguments))
        assert result.ok
        assert after is not state


def test_malformed_payment_list_is_rejected_by_schema(airline_env, airline_tasks):
    state = airline_env.reset(airline_tasks["airline_book_omar"], 0)
    arguments = {**booking("omar_davis_3817", ["gift_card_3702"]), "payment_methods": 5}
    after, result = airline_env.step(state, (ToolCall("book_reservation", arguments), EMPTY))
    assert result.error == "schema_violation"
    assert after.entities == state.entities
