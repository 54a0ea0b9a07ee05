"""Dual-control environment: reset, tool execution, observation and transitions."""

import copy
from typing import Mapping, Optional, Tuple

from system.logs import get_logger
from system.seeding import digest
from system.storage import canonical_json

from .domain import Domain, dangling_references
from .errors import (
    BothActing, FixtureError, InvalidJointAction, PermissionDenied, PolicyRejection,
    TerminalState, ToolExecutionError, UnknownDomainEntity, UnknownTool,
)
from .task import TaskSpec
from .tooling import ToolContext
from .types import (
    Action, AgentMessage, ControlSignal, EnvState, Event, EventKind, InteractionMeta,
    Observation, Role, Termination, ToolCall, ToolResult, UserMessage, Visibility,
    action_role,
)

logger = get_logger(__name__)

JointAction = Tuple[Action, Action]


class Environment:
    """Pure state transitions over one domain."""

    def __init__(self, domain: Domain, visibility: Visibility = Visibility.FULL):
        self.domain = domain
        self.visibility = Visibility(visibility)

    # --- episode start ---

    def validate_task(self, task: TaskSpec):
        """Check a task against the registry and fixture.

        Raises:
            UnknownTool: a must-have function is not registered
            UnknownDomainEntity: a referenced entity is absent
        """
        for name in task.must_have_functions:
            if name not in self.domain.registry:
                raise UnknownTool(f"task {task.id} requires unknown tool {name!r}")
        for entity_id in task.referenced_entities():
            if entity_id not in self.domain.entities:
                raise UnknownDomainEntity(entity_id)

    def reset(self, task: TaskSpec, seed: int) -> EnvState:
        """Build the initial state for (task, seed).

        Args:
            task: Task to run
            seed: Episode seed, recorded as the session token

        Returns:
            Deterministic state with turn 0 and no history
        """
        self.validate_task(task)
        entities = self.domain.fresh_entities()
        seed_spec = task.initial_state_seed or {}
        for entity_id, patch in sorted(seed_spec.get("patches", {}).items()):
            entities[entity_id].update(copy.deepcopy(patch))
        for entity_id, record in sorted(seed_spec.get("add", {}).items()):
            entities[entity_id] = copy.deepcopy(record)
        dangling = dangling_references(entities, self.domain.references)
        if dangling:
            raise FixtureError(f"task {task.id} leaves dangling references: {dangling[:5]}")
        meta = InteractionMeta(turn=0, terminal=False, reason=None,
                               session_token=digest({"task": task.id, "seed": seed}, 16))
        return EnvState(domain=self.domain.name, task_id=task.id, entities=entities,
                        meta=meta, history=(), task=task)

    # --- tools ---

    def execute_tool(self, state: EnvState, call: ToolCall) -> Tuple[EnvState, ToolResult]:
        """Execute one tool call.

        Read-only tools return ``state`` itself; mutating tools return a new state.

        Raises:
            TerminalState, UnknownTool, PermissionDenied, SchemaViolation,
            PolicyRejection, and handler failures (EntityNotFound, InsufficientFunds,
            InvalidRequest)
        """
        if state.terminal:
            raise TerminalState("state is terminal")
        schema = self.domain.registry.get(call.name)
        caller = Role(call.caller)
        if caller is Role.USER and not self.domain.dual_control:
            raise PermissionDenied(f"{self.domain.name} is not a dual-control domain")
        if not schema.permission.allows(caller):
            raise PermissionDenied(f"{caller.value} may not call {call.name}")
        schema.validate(call.arguments)

        for rule in self.domain.rules.guarding(call.name):
            violation = rule.check(call.name, call.arguments, state.entities, self.domain.now)
            if violation:
                raise PolicyRejection(rule.rule_id, violation)

        handler = self.domain.handlers[call.name]
        if not schema.mutating:
            ctx = ToolContext(entities=state.entities, now=self.domain.now, caller=caller)
            return state, ToolResult.success(call.name, handler(ctx, call.arguments))

        working = copy.deepcopy(state.entities)
        ctx = ToolContext(entities=working, now=self.domain.now, caller=caller)
        data = handler(ctx, call.arguments)
        return state.evolve(entities=working), ToolResult.success(call.name, data)

    # --- observations ---

    def _user_context(self, state: EnvState) -> str:
        task = state.task
        if task is None:
            return "You are a customer contacting support."
        lines = [
            f"Context: {task.context}",
            f"Purpose: {task.purpose}",
            f"Reason for call: {task.reason_for_call}",
            f"Known information: {task.known_info}",
            f"Instructions: {task.task_instructions}",
        ]
        return "\n".join(lines)

    def _visible_to_user(self, event: Event) -> bool:
        if event.kind is not EventKind.TOOL_CALL or event.role is Role.USER:
            return True
        return self.visibility is Visibility.FULL

    def observe(self, state: EnvState, role: Role) -> Observation:
        """Role-local observation.

        The agent sees the policy text and every history event. The user sees
        the task fields and, depending on visibility, the agent's tool calls.
        """
        role = Role(role)
        tools = self.domain.registry.for_role(role, self.domain.dual_control)
        if role is Role.AGENT:
            return Observation(role=role, system_context=self.domain.policy_text,
                               tools=tools, history=state.history, turn=state.turn)
        history = tuple(e for e in state.history if self._visible_to_user(e))
        scenario = state.task.scenario() if state.task is not None else {}
        return Observation(role=role, system_context=self._user_context(state), tools=tools,
                           history=history, scenario=scenario, turn=state.turn)

    # --- transitions ---

    def step(self, state: EnvState, joint: JointAction) -> Tuple[EnvState, Optional[ToolResult]]:
        """Apply a joint action and also return the tool result, if any."""
        if state.terminal:
            raise TerminalState("state is terminal")
        agent_action, user_action = joint
        acting = [(slot, a) for slot, a in ((Role.AGENT, agent_action), (Role.USER, user_action))
                  if action_role(a) is not None]
        if len(acting) == 2:
            raise BothActing("both parties acted in one turn")
        if not acting:
            raise InvalidJointAction("neither party acted")
        slot, action = acting[0]
        if action_role(action) is not slot:
            raise InvalidJointAction(f"{type(action).__name__} placed in the {slot.value} slot")

        history = list(state.history)
        result: Optional[ToolResult] = None
        terminal, reason = False, None

        if isinstance(action, (AgentMessage, UserMessage)):
            history.append(Event(EventKind.MESSAGE, slot, action.text))
        elif isinstance(action, ControlSignal):
            if action.text:
                history.append(Event(EventKind.MESSAGE, slot, action.text))
            history.append(Event(EventKind.SIGNAL, slot, action.signal.marker))
            terminal, reason = True, action.signal.termination.value
        elif isinstance(action, ToolCall):
            arguments = dict(action.arguments) if isinstance(action.arguments, Mapping) else action.arguments
            call = ToolCall(action.name, arguments, slot)
            try:
                new_state, result = self.execute_tool(state, call)
                state = new_state
            except ToolExecutionError as e:
                result = ToolResult.failure(call.name, e.code, e.message, e.rule_id)
                logger.debug("tool %s failed: %s", call.name, e.message)
            call_text = canonical_json({"name": call.name, "arguments": call.arguments})
            history.append(Event(EventKind.TOOL_CALL, slot, call_text, tool=call.name))
            history.append(Event(EventKind.TOOL_RESULT, slot, result.payload,
                                 tool=call.name, ok=result.ok))
            if result.ok and call.name == self.domain.transfer_tool:
                terminal, reason = True, Termination.TRANSFER.value

        meta = InteractionMeta(turn=state.turn + 1, terminal=terminal, reason=reason,
                               session_token=state.meta.session_token)
        return state.evolve(meta=meta, history=tuple(history)), result

    def apply(self, state: EnvState, joint: JointAction) -> EnvState:
        """Advance one turn with exactly one acting party.

        Raises:
            BothActing: neither action is Empty
            TerminalState: state already terminal
        """
        return self.step(state, joint)[0]

    def terminate(self, state: EnvState, reason: Termination) -> EnvState:
        """Close the episode from outside (turn limit, policy failure)."""
        if state.terminal:
            return state
        meta = InteractionMeta(turn=state.turn + 1, terminal=True, reason=Termination(reason).value,
                               session_token=state.meta.session_token)
        return state.evolve(meta=meta)
