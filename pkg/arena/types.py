"""Core value types for the dual-control tool environment."""

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Dict, Mapping, Optional, Tuple, Union

from system.storage import canonical_json

from .errors import FixtureError, SchemaViolation


class Role(str, Enum):
    """Acting parties."""
    AGENT = "agent"
    USER = "user"

    @property
    def other(self) -> "Role":
        return Role.USER if self is Role.AGENT else Role.AGENT


class Permission(str, Enum):
    """Which parties may call a tool."""
    AGENT = "agent"
    USER = "user"
    BOTH = "both"

    def allows(self, role: Role) -> bool:
        return self is Permission.BOTH or self.value == role.value


class Signal(str, Enum):
    """User control signals."""
    STOP = "STOP"
    TRANSFER = "TRANSFER"
    OUT_OF_SCOPE = "OUT_OF_SCOPE"

    @property
    def marker(self) -> str:
        return "###" + self.value.replace("_", "-") + "###"

    @property
    def termination(self) -> "Termination":
        return _SIGNAL_TERMINATION[self]


class Termination(str, Enum):
    """Why an episode ended."""
    USER_STOP = "user_stop"
    TRANSFER = "transfer"
    OUT_OF_SCOPE = "out_of_scope"
    MAX_TURNS = "max_turns"
    ERROR = "error"


_SIGNAL_TERMINATION = {
    Signal.STOP: Termination.USER_STOP,
    Signal.TRANSFER: Termination.TRANSFER,
    Signal.OUT_OF_SCOPE: Termination.OUT_OF_SCOPE,
}


class EventKind(str, Enum):
    """History entry kinds."""
    MESSAGE = "message"
    TOOL_CALL = "tool_call"
    TOOL_RESULT = "tool_result"
    SIGNAL = "signal"


class Visibility(str, Enum):
    """How much of the agent's tool activity the user observes."""
    FULL = "full"        # calls with arguments, and results
    RESULTS = "results"  # results only


# Python types accepted for each semantic parameter type
PARAM_TYPES = {
    "string": (str,),
    "integer": (int,),
    "number": (int, float),
    "boolean": (bool,),
    "array": (list, tuple),
    "object": (dict,),
}


@dataclass(frozen=True)
class ParamSpec:
    """One tool parameter."""
    name: str
    type: str = "string"
    required: bool = True
    description: str = ""

    def __post_init__(self):
        if self.type not in PARAM_TYPES:
            raise FixtureError(f"parameter {self.name!r} has unknown type {self.type!r}")

    def accepts(self, value: Any) -> bool:
        # booleans never count as integer or number
        if self.type in ("integer", "number") and isinstance(value, bool):
            return False
        return isinstance(value, PARAM_TYPES[self.type])

    def to_dict(self) -> Dict[str, Any]:
        return {"name": self.name, "type": self.type, "required": self.required,
                "description": self.description}


@dataclass(frozen=True)
class ToolSchema:
    """Tool signature, mutation flag and caller permission."""
    name: str
    params: Tuple[ParamSpec, ...] = ()
    mutating: bool = False
    permission: Permission = Permission.AGENT
    description: str = ""

    def __post_init__(self):
        names = [p.name for p in self.params]
        if len(names) != len(set(names)):
            raise FixtureError(f"tool {self.name!r} repeats a parameter name")
        # canonical form: required parameters first, declaration order otherwise
        ordered = tuple(p for p in self.params if p.required) + \
            tuple(p for p in self.params if not p.required)
        object.__setattr__(self, "params", ordered)
        object.__setattr__(self, "permission", Permission(self.permission))

    def validate(self, arguments: Mapping[str, Any]):
        """Check an argument map against the parameter specs.

        Raises:
            SchemaViolation: missing required, unexpected or wrongly typed argument
        """
        if not isinstance(arguments, Mapping):
            raise SchemaViolation(f"{self.name}: arguments must be an object")
        known = {p.name: p for p in self.params}
        for name in arguments:
            if name not in known:
                raise SchemaViolation(f"{self.name}: unexpected argument {name!r}")
        for param in self.params:
            if param.name not in arguments:
                if param.required:
                    raise SchemaViolation(f"{self.name}: missing required argument {param.name!r}")
                continue
            if not param.accepts(arguments[param.name]):
                raise SchemaViolation(
                    f"{self.name}: argument {param.name!r} must be of type {param.type}"
                )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "description": self.description,
            "mutating": self.mutating,
            "permission": self.permission.value,
            "parameters": [p.to_dict() for p in self.params],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ToolSchema":
        try:
            params = tuple(ParamSpec(**p) for p in data.get("parameters", []))
            return cls(
                name=data["name"],
                params=params,
                mutating=bool(data.get("mutating", False)),
                permission=Permission(data.get("permission", "agent")),
                description=data.get("description", ""),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise FixtureError(f"invalid tool schema {data.get('name')!r}: {e}") from e


# --- Actions ---

@dataclass(frozen=True)
class AgentMessage:
    text: str


@dataclass(frozen=True)
class UserMessage:
    text: str


@dataclass(frozen=True)
class ToolCall:
    name: str
    arguments: Dict[str, Any] = field(default_factory=dict)
    caller: Role = Role.AGENT


@dataclass(frozen=True)
class ControlSignal:
    signal: Signal
    text: str = ""  # residual answer text delivered with the signal


@dataclass(frozen=True)
class Empty:
    """The non-acting party's action."""


Action = Union[AgentMessage, UserMessage, ToolCall, ControlSignal, Empty]

EMPTY = Empty()


def action_role(action: Action) -> Optional[Role]:
    """Party that authored an action, None for Empty."""
    if isinstance(action, AgentMessage):
        return Role.AGENT
    if isinstance(action, (UserMessage, ControlSignal)):
        return Role.USER
    if isinstance(action, ToolCall):
        return action.caller
    return None


# --- Results and history ---

@dataclass(frozen=True)
class ToolResult:
    """Outcome of one tool execution; payload is canonical JSON text."""
    name: str
    payload: str
    ok: bool = True
    error: Optional[str] = None
    rule_id: Optional[str] = None

    @classmethod
    def success(cls, name: str, data: Any) -> "ToolResult":
        return cls(name=name, payload=canonical_json(data))

    @classmethod
    def failure(cls, name: str, code: str, message: str,
                rule_id: Optional[str] = None) -> "ToolResult":
        body = {"error": code, "message": message}
        if rule_id:
            body["rule_id"] = rule_id
        return cls(name=name, payload=canonical_json(body), ok=False, error=code, rule_id=rule_id)

    def data(self) -> Any:
        return json.loads(self.payload)

    def to_dict(self) -> Dict[str, Any]:
        return {"name": self.name, "payload": self.payload, "ok": self.ok,
                "error": self.error, "rule_id": self.rule_id}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ToolResult":
        return cls(name=data["name"], payload=data["payload"], ok=data.get("ok", True),
                   error=data.get("error"), rule_id=data.get("rule_id"))


@dataclass(frozen=True)
class Event:
    """One entry of the shared interaction history."""
    kind: EventKind
    role: Role
    content: str = ""
    tool: Optional[str] = None
    ok: bool = True

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind.value, "role": self.role.value, "content": self.content,
                "tool": self.tool, "ok": self.ok}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Event":
        return cls(kind=EventKind(data["kind"]), role=Role(data["role"]),
                   content=data.get("content", ""), tool=data.get("tool"),
                   ok=data.get("ok", True))


@dataclass(frozen=True)
class InteractionMeta:
    """Turn counter and termination status."""
    turn: int = 0
    terminal: bool = False
    reason: Optional[str] = None
    session_token: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return {"turn": self.turn, "terminal": self.terminal, "reason": self.reason,
                "session_token": self.session_token}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "InteractionMeta":
        return cls(turn=int(data.get("turn", 0)), terminal=bool(data.get("terminal", False)),
                   reason=data.get("reason"), session_token=data.get("session_token", ""))


@dataclass(frozen=True)
class EnvState:
    """Entity database plus interaction metadata.

    States are values: entity records are never mutated in place, every
    mutating transition works on a deep copy.
    """
    domain: str
    task_id: str
    entities: Dict[str, Dict[str, Any]]
    meta: InteractionMeta = field(default_factory=InteractionMeta)
    history: Tuple[Event, ...] = ()
    task: Any = field(default=None, compare=False, repr=False)

    @property
    def turn(self) -> int:
        return self.meta.turn

    @property
    def terminal(self) -> bool:
        return self.meta.terminal

    def evolve(self, **changes: Any) -> "EnvState":
        return replace(self, **changes)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "domain": self.domain,
            "task_id": self.task_id,
            "entities": self.entities,
            "meta": self.meta.to_dict(),
            "history": [e.to_dict() for e in self.history],
        }

    def canonical_json(self) -> str:
        return canonical_json(self.to_dict())

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "EnvState":
        return cls(
            domain=data["domain"],
            task_id=data.get("task_id", ""),
            entities=json.loads(canonical_json(data.get("entities", {}))),
            meta=InteractionMeta.from_dict(data.get("meta", {})),
            history=tuple(Event.from_dict(e) for e in data.get("history", [])),
        )


@dataclass(frozen=True)
class Observation:
    """Role-local view of the state."""
    role: Role
    system_context: str
    tools: Tuple[ToolSchema, ...] = ()
    history: Tuple[Event, ...] = ()
    scenario: Dict[str, Any] = field(default_factory=dict)
    turn: int = 0

    def messages(self) -> Tuple[Event, ...]:
        return tuple(e for e in self.history if e.kind is EventKind.MESSAGE)

    def tool_names(self) -> Tuple[str, ...]:
        return tuple(t.name for t in self.tools)
