"""Parsers and renderers for the tagged agent and user output formats.

Agent turns carry an optional ``<think>`` block followed by exactly one of
``<function>{"name": ..., "arguments": {...}}</function>`` or
``<message>...</message>``. User turns carry ``<answer>...</answer>`` with at
most one control marker, or a ``<function>`` tag in dual-control domains.

Parsing never raises: anything unusable becomes a Malformed payload.
"""

import json
import re
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Union

from arena.types import (
    Action, AgentMessage, ControlSignal, Role, Signal, ToolCall, UserMessage,
)
from system.storage import canonical_json


@dataclass(frozen=True)
class Function:
    name: str
    arguments: Dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class Message:
    text: str


@dataclass(frozen=True)
class Answer:
    text: str


@dataclass(frozen=True)
class Control:
    """A user control signal; ``residual`` is the answer text around the marker."""
    signal: Signal
    residual: str = ""


@dataclass(frozen=True)
class Malformed:
    reason: str
    raw: str = ""

    def __post_init__(self):
        if not self.reason:
            raise ValueError("Malformed needs a reason")


Payload = Union[Function, Message, Answer, Control, Malformed]


@dataclass(frozen=True)
class ParsedAction:
    payload: Payload
    think: Optional[str] = None

    @property
    def malformed(self) -> bool:
        return isinstance(self.payload, Malformed)


@dataclass(frozen=True)
class PolicyOutput:
    """One policy invocation: raw text, its parse, and token accounting when available."""
    raw_text: str
    parsed: ParsedAction
    token_ids: Optional[List[int]] = None
    token_logprobs: Optional[List[float]] = None
    context: Optional[str] = None  # feature context key, toy policy only

    def __post_init__(self):
        if self.token_logprobs is not None:
            if self.token_ids is None or len(self.token_ids) != len(self.token_logprobs):
                raise ValueError("token_logprobs must align with token_ids")
            if any(lp > 0 for lp in self.token_logprobs):
                raise ValueError("token logprobs must be <= 0")


_THINK = re.compile(r"<think>(.*?)</think>", re.DOTALL)


def _tag_bodies(text: str, tag: str):
    """Return (bodies, opened) for ``<tag>...</tag>`` blocks in text."""
    opened = text.count(f"<{tag}>")
    bodies = re.findall(rf"<{tag}>(.*?)</{tag}>", text, re.DOTALL)
    return bodies, opened


def _split_think(text: str):
    match = _THINK.search(text)
    if not match:
        return None, text
    return match.group(1).strip(), text[:match.start()] + text[match.end():]


def _parse_function(body: str, raw: str) -> Payload:
    try:
        data = json.loads(body.strip())
    except json.JSONDecodeError as e:
        return Malformed(f"invalid function JSON: {e.msg}", raw)
    if not isinstance(data, dict):
        return Malformed("function body must be a JSON object", raw)
    name = data.get("name")
    if not isinstance(name, str) or not name:
        return Malformed("function call lacks a name", raw)
    arguments = data.get("arguments", {})
    if arguments is None:
        arguments = {}
    if not isinstance(arguments, dict):
        return Malformed("function arguments must be an object", raw)
    return Function(name, arguments)


def _function_payload(text: str, raw: str) -> Optional[Payload]:
    bodies, opened = _tag_bodies(text, "function")
    if not opened:
        return None
    if opened > 1:
        return Malformed("multiple function tags", raw)
    if not bodies:
        return Malformed("unterminated function tag", raw)
    return _parse_function(bodies[0], raw)


def parse_agent_output(text: Any) -> ParsedAction:
    """Parse one agent turn.

    Args:
        text: Raw model output

    Returns:
        ParsedAction whose payload is Function, Message or Malformed
    """
    if not isinstance(text, str):
        return ParsedAction(Malformed("output is not text", repr(text)))
    think, rest = _split_think(text)

    message_bodies, message_opened = _tag_bodies(rest, "message")
    function = _function_payload(rest, text)
    if function is not None and message_opened:
        return ParsedAction(Malformed("both function and message", text), think)
    if function is not None:
        return ParsedAction(function, think)
    if message_opened > 1:
        return ParsedAction(Malformed("multiple message tags", text), think)
    if message_opened and not message_bodies:
        return ParsedAction(Malformed("unterminated message tag", text), think)
    if message_bodies:
        return ParsedAction(Message(message_bodies[0].strip()), think)
    return ParsedAction(Malformed("no function or message tag", text), think)


def parse_user_output(text: Any) -> ParsedAction:
    """Parse one user-simulator turn.

    A control marker inside the answer wins over the answer text; the text
    around it is kept as the residual.
    """
    if not isinstance(text, str):
        return ParsedAction(Malformed("output is not text", repr(text)))
    think, rest = _split_think(text)

    answer_bodies, answer_opened = _tag_bodies(rest, "answer")
    function = _function_payload(rest, text)
    if function is not None and answer_opened:
        return ParsedAction(Malformed("both function and answer", text), think)
    if function is not None:
        return ParsedAction(function, think)
    if answer_opened and not answer_bodies:
        return ParsedAction(Malformed("unterminated answer tag", text), think)
    if not answer_bodies:
        return ParsedAction(Malformed("missing answer", text), think)
    if len(answer_bodies) > 1:
        return ParsedAction(Malformed("multiple answer tags", text), think)

    answer = answer_bodies[0]
    found = [s for s in Signal if s.marker in answer]
    if len(found) > 1:
        return ParsedAction(Malformed("multiple control signals", text), think)
    if found:
        signal = found[0]
        residual = " ".join(answer.replace(signal.marker, " ").split())
        return ParsedAction(Control(signal, residual), think)
    return ParsedAction(Answer(answer.strip()), think)


def render(parsed: ParsedAction) -> str:
    """Canonical tagged text for a parsed action."""
    payload = parsed.payload
    prefix = f"<think>{parsed.think}</think>" if parsed.think else ""
    if isinstance(payload, Function):
        body = canonical_json({"name": payload.name, "arguments": payload.arguments})
        return f"{prefix}<function>{body}</function>"
    if isinstance(payload, Message):
        return f"{prefix}<message>{payload.text}</message>"
    if isinstance(payload, Answer):
        return f"{prefix}<answer>{payload.text}</answer>"
    if isinstance(payload, Control):
        text = f"{payload.residual} {payload.signal.marker}".strip()
        return f"{prefix}<answer>{text}</answer>"
    return payload.raw


def to_action(parsed: ParsedAction, role: Role, raw_text: str = "") -> Action:
    """Turn a parse into the environment action authored by ``role``.

    Malformed output becomes a plain message carrying the raw text.
    """
    role = Role(role)
    payload = parsed.payload
    if isinstance(payload, Function):
        return ToolCall(payload.name, dict(payload.arguments), role)
    if isinstance(payload, Control) and role is Role.USER:
        return ControlSignal(payload.signal, payload.residual)
    if isinstance(payload, (Message, Answer)):
        text = payload.text
    else:
        text = raw_text
    return AgentMessage(text) if role is Role.AGENT else UserMessage(text)
