"""Recorded episodes and sampled groups."""

import json
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional

from arena.types import EnvState, Role, Termination, ToolResult
from policy.parsing import (
    Control, Function, ParsedAction, parse_agent_output, parse_user_output,
)


@dataclass(frozen=True)
class TurnRecord:
    """One policy invocation and what it did to the environment."""
    turn: int
    actor: Role
    raw_text: str
    parsed: ParsedAction
    token_ids: Optional[List[int]] = None
    token_logprobs: Optional[List[float]] = None
    tool_result: Optional[ToolResult] = None
    context: Optional[str] = None

    @property
    def token_count(self) -> int:
        if self.token_ids is not None:
            return len(self.token_ids)
        return len(self.raw_text.split())

    @property
    def is_tool_call(self) -> bool:
        return isinstance(self.parsed.payload, Function)

    @property
    def is_signal(self) -> bool:
        return isinstance(self.parsed.payload, Control)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "turn": self.turn,
            "actor": self.actor.value,
            "raw_text": self.raw_text,
            "token_count": self.token_count,
            "token_ids": self.token_ids,
            "token_logprobs": self.token_logprobs,
            "tool_result": self.tool_result.to_dict() if self.tool_result else None,
            "context": self.context,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "TurnRecord":
        actor = Role(data["actor"])
        parse = parse_agent_output if actor is Role.AGENT else parse_user_output
        result = data.get("tool_result")
        return cls(
            turn=int(data["turn"]),
            actor=actor,
            raw_text=data["raw_text"],
            parsed=parse(data["raw_text"]),
            token_ids=data.get("token_ids"),
            token_logprobs=data.get("token_logprobs"),
            tool_result=ToolResult.from_dict(result) if result else None,
            context=data.get("context"),
        )


@dataclass
class Trajectory:
    """A finished episode."""
    task_id: str
    seed: int
    turns: List[TurnRecord]
    initial_state: EnvState
    final_state: EnvState
    termination: str
    reward: Optional[float] = None
    error: Optional[str] = None
    domain: str = ""
    agent_id: str = ""
    user_id: str = ""
    report: Optional[Dict[str, Any]] = None

    def __post_init__(self):
        self.termination = Termination(self.termination).value
        if not self.final_state.terminal:
            raise ValueError("trajectory final state must be terminal")

    def agent_token_count(self) -> int:
        """Tokens generated by the agent; user and tool turns are masked out."""
        return sum(t.token_count for t in self.turns if t.actor is Role.AGENT)

    def turns_by(self, role: Role) -> List[TurnRecord]:
        return [t for t in self.turns if t.actor is Role(role)]

    def tool_calls(self) -> List[Dict[str, Any]]:
        """Every attempted tool call in order, with its outcome."""
        calls = []
        for record in self.turns:
            if not record.is_tool_call:
                continue
            payload = record.parsed.payload
            result = record.tool_result
            calls.append({
                "turn": record.turn,
                "caller": record.actor.value,
                "name": payload.name,
                "arguments": dict(payload.arguments),
                "ok": bool(result and result.ok),
                "error": result.error if result else None,
                "rule_id": result.rule_id if result else None,
            })
        return calls

    def non_tool_turns(self) -> List[TurnRecord]:
        return [t for t in self.turns if not t.is_tool_call]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "task_id": self.task_id,
            "domain": self.domain,
            "seed": self.seed,
            "agent_id": self.agent_id,
            "user_id": self.user_id,
            "turns": [t.to_dict() for t in self.turns],
            "termination": self.termination,
            "reward": self.reward,
            "error": self.error,
            "initial_state": self.initial_state.to_dict(),
            "final_state": self.final_state.to_dict(),
            "report": self.report,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Trajectory":
        return cls(
            task_id=data["task_id"],
            seed=int(data["seed"]),
            turns=[TurnRecord.from_dict(t) for t in data.get("turns", [])],
            initial_state=EnvState.from_dict(data["initial_state"]),
            final_state=EnvState.from_dict(data["final_state"]),
            termination=data["termination"],
            reward=data.get("reward"),
            error=data.get("error"),
            domain=data.get("domain", ""),
            agent_id=data.get("agent_id", ""),
            user_id=data.get("user_id", ""),
            report=data.get("report"),
        )


@dataclass
class Group:
    """G trajectories of one task with their rewards."""
    task_id: str
    trajectories: List[Trajectory]
    rewards: List[float]
    advantages: Optional[List[float]] = None
    base_seed: int = 0
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if len(self.trajectories) != len(self.rewards):
            raise ValueError("one reward per trajectory is required")
        if len(self.trajectories) < 2:
            raise ValueError("a group needs at least 2 trajectories")
        if self.advantages is not None and len(self.advantages) != len(self.rewards):
            raise ValueError("one advantage per trajectory is required")

    @property
    def size(self) -> int:
        return len(self.trajectories)

    def mean_reward(self) -> float:
        return sum(self.rewards) / len(self.rewards)
