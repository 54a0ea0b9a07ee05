"""Deterministic policies that replay canned utterances."""

import re
from pathlib import Path
from typing import Any, List, Mapping, Optional, Sequence

from arena.types import Observation, Role
from system.storage import read_json

from .base import Policy
from .errors import ScriptExhausted
from .parsing import PolicyOutput

_PLACEHOLDER = re.compile(r"\{([a-z_]+)\}")


def fill_placeholders(text: str, scenario: Mapping[str, Any]) -> str:
    """Replace ``{field}`` with scenario values; unknown fields stay as written."""
    def sub(match):
        key = match.group(1)
        if key in scenario and isinstance(scenario[key], (str, int, float)):
            return str(scenario[key])
        return match.group(0)
    return _PLACEHOLDER.sub(sub, text)


class ScriptedPolicy(Policy):
    """Replays a fixed list of outputs, one per invocation.

    With ``branches`` the step list is picked by ``episode seed % len(branches)``.
    With ``repeat_last`` the final step repeats once the script runs out.
    """

    name = "scripted"

    def __init__(self, role: Role, steps: Sequence[str] = (),
                 branches: Optional[Sequence[Sequence[str]]] = None,
                 repeat_last: bool = False, name: Optional[str] = None):
        super().__init__(role)
        if not steps and not branches:
            raise ValueError("a script needs steps or branches")
        self.steps = list(steps)
        self.branches = [list(b) for b in branches] if branches else None
        self.repeat_last = repeat_last
        if name:
            self.name = name
        self._active: List[str] = self.steps
        self._cursor = 0

    def begin_episode(self, seed: int):
        self._cursor = 0
        if self.branches:
            self._active = self.branches[seed % len(self.branches)]
        else:
            self._active = self.steps

    def fork(self) -> "ScriptedPolicy":
        clone = super().fork()
        clone._cursor = 0
        return clone

    def _generate(self, obs: Observation, rng_seed: int) -> PolicyOutput:
        if self._cursor < len(self._active):
            text = self._active[self._cursor]
        elif self.repeat_last and self._active:
            text = self._active[-1]
        else:
            raise ScriptExhausted(f"{self.name} has no step {self._cursor + 1}")
        self._cursor += 1
        text = fill_placeholders(text, obs.scenario)
        return PolicyOutput(raw_text=text, parsed=self.parse(text))

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], role: Optional[Role] = None,
                  name: Optional[str] = None) -> "ScriptedPolicy":
        return cls(
            role=role or Role(data.get("role", "agent")),
            steps=data.get("steps", []),
            branches=data.get("branches"),
            repeat_last=bool(data.get("repeat_last", False)),
            name=name or data.get("name"),
        )

    @classmethod
    def load(cls, path, role: Optional[Role] = None) -> "ScriptedPolicy":
        """Load a script file ``{role, steps, branches, repeat_last}``."""
        return cls.from_dict(read_json(path), role=role, name=f"scripted:{Path(path).stem}")
