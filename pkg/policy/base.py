"""Policy interface shared by scripted, toy and remote policies."""

import copy
from abc import ABC, abstractmethod

from arena.types import Observation, Role

from .errors import RoleMismatch
from .parsing import ParsedAction, PolicyOutput, parse_agent_output, parse_user_output


class Policy(ABC):
    """Maps a role-local observation to one tagged output.

    A policy instance holds per-episode state; the rollout engine calls
    ``fork`` for every episode and ``begin_episode`` before the first turn.
    """

    name = "policy"

    def __init__(self, role: Role):
        self.role = Role(role)

    def begin_episode(self, seed: int):
        """Reset per-episode state."""

    def fork(self) -> "Policy":
        """Independent copy for one episode; shared read-only parts stay shared."""
        return copy.copy(self)

    def parse(self, text: str) -> ParsedAction:
        if self.role is Role.AGENT:
            return parse_agent_output(text)
        return parse_user_output(text)

    def next_action(self, obs: Observation, rng_seed: int) -> PolicyOutput:
        """Produce the output for one turn.

        Raises:
            RoleMismatch: observation belongs to the other party
        """
        if Role(obs.role) is not self.role:
            raise RoleMismatch(f"{self.name} plays {self.role.value}, got a {obs.role.value} observation")
        return self._generate(obs, rng_seed)

    @abstractmethod
    def _generate(self, obs: Observation, rng_seed: int) -> PolicyOutput:
        ...
