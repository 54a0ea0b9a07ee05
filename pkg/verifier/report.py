"""Verification reports."""

from dataclasses import dataclass, field
from typing import Any, Dict, List

from system.storage import canonical_json, write_json

COMPONENTS = ("state", "functions", "policy")


@dataclass
class VerificationReport:
    """Outcome of one checker run; reward is 1 only when every component scores 1."""
    component_scores: Dict[str, float]
    checks_state: List[Dict[str, Any]] = field(default_factory=list)
    checks_functions: List[Dict[str, Any]] = field(default_factory=list)
    checks_policy: List[Dict[str, Any]] = field(default_factory=list)
    diagnostics: List[str] = field(default_factory=list)
    task_id: str = ""
    seed: int = 0

    @property
    def overall_pass(self) -> bool:
        return all(self.component_scores.get(name, 0.0) == 1.0 for name in COMPONENTS) \
            and not self.diagnostics

    @property
    def reward(self) -> int:
        return 1 if self.overall_pass else 0

    @classmethod
    def failed(cls, diagnostic: str, task_id: str = "", seed: int = 0) -> "VerificationReport":
        """Report for input the checker could not evaluate."""
        return cls(component_scores={name: 0.0 for name in COMPONENTS},
                   diagnostics=[diagnostic], task_id=task_id, seed=seed)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "task_id": self.task_id,
            "seed": self.seed,
            "overall_pass": self.overall_pass,
            "reward": self.reward,
            "component_scores": dict(self.component_scores),
            "checks_state": self.checks_state,
            "checks_functions": self.checks_functions,
            "checks_policy": self.checks_policy,
            "diagnostics": self.diagnostics,
        }

    def to_json(self) -> str:
        return canonical_json(self.to_dict(), indent=2)

    def save(self, path):
        return write_json(path, self.to_dict())
