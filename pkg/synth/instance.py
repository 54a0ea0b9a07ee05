"""Synthesis artifacts: verdicts, findings and the instance record."""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional

from arena.task import TaskSpec
from arena.types import EnvState
from rollout.trajectory import Trajectory
from verifier.checker import CheckerSpec

from .errors import ContractViolation

TASK_CATEGORIES = ("missing_resource", "contradictory_constraints", "policy_violation")
TRAJECTORY_CATEGORIES = ("function_error", "data_fabrication", "policy_violation",
                         "goal_failure", "deception_miss")


class Verdict(str, Enum):
    FEASIBLE = "FEASIBLE"
    INFEASIBLE = "INFEASIBLE"
    PASS = "PASS"
    FAIL = "FAIL"


class RepairMode(str, Enum):
    TASK = "TASK"
    TRAJECTORY = "TRAJECTORY"
    COMBINED = "COMBINED"


class Status(str, Enum):
    PENDING = "pending"
    ACCEPTED = "accepted"
    DISCARDED = "discarded"


@dataclass(frozen=True)
class Finding:
    """One categorized issue with the evidence that supports it."""
    category: str
    description: str
    evidence: str

    def __post_init__(self):
        if not str(self.evidence).strip():
            raise ValueError(f"finding {self.category!r} has no evidence")

    def to_dict(self) -> Dict[str, str]:
        return {"category": self.category, "description": self.description, "evidence": self.evidence}


@dataclass
class TaskCheck:
    """TaskValidation outcome, backed by executing the plan."""
    verdict: Verdict
    plan: List[Dict[str, Any]]
    evidence: List[Dict[str, Any]] = field(default_factory=list)
    category: Optional[str] = None
    final_state: Optional[EnvState] = None

    @property
    def feasible(self) -> bool:
        return self.verdict is Verdict.FEASIBLE

    def findings(self) -> List[Finding]:
        if self.feasible:
            return []
        failed = [e for e in self.evidence if not e.get("ok", True)]
        text = failed[-1]["result"] if failed else "plan did not execute"
        return [Finding(self.category or "contradictory_constraints", "task is not solvable as written", text)]

    def to_dict(self) -> Dict[str, Any]:
        return {"verdict": self.verdict.value, "category": self.category, "plan": self.plan,
                "evidence": self.evidence}


@dataclass
class TrajectoryCheck:
    verdict: Verdict
    issues: List[Finding] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.verdict is Verdict.PASS

    def to_dict(self) -> Dict[str, Any]:
        return {"verdict": self.verdict.value, "issues": [i.to_dict() for i in self.issues]}


@dataclass
class Discard:
    """A repair loop gave up on an instance."""
    instance_id: str
    reason: str
    rounds: int


@dataclass
class SynthesisInstance:
    instance_id: str
    set_id: str
    seed: int
    position: int
    scenario: Dict[str, Any] = field(default_factory=dict)
    task: Optional[TaskSpec] = None
    task_check: Optional[TaskCheck] = None
    trajectory: Optional[Trajectory] = None
    trajectory_check: Optional[TrajectoryCheck] = None
    checker: Optional[CheckerSpec] = None
    status: Status = Status.PENDING
    repair_count: int = 0
    first_verdict: Optional[Verdict] = None
    repair_notes: List[str] = field(default_factory=list)
    categories: List[str] = field(default_factory=list)
    tool_calls_total: int = 0
    tool_calls_ok: int = 0
    discard_reason: Optional[str] = None

    @property
    def accepted(self) -> bool:
        return self.status is Status.ACCEPTED

    def note_findings(self, findings: List[Finding]):
        for finding in findings:
            if finding.category not in self.categories:
                self.categories.append(finding.category)

    def note_dialogue(self, trajectory: Trajectory):
        calls = trajectory.tool_calls()
        self.tool_calls_total += len(calls)
        self.tool_calls_ok += sum(1 for c in calls if c["ok"])

    def accept(self, max_repairs: int):
        """Mark accepted after checking the acceptance invariant.

        Raises:
            ContractViolation: the instance does not qualify
        """
        if self.repair_count > max_repairs:
            raise ContractViolation("ValidationFunction", f"{self.instance_id} needed {self.repair_count} repairs")
        if self.trajectory_check is None or not self.trajectory_check.passed:
            raise ContractViolation("ValidationFunction", f"{self.instance_id} has no passing trajectory")
        if self.checker is None:
            raise ContractViolation("ValidationFunction", f"{self.instance_id} has no checker")
        self.status = Status.ACCEPTED

    def discard(self, reason: str):
        self.status = Status.DISCARDED
        self.discard_reason = reason

    def judge_view(self) -> Dict[str, Any]:
        """What the judge sees: outcome summary plus every recorded issue."""
        issues: List[Dict[str, str]] = []
        if self.task_check is not None:
            issues.extend(f.to_dict() for f in self.task_check.findings())
        if self.trajectory_check is not None:
            issues.extend(f.to_dict() for f in self.trajectory_check.issues)
        return {
            "instance_id": self.instance_id,
            "status": self.status.value,
            "first_verdict": self.first_verdict.value if self.first_verdict else None,
            "repair_count": self.repair_count,
            "categories": list(self.categories),
            "issues": issues,
            "tool_calls": self.tool_calls_total,
            "tool_calls_ok": self.tool_calls_ok,
            "complexity": self.scenario.get("complexity_levels"),
            "discard_reason": self.discard_reason,
        }

    def to_dict(self) -> Dict[str, Any]:
        return {
            "instance_id": self.instance_id,
            "set_id": self.set_id,
            "seed": self.seed,
            "position": self.position,
            "scenario": self.scenario,
            "task": self.task.to_dict() if self.task else None,
            "task_check": self.task_check.to_dict() if self.task_check else None,
            "trajectory_check": self.trajectory_check.to_dict() if self.trajectory_check else None,
            "status": self.status.value,
            "repair_count": self.repair_count,
            "first_verdict": self.first_verdict.value if self.first_verdict else None,
            "repair_notes": list(self.repair_notes),
            "categories": list(self.categories),
            "tool_calls_total": self.tool_calls_total,
            "tool_calls_ok": self.tool_calls_ok,
            "discard_reason": self.discard_reason,
        }
