"""Task specifications and their JSON files."""

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

from system.storage import write_json

from .errors import FixtureError

INTENT_FIELDS = (
    "context", "purpose", "reason_for_call", "known_info", "task_instructions",
    "rubrics", "must_have_functions", "selected_parameters",
)


@dataclass
class TaskSpec:
    """A user goal with hidden ground truth and the checker that grades it."""
    id: str
    context: str = ""
    purpose: str = ""
    reason_for_call: str = ""
    known_info: str = ""
    task_instructions: str = ""
    rubrics: List[str] = field(default_factory=list)
    must_have_functions: List[str] = field(default_factory=list)
    initial_state_seed: Dict[str, Any] = field(default_factory=dict)
    checker_spec: Optional[Dict[str, Any]] = None
    selected_parameters: Dict[str, Any] = field(default_factory=dict)
    domain: str = ""

    def __post_init__(self):
        if not self.id:
            raise FixtureError("task id must be nonempty")
        if isinstance(self.rubrics, str):
            self.rubrics = [self.rubrics]
        self.rubrics = list(self.rubrics)
        self.must_have_functions = list(self.must_have_functions)

    def referenced_entities(self) -> List[str]:
        """Entity ids the initial state must already contain."""
        seed = self.initial_state_seed or {}
        refs = list(seed.get("requires", []))
        refs.extend(seed.get("patches", {}).keys())
        return sorted(set(refs))

    def scenario(self) -> Dict[str, Any]:
        """User-facing fields, hidden from the agent."""
        return {
            "context": self.context,
            "purpose": self.purpose,
            "reason_for_call": self.reason_for_call,
            "known_info": self.known_info,
            "task_instructions": self.task_instructions,
            "selected_parameters": self.selected_parameters,
        }

    def to_dict(self) -> Dict[str, Any]:
        return {
            "id": self.id,
            "domain": self.domain,
            "context": self.context,
            "purpose": self.purpose,
            "reason_for_call": self.reason_for_call,
            "known_info": self.known_info,
            "task_instructions": self.task_instructions,
            "rubrics": list(self.rubrics),
            "must_have_functions": list(self.must_have_functions),
            "initial_state_seed": self.initial_state_seed,
            "checker_spec": self.checker_spec,
            "selected_parameters": self.selected_parameters,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TaskSpec":
        if not isinstance(data, dict):
            raise FixtureError("task must be a JSON object")
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(data) - known)
        if unknown:
            raise FixtureError(f"task {data.get('id')!r} has unknown fields: {unknown}")
        try:
            return cls(**data)
        except TypeError as e:
            raise FixtureError(f"invalid task {data.get('id')!r}: {e}") from e


def load_task(path) -> TaskSpec:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise FixtureError(f"could not read task file {path}: {e}") from e
    return TaskSpec.from_dict(data)


def load_tasks(directory) -> List[TaskSpec]:
    """Load every ``*.json`` task in a directory, sorted by file name."""
    directory = Path(directory)
    if not directory.is_dir():
        raise FixtureError(f"task directory not found: {directory}")
    return [load_task(p) for p in sorted(directory.glob("*.json"))]


def save_task(task: TaskSpec, path) -> Path:
    return write_json(path, task.to_dict())
