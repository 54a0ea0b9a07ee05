"""Versioned worker prompt sets and their evolution."""

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence

from system.logs import get_logger
from system.storage import PathLike, write_json

from .backends import Backend, decode_object, request_messages
from .errors import ContractViolation
from .judge import Critique
from .plan import WorkflowPlan

logger = get_logger(__name__)

DEFAULT_PROMPTS_PATH = Path(__file__).resolve().parent.parent / "assets" / "prompts" / "default_prompts.json"

WORKERS = (
    "RandomPool", "UserIntent", "TaskValidation", "UserSimulator", "TrajectoryAgent",
    "TrajectoryValidation", "Modify", "ValidationFunction", "Planner", "Judge", "PromptEngineer",
)


def load_default_prompts(path: Optional[PathLike] = None) -> Dict[str, str]:
    prompts = json.loads(Path(path or DEFAULT_PROMPTS_PATH).read_text(encoding="utf-8"))
    missing = [w for w in WORKERS if w not in prompts]
    if missing:
        raise ContractViolation("PromptEngineer", f"default prompts lack workers {missing}")
    return {w: prompts[w] for w in WORKERS}


@dataclass
class PromptSet:
    """One versioned collection of worker prompts.

    ``lineage`` has one entry per version: its parent version and the
    critique ids applied to produce it.
    """
    set_id: str
    prompts: Dict[str, str]
    version: int = 1
    lineage: List[Dict[str, Any]] = field(default_factory=lambda: [
        {"version": 1, "parent": None, "critiques": []}])

    def __post_init__(self):
        self.check_lineage()

    def check_lineage(self):
        """Versions run 1..version with each parent one below its child.

        Raises:
            ValueError: the lineage is not a contiguous chain
        """
        versions = [entry["version"] for entry in self.lineage]
        if versions != list(range(1, self.version + 1)):
            raise ValueError(f"prompt set {self.set_id}: lineage versions {versions} are not 1..{self.version}")
        for entry in self.lineage:
            expected = entry["version"] - 1 or None
            if entry["parent"] != expected:
                raise ValueError(f"prompt set {self.set_id}: version {entry['version']} has parent {entry['parent']}")

    def prompt(self, worker: str) -> str:
        return self.prompts[worker]

    def evolved(self, prompts: Mapping[str, str], critique_ids: Sequence[str]) -> "PromptSet":
        version = self.version + 1
        lineage = [dict(e) for e in self.lineage]
        lineage.append({"version": version, "parent": self.version, "critiques": list(critique_ids)})
        return PromptSet(self.set_id, dict(prompts), version, lineage)

    def summary(self) -> str:
        """Text a new set is conditioned on to stay distinct from this one."""
        extras = []
        for worker in sorted(self.prompts):
            lines = self.prompts[worker].splitlines()[1:]
            extras.extend(f"{worker}: {line}" for line in lines if line.strip())
        return f"{self.set_id} v{self.version}: " + ("; ".join(extras) if extras else "default prompts")

    def to_dict(self) -> Dict[str, Any]:
        return {"set_id": self.set_id, "version": self.version, "prompts": dict(self.prompts),
                "lineage": [dict(e) for e in self.lineage]}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "PromptSet":
        return cls(data["set_id"], dict(data["prompts"]), int(data["version"]),
                   [dict(e) for e in data["lineage"]])

    def save(self, directory: PathLike) -> Path:
        return write_json(Path(directory) / f"{self.set_id}_v{self.version}.json", self.to_dict())


def set_name(k_index: int) -> str:
    return f"set_{k_index:02d}"


def _revised_prompts(response: Mapping[str, Any], base: Mapping[str, str], stage: str) -> Dict[str, str]:
    prompts = dict(base)
    for worker, text in response.items():
        if worker not in prompts:
            logger.debug("%s returned a prompt for unknown worker %s", stage, worker)
            continue
        if not isinstance(text, str) or not text.strip():
            raise ContractViolation(stage, f"prompt for {worker} must be nonempty text")
        prompts[worker] = text
    return prompts


def generate_prompt_set(plan: WorkflowPlan, prior_summaries: Sequence[str], k_index: int,
                        backend: Backend, seed: int,
                        defaults: Optional[Mapping[str, str]] = None) -> PromptSet:
    """Initialize prompt set ``k_index``, pushed away from the sets before it.

    Set 0 is the default prompts verbatim. Later sets are requested from the
    prompt engineer with every prior summary in the request.

    Raises:
        ValueError: ``prior_summaries`` does not cover sets 0..k_index-1
        BackendFailure: the backend produced nothing
    """
    if k_index < 0 or len(prior_summaries) != k_index:
        raise ValueError(f"set {k_index} needs exactly {k_index} prior summaries, got {len(prior_summaries)}")
    defaults = dict(defaults or load_default_prompts())
    plan.check_prompts(defaults)
    if k_index == 0:
        return PromptSet(set_name(0), defaults)
    payload = {
        "mode": "generate",
        "k_index": k_index,
        "stages": [s.value for s in plan.stages],
        "prior_summaries": list(prior_summaries),
        "prompts": defaults,
    }
    text = backend.complete("PromptEngineer", request_messages(defaults["PromptEngineer"], payload), seed)
    prompts = _revised_prompts(decode_object(text, "PromptEngineer"), defaults, "PromptEngineer")
    return PromptSet(set_name(k_index), prompts)


def evolve(prompt_set: PromptSet, critiques: Sequence[Critique], backend: Backend, seed: int) -> PromptSet:
    """Revise every worker prompt from structured judge findings; version goes up by one.

    Raises:
        ValueError: no critiques
        BackendFailure: the backend produced nothing
    """
    if not critiques:
        raise ValueError("evolve needs at least one critique")
    findings = [dict(f.to_dict(), critique_id=c.critique_id) for c in critiques for f in c.findings]
    payload = {
        "mode": "evolve",
        "set_id": prompt_set.set_id,
        "version": prompt_set.version,
        "prompts": dict(prompt_set.prompts),
        "findings": findings,
        "scores": {c.critique_id: c.scores for c in critiques},
    }
    text = backend.complete("PromptEngineer",
                            request_messages(prompt_set.prompt("PromptEngineer"), payload), seed)
    prompts = _revised_prompts(decode_object(text, "PromptEngineer"), prompt_set.prompts, "PromptEngineer")
    evolved = prompt_set.evolved(prompts, [c.critique_id for c in critiques])
    logger.debug("evolved %s to v%d from %d findings", prompt_set.set_id, evolved.version, len(findings))
    return evolved
