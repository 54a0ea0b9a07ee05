"""Judge critiques of synthesized instances."""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional

import numpy as np

from system.logs import get_logger

from .backends import Backend, decode_object, request_messages
from .errors import ContractViolation
from .instance import Finding, SynthesisInstance

logger = get_logger(__name__)

AXES = ("executability", "tool_correctness", "trajectory_coherence", "difficulty_coverage")


@dataclass
class Critique:
    critique_id: str
    target: str
    scores: Dict[str, float]
    findings: List[Finding] = field(default_factory=list)

    def __post_init__(self):
        for axis in AXES:
            value = self.scores.get(axis)
            if value is None or not 0.0 <= value <= 1.0:
                raise ValueError(f"critique {self.critique_id}: {axis} score must lie in [0, 1]")

    @property
    def overall(self) -> float:
        return float(np.mean([self.scores[a] for a in AXES]))

    def to_dict(self) -> Dict[str, Any]:
        return {"critique_id": self.critique_id, "target": self.target, "scores": dict(self.scores),
                "overall": self.overall, "findings": [f.to_dict() for f in self.findings]}


def _axis_scores(response: Optional[Mapping[str, Any]]) -> Dict[str, Optional[float]]:
    raw = (response or {}).get("scores")
    raw = raw if isinstance(raw, Mapping) else {}
    scores: Dict[str, Optional[float]] = {}
    for axis in AXES:
        value = raw.get(axis)
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            scores[axis] = None
        else:
            scores[axis] = min(max(float(value), 0.0), 1.0)
    return scores


def _findings(response: Optional[Mapping[str, Any]]) -> List[Finding]:
    findings = []
    for item in (response or {}).get("findings") or []:
        if not isinstance(item, Mapping):
            continue
        try:
            findings.append(Finding(str(item.get("category", "")), str(item.get("description", "")),
                                    str(item.get("evidence", ""))))
        except ValueError:
            logger.debug("dropping finding without evidence: %s", item)
    return findings


def judge(instance: SynthesisInstance, prompt: str, backend: Backend, seed: int,
          critique_id: str) -> Critique:
    """Score one instance on the four axes.

    A response with non-numeric scores is retried once; axes still unusable
    after the retry score 0.
    """
    payload: Dict[str, Any] = {"instance": instance.judge_view(), "axes": list(AXES), "attempt": 1}
    first = _ask(backend, prompt, payload, seed)
    scores = _axis_scores(first)
    response = first
    if any(v is None for v in scores.values()):
        logger.warning("judge returned unusable scores for %s, retrying once", instance.instance_id)
        payload["attempt"] = 2
        response = _ask(backend, prompt, payload, seed)
        retry = _axis_scores(response)
        scores = {a: retry[a] if retry[a] is not None else 0.0 for a in AXES}
    return Critique(critique_id=critique_id, target=instance.instance_id,
                    scores={a: float(v) for a, v in scores.items()},
                    findings=_findings(response) or _findings(first))


def _ask(backend: Backend, prompt: str, payload: Mapping[str, Any], seed: int) -> Optional[Dict[str, Any]]:
    text = backend.complete("Judge", request_messages(prompt, payload), seed)
    try:
        return decode_object(text, "Judge")
    except ContractViolation:
        return None
