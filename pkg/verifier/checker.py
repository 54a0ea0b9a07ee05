"""Declarative checker specs and key-function matching."""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence

from arena.domain import Domain, ToolRegistry
from arena.errors import UnknownTool
from arena.types import EnvState
from rollout.trajectory import Trajectory
from system.storage import read_json, write_json

from .errors import CheckerSpecError, UnknownRule
from .fields import (
    DEFAULT_THRESHOLD, FieldClass, classify_field, fuzzy_text_match, values_equal,
)


@dataclass(frozen=True)
class FunctionCall:
    """One attempted tool call extracted from a trajectory."""
    name: str
    arguments: Dict[str, Any]
    actor: str = "agent"
    ok: bool = True
    turn: int = -1

    def to_dict(self) -> Dict[str, Any]:
        return {"name": self.name, "arguments": self.arguments, "actor": self.actor,
                "ok": self.ok, "turn": self.turn}


@dataclass(frozen=True)
class KeyFunction:
    """A state-changing call the evaluated trajectory must contain."""
    name: str
    critical: Dict[str, Any] = field(default_factory=dict)
    semantic: Dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {"name": self.name, "critical": self.critical, "semantic": self.semantic}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "KeyFunction":
        return cls(name=data["name"], critical=dict(data.get("critical", {})),
                   semantic=dict(data.get("semantic", {})))


@dataclass
class CheckerSpec:
    reference_final_state: EnvState
    key_functions: List[KeyFunction] = field(default_factory=list)
    policy_focuses: List[str] = field(default_factory=list)
    field_overrides: Dict[str, str] = field(default_factory=dict)
    threshold: float = DEFAULT_THRESHOLD
    reference_calls: List[FunctionCall] = field(default_factory=list)

    def __post_init__(self):
        for path, cls in self.field_overrides.items():
            try:
                FieldClass(cls)
            except ValueError:
                raise CheckerSpecError(f"override {path!r} has unknown class {cls!r}") from None
        if not 0.0 <= self.threshold <= 1.0:
            raise CheckerSpecError("semantic threshold must lie in [0, 1]")

    def validate(self, domain: Domain):
        """Check key functions and rule ids against a domain.

        Raises:
            CheckerSpecError: a key function is unknown or read-only
            UnknownRule: a policy focus does not resolve
        """
        for key in self.key_functions:
            try:
                schema = domain.registry.get(key.name)
            except UnknownTool:
                raise CheckerSpecError(f"key function {key.name!r} is not a domain tool") from None
            if not schema.mutating:
                raise CheckerSpecError(f"key function {key.name!r} does not modify state")
        for rule_id in self.policy_focuses:
            if domain.resolve_rule(rule_id) is None:
                raise UnknownRule(rule_id)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "reference_final_state": self.reference_final_state.to_dict(),
            "key_functions": [k.to_dict() for k in self.key_functions],
            "policy_focuses": list(self.policy_focuses),
            "field_overrides": dict(self.field_overrides),
            "threshold": self.threshold,
            "reference_calls": [c.to_dict() for c in self.reference_calls],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "CheckerSpec":
        try:
            return cls(
                reference_final_state=EnvState.from_dict(data["reference_final_state"]),
                key_functions=[KeyFunction.from_dict(k) for k in data.get("key_functions", [])],
                policy_focuses=list(data.get("policy_focuses", [])),
                field_overrides=dict(data.get("field_overrides", {})),
                threshold=float(data.get("threshold", DEFAULT_THRESHOLD)),
                reference_calls=[FunctionCall(**c) for c in data.get("reference_calls", [])],
            )
        except (KeyError, TypeError) as e:
            raise CheckerSpecError(f"invalid checker spec: {e}") from e

    def save(self, path) -> Path:
        return write_json(path, self.to_dict())

    @classmethod
    def load(cls, path) -> "CheckerSpec":
        return cls.from_dict(read_json(path))


def extract_function_calls(trajectory: Trajectory) -> List[FunctionCall]:
    """Every tool call turn of a trajectory, in turn order."""
    return [
        FunctionCall(name=c["name"], arguments=c["arguments"], actor=c["caller"],
                     ok=c["ok"], turn=c["turn"])
        for c in trajectory.tool_calls()
    ]


def derive_key_functions(calls: Iterable[FunctionCall], must_have: Sequence[str],
                         registry: ToolRegistry) -> List[KeyFunction]:
    """Key functions of a validated trace: must-have AND state-modifying.

    Exact parameters become critical, semantic ones are fuzzy-matched and
    skip-class parameters are ignored.
    """
    keys: List[KeyFunction] = []
    for call in calls:
        if not call.ok or call.name not in must_have or call.name not in registry:
            continue
        if not registry.get(call.name).mutating:
            continue
        critical, semantic = {}, {}
        for param, value in call.arguments.items():
            cls = classify_field(f"{call.name}.{param}")
            if cls is FieldClass.EXACT:
                critical[param] = value
            elif cls is FieldClass.SEMANTIC and isinstance(value, str):
                semantic[param] = value
        key = KeyFunction(call.name, critical, semantic)
        if key not in keys:
            keys.append(key)
    return keys


def _call_matches(key: KeyFunction, call: FunctionCall, threshold: float) -> bool:
    if call.name != key.name or not call.ok:
        return False
    for param, expected in key.critical.items():
        if param not in call.arguments or not values_equal(expected, call.arguments[param]):
            return False
    for param, expected in key.semantic.items():
        actual = call.arguments.get(param)
        if not isinstance(actual, str) or fuzzy_text_match(expected, actual) < threshold:
            return False
    return True


@dataclass
class FunctionReport:
    score: float
    matched: int
    total: int
    checks: List[Dict[str, Any]] = field(default_factory=list)


def match_key_functions(reference_calls: Optional[Sequence[FunctionCall]],
                        evaluated_calls: Sequence[FunctionCall],
                        spec: CheckerSpec) -> FunctionReport:
    """Match every key function against any successful evaluated call.

    Call order is not enforced and one evaluated call may satisfy several
    key functions. Reference calls only annotate the check records.
    """
    reference_calls = reference_calls or []
    checks = []
    matched = 0
    for key in spec.key_functions:
        hit = next((c for c in evaluated_calls if _call_matches(key, c, spec.threshold)), None)
        expected = next((c.arguments for c in reference_calls if c.name == key.name), None)
        candidates = [c.arguments for c in evaluated_calls if c.name == key.name]
        matched += hit is not None
        checks.append({
            "name": key.name,
            "critical": key.critical,
            "semantic": key.semantic,
            "expected": expected,
            "actual": hit.arguments if hit else candidates,
            "pass": hit is not None,
        })
    total = len(spec.key_functions)
    return FunctionReport(score=matched / total if total else 1.0, matched=matched,
                          total=total, checks=checks)
