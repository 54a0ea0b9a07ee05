"""Field classes, text similarity and the final-state diff."""

import fnmatch
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Iterator, List, Mapping, Optional, Tuple

from arena.types import EnvState

DEFAULT_THRESHOLD = 0.5

SKIP_SUFFIXES = ("_at", "_time")
SKIP_NAMES = ("timestamp", "uuid", "token")
SEMANTIC_NAMES = ("description", "message", "note", "content")

_WORD = re.compile(r"[a-z0-9]+")


class FieldClass(str, Enum):
    EXACT = "exact"
    SEMANTIC = "semantic"
    SKIP = "skip"


def _leaf(path: str) -> str:
    for part in reversed(path.split(".")):
        if not part.isdigit():
            return part
    return ""


def classify_field(path: str, overrides: Optional[Mapping[str, str]] = None) -> FieldClass:
    """Comparison class of a dotted field path.

    Overrides match the full path, either literally or as a glob pattern.
    Then the leaf name decides: skip suffixes, semantic names, exact
    suffixes, and Exact by default.
    """
    if overrides:
        if path in overrides:
            return FieldClass(overrides[path])
        for pattern in sorted(overrides):
            if fnmatch.fnmatchcase(path, pattern):
                return FieldClass(overrides[pattern])
    leaf = _leaf(path)
    if leaf.endswith(SKIP_SUFFIXES) or leaf in SKIP_NAMES:
        return FieldClass.SKIP
    if leaf in SEMANTIC_NAMES:
        return FieldClass.SEMANTIC
    # *_count, *_id, amount, status and anything unmatched
    return FieldClass.EXACT


def text_tokens(text: str) -> set:
    return set(_WORD.findall(str(text).lower()))


def fuzzy_text_match(a: str, b: str) -> float:
    """Jaccard overlap of lowercase alphanumeric word sets; two empty texts score 1."""
    ta, tb = text_tokens(a), text_tokens(b)
    if not ta and not tb:
        return 1.0
    return len(ta & tb) / len(ta | tb)


def values_equal(a: Any, b: Any) -> bool:
    """Equality that keeps booleans apart from numbers."""
    if isinstance(a, bool) or isinstance(b, bool):
        return type(a) is type(b) and a == b
    if isinstance(a, dict) and isinstance(b, dict):
        return a.keys() == b.keys() and all(values_equal(a[k], b[k]) for k in a)
    if isinstance(a, (list, tuple)) and isinstance(b, (list, tuple)):
        return len(a) == len(b) and all(values_equal(x, y) for x, y in zip(a, b))
    return a == b


class _Missing:
    def __repr__(self):
        return "<missing>"


MISSING = _Missing()


def flatten(value: Any, prefix: str) -> Iterator[Tuple[str, Any]]:
    """Leaf paths of a JSON value; empty containers are leaves."""
    if isinstance(value, dict) and value:
        for key in sorted(value):
            yield from flatten(value[key], f"{prefix}.{key}")
    elif isinstance(value, list) and value:
        for i, item in enumerate(value):
            yield from flatten(item, f"{prefix}.{i}")
    else:
        yield prefix, value


def field_passes(cls: FieldClass, expected: Any, actual: Any, threshold: float) -> bool:
    if cls is FieldClass.SKIP:
        return True
    if expected is MISSING or actual is MISSING:
        return False
    if cls is FieldClass.SEMANTIC and isinstance(expected, str) and isinstance(actual, str):
        return fuzzy_text_match(expected, actual) >= threshold
    return values_equal(expected, actual)


def _jsonable(value: Any) -> Any:
    return None if value is MISSING else value


@dataclass
class StateReport:
    score: float
    passed: int
    total: int
    checks: List[Dict[str, Any]] = field(default_factory=list)


def deep_compare(reference: EnvState, evaluated: EnvState,
                 overrides: Optional[Mapping[str, str]] = None,
                 threshold: float = DEFAULT_THRESHOLD) -> StateReport:
    """Field-by-field diff of two entity databases.

    Every leaf field of either side is judged by its class. A field or an
    entity present on one side only fails; Skip fields never count.

    Returns:
        StateReport with score = passed / total over non-skip fields
        (1.0 when there is nothing to compare)
    """
    checks = []
    passed = total = 0
    ref_entities, eval_entities = reference.entities, evaluated.entities
    for entity_id in sorted(set(ref_entities) | set(eval_entities)):
        ref_leaves = dict(flatten(ref_entities[entity_id], entity_id)) if entity_id in ref_entities else {}
        eval_leaves = dict(flatten(eval_entities[entity_id], entity_id)) if entity_id in eval_entities else {}
        for path in sorted(set(ref_leaves) | set(eval_leaves)):
            cls = classify_field(path, overrides)
            if cls is FieldClass.SKIP:
                continue
            expected = ref_leaves.get(path, MISSING)
            actual = eval_leaves.get(path, MISSING)
            ok = field_passes(cls, expected, actual, threshold)
            total += 1
            passed += ok
            if not ok:
                checks.append({"path": path, "class": cls.value, "expected": _jsonable(expected),
                               "actual": _jsonable(actual), "pass": False})
    score = passed / total if total else 1.0
    return StateReport(score=score, passed=passed, total=total, checks=checks)
