"""Policy compliance over a trajectory's call stream."""

import copy
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Mapping, Sequence

from arena.domain import Domain
from arena.errors import ToolExecutionError
from arena.tooling import ToolContext
from arena.types import EnvState, Role

from .checker import FunctionCall
from .errors import UnknownRule

Entities = Mapping[str, Mapping[str, Any]]


def _baggage_never_decreases(initial: Entities, final: Entities) -> List[str]:
    found = []
    for entity_id, record in sorted(initial.items()):
        if record.get("type") != "reservation" or entity_id not in final:
            continue
        before = record.get("total_baggages", 0)
        after = final[entity_id].get("total_baggages", 0)
        if after < before:
            found.append(f"{entity_id} baggage decreased from {before} to {after}")
    return found


# rule id -> check over (initial entities, final entities)
FINAL_STATE_CHECKS: Dict[str, Callable[[Entities, Entities], List[str]]] = {
    "baggage_add_only": _baggage_never_decreases,
}


@dataclass
class PolicyReport:
    score: float
    passed: int
    total: int
    checks: List[Dict[str, Any]] = field(default_factory=list)

    @property
    def all_pass(self) -> bool:
        return self.passed == self.total


def check_policies(domain: Domain, calls: Sequence[FunctionCall], initial_state: EnvState,
                   final_state: EnvState, rule_ids: Sequence[str]) -> PolicyReport:
    """Judge each call against the rules in force when it was issued.

    Successful mutating calls are replayed over a shadow copy of the initial
    entities so later calls see earlier effects. A call that breaches a rule
    counts as a violation whether or not the environment rejected it.

    Raises:
        UnknownRule: a rule id does not resolve in the domain table
    """
    rules = []
    for rule_id in rule_ids:
        rule = domain.resolve_rule(rule_id)
        if rule is None:
            raise UnknownRule(rule_id)
        if rule not in rules:
            rules.append(rule)

    violations: Dict[str, List[str]] = {rule.rule_id: [] for rule in rules}
    shadow = copy.deepcopy(initial_state.entities)
    for call in calls:
        if not isinstance(call.arguments, Mapping):
            continue
        for rule in rules:
            found = rule.check(call.name, call.arguments, shadow, domain.now)
            if found:
                violations[rule.rule_id].append(f"turn {call.turn} {call.name}: {found}")
        if not call.ok or call.name not in domain.registry:
            continue
        if domain.registry.get(call.name).mutating:
            ctx = ToolContext(entities=shadow, now=domain.now, caller=Role(call.actor))
            try:
                domain.handlers[call.name](ctx, call.arguments)
            except (ToolExecutionError, KeyError, TypeError, ValueError):
                pass

    for rule in rules:
        final_check = FINAL_STATE_CHECKS.get(rule.rule_id)
        if final_check:
            violations[rule.rule_id].extend(final_check(initial_state.entities, final_state.entities))

    checks = [{"rule_id": rule.rule_id, "violations": violations[rule.rule_id],
               "pass": not violations[rule.rule_id]} for rule in rules]
    passed = sum(c["pass"] for c in checks)
    total = len(checks)
    return PolicyReport(score=passed / total if total else 1.0, passed=passed, total=total,
                        checks=checks)
