"""Domain policy rules shared by tool execution and outcome checking."""

from dataclasses import dataclass, field
from datetime import datetime, timedelta
from typing import Any, Callable, Dict, Iterable, List, Mapping, Optional, Tuple

from .errors import FixtureError

Entities = Mapping[str, Mapping[str, Any]]

# (tool name, arguments, entities in force, domain clock, rule params) -> violation text or None
RuleCheck = Callable[[str, Mapping[str, Any], Entities, datetime, Mapping[str, Any]], Optional[str]]

FLOWN_STATUSES = ("landed", "flying")
COMPENSATION_TIERS = ("silver", "gold")


def parse_time(text: str) -> datetime:
    return datetime.fromisoformat(text)


def _record(entities: Entities, entity_id: Any, kind: str) -> Optional[Mapping[str, Any]]:
    if not isinstance(entity_id, str):
        return None
    record = entities.get(entity_id)
    if record is None or record.get("type") != kind:
        return None
    return record


def _flights(entities: Entities, reservation: Mapping[str, Any]) -> List[Mapping[str, Any]]:
    return [f for f in (_record(entities, n, "flight") for n in reservation.get("flights", [])) if f]


def has_flown(flight: Mapping[str, Any], now: datetime) -> bool:
    """A flight has flown if it departed, or its date passed without an airline cancellation."""
    if flight.get("status") in FLOWN_STATUSES:
        return True
    if flight.get("status") == "cancelled":
        return False
    return flight.get("date", "9999-12-31") < now.date().isoformat()


def _payment_kinds(entities: Entities, payment_ids: Any) -> List[str]:
    if not isinstance(payment_ids, (list, tuple)):
        return []
    kinds = []
    for pid in payment_ids:
        record = _record(entities, pid, "payment")
        if record is not None:
            kinds.append(record.get("kind", ""))
    return kinds


def check_basic_economy_mod(tool, args, entities, now, params):
    reservation = _record(entities, args.get("reservation_id"), "reservation")
    if reservation and reservation.get("cabin") == "basic_economy":
        return f"reservation {reservation['reservation_id']} is basic economy and cannot be modified"
    return None


def check_cancel_already_flown(tool, args, entities, now, params):
    reservation = _record(entities, args.get("reservation_id"), "reservation")
    if reservation is None:
        return None
    flown = [f["flight_number"] for f in _flights(entities, reservation) if has_flown(f, now)]
    if flown:
        return f"reservation {reservation['reservation_id']} includes flown segments {flown}"
    return None


def check_cancellation_24h(tool, args, entities, now, params):
    reservation = _record(entities, args.get("reservation_id"), "reservation")
    if reservation is None:
        return None
    window = timedelta(hours=params.get("hours", 24))
    created = parse_time(reservation.get("created_at", "1970-01-01T00:00:00"))
    if now - created <= window:
        return None
    if reservation.get("cabin") == "business" or reservation.get("insurance"):
        return None
    if any(f.get("status") == "cancelled" for f in _flights(entities, reservation)):
        return None
    return (f"reservation {reservation['reservation_id']} was booked more than "
            f"{params.get('hours', 24)}h ago without insurance, business cabin or airline cancellation")


def check_certificate_limit(tool, args, entities, now, params):
    limit = params.get("limit", 1)
    used = _payment_kinds(entities, args.get("payment_methods", [])).count("certificate")
    if used > limit:
        return f"{used} certificates in one payment, at most {limit} allowed"
    return None


def check_gift_card_limit(tool, args, entities, now, params):
    limit = params.get("limit", 3)
    used = _payment_kinds(entities, args.get("payment_methods", [])).count("gift_card")
    if used > limit:
        return f"{used} gift cards in one payment, at most {limit} allowed"
    return None


def check_passenger_max(tool, args, entities, now, params):
    limit = params.get("limit", 5)
    passengers = args.get("passengers", [])
    if isinstance(passengers, (list, tuple)) and len(passengers) > limit:
        return f"{len(passengers)} passengers, at most {limit} per reservation"
    return None


def check_baggage_add_only(tool, args, entities, now, params):
    reservation = _record(entities, args.get("reservation_id"), "reservation")
    requested = args.get("total_baggages")
    if reservation is None or not isinstance(requested, int):
        return None
    current = reservation.get("total_baggages", 0)
    if requested < current:
        return f"baggage count would decrease from {current} to {requested}"
    return None


def check_compensation_membership(tool, args, entities, now, params):
    user = _record(entities, args.get("user_id"), "user")
    if user is None:
        return None
    if user.get("membership") in params.get("tiers", COMPENSATION_TIERS):
        return None
    reservation = _record(entities, args.get("reservation_id"), "reservation")
    if reservation and (reservation.get("cabin") == "business" or reservation.get("insurance")):
        return None
    return f"user {user['user_id']} ({user.get('membership')}) is not eligible for compensation"


RULE_CHECKS: Dict[str, RuleCheck] = {
    "basic_economy_mod": check_basic_economy_mod,
    "cancel_already_flown": check_cancel_already_flown,
    "cancellation_24h": check_cancellation_24h,
    "certificate_limit": check_certificate_limit,
    "gift_card_limit": check_gift_card_limit,
    "passenger_max_five": check_passenger_max,
    "baggage_add_only": check_baggage_add_only,
    "compensation_membership": check_compensation_membership,
}


@dataclass(frozen=True)
class PolicyRule:
    """One entry of a domain rule table."""
    rule_id: str
    tools: Tuple[str, ...]
    description: str = ""
    params: Dict[str, Any] = field(default_factory=dict)
    aliases: Tuple[str, ...] = ()

    def check(self, tool: str, args: Mapping[str, Any], entities: Entities,
              now: datetime) -> Optional[str]:
        """Return violation text when ``tool(args)`` breaks this rule, else None."""
        if tool not in self.tools:
            return None
        return RULE_CHECKS[self.rule_id](tool, args, entities, now, self.params)


class RuleTable:
    """Rule lookup by canonical id, alias or guarded tool."""

    def __init__(self, rules: Iterable[PolicyRule] = ()):
        self._rules: Dict[str, PolicyRule] = {}
        self._aliases: Dict[str, str] = {}
        for rule in rules:
            self.add(rule)

    def add(self, rule: PolicyRule):
        if rule.rule_id not in RULE_CHECKS:
            raise FixtureError(f"rule {rule.rule_id!r} has no check implementation")
        for name in (rule.rule_id,) + rule.aliases:
            if name in self._aliases:
                raise FixtureError(f"rule id or alias {name!r} declared twice")
            self._aliases[name] = rule.rule_id
        self._rules[rule.rule_id] = rule

    def resolve(self, rule_id: str) -> Optional[PolicyRule]:
        canonical = self._aliases.get(rule_id)
        return self._rules.get(canonical) if canonical else None

    def guarding(self, tool: str) -> List[PolicyRule]:
        return [r for r in self._rules.values() if tool in r.tools]

    @property
    def ids(self) -> List[str]:
        return sorted(self._rules)

    def __len__(self) -> int:
        return len(self._rules)

    def __iter__(self):
        return iter(self._rules[k] for k in self.ids)

    @classmethod
    def from_dict(cls, data: Mapping[str, Mapping[str, Any]]) -> "RuleTable":
        rules = []
        for rule_id, entry in data.items():
            rules.append(PolicyRule(
                rule_id=rule_id,
                tools=tuple(entry.get("tools", [])),
                description=entry.get("description", ""),
                params=dict(entry.get("params", {})),
                aliases=tuple(entry.get("aliases", [])),
            ))
        return cls(rules)
