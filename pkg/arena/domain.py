"""Domain fixtures: tool registry, entity database, rule table and handlers."""

import copy
import json
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Tuple

from system.logs import get_logger

from . import airline, toy
from .errors import FixtureError, UnknownTool
from .rules import PolicyRule, RuleTable, parse_time
from .tooling import Handler
from .types import Role, ToolSchema

logger = get_logger(__name__)

HANDLER_SETS: Dict[str, Dict[str, Handler]] = {
    "airline": airline.HANDLERS,
    "toy": toy.HANDLERS,
}


class ToolRegistry:
    """Tool schemas by unique name."""

    def __init__(self, schemas: Iterable[ToolSchema] = ()):
        self._schemas: Dict[str, ToolSchema] = {}
        for schema in schemas:
            if schema.name in self._schemas:
                raise FixtureError(f"tool {schema.name!r} registered twice")
            self._schemas[schema.name] = schema

    def get(self, name: str) -> ToolSchema:
        try:
            return self._schemas[name]
        except KeyError:
            raise UnknownTool(f"unknown tool {name!r}") from None

    def __contains__(self, name: str) -> bool:
        return name in self._schemas

    def __iter__(self):
        return iter(self._schemas.values())

    def __len__(self) -> int:
        return len(self._schemas)

    @property
    def names(self) -> List[str]:
        return list(self._schemas)

    def mutating_names(self) -> List[str]:
        return [s.name for s in self._schemas.values() if s.mutating]

    def for_role(self, role: Role, dual_control: bool) -> Tuple[ToolSchema, ...]:
        """Schemas the role may call."""
        if role is Role.USER and not dual_control:
            return ()
        return tuple(s for s in self._schemas.values() if s.permission.allows(role))


def dangling_references(entities: Mapping[str, Mapping[str, Any]],
                        references: Mapping[str, List[str]]) -> List[str]:
    """List ``entity.field -> target`` references that do not resolve.

    Args:
        entities: Entity map
        references: Per entity type, the referencing field paths; ``a.b`` descends
            into lists of objects

    Returns:
        Sorted descriptions of unresolved references
    """
    missing = []
    for entity_id in sorted(entities):
        record = entities[entity_id]
        for path in references.get(record.get("type", ""), []):
            for target in _collect(record, path.split(".")):
                if target not in entities:
                    missing.append(f"{entity_id}.{path} -> {target}")
    return missing


def _collect(value: Any, parts: List[str]) -> List[Any]:
    if not parts:
        if isinstance(value, list):
            return [v for v in value if isinstance(v, str)]
        return [value] if isinstance(value, str) else []
    if isinstance(value, list):
        return [t for item in value for t in _collect(item, parts)]
    if isinstance(value, Mapping) and parts[0] in value:
        return _collect(value[parts[0]], parts[1:])
    return []


class Domain:
    """A loaded domain fixture."""

    def __init__(self, name: str, tools: Iterable[ToolSchema],
                 entities: Dict[str, Dict[str, Any]], rules: RuleTable,
                 handlers: Mapping[str, Handler], policy_text: str = "",
                 now: str = "2024-05-15T15:00:00", dual_control: bool = False,
                 transfer_tool: Optional[str] = None,
                 references: Optional[Mapping[str, List[str]]] = None):
        self.name = name
        self.registry = ToolRegistry(tools)
        self.entities = entities
        self.rules = rules
        self.handlers = dict(handlers)
        self.policy_text = policy_text
        self.now_text = now
        self.now: datetime = parse_time(now)
        self.dual_control = dual_control
        self.transfer_tool = transfer_tool
        self.references = dict(references or {})

        missing = [n for n in self.registry.names if n not in self.handlers]
        if missing:
            raise FixtureError(f"tools without handlers: {missing}")
        for rule in self.rules:
            unknown = [t for t in rule.tools if t not in self.registry]
            if unknown:
                raise FixtureError(f"rule {rule.rule_id} guards unknown tools {unknown}")
        dangling = dangling_references(self.entities, self.references)
        if dangling:
            raise FixtureError(f"fixture has dangling references: {dangling[:5]}")

    def fresh_entities(self) -> Dict[str, Dict[str, Any]]:
        return copy.deepcopy(self.entities)

    def resolve_rule(self, rule_id: str) -> Optional[PolicyRule]:
        return self.rules.resolve(rule_id)

    def entities_of_type(self, kind: str) -> Dict[str, Dict[str, Any]]:
        return {k: v for k, v in sorted(self.entities.items()) if v.get("type") == kind}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Domain":
        for section in ("name", "tools", "entities"):
            if section not in data:
                raise FixtureError(f"domain fixture lacks section {section!r}")
        handler_set = data.get("handlers", data["name"])
        if handler_set not in HANDLER_SETS:
            raise FixtureError(f"no handler set named {handler_set!r}")
        return cls(
            name=data["name"],
            tools=[ToolSchema.from_dict(t) for t in data["tools"]],
            entities=copy.deepcopy(dict(data["entities"])),
            rules=RuleTable.from_dict(data.get("policy_rules", {})),
            handlers=HANDLER_SETS[handler_set],
            policy_text=data.get("policy", ""),
            now=data.get("now", "2024-05-15T15:00:00"),
            dual_control=bool(data.get("dual_control", False)),
            transfer_tool=data.get("transfer_tool"),
            references=data.get("references", {}),
        )

    @classmethod
    def load(cls, path) -> "Domain":
        """Load a domain fixture JSON file.

        Args:
            path: Fixture file with sections {tools, entities, policy_rules}

        Returns:
            Validated Domain
        """
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise FixtureError(f"could not read domain fixture {path}: {e}") from e
        domain = cls.from_dict(data)
        logger.debug("loaded domain %s: %d tools, %d entities, %d rules",
                     domain.name, len(domain.registry), len(domain.entities), len(domain.rules))
        return domain
