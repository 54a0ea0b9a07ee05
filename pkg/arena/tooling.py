"""Shared plumbing for tool handler implementations."""

from dataclasses import dataclass
from datetime import datetime
from typing import Any, Callable, Dict, Mapping

from .errors import EntityNotFound
from .types import Role

Entities = Dict[str, Dict[str, Any]]


@dataclass
class ToolContext:
    """What a handler sees: the working entity map, the domain clock and the caller.

    Mutating handlers receive a private deep copy and edit it in place;
    read-only handlers receive the live map and must not touch it.
    """
    entities: Entities
    now: datetime
    caller: Role = Role.AGENT

    def require(self, entity_id: Any, kind: str) -> Dict[str, Any]:
        record = self.entities.get(entity_id) if isinstance(entity_id, str) else None
        if record is None or record.get("type") != kind:
            raise EntityNotFound(f"{kind} {entity_id!r} not found")
        return record

    def of_type(self, kind: str):
        for entity_id in sorted(self.entities):
            record = self.entities[entity_id]
            if record.get("type") == kind:
                yield entity_id, record


Handler = Callable[[ToolContext, Mapping[str, Any]], Any]
