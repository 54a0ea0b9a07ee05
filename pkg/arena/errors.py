"""Environment error types."""

from typing import Optional

from system.errors import TandemError


class FixtureError(TandemError):
    """A domain fixture or task file is malformed."""


class UnknownDomainEntity(TandemError):
    """A task references an entity the domain fixture does not hold."""

    def __init__(self, entity_id: str):
        super().__init__(f"unknown domain entity: {entity_id}")
        self.entity_id = entity_id


class TerminalState(TandemError):
    """The state is terminal and accepts no further transitions."""


class InvalidJointAction(TandemError):
    """A joint action does not have exactly one acting party."""


class BothActing(InvalidJointAction):
    """Both parties acted in the same turn."""


class ToolExecutionError(TandemError):
    """Base class for failures raised while executing a tool call."""

    code = "tool_error"

    def __init__(self, message: str, rule_id: Optional[str] = None):
        super().__init__(message)
        self.message = message
        self.rule_id = rule_id


class UnknownTool(ToolExecutionError):
    code = "unknown_tool"


class SchemaViolation(ToolExecutionError):
    code = "schema_violation"


class PermissionDenied(ToolExecutionError):
    code = "permission_denied"


class PolicyRejection(ToolExecutionError):
    """A domain rule blocks the mutation."""

    code = "policy_rejection"

    def __init__(self, rule_id: str, message: str = ""):
        super().__init__(message or f"blocked by rule {rule_id}", rule_id=rule_id)


class EntityNotFound(ToolExecutionError):
    code = "entity_not_found"


class InsufficientFunds(ToolExecutionError):
    code = "insufficient_funds"


class InvalidRequest(ToolExecutionError):
    code = "invalid_request"
