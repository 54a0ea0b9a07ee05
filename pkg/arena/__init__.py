from .types import (
    Role, Permission, Signal, Termination, EventKind, Visibility,
    ParamSpec, ToolSchema, AgentMessage, UserMessage, ToolCall, ControlSignal, Empty, EMPTY,
    Action, ToolResult, Event, InteractionMeta, EnvState, Observation, action_role,
)
from .errors import (
    FixtureError, UnknownDomainEntity, TerminalState, InvalidJointAction, BothActing,
    ToolExecutionError, UnknownTool, SchemaViolation, PermissionDenied, PolicyRejection,
    EntityNotFound, InsufficientFunds, InvalidRequest,
)
from .task import TaskSpec, load_task, load_tasks, save_task
from .rules import PolicyRule, RuleTable, RULE_CHECKS
from .domain import Domain, ToolRegistry, dangling_references
from .environment import Environment

__all__ = [
    'Role', 'Permission', 'Signal', 'Termination', 'EventKind', 'Visibility',
    'ParamSpec', 'ToolSchema', 'AgentMessage', 'UserMessage', 'ToolCall', 'ControlSignal',
    'Empty', 'EMPTY', 'Action', 'ToolResult', 'Event', 'InteractionMeta', 'EnvState',
    'Observation', 'action_role',
    'FixtureError', 'UnknownDomainEntity', 'TerminalState', 'InvalidJointAction', 'BothActing',
    'ToolExecutionError', 'UnknownTool', 'SchemaViolation', 'PermissionDenied',
    'PolicyRejection', 'EntityNotFound', 'InsufficientFunds', 'InvalidRequest',
    'TaskSpec', 'load_task', 'load_tasks', 'save_task',
    'PolicyRule', 'RuleTable', 'RULE_CHECKS',
    'Domain', 'ToolRegistry', 'dangling_references',
    'Environment',
]
