from system.config import GrpoConfig

from .errors import EmptyBatch, GrpoError, ZeroVariance
from .export import read_curve_csv, save_params, write_curve_csv, write_signal_jsonl
from .gradient import toy_policy_gradient
from .signal import (
    AdvantagedGroup, TokenBatch, advantage_group, batch_objective, clipped_surrogate,
    dynamic_filter, group_advantages, is_degenerate, multi_group_objective, zero_advantage_group,
)
from .train import LearningCurve, train_toy

__all__ = [
    'GrpoConfig',
    'GrpoError', 'ZeroVariance', 'EmptyBatch',
    'group_advantages', 'is_degenerate', 'advantage_group', 'zero_advantage_group',
    'dynamic_filter', 'clipped_surrogate', 'AdvantagedGroup', 'TokenBatch',
    'batch_objective', 'multi_group_objective', 'toy_policy_gradient',
    'LearningCurve', 'train_toy',
    'write_curve_csv', 'read_curve_csv', 'write_signal_jsonl', 'save_params',
]
