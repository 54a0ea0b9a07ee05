from .errors import BenchError, KExceedsTrials
from .metrics import TaskTrials, TrialMatrix, metric_table, pass_at_k, pass_hat_k, task_pass_at, task_pass_hat
from .report import EvalReport
from .runner import run_benchmark, trial_seeds

__all__ = [
    'BenchError', 'KExceedsTrials',
    'TaskTrials', 'TrialMatrix', 'pass_hat_k', 'pass_at_k', 'task_pass_hat', 'task_pass_at',
    'metric_table', 'EvalReport', 'run_benchmark', 'trial_seeds',
]
