from .errors import RolloutError, EmptySelection
from .trajectory import TurnRecord, Trajectory, Group
from .engine import run_episode, sample_group
from .store import TrajectoryWriter, save_trajectories, load_trajectories
from .sft import export_sft, write_sft, concat_sft

__all__ = [
    'RolloutError', 'EmptySelection',
    'TurnRecord', 'Trajectory', 'Group',
    'run_episode', 'sample_group',
    'TrajectoryWriter', 'save_trajectories', 'load_trajectories',
    'export_sft', 'write_sft', 'concat_sft',
]
