"""Trajectory JSONL store."""

from typing import Iterable, List

from system.storage import JsonlWriter, PathLike, read_jsonl

from .trajectory import Trajectory


class TrajectoryWriter(JsonlWriter):
    """Append-only trajectory sink, one trajectory per line."""

    def write_trajectory(self, trajectory: Trajectory):
        self.write(trajectory.to_dict())

    def write_trajectories(self, trajectories: Iterable[Trajectory]):
        for trajectory in trajectories:
            self.write_trajectory(trajectory)


def save_trajectories(path: PathLike, trajectories: Iterable[Trajectory]) -> int:
    with TrajectoryWriter(path, truncate=True) as writer:
        writer.write_trajectories(trajectories)
        return writer.count


def load_trajectories(path: PathLike) -> List[Trajectory]:
    return [Trajectory.from_dict(record) for record in read_jsonl(path)]
