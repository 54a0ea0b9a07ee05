"""Learning-curve, training-signal and parameter files written by train-toy."""

import csv
from pathlib import Path
from typing import Iterable

from policy.toy import ToyPolicyParams
from system.logs import get_logger
from system.storage import JsonlWriter, PathLike

from .signal import TokenBatch
from .train import LearningCurve

logger = get_logger(__name__)

CURVE_COLUMNS = ("iteration", "mean_reward", "groups_retained")


def write_curve_csv(path: PathLike, curve: LearningCurve) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(handle, fieldnames=CURVE_COLUMNS)
        writer.writeheader()
        for point in curve.points:
            writer.writerow({k: point[k] for k in CURVE_COLUMNS})
    logger.info("wrote learning curve to %s (%d points)", path, len(curve.points))
    return path


def read_curve_csv(path: PathLike) -> LearningCurve:
    with open(path, "r", newline="", encoding="utf-8") as handle:
        points = [{"iteration": int(row["iteration"]), "mean_reward": float(row["mean_reward"]),
                   "groups_retained": int(row["groups_retained"])}
                  for row in csv.DictReader(handle)]
    return LearningCurve(points=points)


def write_signal_jsonl(path: PathLike, batches: Iterable[TokenBatch]) -> int:
    """One line per token: traj_id, turn, pos, old_logprob, advantage."""
    with JsonlWriter(path, truncate=True) as writer:
        for batch in batches:
            writer.write_many(batch.records())
        return writer.count


def save_params(path: PathLike, params: ToyPolicyParams) -> Path:
    params.save(path)
    logger.info("saved toy policy parameters to %s", path)
    return Path(path)
