"""Supervised fine-tuning exports for either side of a dialogue."""

from typing import Any, Dict, Iterable, List, Mapping

import numpy as np

from arena.types import Role
from system.logs import get_logger
from system.storage import JsonlWriter, PathLike, read_jsonl

from .errors import EmptySelection
from .trajectory import Trajectory, TurnRecord

logger = get_logger(__name__)

FORMATS = ("chat", "text")


def _turn_messages(record: TurnRecord, side: Role) -> List[Dict[str, str]]:
    role = "assistant" if record.actor is side else "user"
    messages = [{"role": role, "content": record.raw_text}]
    if record.tool_result is not None:
        messages.append({"role": "tool", "content": record.tool_result.payload})
    return messages


def _flatten(messages: List[Dict[str, str]]) -> str:
    return "\n".join(f"{m['role']}: {m['content']}" for m in messages)


def export_sft(trajectories: Iterable[Trajectory], side: Role, fmt: str = "chat") -> List[Dict[str, Any]]:
    """One record per turn authored by ``side``.

    Each record pairs the dialogue before turn t (from ``side``'s point of
    view: its own turns as ``assistant``, the other party as ``user``, tool
    results as ``tool``) with the raw text of turn t as target. User tool
    calls are targets too.

    Args:
        trajectories: Source episodes
        side: ``agent`` or ``user``
        fmt: ``chat`` (message list) or ``text`` (flattened prompt)

    Raises:
        EmptySelection: no turn qualifies
        ValueError: unknown format
    """
    side = Role(side)
    if fmt not in FORMATS:
        raise ValueError(f"unknown SFT format {fmt!r}")
    records = []
    for trajectory in trajectories:
        context: List[Dict[str, str]] = []
        for record in trajectory.turns:
            if record.actor is side:
                prompt = [dict(m) for m in context]
                entry = {
                    "task_id": trajectory.task_id,
                    "seed": trajectory.seed,
                    "turn": record.turn,
                    "side": side.value,
                    "target": record.raw_text,
                }
                if fmt == "chat":
                    entry["messages"] = prompt
                else:
                    entry["prompt"] = _flatten(prompt)
                records.append(entry)
            context.extend(_turn_messages(record, side))
    if not records:
        raise EmptySelection(f"no {side.value} turns to export")
    return records


def write_sft(path: PathLike, records: Iterable[Mapping[str, Any]]) -> int:
    with JsonlWriter(path, truncate=True) as writer:
        for record in records:
            writer.write(dict(record))
        return writer.count


def concat_sft(sources: Mapping[str, PathLike], path: PathLike, seed: int = 0) -> int:
    """Merge per-domain SFT files into one shuffled file.

    Args:
        sources: Domain name to SFT JSONL path
        path: Output file
        seed: Shuffle seed

    Returns:
        Number of records written
    """
    merged = []
    for domain in sorted(sources):
        for record in read_jsonl(sources[domain]):
            record["domain"] = domain
            merged.append(record)
    if not merged:
        raise EmptySelection("no records to concatenate")
    order = np.random.default_rng(seed).permutation(len(merged))
    count = write_sft(path, (merged[i] for i in order))
    logger.info("concatenated %d records from %d domains into %s", count, len(sources), path)
    return count
