"""Dataset archive: instances, checkers, dialogues, audit log and prompt lineage."""

from pathlib import Path
from typing import Any, Dict, List, Sequence

from arena.task import TaskSpec
from system.logs import get_logger
from system.storage import JsonlWriter, PathLike, read_json, write_json

from .instance import SynthesisInstance

logger = get_logger(__name__)


def write_archive(directory: PathLike, manifest: Dict[str, Any], instances: Sequence[SynthesisInstance],
                  audit: Sequence[Dict[str, Any]], prompt_sets: Sequence[Any]) -> Path:
    """Write the archive layout.

    ``manifest.json``, ``instances/<id>.json``, ``checkers/<id>.json``,
    ``dialogues.jsonl``, ``audit.jsonl`` and ``prompt_sets/<set>_v<version>.json``.
    Files are canonical JSON so identical runs give identical bytes.
    """
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    for instance in instances:
        write_json(root / "instances" / f"{instance.instance_id}.json", instance.to_dict())
        write_json(root / "checkers" / f"{instance.instance_id}.json", instance.checker.to_dict())
    with JsonlWriter(root / "dialogues.jsonl", truncate=True) as writer:
        for instance in instances:
            writer.write(dict(instance.trajectory.to_dict(), instance_id=instance.instance_id))
    with JsonlWriter(root / "audit.jsonl", truncate=True) as writer:
        writer.write_many(list(audit))
    for prompt_set in prompt_sets:
        prompt_set.save(root / "prompt_sets")
    write_json(root / "manifest.json", manifest)
    logger.info("wrote synthesis archive to %s (%d instances)", root, len(instances))
    return root


def load_archive_tasks(directory: PathLike) -> List[TaskSpec]:
    """Tasks of an archive, each carrying its own checker spec."""
    manifest = read_json(Path(directory) / "manifest.json")
    tasks = []
    for instance_id in manifest["instances"]:
        data = read_json(Path(directory) / "instances" / f"{instance_id}.json")
        tasks.append(TaskSpec.from_dict(data["task"]))
    return tasks
