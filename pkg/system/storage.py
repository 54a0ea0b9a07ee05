"""Append-only JSON Lines sink and helpers for canonical JSON files."""

import json
import threading
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, TextIO, Union

PathLike = Union[str, Path]


def canonical_json(payload: Any, indent: Optional[int] = None) -> str:
    """Serialize with sorted keys so identical values give identical text."""
    if indent is None:
        return json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return json.dumps(payload, sort_keys=True, indent=indent, ensure_ascii=False)


def write_json(path: PathLike, payload: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(canonical_json(payload, indent=2) + "\n", encoding="utf-8")
    return path


def read_json(path: PathLike) -> Any:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def read_jsonl(path: PathLike) -> Iterator[Dict[str, Any]]:
    """Yield one decoded object per non-blank line."""
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if line:
                yield json.loads(line)


class JsonlWriter:
    """Serialized append-only writer; safe to share between worker threads."""

    def __init__(self, path: PathLike, truncate: bool = False):
        self.path = Path(path)
        self.truncate = truncate
        self._lock = threading.Lock()
        self._handle: Optional[TextIO] = None
        self.count = 0

    def open(self):
        if self._handle is None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self._handle = open(self.path, "w" if self.truncate else "a", encoding="utf-8")

    def close(self):
        if self._handle is not None:
            self._handle.close()
            self._handle = None

    def write(self, record: Dict[str, Any]):
        """Append one record as a single canonical JSON line."""
        line = canonical_json(record)
        with self._lock:
            if self._handle is None:
                self.open()
            self._handle.write(line + "\n")
            self._handle.flush()
            self.count += 1

    def write_many(self, records: List[Dict[str, Any]]):
        for record in records:
            self.write(record)

    def __enter__(self):
        self.open()
        return self

    def __exit__(self, *args):
        self.close()
