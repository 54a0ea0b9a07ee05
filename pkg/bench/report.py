"""Evaluation report: JSON record plus a one-row-per-label text table."""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from system.storage import PathLike, canonical_json, write_json

from .metrics import TrialMatrix, metric_table


@dataclass
class EvalReport:
    label: str
    ks: List[int]
    estimator: str
    metrics: Dict[str, float]
    domains: Dict[str, Dict[str, float]] = field(default_factory=dict)
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        values = list(self.metrics.values()) + [v for d in self.domains.values() for v in d.values()]
        bad = [v for v in values if not 0.0 <= v <= 1.0]
        if bad:
            raise ValueError(f"metric values outside [0, 1]: {bad}")

    @classmethod
    def from_matrix(cls, matrix: TrialMatrix, ks: Sequence[int], label: str,
                    estimator: str = "unbiased", metadata: Optional[Dict[str, Any]] = None) -> "EvalReport":
        ks = sorted(set(ks))
        domains = {name: metric_table(sub, ks, estimator) for name, sub in matrix.by_domain().items()}
        return cls(label=label, ks=ks, estimator=estimator, metrics=metric_table(matrix, ks, estimator),
                   domains=domains, metadata=dict(metadata or {}))

    @property
    def columns(self) -> List[str]:
        return [f"p^{k}" for k in self.ks] + [f"p@{self.ks[-1]}"]

    def to_dict(self) -> Dict[str, Any]:
        return {"label": self.label, "ks": self.ks, "estimator": self.estimator,
                "metrics": self.metrics, "domains": self.domains, "metadata": self.metadata}

    def to_json(self) -> str:
        return canonical_json(self.to_dict())

    def _row(self, label: str, metrics: Dict[str, float]) -> List[str]:
        return [label] + [f"{100 * metrics[c]:.1f}" for c in self.columns]

    def table(self) -> str:
        """Plain-text table, values in percent."""
        rows = [["label"] + self.columns, self._row(self.label, self.metrics)]
        if len(self.domains) > 1:
            rows += [self._row(f"  {name}", values) for name, values in sorted(self.domains.items())]
        widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
        lines = [" | ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in rows]
        lines.insert(1, "-+-".join("-" * w for w in widths))
        return "\n".join(lines) + "\n"

    def save(self, directory: PathLike) -> Path:
        directory = Path(directory)
        write_json(directory / "report.json", self.to_dict())
        (directory / "report.txt").write_text(self.table(), encoding="utf-8")
        return directory
