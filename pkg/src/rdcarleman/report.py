"""Shared result records: inequality-check reports and CSV/JSON writers."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence


@dataclass
class BoundReport:
    """Outcome of checking one inequality (or family) over a probe set.

    ``margin`` is the worst value of bound - measured; negative means a
    violation beyond ``tolerance``. Failures are recorded, never raised:
    callers decide whether a failed report is an error.
    """

    name: str
    ok: bool
    margin: float
    tolerance: float = 0.0
    precondition_ok: bool = True
    rows: List[Dict[str, Any]] = field(default_factory=list)
    notes: str = ""

    def summary_line(self) -> str:
        status = "PASS" if self.ok else "FAIL"
        extra = "" if self.precondition_ok else " (precondition not met, check skipped)"
        return f"[{status}] {self.name}: worst margin {self.margin:.3e}{extra}"


def combine_ok(reports: Iterable[BoundReport]) -> bool:
    return all(r.ok for r in reports)


def write_report_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)


def write_json(path: str | Path, payload: Dict[str, Any]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(obj: Any) -> Any:
    try:
        import numpy as np

        if isinstance(obj, (np.floating, np.integer)):
            return obj.item()
        if isinstance(obj, np.ndarray):
            return obj.tolist()
    except ImportError:  # pragma: no cover
        pass
    raise TypeError(f"not JSON serializable: {type(obj)!r}")


def format_summary(reports: Sequence[BoundReport], title: Optional[str] = None) -> str:
    lines = []
    if title:
        lines.append(title)
        lines.append("-" * len(title))
    for rep in reports:
        lines.append(rep.summary_line())
    n_fail = sum(1 for r in reports if not r.ok)
    lines.append(f"{len(reports)} checks, {n_fail} failed")
    return "\n".join(lines)
