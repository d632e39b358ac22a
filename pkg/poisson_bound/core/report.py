"""
Description: Report assembly and writers. Reports are YAML documents whose first section
             echoes the inputs, so a report can be fed back to reproduce itself; curves and
             series breakdowns go to CSV.

Changelog:
- 2025-06-18: Initial creation.
"""

import csv
import math
import sys
from typing import Any, Dict, Iterable, List, Optional, Tuple

import numpy as np
import yaml


def to_plain(value: Any) -> Any:
    """numpy scalars/arrays, tuples and dataclass-like objects to YAML-safe builtins."""
    if isinstance(value, dict):
        return {str(k): to_plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_plain(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    if hasattr(value, "to_dict"):
        return to_plain(value.to_dict())
    return value


class Report:
    """Ordered report sections; no timestamps, so equal inputs give equal bytes."""

    def __init__(self, command: str, model_doc: Dict[str, Any], options: Dict[str, Any]):
        self.sections: Dict[str, Any] = {
            "command": command,
            "inputs": {"model": to_plain(model_doc), "options": to_plain(options)},
        }

    def add(self, key: str, value: Any):
        self.sections[key] = to_plain(value)

    def get(self, key: str, default=None):
        return self.sections.get(key, default)

    def to_dict(self) -> Dict[str, Any]:
        return self.sections

    def dump(self) -> str:
        return yaml.safe_dump(self.sections, sort_keys=False, allow_unicode=True,
                              default_flow_style=False)

    def write(self, out: Optional[str] = None):
        text = self.dump()
        if out:
            with open(out, "w", encoding="utf-8") as f:
                f.write(text)
        else:
            sys.stdout.write(text)


def extract_inputs(report: Dict[str, Any]) -> Tuple[str, Dict[str, Any], Dict[str, Any]]:
    """(command, model document, options) echoed by a report."""
    inputs = report.get("inputs") or {}
    return report.get("command"), dict(inputs.get("model") or {}), dict(inputs.get("options") or {})


def load_report(path: str) -> Dict[str, Any]:
    with open(path, "r", encoding="utf-8") as f:
        return yaml.safe_load(f)


def write_curve_csv(rows: Iterable[Dict[str, Any]], path: str, with_phase: bool):
    header = ["x", "phase", "bound", "estimate", "std_error"] if with_phase else \
        ["x", "bound", "estimate", "std_error"]
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for row in rows:
            writer.writerow([csv_cell(row.get(col)) for col in header])


def write_terms_csv(terms: List[Dict[str, Any]], path: str):
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["m", "weight", "integral", "contribution"])
        for t in terms:
            writer.writerow([csv_cell(t[col]) for col in ("m", "weight", "integral", "contribution")])


def csv_cell(value):
    """CSV text for one cell; numpy scalars become plain numbers."""
    if value is None:
        return ""
    value = to_plain(value)
    if isinstance(value, float):
        return repr(value)
    return value
