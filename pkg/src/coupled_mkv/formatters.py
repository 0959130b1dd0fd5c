"""
Output formatting.

Numbers are written in C-locale style with 17 significant digits and a '.'
decimal separator, so identical runs produce byte-identical files. The
``SummaryFormatter`` renders run summaries and dry-run plans at a chosen
verbosity.
"""

import csv
import json
import os
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np


class VerbosityLevel(str, Enum):
    """Verbosity levels for summary rendering."""

    MINIMAL = "minimal"
    STANDARD = "standard"
    VERBOSE = "verbose"


def format_number(value: Any) -> str:
    """17 significant digits for floats, plain text for everything else."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    """Write a CSV table with fixed number formatting and '\\n' line endings."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_number(v) for v in row])
    return path


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.floating, np.integer, np.bool_)):
        return value.item()
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, Path):
        return str(value)
    return value


def write_json(path: Path, data: Any) -> Path:
    """Write JSON with sorted keys for reproducible bytes."""
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n")
    return path


class SummaryFormatter:
    """
    Renders run summaries and dry-run plans.

    MINIMAL keeps headline numbers only, STANDARD adds the resolved
    parameters, VERBOSE adds everything recorded.
    """

    def __init__(self, verbosity: Optional[str] = None):
        """
        Initialize the formatter with the specified verbosity level.

        Args:
            verbosity: minimal|standard|verbose; defaults to MKV_VERBOSITY or standard.
        """
        if verbosity is None:
            verbosity = os.environ.get("MKV_VERBOSITY", "standard")
        try:
            self.verbosity = VerbosityLevel(verbosity.lower())
        except ValueError:
            self.verbosity = VerbosityLevel.STANDARD

    def format_summary(self, summary: Dict[str, Any]) -> str:
        """Render a run summary as JSON text."""
        data = _jsonable(summary)
        if self.verbosity == VerbosityLevel.MINIMAL:
            data = {k: v for k, v in data.items() if k in ("kind", "status", "headline")}
            return json.dumps(data, sort_keys=True)
        if self.verbosity == VerbosityLevel.STANDARD:
            data = {k: v for k, v in data.items() if k != "details"}
        return json.dumps(data, indent=2, sort_keys=True)

    def format_plan(self, plan: Dict[str, Any]) -> str:
        """Render a dry-run plan as plain text, one item per line."""
        lines: List[str] = [f"kind: {plan['kind']}", f"master seed: {plan['seed']}"]
        lines.append(f"output directory: {plan['output_dir']}")
        lines.append(f"workers: {plan['workers']}")
        lines.append(f"estimated memory: {plan['memory_bytes'] / 2**20:.1f} MiB")
        lines.append("schedule:")
        lines.extend(f"  - {item}" for item in plan["schedule"])
        lines.append("files:")
        lines.extend(f"  - {name}" for name in plan["files"])
        if self.verbosity == VerbosityLevel.VERBOSE:
            lines.append("resolved spec:")
            lines.append(json.dumps(_jsonable(plan["spec"]), indent=2, sort_keys=True))
        return "\n".join(lines)
