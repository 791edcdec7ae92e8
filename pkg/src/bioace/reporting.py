"""Deterministic report emission.

``emit_report`` writes three files into an output directory:

* ``report.json``  -- the full nested results, canonical JSON (sorted keys,
  two-space indent, LF endings, UTF-8). Re-emitting identical results is
  byte-identical.
* ``summary.csv``  -- one row per system x metric from ``results["summary"]``.
* ``plotdata.csv`` -- long-format ``metric,k,system,value`` rows from
  ``results["curves"]`` (e.g. correctness at top-k), ready for external
  plotting.

Numbers in CSVs are rendered with 17 significant digits so re-parsing is
lossless; non-finite floats are sanitized to strings before serialization.
"""

from __future__ import annotations

import dataclasses
import json
import math
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import IoError


def sanitize(value):
    """Convert results into plain JSON-serializable structures."""
    if isinstance(value, Enum):
        return value.value
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        return sanitize(dataclasses.asdict(value))
    if isinstance(value, np.ndarray):
        return [sanitize(v) for v in value.tolist()]
    if isinstance(value, (np.floating, np.integer)):
        value = value.item()
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    if isinstance(value, dict):
        return {_key(k): sanitize(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [sanitize(v) for v in value]
    if isinstance(value, set):
        return sorted(sanitize(v) for v in value)
    return value


def _key(key) -> str:
    if isinstance(key, tuple):
        return "/".join(str(k) for k in key)
    if isinstance(key, Enum):
        return str(key.value)
    return str(key)


def format_number(value) -> str:
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def dumps_canonical(results) -> str:
    return json.dumps(
        sanitize(results),
        sort_keys=True,
        ensure_ascii=False,
        indent=2,
        allow_nan=False,
    )


def emit_report(results: dict, out_dir: str | Path) -> list[str]:
    """Write report.json, summary.csv, and plotdata.csv; returns the paths."""
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        clean = sanitize(results)

        report_path = out_dir / "report.json"
        report_path.write_text(dumps_canonical(clean) + "\n", encoding="utf-8", newline="\n")

        summary_path = out_dir / "summary.csv"
        with open(summary_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("system,metric,value\n")
            summary = clean.get("summary", {}) if isinstance(clean, dict) else {}
            for system_id in sorted(summary):
                metrics = summary[system_id]
                if not isinstance(metrics, dict):
                    continue
                for metric in sorted(metrics):
                    value = metrics[metric]
                    if isinstance(value, (dict, list)):
                        continue
                    fh.write(f"{system_id},{metric},{format_number(value)}\n")

        plot_path = out_dir / "plotdata.csv"
        with open(plot_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("metric,k,system,value\n")
            curves = clean.get("curves", {}) if isinstance(clean, dict) else {}
            for metric in sorted(curves):
                per_system = curves[metric]
                if not isinstance(per_system, dict):
                    continue
                for system_id in sorted(per_system):
                    points = per_system[system_id]
                    if not isinstance(points, dict):
                        continue
                    for k in sorted(points, key=lambda v: (len(str(v)), str(v))):
                        fh.write(
                            f"{metric},{k},{system_id},{format_number(points[k])}\n"
                        )
    except OSError as exc:
        raise IoError(f"could not write report files: {exc}") from exc
    return [str(report_path), str(summary_path), str(plot_path)]
