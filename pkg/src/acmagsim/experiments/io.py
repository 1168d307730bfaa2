"""CSV tables and the JSON run manifest.

Numbers are written with 17 significant digits, so a file reproduces the
floats it was made from and two runs with equal inputs are byte-identical.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Sequence
import csv
import io
import json
import math

import numpy as np

from acmagsim.constants import CSV_SIGNIFICANT_DIGITS
from acmagsim.errors import InvalidParameterError, OutputError
from acmagsim.model.validator import ParameterValidator, Violation

MANIFEST_SCHEMA: Dict[str, type] = {
    "scenario": str,
    "seed": int,
    "tool": dict,
    "config": dict,
    "derived": dict,
    "files": list,
}

DERIVED_KEYS = ("alpha", "contrast", "delta_phi_limit", "eta_phi")


@dataclass
class Table:
    """One CSV file: a header and rows of numbers or labels."""
    name: str
    columns: List[str]
    rows: List[List[Any]] = field(default_factory=list)

    def add_row(self, *values: Any) -> None:
        if len(values) != len(self.columns):
            raise InvalidParameterError(
                f"table {self.name} has {len(self.columns)} columns, row has {len(values)}")
        self.rows.append(list(values))

    def column(self, name: str) -> np.ndarray:
        j = self.columns.index(name)
        return np.array([row[j] for row in self.rows], dtype=float)

    @property
    def filename(self) -> str:
        return f"{self.name}.csv"

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow([format_value(v) for v in row])
        return buffer.getvalue()


def format_value(value: Any) -> str:
    """17 significant digits for floats, plain text for everything else."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        return format(value, f".{CSV_SIGNIFICANT_DIGITS}g")
    return str(value)


def read_csv(text: str) -> List[Dict[str, str]]:
    return list(csv.DictReader(io.StringIO(text)))


def manifest_text(manifest: Dict[str, Any]) -> str:
    """Sorted-key, indented JSON with a trailing newline."""
    return json.dumps(json_ready(manifest), indent=2, sort_keys=True) + "\n"


def json_ready(value: Any) -> Any:
    """Replace numpy scalars and non-finite floats so json.dumps accepts the value."""
    if isinstance(value, dict):
        return {str(k): json_ready(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [json_ready(v) for v in value]
    if isinstance(value, np.ndarray):
        return [json_ready(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def validate_manifest(manifest: Dict[str, Any]) -> List[Violation]:
    """Structural check of a run manifest; an empty list means it is valid."""
    v = ParameterValidator()
    for key, expected in MANIFEST_SCHEMA.items():
        if key not in manifest:
            v.error(key, "missing")
        elif not isinstance(manifest[key], expected) or isinstance(manifest[key], bool):
            v.error(key, f"expected {expected.__name__}")
    if v.errors:
        return v.violations
    tool = manifest["tool"]
    v.check_rule("tool.name", tool.get("name") == "acmagsim", "must be 'acmagsim'")
    v.check_rule("tool.version", isinstance(tool.get("version"), str), "must be a string")
    v.check_rule("config.seed", manifest["config"].get("seed") == manifest["seed"],
                 "must equal the top-level seed")
    for key in DERIVED_KEYS:
        v.check_rule(f"derived.{key}", key in manifest["derived"], "missing")
    for i, entry in enumerate(manifest["files"]):
        ok = (isinstance(entry, dict) and isinstance(entry.get("path"), str)
              and isinstance(entry.get("rows"), int) and isinstance(entry.get("columns"), list))
        v.check_rule(f"files[{i}]", ok, "needs path, rows and columns")
    return v.violations


def write_outputs(tables: Sequence[Table], manifest: Dict[str, Any], out_dir) -> List[Path]:
    """Write every table and ``manifest.json`` under ``out_dir``.

    Raises:
        OutputError: If the directory cannot be created or written.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        paths = []
        for table in tables:
            path = out / table.filename
            path.write_text(table.to_csv(), encoding="utf-8", newline="")
            paths.append(path)
        path = out / "manifest.json"
        path.write_text(manifest_text(manifest), encoding="utf-8", newline="")
        paths.append(path)
    except OSError as exc:
        raise OutputError(f"cannot write outputs to {out}: {exc}") from exc
    return paths
