"""CSV ingestion and result emission (JSON, DOT, CSV)."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .errors import IoError, ParseError
from .pipeline import ConnectivityEstimate, DiagnosticsReport, InterventionProfile, threshold_edges
from .scatter import MultiEnvDataset

ORIENTATION = "entry [i][j] is the edge from variable j to variable i"
FORMATS = ("json", "dot", "csv")


def _read_rows(path):
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    if not rows or not any(cell.strip() for cell in rows[0]):
        raise ParseError("missing header row", line=1)
    return [c.strip() for c in rows[0]], rows[1:]


def _parse_float(cell: str, line: int, column: str) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise ParseError(f"non-numeric value {cell!r} in column {column!r}", line=line) from None
    if not math.isfinite(value):
        raise ParseError(f"non-finite value {cell!r} in column {column!r}", line=line)
    return value


def _numeric_rows(header, rows, skip: int | None):
    names = [h for k, h in enumerate(header) if k != skip]
    if not names:
        raise ParseError("no variable columns", line=1)
    values, keys = [], []
    for offset, row in enumerate(rows):
        line = offset + 2
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} fields, found {len(row)}", line=line)
        values.append(
            [_parse_float(c, line, header[k]) for k, c in enumerate(row) if k != skip]
        )
        keys.append(row[skip].strip() if skip is not None else None)
    return names, keys, values


def ingest_csv(path, env_column: str = "env") -> MultiEnvDataset:
    """Read a CSV with an environment column and numeric variable columns.

    Environments keep the order in which their labels first appear.
    """
    header, rows = _read_rows(path)
    if env_column not in header:
        raise ParseError(f"header has no {env_column!r} column", line=1)
    names, keys, values = _numeric_rows(header, rows, header.index(env_column))
    groups: dict[str, list] = {}
    for key, vals in zip(keys, values):
        groups.setdefault(key, []).append(vals)
    if not groups:
        raise ParseError("no data rows", line=2)
    return MultiEnvDataset([(k, np.array(v)) for k, v in groups.items()], names)


def ingest_series(path, env_column: str = "env") -> tuple[np.ndarray, list[str]]:
    """Read a (T, p) series; an ``env`` column, if present, is ignored."""
    header, rows = _read_rows(path)
    skip = header.index(env_column) if env_column in header else None
    names, _, values = _numeric_rows(header, rows, skip)
    if not values:
        raise ParseError("no data rows", line=2)
    return np.array(values), names


def write_dataset_csv(dataset: MultiEnvDataset, path) -> None:
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["env", *dataset.variable_names])
            for label, data in dataset.environments:
                for row in data:
                    w.writerow([label, *(repr(float(v)) for v in row)])
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def _matrix_list(m) -> list[list[float]]:
    return [[float(v) for v in row] for row in np.asarray(m)]


def result_dict(
    estimate: ConnectivityEstimate,
    names: list[str],
    threshold: float,
    profile: InterventionProfile | None = None,
    diagnostics: DiagnosticsReport | None = None,
) -> dict:
    out = {
        "variables": list(names),
        "orientation": ORIENTATION,
        "B_hat": _matrix_list(estimate.B_hat),
        "converged": bool(estimate.converged),
        "empty": bool(estimate.empty),
        "assumptions_violated": bool(estimate.assumptions_violated),
        "identifiable_environment_count": bool(estimate.identifiable),
        "final_loss": float(estimate.final_loss),
        "iterations": estimate.diagonalizer.iterations if estimate.diagonalizer else 0,
        "warnings": list(estimate.warnings),
        "threshold": float(threshold),
        "edges": [
            {"source": names[e.source], "target": names[e.target], "weight": e.weight}
            for e in threshold_edges(estimate.B_hat, threshold)
        ],
    }
    if profile is not None:
        out["intervention_variances"] = {
            "baseline": str(profile.baseline),
            "environments": [str(lab) for lab in profile.labels],
            "delta": _matrix_list(profile.delta_variances),
            "absolute": _matrix_list(profile.absolute_variances),
        }
    if diagnostics is not None:
        out["diagnostics"] = [
            {
                "environment": str(lab),
                "pair": [names[v.pair[0]], names[v.pair[1]]],
                "magnitude": v.magnitude,
            }
            for lab, v in zip(diagnostics.labels, diagnostics.top_violation)
        ]
    return out


def _dot_id(name: str) -> str:
    return '"' + name.replace("\\", "\\\\").replace('"', '\\"') + '"'


def to_dot(B_hat, names: list[str], threshold: float) -> str:
    lines = ["digraph backshift {"]
    for name in names:
        lines.append(f"  {_dot_id(name)};")
    for e in threshold_edges(B_hat, threshold):
        lines.append(
            f'  {_dot_id(names[e.source])} -> {_dot_id(names[e.target])} [label="{e.weight:.4g}"];'
        )
    lines.append("}")
    return "\n".join(lines) + "\n"


def variances_csv(profile: InterventionProfile, names: list[str]) -> str:
    rows = [",".join(["env", *names])]
    for lab, vals in zip(profile.labels, profile.absolute_variances):
        rows.append(",".join([str(lab), *(repr(float(v)) for v in vals)]))
    return "\n".join(rows) + "\n"


def _write(path: Path, text: str) -> None:
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def emit_results(
    estimate: ConnectivityEstimate,
    profile: InterventionProfile | None,
    diagnostics: DiagnosticsReport | None,
    formats,
    output_dir,
    names: list[str],
    threshold: float = 0.25,
) -> list[Path]:
    """Write ``results.json``, ``graph.dot`` and/or ``intervention_variances.csv``."""
    out = Path(output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create {out}: {exc}") from exc
    written = []
    for fmt in formats:
        if fmt == "json":
            path = out / "results.json"
            data = result_dict(estimate, names, threshold, profile, diagnostics)
            _write(path, json.dumps(data, indent=2) + "\n")
        elif fmt == "dot":
            path = out / "graph.dot"
            _write(path, to_dot(estimate.B_hat, names, threshold))
        elif fmt == "csv":
            if profile is None:
                continue
            path = out / "intervention_variances.csv"
            _write(path, variances_csv(profile, names))
        else:
            raise ValueError(f"unknown format {fmt!r}")
        written.append(path)
    return written
