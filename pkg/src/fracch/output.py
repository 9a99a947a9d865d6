"""File emitters: CSV time series, VTK legacy fields, artifact manifest.

CSV values are written with 17 significant digits so a read back
round-trips bit-exactly.  Field snapshots use the VTK legacy ASCII
STRUCTURED_POINTS format, loadable by common visualization tools; node
order matches the grid's lexicographic enumeration (x fastest).
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .errors import ShapeError
from .grid import ScalarField
from .observables import TimeSeries


def _fmt(v: float) -> str:
    return f"{v:.16e}"


def emit_timeseries(series: list[TimeSeries], path: str | Path) -> Path:
    """Write one CSV with a shared time column and one column per series."""
    path = Path(path)
    if series:
        times = series[0].times
        for s in series[1:]:
            if s.times.shape != times.shape or not np.array_equal(
                    s.times, times):
                raise ShapeError("all series must share one time axis")
    lines = ["time," + ",".join(s.label for s in series)]
    if series:
        for i in range(series[0].times.size):
            lines.append(",".join(
                [_fmt(series[0].times[i])] + [_fmt(s.values[i])
                                              for s in series]))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    return path


def read_timeseries(path: str | Path) -> dict[str, TimeSeries]:
    """Parse a CSV written by emit_timeseries back into series."""
    lines = Path(path).read_text(encoding="utf-8").strip().split("\n")
    header = lines[0].split(",")
    data = np.array([[float(x) for x in ln.split(",")] for ln in lines[1:]])
    if data.size == 0:
        data = data.reshape(0, len(header))
    times = data[:, 0]
    return {name: TimeSeries(times, data[:, i], name)
            for i, name in enumerate(header) if i > 0}


def emit_field(field: ScalarField, path: str | Path,
               label: str = "phi") -> Path:
    """Write a nodal field as a VTK legacy ASCII STRUCTURED_POINTS file."""
    path = Path(path)
    g = field.grid
    dims = list(g.nodes_per_axis) + [1] * (3 - g.dim)
    origin = [lo for lo, _ in g.domain] + [0.0] * (3 - g.dim)
    spacing = list(g.spacing) + [1.0] * (3 - g.dim)
    lines = [
        "# vtk DataFile Version 3.0",
        f"fracch field {label}",
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        "DIMENSIONS " + " ".join(str(d) for d in dims),
        "ORIGIN " + " ".join(_fmt(v) for v in origin),
        "SPACING " + " ".join(_fmt(v) for v in spacing),
        f"POINT_DATA {g.n_nodes}",
        f"SCALARS {label} double 1",
        "LOOKUP_TABLE default",
    ]
    lines.extend(_fmt(v) for v in field.values)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    return path


def write_manifest(paths: list[Path], out_dir: str | Path) -> Path:
    """List every produced artifact with its SHA-256 content hash."""
    out_dir = Path(out_dir)
    entries = []
    for p in sorted(Path(p) for p in paths):
        digest = hashlib.sha256(p.read_bytes()).hexdigest()
        entries.append({"path": p.name, "sha256": digest})
    manifest = out_dir / "manifest.json"
    manifest.write_text(json.dumps({"artifacts": entries}, indent=2) + "\n",
                        encoding="utf-8")
    return manifest
