"""CSV/JSON persistence for grids, fields and masks."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .geometry import DomainSpec, Grid, ScalarField, build_grid
from .solver_p import Mask

FIELD_HEADER = ["i", "j", "x", "y", "value"]


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def write_field(path, field: ScalarField | Mask, sidecar: bool = True) -> list[Path]:
    """Write active nodes as ``i,j,x,y,value`` rows (``x, y`` the sample
    point); a ``.grid.json`` sidecar holds the grid metadata."""
    path = Path(path)
    g = field.grid
    vals = field.values.astype(float) if isinstance(field, Mask) else field.values
    ii, jj = np.nonzero(g.active)
    pts = g.sample_points[ii, jj]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FIELD_HEADER)
        for i, j, (x, y), v in zip(ii.tolist(), jj.tolist(), pts, vals[ii, jj]):
            w.writerow([i, j, _fmt(x), _fmt(y), _fmt(v)])
    out = [path]
    if sidecar:
        out.append(write_grid_json(path.with_suffix(".grid.json"), g))
    return out


def write_grid_json(path, grid: Grid) -> Path:
    path = Path(path)
    path.write_text(json.dumps(grid.metadata(), indent=2, sort_keys=True) + "\n")
    return path


def read_grid_json(path) -> Grid:
    """Rebuild the grid described by a sidecar and check it matches."""
    meta = json.loads(Path(path).read_text())
    g = build_grid(DomainSpec.from_dict(meta["domain"]), float(meta["spacing"]))
    if list(g.shape) != list(meta["shape"]) or not np.allclose(g.origin, meta["origin"]):
        raise ValueError("sidecar does not match the rebuilt grid")
    return g


def read_field(path, grid: Grid | None = None) -> ScalarField:
    """Read a field CSV; the grid comes from ``grid`` or the sidecar."""
    path = Path(path)
    if grid is None:
        grid = read_grid_json(path.with_suffix(".grid.json"))
    vals = np.full(grid.shape, np.nan)
    with path.open() as fh:
        r = csv.reader(fh)
        if next(r) != FIELD_HEADER:
            raise ValueError(f"{path}: expected header {','.join(FIELD_HEADER)}")
        for row in r:
            vals[int(row[0]), int(row[1])] = float(row[4])
    missing = grid.active & np.isnan(vals)
    if missing.any():
        raise ValueError(f"{path}: {int(missing.sum())} active nodes have no value")
    return ScalarField(grid, vals)


def write_table(path, header: list[str], rows) -> Path:
    """Plain CSV with a header row; floats written round-trip exact."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return path


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")
    return path


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")
