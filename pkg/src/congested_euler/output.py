"""Frame and manifest serialization.

CSV frames carry one row per cell center (x varying fastest) with 17
significant digits so that float64 values survive a round trip.  VTK frames
use the legacy structured-points ASCII layout with one scalar array per state
field; cell centers are encoded as the point lattice.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np

from .grid import Grid, GridState

_FMT = "%.17g"


def _field_names(grid: Grid) -> list[str]:
    if grid.ndim == 1:
        return ["rho", "q1", "Z", "rho_star"]
    return ["rho", "q1", "q2", "Z", "rho_star"]


def _columns(state: GridState, grid: Grid):
    names = _field_names(grid)
    cols = [getattr(state, n).reshape(-1) for n in names]
    if grid.ndim == 1:
        coords = [grid.centers_x]
        header = ["x"]
    else:
        xx, yy = grid.cell_centers()
        coords = [xx.reshape(-1), yy.reshape(-1)]
        header = ["x", "y"]
    return header + names, coords + cols


def _write_csv(state: GridState, grid: Grid, path) -> None:
    header, cols = _columns(state, grid)
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in zip(*cols):
            fh.write(",".join(_FMT % v for v in row) + "\n")


def _write_vtk(state: GridState, grid: Grid, path) -> None:
    nx = grid.nx
    ny = grid.ny if grid.ndim == 2 else 1
    dy = grid.dy if grid.ndim == 2 else 1.0
    oy = grid.dy / 2 if grid.ndim == 2 else 0.0
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(_FMT % state.time + "\n")
        fh.write("ASCII\n")
        fh.write("DATASET STRUCTURED_POINTS\n")
        fh.write(f"DIMENSIONS {nx} {ny} 1\n")
        fh.write(f"ORIGIN {_FMT % (grid.dx / 2)} {_FMT % oy} 0\n")
        fh.write(f"SPACING {_FMT % grid.dx} {_FMT % dy} 1\n")
        fh.write(f"POINT_DATA {grid.size}\n")
        for name in _field_names(grid):
            fh.write(f"SCALARS {name} double 1\n")
            fh.write("LOOKUP_TABLE default\n")
            for v in getattr(state, name).reshape(-1):
                fh.write(_FMT % v + "\n")


def write_frame(state: GridState, grid: Grid, path, fmt: str = "csv") -> None:
    if fmt == "csv":
        _write_csv(state, grid, path)
    elif fmt == "vtk":
        _write_vtk(state, grid, path)
    else:
        raise ValueError(f"unknown frame format {fmt!r}")


def write_frames(result, outdir, fmt: str = "csv") -> list[dict]:
    """Write every recorded frame of a scenario result as frame_NNNNNN files.

    Returns manifest entries pairing each file name with its solution time.
    """
    entries = []
    for k, (t, state) in enumerate(result.frames):
        name = f"frame_{k:06d}.{fmt}"
        write_frame(state, result.grid, Path(outdir) / name, fmt)
        entries.append({"file": name, "time": t})
    return entries


def read_frame(path) -> dict[str, np.ndarray]:
    """Read a CSV frame back into per-field arrays shaped like the grid."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    cols = {name: data[:, k] for k, name in enumerate(header)}
    if "y" not in cols:
        return cols
    nx = int(np.argmax(cols["x"][1:] < cols["x"][:-1])) + 1
    ny = data.shape[0] // nx
    shaped = {name: col.reshape(ny, nx) for name, col in cols.items()}
    shaped["x"] = shaped["x"][0]
    shaped["y"] = shaped["y"][:, 0]
    return shaped


def write_manifest(path, payload: dict) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)
