"""File input/output: atomic writes, tables, densities, voltage traces.

Output files are written atomically (temporary file in the target
directory, then rename) so partially written artifacts never appear
under their final names.
"""

from __future__ import annotations

import csv
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .grid import TimeGrid
from .interference import JointDensity


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".",
                               suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".",
                               suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path, obj) -> None:
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=False) + "\n")


def format_table_csv(header: list[str], rows) -> str:
    import io as _io
    buf = _io.StringIO()
    w = csv.writer(buf)
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt_cell(c) for c in row])
    return buf.getvalue()


def _fmt_cell(c):
    if isinstance(c, float):
        return repr(c)
    return c


def write_table(path_base, header: list[str], rows, fmt: str = "csv") -> Path:
    """Write a table as CSV or JSON records; returns the written path."""
    rows = [list(r) for r in rows]
    if fmt == "csv":
        path = Path(str(path_base) + ".csv")
        atomic_write_text(path, format_table_csv(header, rows))
    elif fmt == "json":
        path = Path(str(path_base) + ".json")
        write_json(path, [dict(zip(header, r)) for r in rows])
    else:
        raise ValueError(f"unknown table format {fmt!r}")
    return path


def read_voltage_trace(path):
    """Read a two-column voltage trace CSV with header (time_ns, volts).

    Raises:
        ValueError: on a missing header or malformed rows, with line
            numbers.
    """
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or len(header) < 2:
            raise ValueError(f"{path}: line 1: expected header 'time_ns,volts'")
        t, v = [], []
        for ln, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                t.append(float(row[0]))
                v.append(float(row[1]))
            except (ValueError, IndexError) as exc:
                raise ValueError(f"{path}: line {ln}: malformed row {row!r}") from exc
    return np.asarray(t), np.asarray(v)


def save_density(jd: JointDensity, path_base, fmt: str = "raw") -> list[Path]:
    """Export a joint density.

    fmt='raw': little-endian float64 matrices `<base>.p_cross.bin` and
    `<base>.p_same.bin` (row-major, t1 rows, t2 columns) plus a JSON
    sidecar `<base>.density.json` with grid metadata.
    fmt='csv': the same matrices as CSV files, one t1 row per line.
    """
    base = Path(path_base)
    meta = {
        "layout": "row-major, t1 rows, t2 columns",
        "dtype": "float64, little-endian" if fmt == "raw" else "csv",
        "units": "ns^-2",
        "t_start_ns": jd.grid.t_start,
        "dt_ns": jd.grid.dt,
        "n_points": jd.grid.n_points,
        "mode_overlap": jd.mode_overlap,
        "files": {},
    }
    written = []
    for name, mat in (("p_cross", jd.p_cross), ("p_same", jd.p_same)):
        if fmt == "raw":
            path = base.with_name(base.name + f".{name}.bin")
            atomic_write_bytes(path, mat.astype("<f8").tobytes())
        elif fmt == "csv":
            path = base.with_name(base.name + f".{name}.csv")
            buf = "\n".join(",".join(repr(float(x)) for x in row) for row in mat)
            atomic_write_text(path, buf + "\n")
        else:
            raise ValueError(f"unknown density format {fmt!r}")
        meta["files"][name] = path.name
        written.append(path)
    side = base.with_name(base.name + ".density.json")
    write_json(side, meta)
    written.append(side)
    return written


def load_density(sidecar_path) -> JointDensity:
    """Load a density written by save_density (either format)."""
    side = Path(sidecar_path)
    meta = json.loads(side.read_text())
    grid = TimeGrid(meta["t_start_ns"], meta["dt_ns"], meta["n_points"])
    mats = {}
    for name, fname in meta["files"].items():
        path = side.with_name(fname)
        if fname.endswith(".bin"):
            mat = np.frombuffer(path.read_bytes(), dtype="<f8").reshape(
                grid.n_points, grid.n_points)
        else:
            mat = np.loadtxt(path, delimiter=",").reshape(
                grid.n_points, grid.n_points)
        mats[name] = mat
    return JointDensity(grid=grid, p_cross=mats["p_cross"],
                        p_same=mats["p_same"],
                        mode_overlap=meta["mode_overlap"])
