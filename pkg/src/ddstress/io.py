"""CSV, legacy-VTK and JSON writers/readers.

File headers (exact):

* vector field CSV: ``x,y,fx,fy`` (one row per node)
* tensor field CSV: ``cx,cy,sxx,syy,sxy`` (one row per triangle)
* dataset CSV: ``sxx,syy,sxy`` (one row per state)
* solution CSV (``fields.csv``): ``cx,cy,sf_xx,sf_yy,sf_xy,st_xx,st_yy,st_xy,label,tie``
* sweep CSV (``sweep.csv``): ``level,h,value,residual``

Floats are written with ``repr`` so they round-trip exactly.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .core import InvalidArgument, StressDataset, SymTensorField, VectorField

VECTOR_HEADER = ["x", "y", "fx", "fy"]
TENSOR_HEADER = ["cx", "cy", "sxx", "syy", "sxy"]
DATASET_HEADER = ["sxx", "syy", "sxy"]
SOLUTION_HEADER = ["cx", "cy", "sf_xx", "sf_yy", "sf_xy", "st_xx", "st_yy", "st_xy", "label", "tie"]
SWEEP_HEADER = ["level", "h", "value", "residual"]


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(x) for x in row) + "\n")


def _read_rows(path, header):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            got = [h.strip() for h in next(reader)]
        except StopIteration:
            raise InvalidArgument(f"{path}: empty file") from None
        if got != header:
            raise InvalidArgument(f"{path}: expected header {','.join(header)}, got {','.join(got)}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise InvalidArgument(f"{path}:{lineno}: expected {len(header)} columns, got {len(row)}")
            try:
                rows.append([float(x) for x in row])
            except ValueError as exc:
                raise InvalidArgument(f"{path}:{lineno}: {exc}") from None
    return np.array(rows, dtype=float).reshape(-1, len(header))


def write_vector_csv(path, f: VectorField):
    _write_rows(path, VECTOR_HEADER, np.column_stack([f.mesh.nodes, f.values]).tolist())


def read_vector_csv(path, mesh, atol=1e-9) -> VectorField:
    data = _read_rows(path, VECTOR_HEADER)
    if data.shape[0] != mesh.n_nodes:
        raise InvalidArgument(f"{path}: {data.shape[0]} rows for a mesh with {mesh.n_nodes} nodes")
    if not np.allclose(data[:, :2], mesh.nodes, rtol=0.0, atol=atol * max(mesh.lx, mesh.ly)):
        raise InvalidArgument(f"{path}: node coordinates do not match the mesh")
    return VectorField(mesh, data[:, 2:])


def write_tensor_csv(path, s: SymTensorField):
    _write_rows(path, TENSOR_HEADER, np.column_stack([s.mesh.centroids, s.values]).tolist())


def read_tensor_csv(path, mesh, atol=1e-9) -> SymTensorField:
    data = _read_rows(path, TENSOR_HEADER)
    if data.shape[0] != mesh.n_triangles:
        raise InvalidArgument(f"{path}: {data.shape[0]} rows for a mesh with {mesh.n_triangles} triangles")
    if not np.allclose(data[:, :2], mesh.centroids, rtol=0.0, atol=atol * max(mesh.lx, mesh.ly)):
        raise InvalidArgument(f"{path}: centroids do not match the mesh")
    return SymTensorField(mesh, data[:, 2:])


def write_dataset_csv(path, dataset: StressDataset):
    _write_rows(path, DATASET_HEADER, dataset.states.tolist())


def read_dataset_csv(path) -> StressDataset:
    return StressDataset(_read_rows(path, DATASET_HEADER))


def write_solution_csv(path, solution):
    mesh = solution.s_f.mesh
    lab = solution.labeling
    rows = []
    for t in range(mesh.n_triangles):
        c = mesh.centroids[t]
        rows.append([c[0], c[1], *solution.s_f.values[t], *solution.s_tilde.values[t],
                     int(lab.labels[t]), bool(lab.ties[t])])
    _write_rows(path, SOLUTION_HEADER, rows)


def write_sweep_csv(path, history, residuals=None):
    residuals = residuals if residuals is not None else [0.0] * len(history)
    _write_rows(path, SWEEP_HEADER, [[i, h, v, r] for i, ((h, v), r) in enumerate(zip(history, residuals))])


def write_vtk(path, mesh, cell_data: dict, title="ddstress solution"):
    """Legacy ASCII unstructured grid of triangles with scalar cell arrays.

    Tensor fields are passed as three separate scalar arrays. Integer arrays are
    written with type ``int``, everything else as ``double``.
    """
    lines = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET UNSTRUCTURED_GRID",
             f"POINTS {mesh.n_nodes} double"]
    lines += [f"{_fmt(x)} {_fmt(y)} 0.0" for x, y in mesh.nodes]
    nt = mesh.n_triangles
    lines.append(f"CELLS {nt} {4 * nt}")
    lines += [f"3 {a} {b} {c}" for a, b, c in mesh.triangles]
    lines.append(f"CELL_TYPES {nt}")
    lines += ["5"] * nt
    lines.append(f"CELL_DATA {nt}")
    for name, values in cell_data.items():
        values = np.asarray(values)
        if values.shape != (nt,):
            raise InvalidArgument(f"cell array {name!r} has shape {values.shape}, expected ({nt},)")
        integral = values.dtype.kind in "biu"
        lines.append(f"SCALARS {name} {'int' if integral else 'double'} 1")
        lines.append("LOOKUP_TABLE default")
        lines += [str(int(v)) if integral else _fmt(v) for v in values]
    Path(path).write_text("\n".join(lines) + "\n")


def solution_cell_data(solution) -> dict:
    sf, st = solution.s_f.values, solution.s_tilde.values
    return {
        "s_f_xx": sf[:, 0], "s_f_yy": sf[:, 1], "s_f_xy": sf[:, 2],
        "s_tilde_xx": st[:, 0], "s_tilde_yy": st[:, 1], "s_tilde_xy": st[:, 2],
        "label": solution.labeling.labels.astype(np.int64),
        "tie": solution.labeling.ties.astype(np.int64),
    }


def read_vtk_cell_arrays(path) -> dict:
    """Parse the cell arrays written by :func:`write_vtk` (used by tests and demos)."""
    tokens = Path(path).read_text().split("\n")
    out, i = {}, 0
    n = None
    while i < len(tokens):
        line = tokens[i].split()
        if line and line[0] == "CELL_DATA":
            n = int(line[1])
        elif line and line[0] == "SCALARS":
            name, kind = line[1], line[2]
            vals = tokens[i + 2:i + 2 + n]
            out[name] = np.array([int(v) if kind == "int" else float(v) for v in vals])
            i += 1 + n
        i += 1
    return out


def dump_json(path, payload):
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
