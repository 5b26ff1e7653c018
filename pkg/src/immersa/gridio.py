"""On-disk formats for immersions and paths.

GIF1 (text):   header "GIF1 n_u n_v d", then n_u*n_v lines of d decimals,
               row-major with u fastest.
GIB1 (binary): same header line, then little-endian float64 in the same order.
GPF1 (text):   header "GPF1 T n_u n_v d", then T+1 concatenated GIF1 bodies.
OBJ:           triangulated quad mesh with periodic closure (d = 3 only).

Floats print with 17 significant digits so text round-trips are exact.
"""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np

from .errors import FileFormatError, UnsupportedAmbientDim
from .geodesic import DiscretePath
from .paramgrid import GridImmersion, ParamGrid

FLOAT_FMT = "{:.17g}"


def _fmt_row(row) -> str:
    return " ".join(FLOAT_FMT.format(x) for x in row)


def _node_major(positions: np.ndarray) -> np.ndarray:
    """Rows ordered with u fastest: node (iu, iv) -> row iv * n_u + iu."""
    n_u, n_v, d = positions.shape
    return positions.transpose(1, 0, 2).reshape(n_u * n_v, d)


def _from_node_major(rows: np.ndarray, n_u: int, n_v: int, d: int) -> np.ndarray:
    return rows.reshape(n_v, n_u, d).transpose(1, 0, 2)


def write_gif1(f: GridImmersion, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"GIF1 {f.grid.n_u} {f.grid.n_v} {f.d}\n")
        for row in _node_major(f.positions):
            fh.write(_fmt_row(row) + "\n")


def read_gif1(path, stencil_order: int = 4, check: bool = True) -> GridImmersion:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 4 or header[0] != "GIF1":
            raise FileFormatError(f"{path}: not a GIF1 file")
        try:
            n_u, n_v, d = (int(x) for x in header[1:])
        except ValueError as exc:
            raise FileFormatError(f"{path}: bad GIF1 header") from exc
        body = fh.read().split()
    return _assemble(body, n_u, n_v, d, path, stencil_order, check)


def _assemble(tokens, n_u, n_v, d, path, stencil_order, check) -> GridImmersion:
    expect = n_u * n_v * d
    if len(tokens) != expect:
        raise FileFormatError(
            f"{path}: expected {expect} values, found {len(tokens)}"
        )
    try:
        rows = np.array([float(t) for t in tokens]).reshape(n_u * n_v, d)
    except ValueError as exc:
        raise FileFormatError(f"{path}: non-numeric value in body") from exc
    grid = ParamGrid(n_u, n_v, stencil_order=stencil_order)
    return GridImmersion(grid, d, _from_node_major(rows, n_u, n_v, d), check=check)


def write_gib1(f: GridImmersion, path) -> None:
    with open(path, "wb") as fh:
        fh.write(f"GIB1 {f.grid.n_u} {f.grid.n_v} {f.d}\n".encode("ascii"))
        fh.write(_node_major(f.positions).astype("<f8").tobytes())


def read_gib1(path, stencil_order: int = 4, check: bool = True) -> GridImmersion:
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii", errors="replace").split()
        if len(header) != 4 or header[0] != "GIB1":
            raise FileFormatError(f"{path}: not a GIB1 file")
        try:
            n_u, n_v, d = (int(x) for x in header[1:])
        except ValueError as exc:
            raise FileFormatError(f"{path}: bad GIB1 header") from exc
        raw = fh.read()
    expect = n_u * n_v * d * 8
    if len(raw) != expect:
        raise FileFormatError(f"{path}: expected {expect} payload bytes, got {len(raw)}")
    rows = np.frombuffer(raw, dtype="<f8").reshape(n_u * n_v, d)
    grid = ParamGrid(n_u, n_v, stencil_order=stencil_order)
    return GridImmersion(grid, d, _from_node_major(rows, n_u, n_v, d), check=check)


def write_gpf1(path_obj: DiscretePath, path) -> None:
    grid = path_obj.grid
    with open(path, "w") as fh:
        fh.write(f"GPF1 {path_obj.T} {grid.n_u} {grid.n_v} {path_obj.d}\n")
        for s in path_obj.slices:
            for row in _node_major(s.positions):
                fh.write(_fmt_row(row) + "\n")


def read_gpf1(path, stencil_order: int = 4, check: bool = True) -> DiscretePath:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 5 or header[0] != "GPF1":
            raise FileFormatError(f"{path}: not a GPF1 file")
        try:
            T, n_u, n_v, d = (int(x) for x in header[1:])
        except ValueError as exc:
            raise FileFormatError(f"{path}: bad GPF1 header") from exc
        tokens = fh.read().split()
    per_slice = n_u * n_v * d
    if len(tokens) != (T + 1) * per_slice:
        raise FileFormatError(
            f"{path}: expected {(T + 1) * per_slice} values, found {len(tokens)}"
        )
    slices = []
    for t in range(T + 1):
        chunk = tokens[t * per_slice : (t + 1) * per_slice]
        slices.append(_assemble(chunk, n_u, n_v, d, path, stencil_order, check))
    return DiscretePath(slices=tuple(slices))


def export_obj(f: GridImmersion, path) -> None:
    """Triangulated quad mesh with periodic closure; requires d = 3."""
    if f.d != 3:
        raise UnsupportedAmbientDim(f"OBJ export needs d = 3, got d = {f.d}")
    n_u, n_v = f.grid.n_u, f.grid.n_v
    buf = io.StringIO()
    for row in _node_major(f.positions):
        buf.write("v " + _fmt_row(row) + "\n")

    def vid(iu, iv):
        return (iv % n_v) * n_u + (iu % n_u) + 1

    for iv in range(n_v):
        for iu in range(n_u):
            a = vid(iu, iv)
            b = vid(iu + 1, iv)
            c = vid(iu + 1, iv + 1)
            e = vid(iu, iv + 1)
            buf.write(f"f {a} {b} {c}\n")
            buf.write(f"f {a} {c} {e}\n")
    Path(path).write_text(buf.getvalue())


def write_csv(path, header: list[str], rows: list[list]) -> None:
    """Minimal CSV writer with fixed 17-significant-digit float formatting."""
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            cells = [
                FLOAT_FMT.format(x) if isinstance(x, float) else str(x) for x in row
            ]
            fh.write(",".join(cells) + "\n")
