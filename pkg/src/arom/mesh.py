"""Cartesian meshes and conservative/primitive state storage.

States are stored cell-major: ``values[cell, var]`` with the ``c = dim + 2``
conservative variables ``(rho, rho*u_1, .., rho*u_d, rho*E)`` of one cell
contiguous.  The flat HDM vector is ``values.reshape(-1)`` (a view).
2-D cells are numbered ``cell = ix * ny + iy``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .errors import PositivityError


@dataclass(frozen=True)
class Mesh:
    extents: tuple[tuple[float, float], ...]
    cells: tuple[int, ...]

    def __post_init__(self):
        if len(self.extents) != len(self.cells) or len(self.cells) not in (1, 2):
            raise ValueError("mesh must be 1-D or 2-D with one extent per axis")
        for (lo, hi), n in zip(self.extents, self.cells):
            if n < 1:
                raise ValueError("cells per axis must be positive")
            if not hi > lo:
                raise ValueError("each extent must satisfy hi > lo")

    @property
    def dim(self) -> int:
        return len(self.cells)

    @property
    def n_vars(self) -> int:
        return self.dim + 2

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.cells))

    @property
    def n_dof(self) -> int:
        return self.n_cells * self.n_vars

    @property
    def widths(self) -> tuple[float, ...]:
        return tuple((hi - lo) / n for (lo, hi), n in zip(self.extents, self.cells))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.widths))

    @property
    def shape(self) -> tuple[int, int]:
        """Cells as ``(nx, ny)``; ``ny = 1`` in 1-D."""
        return (self.cells[0], self.cells[1] if self.dim == 2 else 1)

    def centers(self) -> list[np.ndarray]:
        """Cell-centre coordinates per axis, each of length ``n_cells``."""
        axes = [lo + (np.arange(n) + 0.5) * h for (lo, _), n, h in zip(self.extents, self.cells, self.widths)]
        if self.dim == 1:
            return axes
        X, Y = np.meshgrid(axes[0], axes[1], indexing="ij")
        return [X.reshape(-1), Y.reshape(-1)]

    def unravel(self, cells) -> tuple[np.ndarray, np.ndarray]:
        cells = np.asarray(cells, dtype=np.int64)
        ny = self.shape[1]
        return cells // ny, cells % ny

    def ravel(self, ix, iy=0) -> np.ndarray:
        return np.asarray(ix, dtype=np.int64) * self.shape[1] + np.asarray(iy, dtype=np.int64)

    def flat_index(self, cell: int, var: int) -> int:
        if not (0 <= cell < self.n_cells) or not (0 <= var < self.n_vars):
            raise IndexError(f"(cell={cell}, var={var}) out of range")
        return cell * self.n_vars + var

    def cell_var(self, index: int) -> tuple[int, int]:
        if not 0 <= index < self.n_dof:
            raise IndexError(f"flat index {index} out of range")
        return divmod(index, self.n_vars)

    def dof_rows(self, cells) -> np.ndarray:
        """Flat-vector rows owned by ``cells`` (cell-major)."""
        cells = np.asarray(cells, dtype=np.int64)
        c = self.n_vars
        return (cells[:, None] * c + np.arange(c)).reshape(-1)


@dataclass
class PrimitiveState:
    rho: np.ndarray
    u: np.ndarray  # (n_cells, dim)
    p: np.ndarray


@dataclass
class State:
    mesh: Mesh
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        shape = (self.mesh.n_cells, self.mesh.n_vars)
        if self.values.shape != shape:
            raise ValueError(f"values must have shape {shape}, got {self.values.shape}")

    @property
    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)

    def copy(self) -> State:
        return State(self.mesh, self.values.copy(), self.time)


def conservative_to_primitive(values: np.ndarray, gamma: float) -> PrimitiveState:
    """``P = (gamma - 1)(rho E - rho |u|^2 / 2)``; raises on non-positive rho or P."""
    values = np.atleast_2d(np.asarray(values, dtype=np.float64))
    rho = values[:, 0]
    bad = np.flatnonzero(~(rho > 0.0))
    if bad.size:
        raise PositivityError(bad[0], "density")
    u = values[:, 1:-1] / rho[:, None]
    p = (gamma - 1.0) * (values[:, -1] - 0.5 * rho * np.sum(u * u, axis=1))
    bad = np.flatnonzero(~(p > 0.0))
    if bad.size:
        raise PositivityError(bad[0], "pressure")
    return PrimitiveState(rho, u, p)


def primitive_to_conservative(rho, u, p, gamma: float) -> np.ndarray:
    rho = np.atleast_1d(np.asarray(rho, dtype=np.float64))
    u = np.asarray(u, dtype=np.float64).reshape(rho.shape[0], -1)
    p = np.atleast_1d(np.asarray(p, dtype=np.float64))
    out = np.empty((rho.shape[0], u.shape[1] + 2))
    out[:, 0] = rho
    out[:, 1:-1] = rho[:, None] * u
    out[:, -1] = p / (gamma - 1.0) + 0.5 * rho * np.sum(u * u, axis=1)
    return out


def admissible(values: np.ndarray, gamma: float) -> np.ndarray:
    """Per-cell mask of ``rho > 0`` and ``P > 0``."""
    return kernels.admissible(np.ascontiguousarray(values, dtype=np.float64), float(gamma))


# ---------------------------------------------------------------------------
# snapshot dumps

_MAGIC = b"AROMSNP1"
_HEADER = struct.Struct("<8siiiid")


def write_snapshot(path, mesh: Mesh, values: np.ndarray, time: float) -> None:
    """Binary dump: header (magic, dim, nx, ny, c, time) then row-major float64."""
    nx, ny = mesh.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, mesh.dim, nx, ny, mesh.n_vars, float(time)))
        fh.write(np.ascontiguousarray(values, dtype="<f8").tobytes())


def read_snapshot(path) -> tuple[dict, np.ndarray]:
    data = Path(path).read_bytes()
    magic, dim, nx, ny, c, time = _HEADER.unpack_from(data)
    if magic != _MAGIC:
        raise ValueError(f"{path}: not a snapshot dump")
    values = np.frombuffer(data, dtype="<f8", offset=_HEADER.size).reshape(nx * ny, c).copy()
    return {"dim": dim, "cells": (nx, ny)[:dim], "n_vars": c, "time": time}, values


@dataclass
class SnapshotWriter:
    """Writes ``snap_<step>.bin`` files plus a ``snapshots.txt`` index."""

    directory: Path
    mesh: Mesh
    stride: int = 1
    entries: list[tuple[int, float, str]] = field(default_factory=list)

    def __post_init__(self):
        self.directory = Path(self.directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def __call__(self, step: int, values: np.ndarray, time: float) -> None:
        if self.stride <= 0 or step % self.stride:
            return
        name = f"snap_{step:06d}.bin"
        write_snapshot(self.directory / name, self.mesh, values, time)
        self.entries.append((step, time, name))
        with open(self.directory / "snapshots.txt", "w") as fh:
            fh.write("# step time file\n")
            for k, t, n in self.entries:
                fh.write(f"{k} {t:.17g} {n}\n")
