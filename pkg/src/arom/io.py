"""Run outputs: per-step metrics CSV, summary JSON, sampling masks, density profiles."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .driver import RunMetrics, StepRecord
from .mesh import Mesh

METRIC_COLUMNS = ("k", "kind", "n_gamma", "n_p", "J", "e_k", "wall_ms")


def write_metrics_csv(path, records: list[StepRecord], errors=None) -> None:
    """One row per time step ``k = 1..N_t``."""
    if errors is None:
        errors = [r.error for r in records]
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(METRIC_COLUMNS)
        for rec, e in zip(records, errors):
            out.writerow([rec.k, rec.kind, rec.n_gamma, rec.n_p, rec.J, f"{e:.10e}", f"{rec.wall * 1e3:.3f}"])


def read_metrics_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _jsonable(value):
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return None
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return value


def summary_dict(metrics: RunMetrics, **extra) -> dict:
    out = dict(metrics.summary())
    out.update(extra)
    return _jsonable(out)


def write_summary(path, summary: dict) -> None:
    Path(path).write_text(json.dumps(_jsonable(summary), indent=2, sort_keys=True) + "\n")


def write_masks(path, masks: np.ndarray) -> None:
    """``(N_t + 1, n_cells)`` int8 mask codes (1 everywhere on full steps)."""
    np.save(path, np.asarray(masks, dtype=np.int8))


def write_profile(path, mesh: Mesh, values: np.ndarray, time: float, label: str = "") -> None:
    """Columnar density data: ``x rho`` in 1-D, ``x y rho`` in 2-D (blank line between x rows)."""
    rho = np.asarray(values)[:, 0]
    centers = mesh.centers()
    with open(path, "w") as fh:
        fh.write(f"# {label} t={time:.10g}\n".replace("#  ", "# "))
        if mesh.dim == 1:
            fh.write("# x density\n")
            for x, r in zip(centers[0], rho):
                fh.write(f"{x:.10e} {r:.10e}\n")
            return
        fh.write("# x y density\n")
        nx, ny = mesh.shape
        X = centers[0].reshape(nx, ny)
        Y = centers[1].reshape(nx, ny)
        R = rho.reshape(nx, ny)
        for i in range(nx):
            for j in range(ny):
                fh.write(f"{X[i, j]:.10e} {Y[i, j]:.10e} {R[i, j]:.10e}\n")
            fh.write("\n")


def read_profile(path) -> np.ndarray:
    return np.loadtxt(path, comments="#", ndmin=2)
