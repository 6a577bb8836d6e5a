"""Shapiro low-pass filters and the residual-gated filtering of hybrid snapshots."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import kernels
from .errors import PositivityError
from .mesh import Mesh

SHAPIRO_STENCILS = {
    2: np.array([1.0, 2.0, 1.0]) / 4.0,
    4: np.array([-1.0, 4.0, 10.0, 4.0, -1.0]) / 16.0,
    6: np.array([1.0, -6.0, 15.0, 44.0, 15.0, -6.0, 1.0]) / 64.0,
}


def _weights(order: int) -> np.ndarray:
    try:
        return SHAPIRO_STENCILS[order]
    except KeyError:
        raise ValueError(f"filter order must be one of {sorted(SHAPIRO_STENCILS)}, got {order}") from None


def shapiro_filter_1d(line, order: int) -> np.ndarray:
    """Filter one line; values beyond the ends repeat the end values."""
    line = np.asarray(line, dtype=np.float64)
    if line.ndim != 1 or line.size < 1:
        raise ValueError("expected a non-empty 1-D line")
    return kernels.shapiro_lines(line[None, :].copy(), _weights(order))[0]


def filter_field(values: np.ndarray, mesh: Mesh, order: int) -> np.ndarray:
    """Apply the 1-D filter to every variable along each axis in turn."""
    w = _weights(order)
    nx, ny = mesh.shape
    c = values.shape[1]
    V = np.ascontiguousarray(values, dtype=np.float64).reshape(nx, ny, c)
    V = kernels.shapiro_grid(V, w, 0)
    if mesh.dim == 2:
        V = kernels.shapiro_grid(V, w, 1)
    return np.ascontiguousarray(V).reshape(nx * ny, c)


@dataclass(frozen=True)
class FilterSettings:
    cascade: tuple[int, ...] = (2, 4, 6)
    eps_f: float = 1e-2
    j_max: int = 10
    relative: bool = True

    def __post_init__(self):
        object.__setattr__(self, "cascade", tuple(int(o) for o in self.cascade))
        for o in self.cascade:
            _weights(o)
        if not self.eps_f > 0:
            raise ValueError("eps_f must be positive")
        if self.j_max < 1:
            raise ValueError("filter j_max must be >= 1")


@dataclass
class FilterReport:
    sweeps: dict[int, int] = field(default_factory=dict)
    kept: dict[int, list[int]] = field(default_factory=dict)
    reverted: int = 0

    @property
    def total_sweeps(self) -> int:
        return sum(self.sweeps.values())


def _patched_residual(residual, dilate, new, old, r_old, full_share: float = 0.5) -> np.ndarray:
    """Residual of ``new`` recomputed only around the cells that differ from ``old``."""
    changed = np.any(new != old, axis=1)
    if not changed.any():
        return r_old.copy()
    touched = dilate(changed)
    if touched.mean() > full_share:
        return residual(new)
    idx = np.flatnonzero(touched)
    out = r_old.copy()
    out[idx] = residual(new, idx)
    return out


def residual_gated_filter(
    values: np.ndarray,
    mesh: Mesh,
    residual: Callable[..., np.ndarray],
    settings: FilterSettings,
    dilate: Callable[[np.ndarray], np.ndarray],
    admissible: Callable[[np.ndarray], np.ndarray] | None = None,
) -> tuple[np.ndarray, FilterReport]:
    """Keep filtered values only where they lower the cell residual.

    ``residual(v, cells=None)`` returns the per-cell residual magnitude of
    ``v`` (on ``cells`` when given); ``dilate(mask)`` grows a cell mask by the
    residual stencil.  Each sweep filters the whole field, keeps the cells
    whose residual strictly dropped and then shrinks that set until no cell's
    residual rises after mixing.  An order stops after ``settings.j_max``
    sweeps, when nothing is kept, or when the best decrease is below
    ``eps_f``.  Per-cell residuals never increase.
    """
    report = FilterReport()
    v = np.array(values, dtype=np.float64)
    if not settings.cascade:
        return v, report
    r0 = residual(v)
    for order in settings.cascade:
        report.sweeps[order] = 0
        report.kept[order] = []
        prev = None  # (filtered field, its residual) from the previous sweep of this order
        for _ in range(settings.j_max):
            vf = filter_field(v, mesh, order)
            if admissible is not None:
                bad = ~admissible(vf)
                if bad.any():
                    vf[bad] = v[bad]
                    report.reverted += int(bad.sum())
            report.sweeps[order] += 1
            # consecutive filtered fields differ only around the cells kept last sweep
            base, r_base = prev if prev is not None else (v, r0)
            try:
                r1 = _patched_residual(residual, dilate, vf, base, r_base)
                prev = (vf, r1)
            except PositivityError:  # a reconstructed face state went bad: keep nothing
                r1 = np.full_like(r0, np.inf)
                prev = None
            keep = r1 < r0
            mix, rm = v, r0
            while keep.any():
                mix = np.where(keep[:, None], vf, v)
                # cells seeing only kept (only unkept) neighbours already have r1 (r0)
                near_keep = dilate(keep)
                rm = np.where(near_keep, r1, r0)
                mixed = np.flatnonzero(near_keep & dilate(~keep))
                try:
                    if mixed.size:
                        rm[mixed] = residual(mix, mixed)
                except PositivityError:
                    keep = np.zeros_like(keep)
                    break
                rise = rm > r0
                if not rise.any():
                    break
                keep &= ~dilate(rise)
            n_kept = int(keep.sum())
            report.kept[order].append(n_kept)
            if n_kept == 0:
                break
            gain = r0[keep] - rm[keep]
            if settings.relative:
                gain = gain / r0[keep]
            v, r0 = mix, rm
            if float(gain.max()) < settings.eps_f:
                break
    return v, report
