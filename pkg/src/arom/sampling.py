"""Error-driven choice of the partially solved cells and their stencil closure."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import Mesh

# sampling-mask codes
BREVE, HAT, TILDE = 0, 1, 2


def pointwise_error(snapshot: np.ndarray, reduced, y: np.ndarray) -> np.ndarray:
    """Per-cell sum of squared entries of ``snapshot - psi - Phi y``."""
    snapshot = np.asarray(snapshot, dtype=np.float64)
    dev = snapshot.reshape(-1) - reduced.psi - reduced.Phi @ y
    return np.sum(dev.reshape(-1, reduced.n_vars) ** 2, axis=1)


def select_rre_points(errors: np.ndarray, delta: float) -> tuple[np.ndarray, int]:
    """Cells carrying a fraction ``delta`` of the total error.

    Returns ``(G, n_g)`` with ``G`` sorted ascending; ``n_g`` is the smallest
    count whose top-``n_g`` errors (stable descending order) reach ``delta``
    of the total.  All-zero errors give an empty selection.
    """
    if not 0.0 < delta <= 1.0:
        raise ValueError("delta must lie in (0, 1]")
    errors = np.asarray(errors, dtype=np.float64)
    total = float(errors.sum())
    if not total > 0.0:
        return np.empty(0, dtype=np.int64), 0
    order = np.argsort(-errors, kind="stable")
    ratio = np.cumsum(errors[order]) / total
    hit = np.flatnonzero(ratio >= delta)
    # rounding can leave the full sum a hair below 1
    n_g = int(hit[0]) + 1 if hit.size else int(np.count_nonzero(errors))
    return np.sort(order[:n_g]), n_g


def rre(errors: np.ndarray, n_g: int) -> float:
    """Fraction of the total error held by the ``n_g`` largest entries."""
    errors = np.asarray(errors, dtype=np.float64)
    if n_g <= 0:
        return 0.0
    top = np.sort(errors)[::-1][:n_g]
    return float(top.sum() / errors.sum())


def stencil_neighbors(mesh: Mesh, cells, radius: int = 2) -> np.ndarray:
    """Cells within ``radius`` along each axis of ``cells`` (clipped), minus ``cells``."""
    cells = np.unique(np.asarray(cells, dtype=np.int64))
    if cells.size == 0:
        return cells
    nx, ny = mesh.shape
    ix, iy = mesh.unravel(cells)
    found = []
    for o in range(-radius, radius + 1):
        if o == 0:
            continue
        for dx, dy in ((o, 0), (0, o)) if mesh.dim == 2 else ((o, 0),):
            jx, jy = ix + dx, iy + dy
            ok = (jx >= 0) & (jx < nx) & (jy >= 0) & (jy < ny)
            found.append(jx[ok] * ny + jy[ok])
    return np.setdiff1d(np.concatenate(found), cells)


@dataclass(frozen=True)
class SamplingSets:
    s_hat: np.ndarray
    s_tilde: np.ndarray
    s_breve: np.ndarray
    g: np.ndarray
    p: np.ndarray
    n_cells: int

    @property
    def n_s(self) -> int:
        return int(self.s_hat.size)

    def mask(self) -> np.ndarray:
        """Per-cell code: 0 reconstructed only, 1 partially solved, 2 stencil neighbour."""
        out = np.full(self.n_cells, BREVE, dtype=np.int8)
        out[self.s_hat] = HAT
        out[self.s_tilde] = TILDE
        return out


def assemble_sampling(G, P, mesh: Mesh, radius: int = 2) -> SamplingSets:
    """``S_hat = G u P``, ``S_tilde = Neighbors(S_hat)``, ``S_breve`` = the rest."""
    G = np.unique(np.asarray(G, dtype=np.int64))
    P = np.unique(np.asarray(P, dtype=np.int64))
    s_hat = np.union1d(G, P)
    if s_hat.size and (s_hat[0] < 0 or s_hat[-1] >= mesh.n_cells):
        raise IndexError("sampling index out of range")
    s_tilde = stencil_neighbors(mesh, s_hat, radius)
    s_breve = np.setdiff1d(np.arange(mesh.n_cells, dtype=np.int64), s_hat)
    return SamplingSets(s_hat, s_tilde, s_breve, G, P, mesh.n_cells)
