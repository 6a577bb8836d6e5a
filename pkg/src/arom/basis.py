"""Windowed POD bases, gappy-POD coordinates and (oversampled) DEIM points.

Bases live on the flat, cell-major DOF vector.  Sample points are *cells*:
selecting a cell selects all of its ``c`` rows.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import RankDeficientError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PodResult:
    basis: np.ndarray  # (n_dof, r)
    singular_values: np.ndarray  # all singular values of the window
    rank: int
    requested: int

    @property
    def truncated(self) -> bool:
        """True when fewer than ``requested`` directions were available."""
        return self.rank < self.requested


def fix_signs(basis: np.ndarray) -> np.ndarray:
    """Flip columns so the largest-magnitude entry of each is positive (first one on ties)."""
    if basis.size == 0:
        return basis
    idx = np.argmax(np.abs(basis), axis=0)
    signs = np.sign(basis[idx, np.arange(basis.shape[1])])
    signs[signs == 0] = 1.0
    return basis * signs


def pod(deviations: np.ndarray, m: int, rtol: float | None = None) -> PodResult:
    """Dominant ``m`` left singular vectors of ``deviations`` (``n_dof x w``).

    Directions with singular value below ``rtol * sigma_max`` (default
    ``max(shape) * eps``) are dropped; the result then has rank ``r < m``
    and :attr:`PodResult.truncated` is set.
    """
    X = np.asarray(deviations, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("deviations must be a 2-D matrix")
    if m < 1 or m > X.shape[1]:
        raise ValueError(f"need 1 <= m <= w (m={m}, w={X.shape[1]})")
    if not np.all(np.isfinite(X)):
        raise ValueError("deviations contain non-finite values")
    U, s, _ = scipy.linalg.svd(X, full_matrices=False, lapack_driver="gesdd")
    if rtol is None:
        rtol = max(X.shape) * np.finfo(float).eps
    r = int(np.sum(s > rtol * s[0])) if s.size and s[0] > 0 else 0
    r = min(r, m)
    if r < m:
        log.debug("POD window has rank %d < m=%d", r, m)
    return PodResult(fix_signs(U[:, :r].copy()), s, r, m)


def reference_state(window) -> np.ndarray:
    """Arithmetic mean of the snapshots in ``window`` (flat vectors or arrays)."""
    snaps = [np.asarray(g, dtype=np.float64).reshape(-1) for g in window]
    if not snaps:
        raise ValueError("empty window")
    total = np.zeros_like(snaps[0])
    for g in snaps:
        total += g
    return total / len(snaps)


def _rows(cells: np.ndarray, n_vars: int) -> np.ndarray:
    return (np.asarray(cells, dtype=np.int64)[:, None] * n_vars + np.arange(n_vars)).reshape(-1)


def gappy_coordinates(Phi: np.ndarray, points, sampled: np.ndarray, n_vars: int = 1) -> np.ndarray:
    """Least-squares ``y`` with ``Phi[P] y ~ sampled`` where ``sampled`` holds
    ``(v - psi)`` on the rows of the point cells (in point order)."""
    A = Phi[_rows(points, n_vars)]
    y, *_ = np.linalg.lstsq(A, np.asarray(sampled, dtype=np.float64).reshape(-1), rcond=None)
    return y


def odeim_select(Phi: np.ndarray, n_p: int, n_vars: int = 1) -> np.ndarray:
    """Greedy (oversampled) DEIM point cells for the columns of ``Phi``.

    Points ``1..m`` follow DEIM: the residual of ``phi_j`` fitted on the
    selected rows by ``phi_1..phi_{j-1}``.  Points ``m+1..n_p`` keep going
    round the modes (``j = 1, 2, ..`` again) with the same residual.  A DOF
    row maps to its cell, rows of selected cells are excluded from the
    argmax and ties go to the lowest index.  Returns cells in selection order.
    """
    Phi = np.asarray(Phi, dtype=np.float64)
    n_dof, m = Phi.shape
    if n_dof % n_vars:
        raise ValueError("basis rows are not a multiple of n_vars")
    n_cells = n_dof // n_vars
    if n_p < m:
        raise ValueError(f"n_p={n_p} must be >= m={m}")
    if n_p > n_cells:
        raise ValueError(f"n_p={n_p} exceeds the number of cells ({n_cells})")
    if m == 0:
        return np.empty(0, dtype=np.int64)
    PhiF = np.asfortranarray(Phi)  # contiguous columns
    taken = np.zeros(n_cells, dtype=bool)
    cells: list[int] = []
    rows = np.empty(0, dtype=np.int64)
    r = np.empty(n_dof)
    fit = np.empty(n_dof)
    for step in range(n_p):
        j = step % m
        np.copyto(r, PhiF[:, j])
        if j > 0 and rows.size:
            coef, *_ = np.linalg.lstsq(Phi[rows, :j], Phi[rows, j], rcond=None)
            np.dot(PhiF[:, :j], coef, out=fit)
            r -= fit
        np.abs(r, out=r)
        r[rows] = -1.0
        best = int(np.argmax(r))
        cell = best // n_vars
        if not r[best] > 0.0:
            cell = int(np.flatnonzero(~taken)[0])
        taken[cell] = True
        cells.append(cell)
        rows = np.concatenate([rows, _rows(np.array([cell]), n_vars)])
    return np.array(cells, dtype=np.int64)


@dataclass
class ReducedModel:
    """Affine approximation ``psi + Phi y`` with a gappy-POD fit on ``points``."""

    Phi: np.ndarray  # (n_dof, m)
    psi: np.ndarray  # (n_dof,)
    points: np.ndarray  # cells
    n_vars: int
    window: int = 0
    singular_values: np.ndarray = field(default_factory=lambda: np.empty(0))
    _Q: np.ndarray = field(init=False, repr=False)
    _R: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.Phi = np.asarray(self.Phi, dtype=np.float64)
        self.psi = np.asarray(self.psi, dtype=np.float64).reshape(-1)
        self.points = np.asarray(self.points, dtype=np.int64)
        if self.Phi.shape[0] != self.psi.size:
            raise ValueError("Phi and psi sizes differ")
        self._rows = _rows(self.points, self.n_vars)
        A = self.Phi[self._rows]
        self._Q, self._R = np.linalg.qr(A)
        d = np.abs(np.diag(self._R))
        if self.m and (d.size < self.m or not d.min() > 1e-12 * max(d.max(), 1e-300)):
            raise RankDeficientError(f"sampled basis rows have rank < {self.m}")
        self._Phi3 = self.Phi.reshape(self.psi.size // self.n_vars, self.n_vars, self.m)
        self._psi2 = self.psi.reshape(-1, self.n_vars)

    @property
    def m(self) -> int:
        return self.Phi.shape[1]

    def coordinates(self, values: np.ndarray) -> np.ndarray:
        """``y = (P^T Phi)^+ P^T (v - psi)`` read from the point cells of ``values``."""
        if self.m == 0:
            return np.zeros(0)
        v = np.asarray(values).reshape(-1)
        b = v[self._rows] - self.psi[self._rows]
        return scipy.linalg.solve_triangular(self._R, self._Q.T @ b)

    def reconstruct(self, cells, y: np.ndarray) -> np.ndarray:
        """``(psi + Phi y)`` on ``cells`` as ``(len(cells), c)``."""
        cells = np.asarray(cells, dtype=np.int64)
        return self._psi2[cells] + self._Phi3[cells] @ y

    def full(self, y: np.ndarray) -> np.ndarray:
        return (self.psi + self.Phi @ y).reshape(-1, self.n_vars)
