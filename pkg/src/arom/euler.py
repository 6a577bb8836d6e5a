"""Second-order MUSCL / Roe finite-volume discretisation of the Euler equations.

The right-hand side can be evaluated on any subset of cells.  Face fluxes are
always produced by the same kernel from the same four cells, so the rows of a
subset evaluation are bit-identical to the matching rows of a full
evaluation.  A cell's RHS depends on the cells within two cells along each
axis (the "cross" stencil); ghost layers are rebuilt on every call.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import FluxError
from .mesh import Mesh, admissible, primitive_to_conservative
from .sampling import stencil_neighbors

DIRICHLET = "dirichlet"
WALL = "wall"

STENCIL_RADIUS = 2


@dataclass(frozen=True)
class GasModel:
    gamma: float = 1.4

    def __post_init__(self):
        if not self.gamma > 1.0:
            raise ValueError("gamma must be > 1")


@dataclass(frozen=True)
class BoundarySpec:
    """One ``(lo, hi)`` pair of conditions per axis, each ``"dirichlet"`` or ``"wall"``.

    Dirichlet ghosts are frozen copies of the initial boundary cells; wall
    ghosts mirror the interior with the normal momentum negated.
    """

    conditions: tuple[tuple[str, str], ...]

    def __post_init__(self):
        for pair in self.conditions:
            if len(pair) != 2 or any(c not in (DIRICHLET, WALL) for c in pair):
                raise ValueError(f"bad boundary pair {pair!r}")

    @classmethod
    def uniform(cls, kind: str, dim: int) -> BoundarySpec:
        return cls(tuple((kind, kind) for _ in range(dim)))


def minmod(a, b):
    """Zero for opposite signs, otherwise the argument of smaller magnitude."""
    return kernels._minmod_np(np.asarray(a, dtype=float), np.asarray(b, dtype=float))[()]


def muscl_reconstruct(q_minus, q, q_plus):
    """Left- and right-face values of the middle cell with a minmod slope."""
    q = np.asarray(q, dtype=float)
    slope = minmod(q - np.asarray(q_minus, dtype=float), np.asarray(q_plus, dtype=float) - q)
    return q - 0.5 * slope, q + 0.5 * slope


def euler_flux(values: np.ndarray, axis: int, gamma: float) -> np.ndarray:
    """Analytic Euler flux along ``axis`` of conservative rows."""
    values = np.atleast_2d(values)
    rho = values[:, 0]
    vel = values[:, 1:-1] / rho[:, None]
    p = (gamma - 1.0) * (values[:, -1] - 0.5 * rho * np.sum(vel * vel, axis=1))
    un = vel[:, axis]
    flux = values * un[:, None]
    flux[:, 1 + axis] += p
    flux[:, -1] += p * un
    return flux


def roe_flux(left, right, axis: int, gas: GasModel) -> np.ndarray:
    """Roe flux between two primitive rows ``(rho, u_1..u_d, P)``."""
    left = np.asarray(left, dtype=float)
    right = np.asarray(right, dtype=float)
    U = primitive_to_conservative(
        [left[0], right[0]], np.vstack([left[1:-1], right[1:-1]]), [left[-1], right[-1]], gas.gamma
    )
    zero, one = np.array([0]), np.array([1])
    flux, bad = kernels.face_fluxes(U, zero, zero, one, one, 1 + axis, gas.gamma, kernels.LIMITER_NONE, 0.0)
    if bad >= 0:
        raise FluxError(0, axis)
    return flux[0]


def lattice_coloring(dim: int, radius: int = STENCIL_RADIUS) -> tuple[int, int]:
    """Smallest ``(M, a)`` such that ``color = (ix + a*iy) mod M`` never gives two
    cells feeding a common cross-stencil row the same colour."""
    arms = range(-radius, radius + 1)
    cross = {(o, 0) for o in arms} | ({(0, o) for o in arms} if dim == 2 else set())
    conflicts = {(p[0] - q[0], p[1] - q[1]) for p in cross for q in cross} - {(0, 0)}
    for M in range(1, 10 * (2 * radius + 1) ** 2):
        for a in range(M if dim == 2 else 1):
            if all((dx + a * dy) % M for dx, dy in conflicts):
                return M, a
    raise RuntimeError("no lattice colouring found")  # pragma: no cover


class _Faces:
    __slots__ = ("ia", "ib", "ic", "id", "left", "right", "normal", "inv_h", "face_ids")

    def corners(self):
        return (self.ia, self.ib, self.ic, self.id)


class _JacobianPlan:
    """Where each face-flux derivative lands in the cell-pair blocks of ``df/dq``.

    Entry ``k`` of an axis adds ``coef * D[face, pos]`` to pair ``pair``,
    where ``D[face, pos]`` is already the derivative with respect to the
    interior cell behind corner ``pos`` (see :func:`kernels.face_jacobians_nb`).
    """

    def __init__(self, problem: EulerProblem, stencil: Stencil):
        cells = stencil.cells
        n = cells.size
        rows, cols = problem.jacobian_pairs(cells)
        self.n_pairs = rows.size
        keys = rows * n + cols
        order = np.argsort(keys, kind="stable")
        sorted_keys = keys[order]
        loc = np.full(problem.n_cells, -1, dtype=np.int64)
        loc[cells] = np.arange(n)
        src, _ = problem.ghost_map()
        own = np.arange(n, dtype=np.int64)
        self.axes = []
        for fc in stencil.axes:
            parts = []
            for faces, coef in ((fc.left, fc.inv_h), (fc.right, -fc.inv_h)):
                for pos, corner in enumerate(fc.corners()):
                    q = corner[faces]
                    j = np.where(src[q] >= 0, loc[np.maximum(src[q], 0)], -1)
                    keep = j >= 0
                    at = np.searchsorted(sorted_keys, own[keep] * n + j[keep])
                    parts.append((faces[keep], np.full(keep.sum(), pos), order[at], np.full(keep.sum(), coef)))
            f, p, q, a = (np.concatenate(col) for col in zip(*parts))
            self.axes.append((f.astype(np.int64), p.astype(np.int64), q.astype(np.int64), a.astype(np.float64)))


class Stencil:
    """Faces needed to evaluate the RHS on a fixed set of cells."""

    def __init__(self, problem: EulerProblem, cells: np.ndarray):
        mesh = problem.mesh
        nx, ny = mesh.shape
        py = 2 if mesh.dim == 2 else 0
        row = ny + 2 * py
        self.cells = cells
        self._plan = None
        ix, iy = mesh.unravel(cells)
        self.axes = []

        xf_lo = ix * ny + iy
        xf_hi = (ix + 1) * ny + iy
        uniq = np.unique(np.concatenate([xf_lo, xf_hi]))
        base = (uniq // ny) * row + (uniq % ny) + py
        self.axes.append(self._faces(uniq, base, row, xf_lo, xf_hi, 1, 1.0 / mesh.widths[0]))

        if mesh.dim == 2:
            yf_lo = ix * (ny + 1) + iy
            yf_hi = yf_lo + 1
            uniq = np.unique(np.concatenate([yf_lo, yf_hi]))
            base = (uniq // (ny + 1) + 2) * row + uniq % (ny + 1)
            self.axes.append(self._faces(uniq, base, 1, yf_lo, yf_hi, 2, 1.0 / mesh.widths[1]))

    @staticmethod
    def _faces(uniq, base, step, lo, hi, normal, inv_h):
        f = _Faces()
        f.face_ids = uniq
        f.ia = base
        f.ib = base + step
        f.ic = base + 2 * step
        f.id = base + 3 * step
        f.left = np.searchsorted(uniq, lo)
        f.right = np.searchsorted(uniq, hi)
        f.normal = normal
        f.inv_h = inv_h
        return f

    def __len__(self):
        return len(self.cells)

    def plan(self, problem: EulerProblem) -> _JacobianPlan:
        if self._plan is None:
            self._plan = _JacobianPlan(problem, self)
        return self._plan


class EulerProblem:
    """Semi-discrete Euler system ``dq/dt = f(q)`` on a Cartesian mesh."""

    radius = STENCIL_RADIUS
    fd_eps = float(np.sqrt(np.finfo(float).eps))

    def __init__(
        self,
        mesh: Mesh,
        gas: GasModel,
        boundary: BoundarySpec,
        initial_values: np.ndarray,
        limiter: str = "conservative",
        entropy_fix: float = 0.0,
    ):
        if len(boundary.conditions) != mesh.dim:
            raise ValueError("boundary spec must have one pair per axis")
        if limiter not in kernels.LIMITERS:
            raise ValueError(f"unknown limiter {limiter!r}")
        self.mesh = mesh
        self.gas = gas
        self.boundary = boundary
        self.limiter = limiter
        self._limiter_code = kernels.LIMITERS[limiter]
        self.entropy_fix = float(entropy_fix)
        self.initial_values = np.array(initial_values, dtype=np.float64)
        self.n_cells = mesh.n_cells
        self.n_vars = mesh.n_vars
        self.cell_volume = mesh.cell_volume
        M, a = lattice_coloring(mesh.dim, self.radius)
        ix, iy = mesh.unravel(np.arange(self.n_cells))
        self.cell_colors = (ix + a * iy) % M
        self.n_colors = M
        self._cache: dict[bytes, Stencil] = {}
        self._ghosts = None
        self._frozen_pad = None
        self.full = Stencil(self, np.arange(self.n_cells, dtype=np.int64))
        c = self.n_vars
        self._signs = np.ones((3, c))
        self._signs[1, 1] = -1.0
        if mesh.dim == 2:
            self._signs[2, 2] = -1.0

    # -- stencils -----------------------------------------------------------

    def stencil(self, cells=None) -> Stencil:
        if cells is None:
            return self.full
        if isinstance(cells, Stencil):
            return cells
        cells = np.asarray(cells, dtype=np.int64)
        if cells.size == self.n_cells and cells[0] == 0 and cells[-1] == self.n_cells - 1:
            return self.full
        key = cells.tobytes()
        st = self._cache.get(key)
        if st is None:
            if len(self._cache) > 256:
                self._cache.clear()
            st = self._cache[key] = Stencil(self, cells)
        return st

    def offsets(self) -> list[tuple[int, int]]:
        r = range(-self.radius, self.radius + 1)
        offs = [(o, 0) for o in r]
        if self.mesh.dim == 2:
            offs += [(0, o) for o in r if o]
        return offs

    def neighbors(self, cells) -> np.ndarray:
        """Cells within the stencil radius of ``cells`` that are not in ``cells``."""
        return stencil_neighbors(self.mesh, cells, self.radius)

    def dilate(self, mask: np.ndarray) -> np.ndarray:
        """Boolean mask grown by the stencil."""
        nx, ny = self.mesh.shape
        flat = np.ascontiguousarray(mask, dtype=bool).reshape(-1)
        return kernels.dilate_mask(flat, nx, ny, self.radius, self.mesh.dim == 2)

    def jacobian_pairs(self, cells: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Local ``(row, col)`` cell pairs of the Jacobian restricted to ``cells``."""
        nx, ny = self.mesh.shape
        loc = np.full(self.n_cells, -1, dtype=np.int64)
        loc[cells] = np.arange(cells.size)
        ix, iy = self.mesh.unravel(cells)
        rows, cols = [], []
        own = np.arange(cells.size)
        for dx, dy in self.offsets():
            jx, jy = ix + dx, iy + dy
            ok = (jx >= 0) & (jx < nx) & (jy >= 0) & (jy < ny)
            lj = np.full(cells.size, -1, dtype=np.int64)
            lj[ok] = loc[jx[ok] * ny + jy[ok]]
            keep = lj >= 0
            rows.append(own[keep])
            cols.append(lj[keep])
        return np.concatenate(rows), np.concatenate(cols)

    # -- evaluation ---------------------------------------------------------

    def admissible(self, values: np.ndarray) -> np.ndarray:
        return admissible(values, self.gas.gamma)

    def pad(self, U: np.ndarray) -> np.ndarray:
        """Values with two ghost layers on every boundary, flattened ``(n_padded, c)``."""
        if self._frozen_pad is None:
            self._frozen_pad = self.pad_slices(self.initial_values)
        src, sgn = self.ghost_map()
        return kernels.pad_values(np.ascontiguousarray(U, dtype=np.float64), src, sgn, self._frozen_pad)

    def pad_slices(self, U: np.ndarray) -> np.ndarray:
        """:meth:`pad` written with array slices (unused corners are zero)."""
        mesh = self.mesh
        nx, ny = mesh.shape
        c = self.n_vars
        U0 = self.initial_values
        conds = self.boundary.conditions
        if mesh.dim == 1:
            P = np.empty((nx + 4, c))
            P[2:-2] = U
            m = np.ones(c)
            m[1] = -1.0
            if conds[0][0] == WALL:
                P[1] = U[0] * m
                P[0] = U[min(1, nx - 1)] * m
            else:
                P[0:2] = U0[0]
            if conds[0][1] == WALL:
                P[-2] = U[-1] * m
                P[-1] = U[max(nx - 2, 0)] * m
            else:
                P[-2:] = U0[-1]
            return P
        V = U.reshape(nx, ny, c)
        V0 = U0.reshape(nx, ny, c)
        P = np.zeros((nx + 4, ny + 4, c))
        P[2:-2, 2:-2] = V
        mx = np.ones(c)
        mx[1] = -1.0
        my = np.ones(c)
        my[2] = -1.0
        (xlo, xhi), (ylo, yhi) = conds
        if xlo == WALL:
            P[1, 2:-2] = V[0] * mx
            P[0, 2:-2] = V[min(1, nx - 1)] * mx
        else:
            P[0:2, 2:-2] = V0[0]
        if xhi == WALL:
            P[-2, 2:-2] = V[-1] * mx
            P[-1, 2:-2] = V[max(nx - 2, 0)] * mx
        else:
            P[-2:, 2:-2] = V0[-1]
        if ylo == WALL:
            P[2:-2, 1] = V[:, 0] * my
            P[2:-2, 0] = V[:, min(1, ny - 1)] * my
        else:
            P[2:-2, 0:2] = V0[:, 0:1]
        if yhi == WALL:
            P[2:-2, -2] = V[:, -1] * my
            P[2:-2, -1] = V[:, max(ny - 2, 0)] * my
        else:
            P[2:-2, -2:] = V0[:, -1:]
        return P.reshape(-1, c)

    def ghost_map(self) -> tuple[np.ndarray, np.ndarray]:
        """For every padded cell: the interior cell it copies (``-1`` for frozen
        Dirichlet data and unused corners) and a sign code (0 = copy,
        1 = x-momentum negated, 2 = y-momentum negated)."""
        if self._ghosts is not None:
            return self._ghosts
        nx, ny = self.mesh.shape
        conds = self.boundary.conditions
        if self.mesh.dim == 1:
            src = np.full(nx + 4, -1, dtype=np.int64)
            sgn = np.zeros(nx + 4, dtype=np.int64)
            src[2:-2] = np.arange(nx)
            if conds[0][0] == WALL:
                src[1], src[0] = 0, min(1, nx - 1)
                sgn[:2] = 1
            if conds[0][1] == WALL:
                src[-2], src[-1] = nx - 1, max(nx - 2, 0)
                sgn[-2:] = 1
        else:
            cell = np.arange(nx * ny).reshape(nx, ny)
            src = np.full((nx + 4, ny + 4), -1, dtype=np.int64)
            sgn = np.zeros((nx + 4, ny + 4), dtype=np.int64)
            src[2:-2, 2:-2] = cell
            (xlo, xhi), (ylo, yhi) = conds
            if xlo == WALL:
                src[1, 2:-2], src[0, 2:-2] = cell[0], cell[min(1, nx - 1)]
                sgn[:2, 2:-2] = 1
            if xhi == WALL:
                src[-2, 2:-2], src[-1, 2:-2] = cell[-1], cell[max(nx - 2, 0)]
                sgn[-2:, 2:-2] = 1
            if ylo == WALL:
                src[2:-2, 1], src[2:-2, 0] = cell[:, 0], cell[:, min(1, ny - 1)]
                sgn[2:-2, :2] = 2
            if yhi == WALL:
                src[2:-2, -2], src[2:-2, -1] = cell[:, -1], cell[:, max(ny - 2, 0)]
                sgn[2:-2, -2:] = 2
            src, sgn = src.reshape(-1), sgn.reshape(-1)
        self._ghosts = (src, sgn)
        return self._ghosts

    def jacobian_blocks(self, U: np.ndarray, t: float = 0.0, cells=None) -> np.ndarray:
        """``df_i/dq_j`` as ``(n_pairs, c, c)`` blocks ordered like
        :meth:`jacobian_pairs` of the stencil's cells.

        Built from forward differences of each face flux with respect to its
        four cells; columns outside ``cells`` are treated as frozen data.
        """
        st = self.stencil(cells)
        plan = st.plan(self)
        P = self.pad(U)
        src, sgn = self.ghost_map()
        out = None
        for axis, (fc, (face, pos, pair, coef)) in enumerate(zip(st.axes, plan.axes)):
            D, bad = kernels.face_jacobians(
                P, fc.ia, fc.ib, fc.ic, fc.id, src, sgn, self._signs, fc.normal, self.gas.gamma,
                self._limiter_code, self.entropy_fix, self.fd_eps,
            )
            if bad >= 0:
                raise FluxError(self._face_cell(fc.face_ids[bad], axis), axis)
            blocks = kernels.scatter_blocks(D, face, pos, pair, coef, plan.n_pairs)
            out = blocks if out is None else out + blocks
        return out

    def rhs(self, U: np.ndarray, t: float = 0.0, cells=None) -> np.ndarray:
        """``f(U)`` rows for ``cells`` (all cells when ``None``).

        Only the stencil closure of ``cells`` is read from ``U``.
        """
        st = self.stencil(cells)
        P = self.pad(U)
        out = np.empty((len(st.cells), U.shape[1]))
        for axis, fc in enumerate(st.axes):
            flux, bad = kernels.face_fluxes(
                P, fc.ia, fc.ib, fc.ic, fc.id, fc.normal, self.gas.gamma, self._limiter_code, self.entropy_fix
            )
            if bad >= 0:
                raise FluxError(self._face_cell(fc.face_ids[bad], axis), axis)
            kernels.flux_divergence(flux, fc.right, fc.left, fc.inv_h, out, axis > 0)
        return out

    def _face_cell(self, face_id: int, axis: int) -> int:
        nx, ny = self.mesh.shape
        if axis == 0:
            fx, iy = divmod(int(face_id), ny)
            return int(self.mesh.ravel(min(max(fx - 1, 0), nx - 1), iy))
        ix, fy = divmod(int(face_id), ny + 1)
        return int(self.mesh.ravel(ix, min(max(fy - 1, 0), ny - 1)))
