"""BDF time stepping with Newton solves on all cells or on a sampled subset.

The residual of step ``k`` is ``R_k(q) = q - F_k(q)`` with
``F_k(q) = dt*beta*f(q) - sum_{j<s} a_j q_{k-s+j}``.  Jacobians of ``f`` are
built by coloured finite differences: cells of one lattice colour never feed
a common residual row, so one RHS evaluation per (colour, variable) recovers
a whole group of columns.

A *problem* is any object exposing ``n_cells``, ``n_vars``, ``cell_colors``,
``rhs(U, t, cells)``, ``stencil(cells)``, ``jacobian_pairs(cells)`` and
``admissible(values)`` (see :class:`arom.euler.EulerProblem`).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import kernels
from .errors import PositivityError, SolverError

log = logging.getLogger(__name__)

BDF_COEFFICIENTS = {
    1: (np.array([-1.0, 1.0]), 1.0),
    2: (np.array([1.0 / 3.0, -4.0 / 3.0, 1.0]), 2.0 / 3.0),
}

LINEAR_SOLVERS = ("auto", "banded", "splu", "bicgstab")
JACOBIANS = ("faces", "colored")

# "auto" switches from sparse LU to preconditioned BiCGSTAB above this many unknowns
_DIRECT_LIMIT = 8000


@dataclass(frozen=True)
class BDFScheme:
    order: int = 2
    dt: float = 1.0

    def __post_init__(self):
        if self.order not in BDF_COEFFICIENTS:
            raise ValueError("only BDF1 and BDF2 are supported")
        if not self.dt > 0:
            raise ValueError("dt must be positive")

    def coefficients(self, k: int) -> tuple[np.ndarray, float]:
        """``(a_0..a_s, beta)`` for step ``k``; BDF1 while fewer than ``order`` states exist."""
        return BDF_COEFFICIENTS[min(self.order, max(k, 1))]

    def steps_back(self, k: int) -> int:
        return min(self.order, max(k, 1))


@dataclass(frozen=True)
class NewtonSettings:
    tol: float = 1e-10
    max_iter: int = 20
    linear_solver: str = "auto"
    max_halvings: int = 12
    jacobian: str = "faces"

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("Newton tolerance must be positive")
        if self.max_iter < 1:
            raise ValueError("Newton max_iter must be >= 1")
        if self.linear_solver not in LINEAR_SOLVERS:
            raise ValueError(f"linear_solver must be one of {LINEAR_SOLVERS}")
        if self.jacobian not in JACOBIANS:
            raise ValueError(f"jacobian must be one of {JACOBIANS}")


@dataclass(frozen=True)
class SubiterationSettings:
    eps_y: float = 1e-4
    j_max: int = 10

    def __post_init__(self):
        if not self.eps_y > 0:
            raise ValueError("eps_y must be positive")
        if self.j_max < 1:
            raise ValueError("j_max must be >= 1")


def history_sum(history, a: np.ndarray) -> np.ndarray:
    """``sum_{j<s} a_j q_{k-s+j}`` with ``history`` ordered oldest first."""
    s = len(a) - 1
    if len(history) < s:
        raise ValueError(f"BDF{s} needs {s} history states, got {len(history)}")
    hist = history[-s:]
    out = a[0] * hist[0]
    for j in range(1, s):
        out = out + a[j] * hist[j]
    return out


def bdf_function(problem, candidate, history, scheme: BDFScheme, k: int, t: float, cells=None) -> np.ndarray:
    """Rows of ``F_k(candidate)`` for ``cells`` (all when ``None``)."""
    a, beta = scheme.coefficients(k)
    hist = history_sum(history, a)
    f = problem.rhs(candidate, t, cells)
    rows = slice(None) if cells is None else np.asarray(cells)
    return scheme.dt * beta * f - hist[rows]


class _Pattern:
    """Sparse structure of ``I - dt*beta*df/dq`` restricted to a cell set."""

    def __init__(self, problem, cells: np.ndarray):
        c = problem.n_vars
        n = cells.size
        rows, cols = problem.jacobian_pairs(cells)
        self.rows, self.cols = rows, cols
        self.c = c
        diag_pairs = np.flatnonzero(rows == cols)
        self.diag_pairs = diag_pairs[np.argsort(rows[diag_pairs])]
        # block-sparse-row layout: pairs sorted by (row, col)
        self.bsr_order = np.lexsort((cols, rows))
        self.bsr_indices = cols[self.bsr_order]
        self.bsr_indptr = np.concatenate([[0], np.cumsum(np.bincount(rows, minlength=n))])
        self._colors = problem.cell_colors[cells]
        self._groups = None
        npair = rows.size
        r = np.arange(c)
        I = (rows[:, None, None] * c + r[None, :, None]) + np.zeros((1, 1, c), dtype=np.int64)
        J = (cols[:, None, None] * c + r[None, None, :]) + np.zeros((1, c, 1), dtype=np.int64)
        nnz = npair * c * c
        coo = sp.coo_matrix((np.arange(1, nnz + 1, dtype=np.float64), (I.ravel(), J.ravel())), shape=(n * c, n * c))
        csc = coo.tocsc()
        self.perm = csc.data.astype(np.int64) - 1
        self.indices = csc.indices
        self.indptr = csc.indptr
        self.shape = csc.shape
        diag = (rows == cols)[:, None, None] & (r[None, :, None] == r[None, None, :])
        self.diag = np.flatnonzero(diag.ravel())
        self._banded = None
        self.half_band = int(np.max(np.abs(I.ravel() - J.ravel()))) if nnz else 0
        self._I = I.ravel()
        self._J = J.ravel()

    @property
    def groups(self) -> list[tuple[np.ndarray, np.ndarray]]:
        """Per colour: member cells and the pairs whose column has that colour."""
        if self._groups is None:
            colors = self._colors
            self._groups = [
                (np.flatnonzero(colors == col), np.flatnonzero(colors[self.cols] == col)) for col in np.unique(colors)
            ]
        return self._groups

    def block_jacobi(self, data: np.ndarray) -> sp.bsr_matrix:
        """Inverse of the diagonal ``c x c`` blocks, as a preconditioner."""
        c = self.c
        inv = np.linalg.inv(data.reshape(-1, c, c)[self.diag_pairs])
        n = inv.shape[0]
        return sp.bsr_matrix((inv, np.arange(n), np.arange(n + 1)), shape=self.shape)

    def bsr(self, data: np.ndarray) -> sp.bsr_matrix:
        c = self.c
        blocks = data.reshape(-1, c, c)[self.bsr_order]
        return sp.bsr_matrix((blocks, self.bsr_indices, self.bsr_indptr), shape=self.shape)

    def matrix(self, data: np.ndarray) -> sp.csc_matrix:
        return sp.csc_matrix((data[self.perm], self.indices, self.indptr), shape=self.shape)

    def banded(self, data: np.ndarray) -> tuple[np.ndarray, int]:
        b = self.half_band
        ab = np.zeros((2 * b + 1, self.shape[0]))
        ab[b + self._I - self._J, self._J] = data
        return ab, b


class NewtonSolver:
    """Newton iteration for ``R_k = 0`` on all cells or a cell subset."""

    fd_eps = np.sqrt(np.finfo(float).eps)
    krylov_rtol = 1e-10

    def __init__(self, problem, scheme: BDFScheme, settings: NewtonSettings | None = None):
        self.problem = problem
        self.scheme = scheme
        self.settings = settings or NewtonSettings()
        self._patterns: dict[bytes, _Pattern] = {}
        self.all_cells = np.arange(problem.n_cells, dtype=np.int64)
        self.last_iterations = 0

    # -- residuals ------------------------------------------------------------

    def step_terms(self, history, k: int) -> tuple[np.ndarray, float]:
        """``(sum_j a_j q_{k-s+j}, dt*beta)`` for step ``k``."""
        a, beta = self.scheme.coefficients(k)
        return history_sum(history, a), self.scheme.dt * beta

    def residual(self, values, hist, dtb, t, cells=None) -> np.ndarray:
        rows = slice(None) if cells is None else cells
        return values[rows] - dtb * self.problem.rhs(values, t, cells) + hist[rows]

    def cell_residual(self, values, hist, dtb, t, cells=None) -> np.ndarray:
        """Per-cell infinity norm of ``R_k(values)`` (on ``cells`` when given)."""
        f = self.problem.rhs(values, t, cells)
        rows = self.problem.stencil(cells).cells
        return kernels.residual_max(values, hist, rows, f, dtb)

    # -- solves ---------------------------------------------------------------

    def full_solve(self, history, k: int, t: float, guess=None) -> np.ndarray:
        """Solve ``R_k(q) = 0`` on every cell; ``guess`` defaults to the newest history state."""
        hist, dtb = self.step_terms(history, k)
        work = np.array(history[-1] if guess is None else guess, dtype=np.float64)
        return self.solve_cells(work, self.all_cells, hist, dtb, t)

    def solve_cells(self, work, cells, hist, dtb, t, reuse: dict | None = None) -> np.ndarray:
        """Newton on the rows of ``cells``; other cells of ``work`` are frozen data.

        ``work`` is updated in place and returned.  With a ``reuse`` dict the
        factorised Jacobian is kept there and later calls on the same cells
        take chord steps with it; a stale step that fails to lower the
        residual is retried once with a fresh Jacobian.
        """
        st = self.settings
        prob = self.problem
        stencil = prob.stencil(cells)
        cells = stencil.cells
        pattern = self._pattern(cells)
        try:
            f0 = prob.rhs(work, t, stencil)
        except PositivityError as exc:
            raise SolverError(f"initial guess not admissible: {exc}") from exc
        R = work[cells] - dtb * f0 + hist[cells]
        norm = float(np.max(np.abs(R))) if R.size else 0.0
        call = object()  # Jacobians built during this call are not stale
        for it in range(st.max_iter + 1):
            if norm <= st.tol:
                self.last_iterations = it
                return work
            if it == st.max_iter:
                break
            stale = reuse is not None and reuse.get("pattern") is pattern and reuse.get("call") is not call
            if stale:
                solve = reuse["solve"]
            else:
                A = self._jacobian(work, cells, stencil, pattern, f0, dtb, t)
                solve = self._factor(A, pattern)
                if reuse is not None:
                    reuse.update(pattern=pattern, solve=solve, call=call)
            delta = solve(-R.reshape(-1)).reshape(R.shape)
            base = work[cells].copy()
            lam = 1.0
            accepted = False
            for _ in range(1 if stale else st.max_halvings + 1):
                trial = base + lam * delta
                if prob.admissible(trial).all():
                    work[cells] = trial
                    try:
                        f1 = prob.rhs(work, t, stencil)
                    except PositivityError:
                        f1 = None
                    if f1 is not None:
                        R1 = trial - dtb * f1 + hist[cells]
                        n1 = float(np.max(np.abs(R1)))
                        if n1 < norm or (n1 == norm and not stale):
                            f0, R, norm = f1, R1, n1
                            accepted = True
                            break
                lam *= 0.5
            if accepted:
                continue
            work[cells] = base
            if stale:  # the old Jacobian did not help: rebuild it next iteration
                reuse.clear()
                continue
            raise SolverError("line search failed to reduce the residual", norm)
        work_norm = norm
        raise SolverError(f"Newton did not converge in {st.max_iter} iterations (|R|={work_norm:.3e})", work_norm)

    def _pattern(self, cells: np.ndarray) -> _Pattern:
        key = cells.tobytes() if cells.size != self.problem.n_cells else b"all"
        pat = self._patterns.get(key)
        if pat is None:
            if len(self._patterns) > 64:
                self._patterns.clear()
            pat = self._patterns[key] = _Pattern(self.problem, cells)
        return pat

    def _jacobian(self, work, cells, stencil, pattern, f0, dtb, t):
        """Data of ``I - dtb * df/dq`` in pattern order."""
        prob = self.problem
        if self.settings.jacobian == "faces" and hasattr(prob, "jacobian_blocks"):
            data = (-dtb) * prob.jacobian_blocks(work, t, stencil).reshape(-1)
            data[pattern.diag] += 1.0
            return data
        return self._colored_jacobian(work, cells, stencil, pattern, f0, dtb, t)

    def _colored_jacobian(self, work, cells, stencil, pattern, f0, dtb, t):
        prob = self.problem
        c = prob.n_vars
        data = np.empty((pattern.rows.size, c, c))
        x = work[cells]
        h = self.fd_eps * (1.0 + np.abs(x))
        for members, pairs in pattern.groups:
            gcells = cells[members]
            prow = pattern.rows[pairs]
            pcol = pattern.cols[pairs]
            for v in range(c):
                saved = work[gcells, v].copy()
                work[gcells, v] = saved + h[members, v]
                try:
                    fp = prob.rhs(work, t, stencil)
                finally:
                    work[gcells, v] = saved
                data[pairs, :, v] = (fp[prow] - f0[prow]) / h[pcol, v][:, None]
        data = (-dtb) * data.reshape(-1)
        data[pattern.diag] += 1.0
        return data

    def _linear_solve(self, data, pattern, b):
        return self._factor(data, pattern)(b)

    def _factor(self, data, pattern):
        """A function ``b -> A^{-1} b`` for the matrix with ``data`` in ``pattern`` order."""
        kind = self.settings.linear_solver
        size = pattern.shape[0]
        if kind == "auto":
            if self.problem.mesh.dim == 1:
                kind = "banded"
            else:
                kind = "splu" if size <= _DIRECT_LIMIT else "bicgstab"
        if kind == "banded":
            ab, w = pattern.banded(data)
            return lambda b: scipy.linalg.solve_banded((w, w), ab, b, check_finite=False)
        if kind == "bicgstab":
            A, M = pattern.bsr(data), pattern.block_jacobi(data)

            def krylov(b):
                x, info = spla.bicgstab(A, b, M=M, rtol=self.krylov_rtol, atol=0.0, maxiter=500)
                if info == 0:
                    return x
                log.debug("bicgstab did not converge (info=%s); falling back to splu", info)
                return spla.splu(pattern.matrix(data), permc_spec="MMD_AT_PLUS_A").solve(b)

            return krylov
        return spla.splu(pattern.matrix(data), permc_spec="MMD_AT_PLUS_A").solve

    # -- partial solves -------------------------------------------------------

    def partial_solve(self, sampling, tilde_values, history, k, t, reduced, sub: SubiterationSettings, guess=None):
        """Newton on the sampled cells with gappy-POD subiterations on the neighbours.

        Returns ``(values on s_hat, y, J)``.  Neighbour values start at
        ``tilde_values`` and are refreshed from ``psi + Phi y`` after every
        restricted solve; the loop stops when ``|y_j - y_{j-1}| < eps_y`` or
        after ``sub.j_max`` solves.
        """
        hist, dtb = self.step_terms(history, k)
        work = np.array(history[-1] if guess is None else guess, dtype=np.float64)
        s_hat = np.asarray(sampling.s_hat, dtype=np.int64)
        s_tilde = np.asarray(sampling.s_tilde, dtype=np.int64)
        work[s_tilde] = tilde_values
        y_prev = None
        y = None
        J = 0
        reuse: dict = {}
        for j in range(1, sub.j_max + 1):
            if s_hat.size:
                self.solve_cells(work, s_hat, hist, dtb, t, reuse)
            J = j
            if reduced is None:
                break
            y = reduced.coordinates(work)
            if s_tilde.size == 0:
                break
            if y_prev is not None and np.linalg.norm(y - y_prev) < sub.eps_y:
                break
            y_prev = y
            work[s_tilde] = reduced.reconstruct(s_tilde, y)
        return work[s_hat], y, J
