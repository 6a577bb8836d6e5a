"""Hybrid-snapshot AROM time loop, the plain HDM reference run and run metrics.

Step ``k`` (``1 <= k <= N_t``) is a full solve when ``k + 1 <= w``, when
``k`` is a multiple of ``z`` or when no reduced model exists yet; otherwise
the cells of ``S_hat`` are solved with the HDM, everything else is
reconstructed from the reduced model, and the hybrid snapshot is filtered.
After step ``k`` the basis, ODEIM points and sampling sets are rebuilt for
step ``k + 1`` unless that step is a scheduled full solve.
"""

from __future__ import annotations

import logging
import math
import time
from collections import deque
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .basis import ReducedModel, odeim_select, pod, reference_state
from .errors import AromError, ConfigError, SolverError
from .filters import FilterReport, FilterSettings, filter_field, residual_gated_filter
from .sampling import SamplingSets, assemble_sampling, pointwise_error, select_rre_points
from .timeint import BDFScheme, NewtonSettings, NewtonSolver, SubiterationSettings

log = logging.getLogger(__name__)

INF = math.inf
CENTERINGS = ("lagged", "window")
ERROR_NORMS = ("all", "density")


@dataclass(frozen=True)
class AromConfig:
    """Everything that controls one AROM (or HDM) run."""

    w: int = 5
    m: int = 4
    z: float = INF
    delta: float = 0.8
    n_p: int | None = None  # default 2m
    N_t: int = 999
    T: float = 0.2
    order: int = 2
    sub: SubiterationSettings = field(default_factory=SubiterationSettings)
    filter: FilterSettings = field(default_factory=FilterSettings)
    newton: NewtonSettings = field(default_factory=NewtonSettings)
    centering: str = "lagged"
    error_norm: str = "all"

    def __post_init__(self):
        if self.n_p is None:
            object.__setattr__(self, "n_p", 2 * self.m)
        z = self.z
        if isinstance(z, str):
            z = float(z)
        if z != INF:
            if float(z) != int(z):
                raise ConfigError("z must be a positive integer or inf", "z")
            z = int(z)
        object.__setattr__(self, "z", z)
        checks = [
            (self.order in (1, 2), "order", "BDF order must be 1 or 2"),
            (self.w >= self.order + 1, "w", f"w >= s + 1 is required (w={self.w}, s={self.order})"),
            (self.m >= 1, "m", "m must be >= 1"),
            (self.m <= self.w, "m", f"m <= w is required (m={self.m}, w={self.w})"),
            (z == INF or z >= 1, "z", "z must be >= 1 or inf"),
            (0.0 < self.delta <= 1.0, "delta", "delta must lie in (0, 1]"),
            (self.n_p >= self.m, "n_p", f"n_p >= m is required (n_p={self.n_p}, m={self.m})"),
            (self.N_t >= self.w, "N_t", f"N_t >= w is required (N_t={self.N_t}, w={self.w})"),
            (self.T > 0.0, "T", "T must be positive"),
            (self.centering in CENTERINGS, "centering", f"centering must be one of {CENTERINGS}"),
            (self.error_norm in ERROR_NORMS, "error_norm", f"error_norm must be one of {ERROR_NORMS}"),
        ]
        for ok, key, msg in checks:
            if not ok:
                raise ConfigError(msg, key)

    @property
    def dt(self) -> float:
        return self.T / self.N_t

    @property
    def scheme(self) -> BDFScheme:
        return BDFScheme(self.order, self.dt)

    def is_full_step(self, k: int) -> bool:
        return k + 1 <= self.w or (self.z != INF and k % self.z == 0)

    def refreshes_after(self, k: int) -> bool:
        return k >= self.w - 1 and (self.z == INF or (k + 1) % self.z != 0)

    def updated(self, **changes) -> AromConfig:
        """Copy with changes; nested settings are addressed by their alias in :data:`NESTED`."""
        top = {f.name for f in fields(self)}
        direct, nested = {}, {}
        for key, value in changes.items():
            if key in top:
                direct[key] = value
            elif key in NESTED:
                owner, name = NESTED[key]
                nested.setdefault(owner, {})[name] = value
            else:
                raise ConfigError(f"unknown setting {key!r}", key)
        for owner, vals in nested.items():
            direct[owner] = replace(direct.get(owner, getattr(self, owner)), **vals)
        return replace(self, **direct)


# flat aliases for the nested settings objects
NESTED = {
    "eps_y": ("sub", "eps_y"),
    "j_max": ("sub", "j_max"),
    "cascade": ("filter", "cascade"),
    "eps_f": ("filter", "eps_f"),
    "filter_j_max": ("filter", "j_max"),
    "relative": ("filter", "relative"),
    "tol": ("newton", "tol"),
    "max_iter": ("newton", "max_iter"),
    "linear_solver": ("newton", "linear_solver"),
    "max_halvings": ("newton", "max_halvings"),
    "jacobian": ("newton", "jacobian"),
}


# ---------------------------------------------------------------------------
# records and metrics


@dataclass
class StepRecord:
    k: int
    kind: str  # "full" | "hybrid"
    n_gamma: int
    n_g: int = 0
    n_p: int = 0
    n_tilde: int = 0
    J: int = 0
    escalated: bool = False
    newton_iterations: int = 0
    filter_sweeps: int = 0
    error: float = float("nan")
    wall: float = 0.0  # seconds, solver work only


@dataclass
class RunMetrics:
    errors: np.ndarray
    e_bar: float
    s_bar: float
    s_star: float
    p_bar: float
    J_bar: float
    max_hybrid: float
    n_hybrid: int
    n_escalated: int
    t_H: float | None
    t_R: float
    speedup: float | None

    @property
    def hybrid_empty(self) -> bool:
        return self.n_hybrid == 0

    def summary(self) -> dict:
        return {
            "e_bar": self.e_bar,
            "s_bar": self.s_bar,
            "s_star": self.s_star,
            "p_bar": self.p_bar,
            "J_bar": self.J_bar,
            "max_hybrid_sampling": self.max_hybrid,
            "hybrid_steps": self.n_hybrid,
            "hybrid_set_empty": self.hybrid_empty,
            "escalations": self.n_escalated,
            "t_H": self.t_H,
            "t_R": self.t_R,
            "speedup": self.speedup,
        }


def relative_l1_error(gamma: np.ndarray, q: np.ndarray, density_only: bool = False) -> float:
    """Volume-weighted relative L1 distance; uniform cells make the volume cancel."""
    if gamma.shape != q.shape:
        raise ValueError(f"state shapes differ: {gamma.shape} vs {q.shape}")
    if density_only:
        gamma, q = gamma[:, :1], q[:, :1]
    den = float(np.abs(q).sum())
    return float(np.abs(gamma - q).sum()) / den if den > 0 else float(np.abs(gamma - q).sum())


def compute_metrics(records: list[StepRecord], n_cells: int, errors=None, t_H: float | None = None,
                    t_R: float | None = None) -> RunMetrics:
    """Time averages over steps ``1..N_t``; sampling figures are fractions of ``n_cells``.

    ``t_H``/``t_R`` are total wall times of the HDM and AROM runs (same step
    count), so their ratio is the ratio of per-snapshot averages.
    """
    if not records:
        raise ValueError("no step records")
    if errors is None:
        errors = np.array([r.error for r in records])
    errors = np.asarray(errors, dtype=float)
    if errors.size != len(records):
        raise ValueError("one error per step record is required")
    n = np.array([r.n_gamma for r in records], dtype=float) / n_cells
    hybrid = [r for r in records if r.kind == "hybrid"]
    hyb_n = np.array([r.n_gamma for r in hybrid], dtype=float) / n_cells
    if t_R is None:
        t_R = float(sum(r.wall for r in records))
    return RunMetrics(
        errors=errors,
        e_bar=float(np.mean(errors)),
        s_bar=float(np.mean(n)),
        s_star=float(np.mean(hyb_n)) if hybrid else 0.0,
        p_bar=float(np.mean([r.n_p for r in hybrid])) / n_cells if hybrid else 0.0,
        J_bar=float(np.mean([r.J for r in hybrid])) if hybrid else 0.0,
        max_hybrid=float(hyb_n.max()) if hybrid else 0.0,
        n_hybrid=len(hybrid),
        n_escalated=sum(r.escalated for r in records),
        t_H=t_H,
        t_R=t_R,
        speedup=(t_H / t_R) if (t_H is not None and t_R > 0) else None,
    )


# ---------------------------------------------------------------------------
# runs


@dataclass
class HdmResult:
    trajectory: np.ndarray | None  # (N_t + 1, n_cells, c)
    final: np.ndarray
    wall: float
    iterations: list[int]


@dataclass
class AromResult:
    trajectory: np.ndarray | None
    final: np.ndarray
    records: list[StepRecord]
    masks: np.ndarray | None  # (N_t + 1, n_cells) int8
    metrics: RunMetrics
    filter_reports: dict[int, FilterReport] = field(default_factory=dict)
    singular_values: dict[int, np.ndarray] = field(default_factory=dict)


def _solver(problem, config: AromConfig) -> NewtonSolver:
    _warm_up(problem)
    return NewtonSolver(problem, config.scheme, config.newton)


def _warm_up(problem) -> None:
    """Load or compile the kernels outside the timed region."""
    q = problem.initial_values
    problem.rhs(q)
    problem.jacobian_blocks(q)
    filter_field(q, problem.mesh, 2)


def run_hdm(problem, config: AromConfig, keep_trajectory: bool = True, callback=None) -> HdmResult:
    """Full Newton solve at every step; ``callback(k, values, t)`` after each."""
    solver = _solver(problem, config)
    q = problem.initial_values.copy()
    traj = None
    if keep_trajectory:
        traj = np.empty((config.N_t + 1,) + q.shape)
        traj[0] = q
    if callback is not None:
        callback(0, q, 0.0)
    history = [q]
    wall = 0.0
    its = []
    for k in range(1, config.N_t + 1):
        t = k * config.dt
        t0 = time.perf_counter()
        try:
            q = solver.full_solve(history, k, t)
        except AromError as exc:
            raise SolverError(f"HDM failed at step {k}: {exc}", getattr(exc, "residual", float("nan")), k) from exc
        wall += time.perf_counter() - t0
        its.append(solver.last_iterations)
        history.append(q)
        del history[: -config.order]
        if traj is not None:
            traj[k] = q
        if callback is not None:
            callback(k, q, t)
    return HdmResult(traj, q, wall, its)


class _Hybrid:
    """Mutable reduced-model state carried between steps."""

    def __init__(self):
        self.model: ReducedModel | None = None
        self.sets: SamplingSets | None = None


def run_arom(
    problem,
    config: AromConfig,
    reference=None,
    keep_trajectory: bool = True,
    keep_masks: bool = True,
    t_H: float | None = None,
    callback=None,
) -> AromResult:
    """Algorithm-1 time loop.

    ``reference`` is an HDM trajectory (indexable by step) used for the
    per-step error; without it errors are NaN.  ``callback(k, values, t, record)``
    runs after each step outside the timed region.
    """
    solver = _solver(problem, config)
    mesh = problem.mesh
    n_cells, c = problem.n_cells, problem.n_vars
    gamma = problem.initial_values.copy()
    traj = masks = None
    if keep_trajectory:
        traj = np.empty((config.N_t + 1,) + gamma.shape)
        traj[0] = gamma
    if keep_masks:
        masks = np.empty((config.N_t + 1, n_cells), dtype=np.int8)
        masks[0] = 1
    if callback is not None:
        callback(0, gamma, 0.0, None)

    history = [gamma]
    window: deque[np.ndarray] = deque(maxlen=config.w + 1)
    window.append(gamma.reshape(-1))
    state = _Hybrid()
    records: list[StepRecord] = []
    reports: dict[int, FilterReport] = {}
    svals: dict[int, np.ndarray] = {}

    for k in range(1, config.N_t + 1):
        t = k * config.dt
        t0 = time.perf_counter()
        rec = StepRecord(k=k, kind="full", n_gamma=n_cells)
        y = None
        sets_k = state.sets
        full = config.is_full_step(k) or state.model is None
        if not full:
            try:
                gamma_k, y, rec = _hybrid_step(problem, solver, config, state, history, k, t, rec, reports)
            except AromError as exc:
                log.info("step %d: hybrid solve failed (%s); doing a full solve", k, exc)
                full = True
                rec = StepRecord(k=k, kind="full", n_gamma=n_cells, escalated=True)
                y = None
        if full:
            try:
                gamma_k = solver.full_solve(history, k, t)
            except AromError as exc:
                raise SolverError(f"full solve failed at step {k}: {exc}", getattr(exc, "residual", float("nan")), k) from exc
            rec.newton_iterations = solver.last_iterations
        history.append(gamma_k)
        del history[: -config.order]
        window.append(gamma_k.reshape(-1))

        if config.refreshes_after(k):
            _refresh(problem, config, state, window, gamma_k, y, k, rec, svals)
        rec.wall = time.perf_counter() - t0

        if reference is not None:
            rec.error = relative_l1_error(gamma_k, np.asarray(reference[k]), config.error_norm == "density")
        if traj is not None:
            traj[k] = gamma_k
        if masks is not None:
            masks[k] = sets_k.mask() if rec.kind == "hybrid" else 1
        records.append(rec)
        if callback is not None:
            callback(k, gamma_k, t, rec)

    metrics = compute_metrics(records, n_cells, t_H=t_H)
    return AromResult(traj, gamma_k, records, masks, metrics, reports, svals)


def _hybrid_step(problem, solver: NewtonSolver, config: AromConfig, state: _Hybrid, history, k, t, rec, reports):
    model, sets = state.model, state.sets
    tilde = history[-1][sets.s_tilde]
    hat_values, y, J = solver.partial_solve(sets, tilde, history, k, t, model, config.sub)
    gamma_k = model.full(y)
    gamma_k[sets.s_hat] = hat_values
    hist, dtb = solver.step_terms(history, k)

    def residual(v, cells=None):
        return solver.cell_residual(v, hist, dtb, t, cells)

    gamma_k, report = residual_gated_filter(
        gamma_k, problem.mesh, residual, config.filter, problem.dilate, problem.admissible
    )
    reports[k] = report
    rec = StepRecord(
        k=k,
        kind="hybrid",
        n_gamma=sets.n_s,
        n_g=int(sets.g.size),
        n_p=int(sets.p.size),
        n_tilde=int(sets.s_tilde.size),
        J=J,
        newton_iterations=solver.last_iterations,
        filter_sweeps=report.total_sweeps,
    )
    return gamma_k, y, rec


def _refresh(problem, config: AromConfig, state: _Hybrid, window, gamma_k, y, k, rec, svals):
    """Rebuild basis, points, sets and reference state for step ``k + 1``."""
    c = problem.n_vars
    G = np.empty(0, dtype=np.int64)
    if k >= config.w and state.model is not None:
        model = state.model
        if y is None:
            y = model.coordinates(gamma_k)
        G, _ = select_rre_points(pointwise_error(gamma_k, model, y), config.delta)
    snaps = list(window)[-config.w:]
    if config.centering == "lagged" and len(window) == config.w + 1:
        psi_lag = reference_state(list(window)[:-1])
    else:
        psi_lag = reference_state(snaps)
    X = np.stack(snaps, axis=1) - psi_lag[:, None]
    res = pod(X, config.m)
    svals[k] = res.singular_values
    Phi = res.basis
    P = odeim_select(Phi, config.n_p, c) if res.rank else np.empty(0, dtype=np.int64)
    try:
        state.model = ReducedModel(Phi, reference_state(snaps), P, c, config.w, res.singular_values)
    except AromError as exc:
        log.info("step %d: reduced model unusable (%s); next step is a full solve", k, exc)
        state.model = None
        state.sets = None
        return
    state.sets = assemble_sampling(G, P, problem.mesh, problem.radius)
