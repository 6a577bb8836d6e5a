from __future__ import annotations

import numpy as np
import pytest

from arom.errors import SolverError
from arom.euler import DIRICHLET, BoundarySpec, EulerProblem, GasModel
from arom.mesh import Mesh, primitive_to_conservative
from arom.presets import IMPLOSION, SOD
from arom.sampling import assemble_sampling
from arom.timeint import (
    BDF_COEFFICIENTS,
    BDFScheme,
    NewtonSettings,
    NewtonSolver,
    SubiterationSettings,
    bdf_function,
    history_sum,
)


def smooth_pulse(n=60, limiter="none"):
    mesh = Mesh(((0.0, 1.0),), (n,))
    (x,) = mesh.centers()
    rho = 1 + 0.2 * np.exp(-(((x - 0.4) / 0.08) ** 2))
    U0 = primitive_to_conservative(rho, np.full((n, 1), 0.5), np.ones(n), 1.4)
    return EulerProblem(mesh, GasModel(1.4), BoundarySpec.uniform(DIRICHLET, 1), U0, limiter=limiter)


def integrate(prob, N, T, order=2, tol=1e-13):
    s = NewtonSolver(prob, BDFScheme(order, T / N), NewtonSettings(tol=tol))
    hist = [prob.initial_values]
    for k in range(1, N + 1):
        hist.append(s.full_solve(hist, k, k * T / N))
        hist = hist[-order:]
    return hist[-1]


def measured_order(order=2):
    prob = smooth_pulse()
    ref = integrate(prob, 1280, 0.1, order)
    errs = np.array([np.abs(integrate(prob, N, 0.1, order) - ref).max() for N in (10, 20, 40)])
    return np.log2(errs[:-1] / errs[1:])


def test_bdf_coefficients_consistent():
    for s, (a, beta) in BDF_COEFFICIENTS.items():
        assert a[-1] == 1.0 and abs(a.sum()) < 1e-15
        # exact for polynomials of degree s: sum a_j t_j^s = s * beta * t_k^(s-1) with t = j
        j = np.arange(s + 1, dtype=float)
        assert np.dot(a, j**s) == pytest.approx(beta * s * j[-1] ** (s - 1))
    sch = BDFScheme(2, 0.1)
    assert sch.steps_back(1) == 1 and sch.steps_back(5) == 2
    assert sch.coefficients(1)[1] == 1.0
    with pytest.raises(ValueError):
        BDFScheme(3, 0.1)


def test_history_sum():
    h = [np.full(3, 1.0), np.full(3, 2.0)]
    a = np.array([1 / 3, -4 / 3, 1.0])
    assert np.allclose(history_sum(h, a), 1 / 3 - 8 / 3)
    with pytest.raises(ValueError):
        history_sum(h[:1], a)


def test_bdf2_order():
    p = measured_order(2)
    assert np.all((p > 1.9) & (p < 2.1)), p


def test_bdf1_order():
    p = measured_order(1)
    assert np.all((p > 0.9) & (p < 1.1)), p


def test_newton_reaches_tolerance():
    prob = SOD.with_cells(99).problem()
    sch = BDFScheme(2, 0.2 / 200)
    s = NewtonSolver(prob, sch, NewtonSettings(tol=1e-11))
    h = [prob.initial_values]
    q = s.full_solve(h, 1, sch.dt)
    R = q - bdf_function(prob, q, h, sch, 1, sch.dt)
    assert np.abs(R).max() <= 1e-11
    assert 1 <= s.last_iterations <= 20


@pytest.mark.parametrize("solver", ["splu", "bicgstab", "auto"])
def test_linear_solvers_agree_2d(solver):
    prob = IMPLOSION.with_cells(16).problem()
    sch = BDFScheme(2, 0.5 / 1650)
    ref = NewtonSolver(prob, sch, NewtonSettings(tol=1e-12, linear_solver="splu")).full_solve([prob.initial_values], 1, sch.dt)
    got = NewtonSolver(prob, sch, NewtonSettings(tol=1e-12, linear_solver=solver)).full_solve([prob.initial_values], 1, sch.dt)
    assert np.abs(got - ref).max() < 1e-10


def test_banded_matches_splu_1d():
    prob = SOD.with_cells(49).problem()
    sch = BDFScheme(2, 0.001)
    a = NewtonSolver(prob, sch, NewtonSettings(linear_solver="banded")).full_solve([prob.initial_values], 1, sch.dt)
    b = NewtonSolver(prob, sch, NewtonSettings(linear_solver="splu")).full_solve([prob.initial_values], 1, sch.dt)
    assert np.abs(a - b).max() < 1e-12


def test_newton_failure_raises():
    prob = SOD.with_cells(49).problem()
    sch = BDFScheme(2, 0.01)
    with pytest.raises(SolverError):
        NewtonSolver(prob, sch, NewtonSettings(tol=1e-16, max_iter=1)).full_solve([prob.initial_values], 1, sch.dt)


def test_settings_validation():
    with pytest.raises(ValueError):
        NewtonSettings(linear_solver="cg")
    with pytest.raises(ValueError):
        NewtonSettings(jacobian="exact")
    with pytest.raises(ValueError):
        SubiterationSettings(eps_y=0)
    with pytest.raises(ValueError):
        SubiterationSettings(j_max=0)


def test_partial_solve_on_all_cells_equals_full():
    prob = SOD.with_cells(40).problem()
    sch = BDFScheme(2, 0.001)
    s = NewtonSolver(prob, sch, NewtonSettings(tol=1e-12))
    h = [prob.initial_values]
    full = s.full_solve(h, 1, sch.dt)
    sets = assemble_sampling(np.arange(40), [], prob.mesh)
    vals, y, J = s.partial_solve(sets, h[-1][sets.s_tilde], h, 1, sch.dt, None, SubiterationSettings())
    assert J == 1 and y is None
    assert np.array_equal(vals, full)


def test_partial_solve_freezes_other_cells():
    prob = SOD.with_cells(40).problem()
    sch = BDFScheme(2, 0.001)
    s = NewtonSolver(prob, sch, NewtonSettings(tol=1e-12))
    h = [prob.initial_values]
    sets = assemble_sampling(np.arange(15, 25), [], prob.mesh)
    vals, _, _ = s.partial_solve(sets, h[-1][sets.s_tilde], h, 1, sch.dt, None, SubiterationSettings())
    work = h[-1].copy()
    work[sets.s_hat] = vals
    R = s.residual(work, *s.step_terms(h, 1), sch.dt, sets.s_hat)
    assert np.abs(R).max() <= 1e-12
