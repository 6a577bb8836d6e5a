from __future__ import annotations

import numpy as np
import pytest

from arom.filters import (
    SHAPIRO_STENCILS,
    FilterSettings,
    filter_field,
    residual_gated_filter,
    shapiro_filter_1d,
)
from arom.mesh import Mesh
from arom.presets import IMPLOSION, SOD
from arom.timeint import BDFScheme, NewtonSettings, NewtonSolver


def test_stencils_normalised_and_symmetric():
    for order, w in SHAPIRO_STENCILS.items():
        assert w.size == order + 1 and w.sum() == 1.0
        assert np.array_equal(w, w[::-1])


@pytest.mark.parametrize("order", [2, 4, 6])
def test_dc_preserved_exactly(order, rng):
    for a in rng.normal(size=50) * 10:
        line = np.full(17, a)
        assert np.array_equal(shapiro_filter_1d(line, order), line)
    mesh = Mesh(((0, 1), (0, 1)), (6, 5))
    const = np.tile(rng.normal(size=4), (30, 1))
    assert np.array_equal(filter_field(const, mesh, order), const)


def test_nyquist_annihilated_order2(rng):
    for a in rng.normal(size=20):
        line = a * (-1.0) ** np.arange(16)
        assert np.array_equal(shapiro_filter_1d(line, 2)[1:-1], np.zeros(14))


@pytest.mark.parametrize("order", [4, 6])
def test_nyquist_damped_higher_orders(order):
    line = (-1.0) ** np.arange(40)
    h = order // 2
    assert np.abs(shapiro_filter_1d(line, order)[h:-h]).max() < 1e-14


def test_higher_order_is_more_selective():
    x = np.arange(64)
    smooth = np.sin(2 * np.pi * x / 32)
    errs = [np.abs(shapiro_filter_1d(smooth, o) - smooth)[4:-4].max() for o in (2, 4, 6)]
    assert errs[0] > errs[1] > errs[2]


def test_filter_field_axis_by_axis(rng):
    mesh = Mesh(((0, 1), (0, 1)), (5, 4))
    V = rng.normal(size=(20, 4))
    out = filter_field(V, mesh, 2).reshape(5, 4, 4)
    G = V.reshape(5, 4, 4)
    expect = np.empty_like(G)
    tmp = np.apply_along_axis(shapiro_filter_1d, 0, G, 2)
    expect = np.apply_along_axis(shapiro_filter_1d, 1, tmp, 2)
    assert np.allclose(out, expect, rtol=0, atol=1e-14)


def test_bad_order():
    with pytest.raises(ValueError):
        shapiro_filter_1d(np.ones(5), 3)
    with pytest.raises(ValueError):
        FilterSettings(cascade=(2, 8))
    with pytest.raises(ValueError):
        FilterSettings(eps_f=0)


def _converged(preset, cells, steps=4):
    prob = preset.with_cells(cells).problem()
    sch = BDFScheme(2, preset.T / preset.N_t)
    solver = NewtonSolver(prob, sch, NewtonSettings(tol=1e-12))
    hist = [prob.initial_values]
    for k in range(1, steps + 1):
        hist.append(solver.full_solve(hist, k, k * sch.dt))
    k = steps + 1
    q = solver.full_solve(hist, k, k * sch.dt)
    h, dtb = solver.step_terms(hist, k)

    def residual(v, cells=None):
        return solver.cell_residual(v, h, dtb, k * sch.dt, cells)

    return prob, q, residual


def test_gate_monotone_100_perturbed_states(rng):
    settings = FilterSettings()
    cases = [_converged(SOD, 99), _converged(IMPLOSION, 16)]
    for trial in range(100):
        prob, q, residual = cases[trial % 2]
        v = q.copy()
        n = int(rng.integers(1, max(2, prob.n_cells // 10)))
        cells = rng.choice(prob.n_cells, n, replace=False)
        v[cells] *= 1 + 0.05 * rng.normal(size=(n, prob.n_vars))
        v[cells, -1] = np.abs(v[cells, -1])
        r_in = residual(v)
        out, rep = residual_gated_filter(v, prob.mesh, residual, settings, prob.dilate, prob.admissible)
        r_out = residual(out)
        assert np.all(r_out <= r_in + 1e-14), trial
        assert prob.admissible(out).all()
        for order, count in rep.sweeps.items():
            assert count <= settings.j_max
            assert len(rep.kept[order]) == count


def test_spike_removed_from_converged_state():
    prob, q, residual = _converged(SOD, 99)
    v = q.copy()
    v[30, 0] += 0.05
    out, rep = residual_gated_filter(v, prob.mesh, residual, FilterSettings(), prob.dilate, prob.admissible)
    assert abs(out[30, 0] - q[30, 0]) < 0.05
    assert residual(out).max() < residual(v).max()
    assert rep.total_sweeps >= 1


def test_converged_state_untouched():
    prob, q, residual = _converged(SOD, 99)
    # a converged HDM state: residual at solver tolerance, filtering cannot improve much
    out, rep = residual_gated_filter(q, prob.mesh, residual, FilterSettings(), prob.dilate)
    assert np.all(residual(out) <= residual(q) + 1e-14)


def test_zero_residual_state_unchanged():
    mesh = Mesh(((0, 1),), (20,))
    v = np.random.default_rng(0).normal(size=(20, 3))

    def residual(x, cells=None):
        r = np.zeros(20)
        return r if cells is None else r[cells]

    out, rep = residual_gated_filter(v, mesh, residual, FilterSettings(), lambda m: m)
    assert np.array_equal(out, v)
    assert all(k == [0] for k in rep.kept.values()) and rep.sweeps == {2: 1, 4: 1, 6: 1}


def test_empty_cascade_is_identity(rng):
    v = rng.normal(size=(10, 3))
    out, rep = residual_gated_filter(v, Mesh(((0, 1),), (10,)), None, FilterSettings(cascade=()), None)
    assert np.array_equal(out, v) and rep.total_sweeps == 0
