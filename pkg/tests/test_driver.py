from __future__ import annotations

import math

import numpy as np
import pytest

from arom.config import preset_config
from arom.driver import AromConfig, StepRecord, compute_metrics, relative_l1_error, run_arom, run_hdm
from arom.errors import ConfigError
from arom.presets import IMPLOSION, SOD


def _schedule(cfg, N):
    return [k for k in range(1, N + 1) if cfg.is_full_step(k)]


def test_full_step_schedule():
    cfg = AromConfig(w=6, m=4, z=7, N_t=30)
    assert _schedule(cfg, 30) == [1, 2, 3, 4, 5, 7, 14, 21, 28]
    inf = AromConfig(w=5, m=4, N_t=30)
    assert _schedule(inf, 30) == [1, 2, 3, 4]
    assert _schedule(AromConfig(w=5, m=4, z=1, N_t=10), 10) == list(range(1, 11))


def test_refresh_schedule():
    cfg = AromConfig(w=6, m=4, z=7, N_t=30)
    refresh = [k for k in range(1, 31) if cfg.refreshes_after(k)]
    # no refresh right before a full step; first refresh once the window is filled
    assert refresh[0] == 5 and 6 not in refresh and 13 not in refresh and 7 in refresh
    assert not any(AromConfig(w=5, m=4, z=1, N_t=10).refreshes_after(k) for k in range(1, 11))


@pytest.mark.parametrize(
    "kwargs, key",
    [
        (dict(w=2, m=1), "w"),
        (dict(m=6, w=5), "m"),
        (dict(m=0), "m"),
        (dict(z=0), "z"),
        (dict(z=2.5), "z"),
        (dict(delta=0.0), "delta"),
        (dict(delta=1.5), "delta"),
        (dict(n_p=3, m=4), "n_p"),
        (dict(N_t=3), "N_t"),
        (dict(T=-1.0), "T"),
        (dict(order=3), "order"),
        (dict(centering="middle"), "centering"),
    ],
)
def test_config_validation(kwargs, key):
    with pytest.raises(ConfigError) as info:
        AromConfig(**kwargs)
    assert info.value.key == key


def test_config_defaults_and_update():
    cfg = AromConfig(m=3)
    assert cfg.n_p == 6 and cfg.z == math.inf
    assert AromConfig(z="inf").z == math.inf and AromConfig(z=7.0).z == 7
    new = cfg.updated(eps_y=1e-6, cascade=(2,), tol=1e-9, filter_j_max=3, z=4)
    assert new.sub.eps_y == 1e-6 and new.filter.cascade == (2,) and new.filter.j_max == 3
    assert new.newton.tol == 1e-9 and new.z == 4 and cfg.z == math.inf
    with pytest.raises(ConfigError):
        cfg.updated(bogus=1)


def test_preset_configs():
    s = preset_config(SOD)
    assert (s.w, s.m, s.z, s.delta, s.n_p, s.N_t, s.T) == (5, 4, math.inf, 0.8, 8, 999, 0.2)
    assert s.filter.cascade == (2, 4, 6) and s.newton.tol == 1e-10
    i = preset_config(IMPLOSION)
    assert (i.w, i.m, i.z, i.delta, i.n_p, i.N_t, i.T) == (6, 4, 7, 0.9, 23, 1650, 0.5)
    assert i.newton.tol == 1e-8


def test_relative_error():
    q = np.ones((4, 3))
    g = q.copy()
    g[0, 0] = 1.5
    assert relative_l1_error(g, q) == pytest.approx(0.5 / 12)
    assert relative_l1_error(g, q, density_only=True) == pytest.approx(0.5 / 4)
    with pytest.raises(ValueError):
        relative_l1_error(g, q[:3])


def test_metrics_on_hand_records():
    recs = [
        StepRecord(1, "full", 10),
        StepRecord(2, "hybrid", 4, n_p=2, J=3),
        StepRecord(3, "hybrid", 2, n_p=1, J=2, wall=0.5),
        StepRecord(4, "full", 10, escalated=True, wall=0.5),
    ]
    m = compute_metrics(recs, 10, errors=[0.0, 0.1, 0.2, 0.1], t_H=2.0)
    assert m.s_bar == pytest.approx(26 / 40)
    assert m.s_star == pytest.approx(0.3)
    assert m.p_bar == pytest.approx(0.15)
    assert m.J_bar == pytest.approx(2.5)
    assert m.max_hybrid == pytest.approx(0.4)
    assert m.e_bar == pytest.approx(0.1)
    assert m.n_hybrid == 2 and m.n_escalated == 1
    assert m.t_R == pytest.approx(1.0) and m.speedup == pytest.approx(2.0)
    # N_t * s_bar equals the summed per-step sampling fractions
    assert 4 * m.s_bar == pytest.approx(sum(r.n_gamma for r in recs) / 10)
    only_full = compute_metrics(recs[:1], 10, errors=[0.0])
    assert only_full.hybrid_empty and only_full.s_star == 0.0 and only_full.speedup is None


def _small_sod(N_t=60):
    prob = SOD.with_cells(99).problem()
    cfg = preset_config(SOD).updated(N_t=N_t, T=0.2 * N_t / 300)
    return prob, cfg


def test_z1_matches_hdm_bitwise_small():
    prob, cfg = _small_sod(20)
    h = run_hdm(prob, cfg)
    a = run_arom(prob, cfg.updated(z=1), reference=h.trajectory)
    assert np.array_equal(a.trajectory, h.trajectory)
    assert all(r.kind == "full" for r in a.records)
    assert np.all(a.masks == 1) and a.metrics.e_bar == 0.0


def test_small_sod_hybrid_run():
    prob, cfg = _small_sod(60)
    h = run_hdm(prob, cfg)
    seen = []
    a = run_arom(prob, cfg.updated(z=5), reference=h.trajectory, callback=lambda k, g, t, r: seen.append(k))
    assert seen == list(range(61))
    kinds = [r.kind for r in a.records]
    assert kinds[:4] == ["full"] * 4
    assert kinds[9] == "full" and "hybrid" in kinds  # k = 10 is a full step
    for rec in a.records:
        row = a.masks[rec.k]
        if rec.kind == "full":
            assert np.all(row == 1)
        else:
            assert 0 < rec.n_gamma < prob.n_cells
            assert np.count_nonzero(row == 1) == rec.n_gamma
            assert np.count_nonzero(row == 2) == rec.n_tilde
            assert rec.n_p <= rec.n_gamma and rec.J >= 1
    assert np.all(np.isfinite(a.trajectory))
    assert np.all(a.metrics.errors[:4] == 0.0)
    assert a.metrics.e_bar < 0.05
    assert prob.admissible(a.final).all()


def test_hdm_callback_and_iterations():
    prob, cfg = _small_sod(8)
    ks = []
    h = run_hdm(prob, cfg, keep_trajectory=False, callback=lambda k, q, t: ks.append((k, t)))
    assert h.trajectory is None and len(h.iterations) == 8
    assert ks[0] == (0, 0.0) and ks[-1][0] == 8 and ks[-1][1] == pytest.approx(cfg.T)
