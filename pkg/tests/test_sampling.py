from __future__ import annotations

import numpy as np
import pytest

from arom.basis import ReducedModel
from arom.mesh import Mesh
from arom.sampling import (
    BREVE,
    HAT,
    TILDE,
    assemble_sampling,
    pointwise_error,
    rre,
    select_rre_points,
    stencil_neighbors,
)


def test_rre_minimality_1000_vectors(rng):
    for trial in range(1000):
        n = int(rng.integers(1, 200))
        kind = trial % 3
        if kind == 0:
            e = rng.random(n)
        elif kind == 1:
            e = rng.random(n) ** 8  # heavy concentration
        else:
            e = rng.integers(0, 4, n).astype(float)  # ties and zeros
        if e.sum() == 0:
            e[0] = 1.0
        delta = float(rng.uniform(0.05, 1.0))
        G, n_g = select_rre_points(e, delta)
        assert G.size == n_g and np.all(np.diff(G) > 0)
        assert rre(e, n_g) >= delta - 1e-12
        if n_g > 1:
            assert rre(e, n_g - 1) < delta
        assert np.isclose(e[G].sum(), np.sort(e)[::-1][:n_g].sum())


def test_rre_edge_cases():
    G, n = select_rre_points(np.zeros(5), 0.9)
    assert n == 0 and G.size == 0
    G, n = select_rre_points(np.array([0.0, 3.0, 1.0]), 0.75)
    assert list(G) == [1]
    G, n = select_rre_points(np.array([0.0, 3.0, 1.0]), 1.0)
    assert list(G) == [1, 2]
    with pytest.raises(ValueError):
        select_rre_points(np.ones(3), 0.0)


def test_pointwise_error_per_cell(rng):
    Phi = np.linalg.qr(rng.normal(size=(12, 2)))[0]
    model = ReducedModel(Phi, np.zeros(12), np.array([0, 1, 2]), 3)
    snap = rng.normal(size=(4, 3))
    y = rng.normal(size=2)
    e = pointwise_error(snap, model, y)
    dev = snap - (Phi @ y).reshape(4, 3)
    assert np.allclose(e, (dev**2).sum(axis=1))


def _brute_neighbors(mesh, cells, radius):
    nx, ny = mesh.shape
    out = set()
    for c in cells:
        ix, iy = divmod(int(c), ny)
        for o in range(-radius, radius + 1):
            for dx, dy in ((o, 0), (0, o)):
                jx, jy = ix + dx, iy + dy
                if 0 <= jx < nx and 0 <= jy < ny:
                    out.add(jx * ny + jy)
    return sorted(out - set(int(c) for c in cells))


def test_stencil_neighbors_oracle(rng):
    for mesh in (Mesh(((0, 1),), (30,)), Mesh(((0, 1), (0, 1)), (9, 7))):
        for _ in range(30):
            cells = rng.choice(mesh.n_cells, size=int(rng.integers(1, 8)), replace=False)
            for r in (1, 2):
                assert list(stencil_neighbors(mesh, cells, r)) == _brute_neighbors(mesh, cells, r)
    assert stencil_neighbors(Mesh(((0, 1),), (5,)), []).size == 0


def test_assemble_partition(rng):
    mesh = Mesh(((0, 1), (0, 1)), (10, 10))
    G = rng.choice(100, 7, replace=False)
    P = rng.choice(100, 5, replace=False)
    s = assemble_sampling(G, P, mesh)
    assert np.array_equal(s.s_hat, np.union1d(G, P))
    assert np.array_equal(np.union1d(s.s_hat, s.s_breve), np.arange(100))
    assert np.intersect1d(s.s_hat, s.s_breve).size == 0
    assert np.intersect1d(s.s_tilde, s.s_hat).size == 0
    assert np.all(np.isin(s.s_tilde, s.s_breve))
    mask = s.mask()
    assert np.all(mask[s.s_hat] == HAT) and np.all(mask[s.s_tilde] == TILDE)
    assert np.sum(mask == BREVE) == 100 - s.n_s - s.s_tilde.size
    with pytest.raises(IndexError):
        assemble_sampling([100], [], mesh)
