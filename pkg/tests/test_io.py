from __future__ import annotations

import json
import math

import numpy as np

from arom.driver import StepRecord, compute_metrics
from arom.io import (
    METRIC_COLUMNS,
    read_metrics_csv,
    read_profile,
    summary_dict,
    write_masks,
    write_metrics_csv,
    write_profile,
    write_summary,
)
from arom.mesh import Mesh


def test_metrics_csv_roundtrip(tmp_path):
    recs = [StepRecord(1, "full", 10, wall=0.002), StepRecord(2, "hybrid", 3, n_p=2, J=4, error=0.25, wall=0.001)]
    path = tmp_path / "m.csv"
    write_metrics_csv(path, recs)
    rows = read_metrics_csv(path)
    assert tuple(rows[0]) == METRIC_COLUMNS and len(rows) == 2
    assert rows[1]["kind"] == "hybrid" and int(rows[1]["J"]) == 4 and float(rows[1]["e_k"]) == 0.25
    assert float(rows[0]["wall_ms"]) == 2.0


def test_summary_json(tmp_path):
    recs = [StepRecord(1, "full", 10)]
    s = summary_dict(compute_metrics(recs, 10, errors=[float("nan")]), z=math.inf)
    path = tmp_path / "s.json"
    write_summary(path, s)
    back = json.loads(path.read_text())
    assert back["e_bar"] is None and back["z"] == "inf" and back["speedup"] is None


def test_masks(tmp_path):
    write_masks(tmp_path / "m.npy", np.array([[1, 2, 0]]))
    m = np.load(tmp_path / "m.npy")
    assert m.dtype == np.int8 and m.tolist() == [[1, 2, 0]]


def test_profiles(tmp_path):
    m1 = Mesh(((0, 1),), (4,))
    v = np.arange(12.0).reshape(4, 3)
    write_profile(tmp_path / "a.dat", m1, v, 0.2, "hdm")
    a = read_profile(tmp_path / "a.dat")
    assert a.shape == (4, 2) and np.allclose(a[:, 0], [0.125, 0.375, 0.625, 0.875]) and np.allclose(a[:, 1], v[:, 0])
    m2 = Mesh(((0, 1), (0, 2)), (2, 3))
    w = np.arange(24.0).reshape(6, 4)
    write_profile(tmp_path / "b.dat", m2, w, 0.1)
    b = read_profile(tmp_path / "b.dat")
    assert b.shape == (6, 3) and np.allclose(b[:, 2], w[:, 0])
    assert np.allclose(b[:3, 0], 0.25) and np.allclose(b[:3, 1], [1 / 3, 1.0, 5 / 3])
