"""Compare the numba and numpy kernel backends.

    python benchmarks/bench_kernels.py [--preset implosion] [--repeat 5] [--end-to-end]

Kernel timings call both implementations directly on the same inputs.
``--end-to-end`` also times a short HDM run in two subprocesses, one with
``AROM_NUMBA=0``, since the backend is chosen at import time.
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from arom import kernels
from arom.filters import SHAPIRO_STENCILS
from arom.presets import get_preset

E2E = """
import time
from arom.config import preset_config
from arom.driver import run_hdm
from arom.presets import get_preset
p = get_preset({preset!r})
cfg = preset_config(p).updated(N_t=max(20, p.N_t // 50), T=p.T / 50)
prob = p.problem()
t = time.perf_counter()
run_hdm(prob, cfg, keep_trajectory=False)
print(time.perf_counter() - t)
"""


def _inputs(preset: str):
    prob = get_preset(preset).problem()
    rng = np.random.default_rng(1)
    U = prob.initial_values * (1 + 1e-3 * rng.standard_normal(prob.initial_values.shape))
    st = prob.stencil(None)
    fc = st.axes[0]
    P = prob.pad(U)
    src, sgn = prob.ghost_map()
    return prob, U, P, fc, src, sgn


def _best(fn, repeat: int) -> float:
    fn()  # compile / warm caches
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def bench(preset: str, repeat: int) -> list[tuple[str, float, float, float]]:
    prob, U, P, fc, src, sgn = _inputs(preset)
    frozen = prob.pad_slices(prob.initial_values)
    g, lim, efix = prob.gas.gamma, prob._limiter_code, prob.entropy_fix
    flux_args = (P, fc.ia, fc.ib, fc.ic, fc.id, fc.normal, g, lim, efix)
    jac_args = (P, fc.ia, fc.ib, fc.ic, fc.id, src, sgn, prob._signs, fc.normal, g, lim, efix, prob.fd_eps)
    lines = np.ascontiguousarray(U.T.reshape(-1, prob.mesh.shape[-1] if prob.mesh.dim == 2 else U.shape[0]))
    w6 = SHAPIRO_STENCILS[6]
    nx, ny = prob.mesh.shape
    V = U.reshape(nx, ny, -1)
    mask = np.zeros(prob.n_cells, dtype=bool)
    mask[:: max(1, prob.n_cells // 50)] = True
    cases = [
        ("face_fluxes", lambda: kernels.face_fluxes_nb(*flux_args), lambda: kernels.face_fluxes_np(*flux_args)),
        ("face_jacobians", lambda: kernels.face_jacobians_nb(*jac_args), lambda: kernels.face_jacobians_np(*jac_args)),
        ("shapiro_lines(6)", lambda: kernels.shapiro_lines_nb(lines, w6), lambda: kernels.shapiro_lines_np(lines, w6)),
        ("shapiro_grid(6)", lambda: kernels.shapiro_grid_nb(V, w6, 0), lambda: kernels.shapiro_grid_np(V, w6, 0)),
        ("pad_values", lambda: kernels.pad_values_nb(U, src, sgn, frozen),
         lambda: kernels.pad_values_np(U, src, sgn, frozen)),
        ("dilate_mask", lambda: kernels.dilate_mask_nb(mask, nx, ny, prob.radius, prob.mesh.dim == 2),
         lambda: kernels.dilate_mask_np(mask, nx, ny, prob.radius, prob.mesh.dim == 2)),
    ]
    rows = []
    for name, nb, npy in cases:
        a, b = nb(), npy()
        a, b = (a[0], b[0]) if isinstance(a, tuple) else (a, b)
        diff = float(np.max(np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))))
        rows.append((name, _best(nb, repeat), _best(npy, repeat), diff))
    return rows


def end_to_end(preset: str) -> dict[str, float]:
    out = {}
    for label, flag in (("numba", "1"), ("numpy", "0")):
        env = dict(os.environ, AROM_NUMBA=flag)
        res = subprocess.run([sys.executable, "-c", E2E.format(preset=preset)], env=env, capture_output=True,
                             text=True, check=True)
        out[label] = float(res.stdout.strip().splitlines()[-1])
    return out


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--preset", default="implosion")
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--end-to-end", action="store_true")
    args = ap.parse_args(argv)
    print(f"preset={args.preset} (best of {args.repeat})")
    print(f"{'kernel':<18} {'numba ms':>10} {'numpy ms':>10} {'ratio':>7} {'max |diff|':>11}")
    for name, t_nb, t_np, diff in bench(args.preset, args.repeat):
        print(f"{name:<18} {1e3 * t_nb:10.3f} {1e3 * t_np:10.3f} {t_np / t_nb:7.1f} {diff:11.2e}")
    if args.end_to_end:
        e = end_to_end(args.preset)
        print(f"short HDM run: numba {e['numba']:.2f}s, numpy {e['numpy']:.2f}s ({e['numpy'] / e['numba']:.1f}x)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
