"""Command line: ``arom {hdm,arom,sweep,compare} --preset sod|implosion [options]``."""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import _accel
from .config import RunSetup, dump_config, load_config, parse_cells, parse_orders, parse_z
from .driver import AromConfig, relative_l1_error, run_arom, run_hdm
from .errors import AromError, ConfigError
from .io import summary_dict, write_masks, write_metrics_csv, write_profile, write_summary
from .mesh import SnapshotWriter, primitive_to_conservative
from .presets import PRESETS
from .riemann import exact_sod_solution

log = logging.getLogger("arom")

OUT_ENV = "AROM_OUT_DIR"
SWEEP_AXES = ("z", "delta", "w", "m", "filter-order")


def _float_list(text: str) -> list[float]:
    return [parse_z(p) if p.strip().lower() in ("inf", "infinity") else float(p) for p in text.split(",") if p.strip()]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="arom", description="Adaptive reduced-order model for the Euler equations.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--preset", choices=sorted(PRESETS), help="problem preset (overrides the config file)")
    common.add_argument("--config", type=Path, help="INI configuration file")
    common.add_argument("--out", type=Path, help=f"output directory (default ${OUT_ENV} or ./arom_out)")
    common.add_argument("--dump-stride", type=int, default=0, help="write a snapshot every n steps (0: none)")
    common.add_argument("--threads", type=int, help="worker threads for the compiled kernels")
    common.add_argument("--dump-config", action="store_true", help="print the effective configuration and exit")
    g = common.add_argument_group("overrides")
    g.add_argument("--cells", type=parse_cells, help="cells per axis, e.g. 499 or 100,100")
    g.add_argument("--limiter", choices=("none", "conservative", "primitive"))
    g.add_argument("--entropy-fix", type=float)
    g.add_argument("--T", type=float, dest="T")
    g.add_argument("--nt", type=int, dest="N_t", help="number of time steps")
    g.add_argument("--order", type=int, choices=(1, 2))
    g.add_argument("--z", type=parse_z, help="full-solve period (integer or inf)")
    g.add_argument("--delta", type=float)
    g.add_argument("--w", type=int)
    g.add_argument("--m", type=int)
    g.add_argument("--np", type=int, dest="n_p")
    g.add_argument("--filters", type=parse_orders, help="filter cascade, e.g. 2,4,6 (none: no filtering)")
    g.add_argument("--eps-y", type=float)
    g.add_argument("--eps-f", type=float)
    g.add_argument("--tol", type=float, help="Newton tolerance")
    g.add_argument("--linear-solver", choices=("auto", "banded", "splu", "bicgstab"))
    g.add_argument("--error", choices=("all", "density"), dest="error_norm", help="variables in e_k")

    sub.add_parser("hdm", parents=[common], help="full-order reference run")
    sub.add_parser("arom", parents=[common], help="AROM run (e_k is NaN without a reference)")
    sw = sub.add_parser("sweep", parents=[common], help="AROM runs over one parameter against one HDM reference")
    sw.add_argument("--axis", required=True, choices=SWEEP_AXES)
    sw.add_argument("--values", required=True, type=_float_list, help="comma list; inf allowed for z")
    cmp_ = sub.add_parser("compare", parents=[common], help="HDM + AROM with errors, speedup and profiles")
    cmp_.add_argument("--times", type=_float_list, help="profile times (default: final time)")
    cmp_.add_argument("--coarse", type=parse_cells, help="also run a coarse HDM with these cells")
    return p


def _setup(args) -> RunSetup:
    setup = load_config(args.config, args.preset)
    preset = setup.preset
    if args.cells is not None:
        cells = args.cells[0] if len(args.cells) == 1 else args.cells
        if not isinstance(cells, int) and len(cells) != len(preset.cells):
            raise ConfigError(f"--cells needs {len(preset.cells)} entries", "cells")
        preset = preset.with_cells(cells)
    limiter = args.limiter or setup.limiter
    efix = setup.entropy_fix if args.entropy_fix is None else args.entropy_fix
    changes = {}
    for key in ("T", "N_t", "order", "z", "delta", "w", "m", "n_p", "eps_y", "eps_f", "tol", "linear_solver",
                "error_norm"):
        value = getattr(args, key, None)
        if value is not None:
            changes[key] = value
    if args.filters is not None:
        changes["cascade"] = args.filters
    if "m" in changes and "n_p" not in changes and setup.config.n_p < changes["m"]:
        changes["n_p"] = 2 * changes["m"]
    try:
        cfg = setup.config.updated(**changes)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return RunSetup(preset, cfg, limiter, efix)


def _out_dir(args) -> Path:
    out = args.out or Path(os.environ.get(OUT_ENV, "arom_out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _writer(out: Path, name: str, problem, stride: int):
    if stride <= 0:
        return None
    return SnapshotWriter(out / "snapshots" / name, problem.mesh, stride)


def _hdm(setup: RunSetup, problem, out: Path, stride: int, keep=True):
    w = _writer(out, "hdm", problem, stride)
    cb = None if w is None else (lambda k, q, t: w(k, q, t))
    log.info("HDM: %s, %d steps", setup.preset.name, setup.config.N_t)
    return run_hdm(problem, setup.config, keep_trajectory=keep, callback=cb)


def _arom(setup: RunSetup, problem, out: Path, stride: int, reference=None, t_H=None, name="arom", keep=False):
    w = _writer(out, name, problem, stride)
    cb = None if w is None else (lambda k, g, t, rec: w(k, g, t))
    log.info("AROM: %s, z=%s, %d steps", setup.preset.name, setup.config.z, setup.config.N_t)
    return run_arom(problem, setup.config, reference=reference, keep_trajectory=keep, t_H=t_H, callback=cb)


def _profile_steps(cfg: AromConfig, times) -> list[int]:
    if not times:
        return [cfg.N_t]
    return sorted({min(cfg.N_t, max(0, int(round(t / cfg.dt)))) for t in times})


def cmd_hdm(args, setup: RunSetup, out: Path) -> int:
    problem = setup.problem()
    res = _hdm(setup, problem, out, args.dump_stride, keep=False)
    write_profile(out / "profile_hdm.dat", problem.mesh, res.final, setup.config.T, "hdm")
    write_summary(out / "summary.json", {"t_H": res.wall, "newton_iterations_mean": float(np.mean(res.iterations)),
                                         "N_t": setup.config.N_t})
    print(f"HDM done: {setup.config.N_t} steps, t_H = {res.wall:.2f} s")
    return 0


def cmd_arom(args, setup: RunSetup, out: Path) -> int:
    problem = setup.problem()
    res = _arom(setup, problem, out, args.dump_stride)
    write_metrics_csv(out / "metrics.csv", res.records)
    write_masks(out / "masks.npy", res.masks)
    write_profile(out / "profile_arom.dat", problem.mesh, res.final, setup.config.T, "arom")
    write_summary(out / "summary.json", summary_dict(res.metrics))
    _print_summary(res.metrics.summary())
    return 0


def _sweep_config(setup: RunSetup, axis: str, value) -> AromConfig:
    cfg = setup.config
    if axis == "filter-order":
        order = int(value)
        cascade = tuple(o for o in (2, 4, 6) if o <= order) if order else ()
        return cfg.updated(cascade=cascade)
    if axis == "z":
        return cfg.updated(z=parse_z(value))
    if axis in ("w", "m"):
        n = int(value)
        changes = {axis: n}
        if axis == "m" and cfg.n_p < n:
            changes["n_p"] = 2 * n
        return cfg.updated(**changes)
    return cfg.updated(delta=float(value))


def cmd_sweep(args, setup: RunSetup, out: Path) -> int:
    problem = setup.problem()
    href = _hdm(setup, problem, out, 0)
    rows = []
    for value in args.values:
        label = "inf" if value == math.inf else f"{value:g}"
        cfg = _sweep_config(setup, args.axis, value)
        sub = replace(setup, config=cfg)
        res = _arom(sub, problem, out, args.dump_stride, href.trajectory, href.wall, name=f"arom_{args.axis}_{label}")
        write_metrics_csv(out / f"metrics_{args.axis}_{label}.csv", res.records)
        write_profile(out / f"profile_{args.axis}_{label}.dat", problem.mesh, res.final, cfg.T, f"{args.axis}={label}")
        s = res.metrics.summary()
        rows.append((label, s))
        print(f"{args.axis}={label}: e_bar={s['e_bar']:.4e} s_bar={100 * s['s_bar']:.2f}% "
              f"s_star={100 * s['s_star']:.2f}% J_bar={s['J_bar']:.2f}")
    keys = ("e_bar", "s_bar", "s_star", "p_bar", "J_bar", "max_hybrid_sampling", "speedup")
    with open(out / "sweep.csv", "w") as fh:
        fh.write(",".join((args.axis,) + keys) + "\n")
        for label, s in rows:
            fh.write(",".join([label] + [f"{s[k]:.10g}" if s[k] is not None else "" for k in keys]) + "\n")
    write_profile(out / "profile_hdm.dat", problem.mesh, href.final, setup.config.T, "hdm")
    return 0


def _exact_sod(x, t, gamma):
    w = exact_sod_solution(x, t, gamma=gamma)
    return primitive_to_conservative(w.rho, w.u, w.p, gamma)


def cmd_compare(args, setup: RunSetup, out: Path) -> int:
    problem = setup.problem()
    cfg = setup.config
    href = _hdm(setup, problem, out, args.dump_stride)
    res = _arom(setup, problem, out, args.dump_stride, href.trajectory, href.wall, keep=True)
    write_metrics_csv(out / "metrics.csv", res.records)
    write_masks(out / "masks.npy", res.masks)
    mesh = problem.mesh
    for k in _profile_steps(cfg, args.times):
        t = k * cfg.dt
        write_profile(out / f"profile_hdm_k{k}.dat", mesh, href.trajectory[k], t, "hdm")
        write_profile(out / f"profile_arom_k{k}.dat", mesh, res.trajectory[k], t, "arom")
        if setup.preset.name == "sod" and t > 0:
            (x,) = mesh.centers()
            exact = _exact_sod(x, t, problem.gas.gamma)
            write_profile(out / f"profile_exact_k{k}.dat", mesh, exact, t, "exact")
    extra = {}
    if args.coarse is not None:
        cells = args.coarse[0] if len(args.coarse) == 1 else args.coarse
        coarse = replace(setup, preset=setup.preset.with_cells(cells))
        cprob = coarse.problem()
        cres = run_hdm(cprob, cfg, keep_trajectory=False)
        write_profile(out / "profile_coarse_hdm.dat", cprob.mesh, cres.final, cfg.T, f"coarse {coarse.preset.cells}")
        extra["t_coarse"] = cres.wall
        extra["coarse_cells"] = list(coarse.preset.cells)
    if setup.preset.name == "sod":
        (x,) = mesh.centers()
        exact = _exact_sod(x, cfg.T, problem.gas.gamma)
        extra["hdm_l1_vs_exact"] = relative_l1_error(href.final, exact, density_only=True)
        extra["arom_l1_vs_exact"] = relative_l1_error(res.final, exact, density_only=True)
    summary = summary_dict(res.metrics, **extra)
    write_summary(out / "summary.json", summary)
    _print_summary(summary)
    return 0


def _print_summary(s: dict) -> None:
    def pct(v):
        return "n/a" if v is None else f"{100 * v:.2f}%"

    speed = s.get("speedup")
    e_bar = s.get("e_bar")
    print(
        f"e_bar={'n/a' if e_bar is None or e_bar != e_bar else f'{e_bar:.4e}'} "
        f"s_bar={pct(s['s_bar'])} s_star={pct(s['s_star'])} p_bar={pct(s['p_bar'])} "
        f"J_bar={s['J_bar']:.2f} max_hybrid={pct(s['max_hybrid_sampling'])} "
        f"S={'n/a' if speed is None else f'{speed:.2f}'}"
    )


COMMANDS = {"hdm": cmd_hdm, "arom": cmd_arom, "sweep": cmd_sweep, "compare": cmd_compare}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s"
    )
    try:
        setup = _setup(args)
        if args.dump_config:
            sys.stdout.write(dump_config(setup))
            return 0
        if args.threads is not None:
            _accel.set_threads(args.threads)
        out = _out_dir(args)
        (out / "config.ini").write_text(dump_config(setup))
        return COMMANDS[args.command](args, setup, out)
    except ConfigError as exc:
        print(f"arom: config error: {exc}", file=sys.stderr)
        return 2
    except AromError as exc:
        print(f"arom: solver error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"arom: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
