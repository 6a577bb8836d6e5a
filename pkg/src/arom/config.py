"""INI run configuration: a preset plus overrides, validated with line-anchored errors.

Grammar (``configparser`` INI; ``#`` and ``;`` start comments)::

    [problem]       preset, cells, limiter, entropy_fix
    [time]          T, N_t, order
    [arom]          w, m, z, delta, n_p, centering, error_norm
    [subiteration]  eps_y, j_max
    [filter]        cascade, eps_f, j_max, relative
    [newton]        tol, max_iter, linear_solver, jacobian, max_halvings

Every key is optional; missing keys take the preset defaults.  ``z = inf``
means no periodic full solves after the warm-up.  ``cascade`` is a comma
list of filter orders (``none`` or empty for no filtering); ``cells`` is
one integer per axis (a single integer is used for every axis).
"""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, replace
from pathlib import Path

from .driver import AromConfig
from .errors import ConfigError
from .filters import FilterSettings
from .kernels import LIMITERS
from .presets import Preset, get_preset
from .timeint import NewtonSettings


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def parse_z(text) -> float | int:
    if isinstance(text, (int, float)):
        return text
    t = str(text).strip().lower()
    if t in ("inf", "infinity", "∞"):
        return math.inf
    return int(t)


def format_z(z) -> str:
    return "inf" if z == math.inf else str(int(z))


def parse_orders(text: str) -> tuple[int, ...]:
    t = str(text).strip().lower()
    if t in ("", "none", "0"):
        return ()
    return tuple(int(p) for p in t.split(",") if p.strip())


def parse_cells(text: str) -> tuple[int, ...]:
    return tuple(int(p) for p in str(text).replace("x", ",").split(",") if p.strip())


# (section, key) -> (parser, formatter)
_SCHEMA = {
    ("problem", "preset"): (str, str),
    ("problem", "cells"): (parse_cells, lambda v: ",".join(str(n) for n in v)),
    ("problem", "limiter"): (str, str),
    ("problem", "entropy_fix"): (float, repr),
    ("time", "T"): (float, repr),
    ("time", "N_t"): (int, str),
    ("time", "order"): (int, str),
    ("arom", "w"): (int, str),
    ("arom", "m"): (int, str),
    ("arom", "z"): (parse_z, format_z),
    ("arom", "delta"): (float, repr),
    ("arom", "n_p"): (int, str),
    ("arom", "centering"): (str, str),
    ("arom", "error_norm"): (str, str),
    ("subiteration", "eps_y"): (float, repr),
    ("subiteration", "j_max"): (int, str),
    ("filter", "cascade"): (parse_orders, lambda v: ",".join(str(o) for o in v) or "none"),
    ("filter", "eps_f"): (float, repr),
    ("filter", "j_max"): (int, str),
    ("filter", "relative"): (_bool, lambda v: "true" if v else "false"),
    ("newton", "tol"): (float, repr),
    ("newton", "max_iter"): (int, str),
    ("newton", "linear_solver"): (str, str),
    ("newton", "jacobian"): (str, str),
    ("newton", "max_halvings"): (int, str),
}
SECTIONS = tuple(dict.fromkeys(s for s, _ in _SCHEMA))

# AromConfig validation keys -> config file keys
_KEY_OWNER = {
    "w": ("arom", "w"),
    "m": ("arom", "m"),
    "z": ("arom", "z"),
    "delta": ("arom", "delta"),
    "n_p": ("arom", "n_p"),
    "centering": ("arom", "centering"),
    "error_norm": ("arom", "error_norm"),
    "order": ("time", "order"),
    "N_t": ("time", "N_t"),
    "T": ("time", "T"),
}


@dataclass(frozen=True)
class RunSetup:
    """A problem (preset, resolution, flux options) plus the AROM configuration."""

    preset: Preset
    config: AromConfig
    limiter: str = "conservative"
    entropy_fix: float = 0.0

    def problem(self):
        return self.preset.problem(self.limiter, self.entropy_fix)


def preset_config(preset: Preset, **overrides) -> AromConfig:
    """The preset's AROM parameters as an :class:`AromConfig`."""
    p = dict(preset.arom)
    cascade = p.pop("cascade", (2, 4, 6))
    cfg = AromConfig(
        N_t=preset.N_t,
        T=preset.T,
        filter=FilterSettings(cascade=cascade),
        newton=NewtonSettings(tol=preset.newton_tol),
        **p,
    )
    return cfg.updated(**overrides) if overrides else cfg


def default_setup(preset: str | Preset) -> RunSetup:
    if isinstance(preset, str):
        preset = get_preset(preset)
    return RunSetup(preset, preset_config(preset))


def _line_index(text: str) -> dict[tuple[str, str | None], int]:
    """1-based line numbers of section headers and ``key = value`` lines."""
    where: dict[tuple[str, str | None], int] = {}
    section = None
    for n, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        if not s or s[0] in "#;":
            continue
        head = re.match(r"\[([^\]]+)\]", s)
        if head:
            section = head.group(1).strip()
            where.setdefault((section, None), n)
            continue
        kv = re.match(r"([^=:]+?)\s*[=:]", s)
        if kv and section is not None:
            where.setdefault((section, kv.group(1).strip()), n)
    return where


def parse_config(text: str, preset: str | None = None, source: str = "<config>") -> RunSetup:
    """Parse INI ``text``; ``preset`` (e.g. from the command line) wins over the file's."""
    where = _line_index(text)
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str  # keys are case sensitive (T vs t)
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}", line=getattr(exc, "lineno", None)) from None

    values: dict[tuple[str, str], object] = {}
    for section in cp.sections():
        if section not in SECTIONS:
            raise ConfigError(f"unknown section [{section}]", section, where.get((section, None)))
        for key, raw in cp.items(section):
            line = where.get((section, key))
            if (section, key) not in _SCHEMA:
                raise ConfigError(f"unknown key {key!r} in [{section}]", key, line)
            parse = _SCHEMA[(section, key)][0]
            try:
                values[(section, key)] = parse(raw)
            except ValueError as exc:
                raise ConfigError(f"bad value for {section}.{key}: {exc}", key, line) from None

    name = preset or values.get(("problem", "preset"))
    if not name:
        raise ConfigError("no preset given (set [problem] preset or pass --preset)", "preset")
    try:
        base = get_preset(str(name))
    except ValueError as exc:
        raise ConfigError(str(exc), "preset", where.get(("problem", "preset"))) from None
    if ("problem", "cells") in values:
        cells = values[("problem", "cells")]
        if len(cells) == 1:
            cells = cells[0]
        elif len(cells) != len(base.cells):
            raise ConfigError(
                f"cells needs {len(base.cells)} entries for preset {base.name}", "cells", where.get(("problem", "cells"))
            )
        base = base.with_cells(cells)

    limiter = values.get(("problem", "limiter"), "conservative")
    if limiter not in LIMITERS:
        raise ConfigError(f"limiter must be one of {sorted(LIMITERS)}", "limiter", where.get(("problem", "limiter")))
    entropy_fix = values.get(("problem", "entropy_fix"), 0.0)
    if entropy_fix < 0:
        raise ConfigError("entropy_fix must be >= 0", "entropy_fix", where.get(("problem", "entropy_fix")))

    changes = {}
    nested = {"subiteration": {}, "filter": {}, "newton": {}}
    for (section, key), value in values.items():
        if section in ("time", "arom"):
            changes[key] = value
        elif section in nested:
            nested[section][key] = value
    cfg = preset_config(base)
    for section, attr in (("subiteration", "sub"), ("filter", "filter"), ("newton", "newton")):
        if nested[section]:
            try:
                cfg = replace(cfg, **{attr: replace(getattr(cfg, attr), **nested[section])})
            except ValueError as exc:
                key = next(iter(nested[section]))
                raise ConfigError(f"[{section}] {exc}", key, where.get((section, key))) from None
    if "m" in changes and "n_p" not in changes and cfg.n_p < changes["m"]:
        changes["n_p"] = 2 * changes["m"]
    try:
        cfg = replace(cfg, **changes)
    except ConfigError as exc:
        sec_key = _KEY_OWNER.get(exc.key or "")
        raise ConfigError(str(exc), exc.key, where.get(sec_key) if sec_key else None) from None
    return RunSetup(base, cfg, limiter, entropy_fix)


def load_config(path: str | Path | None, preset: str | None = None) -> RunSetup:
    """Read ``path`` (``None`` means an empty file)."""
    if path is None:
        return parse_config("", preset)
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, preset, source=str(path))


def dump_config(setup: RunSetup) -> str:
    """INI text that :func:`parse_config` turns back into ``setup``."""
    cfg = setup.config
    values = {
        ("problem", "preset"): setup.preset.name,
        ("problem", "cells"): setup.preset.cells,
        ("problem", "limiter"): setup.limiter,
        ("problem", "entropy_fix"): setup.entropy_fix,
        ("time", "T"): cfg.T,
        ("time", "N_t"): cfg.N_t,
        ("time", "order"): cfg.order,
        ("arom", "w"): cfg.w,
        ("arom", "m"): cfg.m,
        ("arom", "z"): cfg.z,
        ("arom", "delta"): cfg.delta,
        ("arom", "n_p"): cfg.n_p,
        ("arom", "centering"): cfg.centering,
        ("arom", "error_norm"): cfg.error_norm,
    }
    for section, obj in (("subiteration", cfg.sub), ("filter", cfg.filter), ("newton", cfg.newton)):
        for s, key in _SCHEMA:
            if s == section:
                values[(s, key)] = getattr(obj, key)
    out = []
    for section in SECTIONS:
        out.append(f"[{section}]")
        for (s, key), (_, fmt) in _SCHEMA.items():
            if s == section:
                out.append(f"{key} = {fmt(values[(s, key)])}")
        out.append("")
    return "\n".join(out)
