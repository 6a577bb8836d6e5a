"""The two reproduction problems: Sod's shock tube and a 2-D implosion."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .euler import DIRICHLET, WALL, BoundarySpec, EulerProblem, GasModel
from .mesh import Mesh, primitive_to_conservative

SOD_LEFT = (1.0, 0.0, 1.0)
SOD_RIGHT = (0.125, 0.0, 0.1)


def sod_initial(mesh: Mesh, gamma: float, x0: float = 0.5) -> np.ndarray:
    (x,) = mesh.centers()
    left = x < x0
    rho = np.where(left, SOD_LEFT[0], SOD_RIGHT[0])
    p = np.where(left, SOD_LEFT[2], SOD_RIGHT[2])
    return primitive_to_conservative(rho, np.zeros(mesh.n_cells), p, gamma)


def implosion_initial(mesh: Mesh, gamma: float) -> np.ndarray:
    """Low-density, low-pressure corner ``x + y <= 0.15`` inside quiescent gas."""
    x, y = mesh.centers()
    inside = x + y <= 0.15
    rho = np.where(inside, 0.125, 1.0)
    p = np.where(inside, 0.14, 1.0)
    return primitive_to_conservative(rho, np.zeros((mesh.n_cells, 2)), p, gamma)


@dataclass(frozen=True)
class Preset:
    """Problem definition plus the AROM parameters used to reproduce it."""

    name: str
    extents: tuple[tuple[float, float], ...]
    cells: tuple[int, ...]
    boundary: str
    initial: Callable[[Mesh, float], np.ndarray]
    T: float
    N_t: int
    gamma: float = 1.4
    arom: dict = field(default_factory=dict)
    newton_tol: float = 1e-10

    def mesh(self) -> Mesh:
        return Mesh(self.extents, self.cells)

    def with_cells(self, cells) -> Preset:
        if isinstance(cells, int):
            cells = (cells,) * len(self.cells)
        return replace(self, cells=tuple(int(n) for n in cells))

    def problem(self, limiter: str = "conservative", entropy_fix: float = 0.0) -> EulerProblem:
        mesh = self.mesh()
        return EulerProblem(
            mesh,
            GasModel(self.gamma),
            BoundarySpec.uniform(self.boundary, mesh.dim),
            self.initial(mesh, self.gamma),
            limiter=limiter,
            entropy_fix=entropy_fix,
        )


SOD = Preset(
    name="sod",
    extents=((0.0, 1.0),),
    cells=(499,),
    boundary=DIRICHLET,
    initial=sod_initial,
    T=0.2,
    N_t=999,
    arom=dict(w=5, m=4, z=float("inf"), delta=0.80, n_p=8, cascade=(2, 4, 6)),
    newton_tol=1e-10,
)

IMPLOSION = Preset(
    name="implosion",
    extents=((0.0, 0.3), (0.0, 0.3)),
    cells=(100, 100),
    boundary=WALL,
    initial=implosion_initial,
    T=0.5,
    N_t=1650,
    arom=dict(w=6, m=4, z=7, delta=0.90, n_p=23, cascade=(2, 4, 6)),
    newton_tol=1e-8,
)

PRESETS = {p.name: p for p in (SOD, IMPLOSION)}


def get_preset(name: str) -> Preset:
    try:
        return PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r} (choose from {', '.join(PRESETS)})") from None
