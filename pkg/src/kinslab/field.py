"""Self-consistent electrostatic field on the slab.

Cell-centred potential with homogeneous Dirichlet values on the two wall
faces. The face field ``E = dV/dx`` uses half-cell differences on the wall
faces, which makes ``sum_i rho_i V_i dx = sum_f E_f^2 h_f`` an exact discrete
identity (``h_f = dx`` inside, ``dx/2`` on the walls).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import SpatialGrid, VelocityGrid


@dataclass
class FieldState:
    potential: np.ndarray      # V at cell centres
    face_field: np.ndarray     # dV/dx at the Nx + 1 faces
    density: np.ndarray
    residual: float
    current: np.ndarray | None = None       # j = int v f dv at cell centres
    face_current: np.ndarray | None = None  # transport mass flux at faces

    @property
    def cell_field(self) -> np.ndarray:
        return 0.5 * (self.face_field[:-1] + self.face_field[1:])

    def face_widths(self, dx: float) -> np.ndarray:
        hf = np.full(self.face_field.size, dx)
        hf[0] = hf[-1] = 0.5 * dx
        return hf

    def energy(self, dx: float) -> float:
        """``W = 1/2 int |dV/dx|^2``."""
        return 0.5 * float(np.sum(self.face_field**2 * self.face_widths(dx)))


def density_moments(f: np.ndarray, vgrid: VelocityGrid) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return ``(rho, j, kinetic energy density)`` per cell.

    The energy density is ``int v^2 f dv / 2``.
    """
    v, w = vgrid.nodes, vgrid.weights
    rho = np.sum(f * w, axis=-1)
    j = np.sum(f * (v * w), axis=-1)
    energy = 0.5 * np.sum(f * (v * v * w), axis=-1)
    return rho, j, energy


def thomas(lower: np.ndarray, diag: np.ndarray, upper: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve a tridiagonal system; ``lower[0]`` and ``upper[-1]`` are ignored."""
    n = diag.size
    c = np.empty(n)
    d = np.empty(n)
    c[0] = upper[0] / diag[0]
    d[0] = rhs[0] / diag[0]
    for i in range(1, n):
        denom = diag[i] - lower[i] * c[i - 1]
        c[i] = upper[i] / denom if i < n - 1 else 0.0
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / denom
    x = np.empty(n)
    x[-1] = d[-1]
    for i in range(n - 2, -1, -1):
        x[i] = d[i] - c[i] * x[i + 1]
    return x


def _dirichlet_bands(nx: int, dx: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    inv = 1.0 / (dx * dx)
    diag = np.full(nx, 2.0 * inv)
    # ghost value -V_0 (resp. -V_{N-1}) puts V = 0 on the wall face
    diag[0] = diag[-1] = 3.0 * inv
    off = np.full(nx, -inv)
    return off, diag, off.copy()


def apply_laplacian(potential: np.ndarray, dx: float) -> np.ndarray:
    """Discrete ``-d^2 V / dx^2`` with the Dirichlet closure."""
    lower, diag, upper = _dirichlet_bands(potential.size, dx)
    out = diag * potential
    out[1:] += lower[1:] * potential[:-1]
    out[:-1] += upper[:-1] * potential[1:]
    return out


def solve_poisson(rho: np.ndarray, grid: SpatialGrid) -> FieldState:
    """Solve ``-V'' = rho`` with ``V = 0`` on both walls."""
    rho = np.asarray(rho, dtype=float)
    if rho.shape != (grid.cell_count,) or not np.all(np.isfinite(rho)):
        raise ValueError("density must be a finite array with one value per cell")
    dx = grid.width
    potential = thomas(*_dirichlet_bands(grid.cell_count, dx), rho)
    scale = max(float(np.max(np.abs(rho))), np.finfo(float).tiny)
    residual = float(np.max(np.abs(apply_laplacian(potential, dx) - rho))) / scale
    if residual > 1e-10:
        raise ArithmeticError(f"Poisson residual {residual:.3e} exceeds 1e-10")
    face = np.empty(grid.cell_count + 1)
    face[1:-1] = np.diff(potential) / dx
    face[0] = potential[0] / (0.5 * dx)
    face[-1] = -potential[-1] / (0.5 * dx)
    return FieldState(potential, face, rho.copy(), residual)


def field_energy_identity_residual(history: list[FieldState], dt: float, theta: float, dx: float) -> np.ndarray:
    """Per-step residual of ``d/dt W / Theta = int dV/dx j / Theta``.

    ``W = 1/2 int |dV/dx|^2``; each state must carry the face mass flux that
    carried it to the next state. Returns one value per consecutive pair.
    """
    if len(history) < 2:
        raise ValueError("need at least two field states")
    out = np.empty(len(history) - 1)
    for n, (a, b) in enumerate(zip(history[:-1], history[1:])):
        if a.face_current is None:
            raise ValueError(f"field state {n} has no face current")
        rate = (b.energy(dx) - a.energy(dx)) / (theta * dt)
        work = float(np.sum(a.face_field * a.face_current * a.face_widths(dx))) / theta
        out[n] = abs(rate - work)
    return out
