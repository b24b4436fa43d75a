"""Phase-space grids for the 1D slab and the wall quadrature.

Positions live on a uniform cell-centred grid over ``[0, Lx]``; velocities on
a uniform midpoint grid over ``[-v_max, v_max]`` with an even number of nodes,
so ``v = 0`` is never a node and the mirror map ``j -> Nv - 1 - j`` sends every
node to its exact negative.

The wall Maxwellian is renormalised on the discrete outgoing half-space so the
flux-weighted measure ``mu_j = M_j |v_j| w_j`` sums to one to unit roundoff.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

LEFT = "left"
RIGHT = "right"
WALLS = (LEFT, RIGHT)

# outward normal of each slab wall
NORMALS = {LEFT: -1.0, RIGHT: 1.0}


@dataclass(frozen=True)
class SpatialGrid:
    length: float
    cell_count: int
    width: float = field(init=False)
    centers: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if not self.length > 0:
            raise ValueError(f"Lx must be positive, got {self.length}")
        if int(self.cell_count) != self.cell_count or self.cell_count < 2:
            raise ValueError(f"Nx must be an integer >= 2, got {self.cell_count}")
        dx = self.length / self.cell_count
        centers = (np.arange(self.cell_count) + 0.5) * dx
        centers.setflags(write=False)
        object.__setattr__(self, "width", dx)
        object.__setattr__(self, "centers", centers)

    @property
    def faces(self) -> np.ndarray:
        return np.arange(self.cell_count + 1) * self.width


@dataclass(frozen=True)
class VelocityGrid:
    v_max: float
    node_count: int
    rule: str = "midpoint"
    nodes: np.ndarray = field(init=False, repr=False)
    weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        nodes, weights = _velocity_nodes(self.v_max, self.node_count, self.rule)
        nodes.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    @property
    def spacing(self) -> float:
        return 2.0 * self.v_max / self.node_count

    def mirror(self, j):
        """Index of the node carrying ``-v_j``."""
        return self.node_count - 1 - np.asarray(j)


def _velocity_nodes(v_max: float, nv: int, rule: str) -> tuple[np.ndarray, np.ndarray]:
    if not v_max > 0:
        raise ValueError(f"v_max must be positive, got {v_max}")
    if int(nv) != nv or nv < 4:
        raise ValueError(f"Nv must be an integer >= 4, got {nv}")
    if nv % 2:
        raise ValueError(f"Nv must be even so the velocity grid is symmetric, got {nv}")
    nv = int(nv)
    dv = 2.0 * v_max / nv
    half = (np.arange(nv // 2) + 0.5) * dv
    # build the positive half once and mirror it so v_j = -v_{Nv-1-j} bitwise
    nodes = np.concatenate([-half[::-1], half])
    if rule == "midpoint":
        weights = np.full(nv, dv)
    elif rule == "trapezoid":
        # nodes treated as trapezoid abscissae over [-v_max + dv/2, v_max - dv/2]
        weights = np.full(nv, dv)
        weights[0] = weights[-1] = 0.5 * dv
    else:
        raise ValueError(f"unknown quadrature rule {rule!r}")
    return nodes, weights


def build_velocity_grid(v_max: float, nv: int, rule: str = "midpoint") -> VelocityGrid:
    return VelocityGrid(float(v_max), nv, rule)


def half_space_split(grid: VelocityGrid, wall: str) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(outgoing, incoming)`` node indices for a wall.

    The two arrays are aligned: ``incoming[k]`` is the mirror of
    ``outgoing[k]``, so local reflection is the identity on half-arrays.
    """
    if wall not in NORMALS:
        raise ValueError(f"unknown wall {wall!r}")
    n = NORMALS[wall]
    outgoing = np.flatnonzero(grid.nodes * n > 0)
    incoming = grid.mirror(outgoing)
    return outgoing, incoming


def maxwellian_raw(v: np.ndarray, theta: float, dim: int = 1) -> np.ndarray:
    """Wall Maxwellian ``(2 pi)^((1-N)/2) Theta^(-(N+1)/2) exp(-|v|^2 / (2 Theta))``.

    ``v`` holds speeds (or a trailing axis of components when ``dim > 1``).
    """
    v = np.asarray(v, dtype=float)
    sq = v * v if dim == 1 or v.ndim == 0 else np.sum(v * v, axis=-1)
    pref = (2.0 * math.pi) ** ((1 - dim) / 2.0) * theta ** (-(dim + 1) / 2.0)
    return pref * np.exp(-sq / (2.0 * theta))


@dataclass(frozen=True)
class WallQuadrature:
    wall: str
    theta: float
    outgoing: np.ndarray
    incoming: np.ndarray
    raw: np.ndarray            # M_raw on the full velocity grid
    normalisation: float       # Z
    speeds: np.ndarray         # |v_j| on the outgoing half
    weights: np.ndarray        # w_j on the outgoing half
    maxwellian: np.ndarray     # M_j = M_raw / Z on the outgoing half
    measure: np.ndarray        # mu_j on the outgoing half

    @property
    def full_maxwellian(self) -> np.ndarray:
        return self.raw / self.normalisation

    @property
    def C1(self) -> float:
        """``(sum_in M v^2 w)^-1``."""
        return 1.0 / float(np.sum(self.maxwellian * self.speeds**2 * self.weights))

    @property
    def C2(self) -> float:
        """``sum_in M (1 + v^2) |v| w``."""
        return float(np.sum(self.maxwellian * (1.0 + self.speeds**2) * self.speeds * self.weights))


def wall_maxwellian(grid: VelocityGrid, theta: float, dim: int = 1, wall: str = LEFT) -> WallQuadrature:
    """Discretely renormalised wall Maxwellian at temperature ``theta``.

    ``dim`` only enters the prefactor of the raw Maxwellian; the slab solver
    uses ``dim=1``.
    """
    if not theta > 0:
        raise ValueError(f"wall temperature must be positive, got {theta}")
    outgoing, incoming = half_space_split(grid, wall)
    if outgoing.size == 0:
        raise ValueError("outgoing half-space is empty")
    raw = maxwellian_raw(grid.nodes, theta, dim)
    speeds = np.abs(grid.nodes[outgoing])
    weights = grid.weights[outgoing]
    z = float(np.sum(raw[outgoing] * speeds * weights))
    m = raw[outgoing] / z
    if not np.all(m > 0):
        # the ratio gamma_+ f / M and the DG information need M > 0 on every node
        vbad = float(np.min(speeds[~(m > 0)]))
        raise ValueError(f"wall Maxwellian underflows at |v| = {vbad:.6g} for theta = {theta}; "
                         "reduce v_max or raise theta")
    mu = m * speeds * weights
    for arr in (raw, speeds, weights, m, mu):
        arr.setflags(write=False)
    return WallQuadrature(wall, float(theta), outgoing, incoming, raw, z, speeds, weights, m, mu)
