"""Explicit split solver for the slab kinetic equation.

State is a non-negative array ``f[i, j]`` over cells ``i`` and velocity nodes
``j``. One step runs, in this order: upwind transport closed by Maxwell
reflection, Poisson field update, Fokker-Planck drift-diffusion in ``v``, BGK
relaxation. Every sub-step is conservative in flux form so the bookkeeping of
mass telescopes exactly.

Parallel work is split into contiguous blocks of velocity columns (transport)
or cells (velocity operators). Each block only writes its own slice and every
per-element result is computed the same way whatever the block size, so the
output does not depend on the worker count.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field
from typing import Callable, Mapping

import numpy as np

from .boundary import TraceRecord, WallSpec, maxwell_reflect, outgoing_flux
from .field import FieldState, density_moments, solve_poisson
from .grid import LEFT, RIGHT, SpatialGrid, VelocityGrid

_CFL_SLACK = 1e-12


class CFLError(ValueError):
    """A sub-step was asked to run above its stability limit."""

    def __init__(self, what: str, number: float, max_dt: float):
        super().__init__(f"{what} CFL number {number:.6g} exceeds its bound; need dt <= {max_dt:.6g}")
        self.what = what
        self.number = number
        self.max_dt = max_dt


class MomentMatchingError(ArithmeticError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    nu: float = 0.0
    lam: float = 0.0
    poisson: bool = False
    tau: float | None = None
    theta: float = 1.0

    def __post_init__(self) -> None:
        if not self.nu >= 0:
            raise ValueError(f"nu must be >= 0, got {self.nu}")
        if self.tau is not None and not self.tau > 0:
            raise ValueError(f"tau must be > 0 when BGK is enabled, got {self.tau}")
        if not self.theta > 0:
            raise ValueError(f"theta must be > 0, got {self.theta}")

    @property
    def fokker_planck(self) -> bool:
        return self.nu > 0 or self.lam != 0 or self.poisson

    @property
    def bgk(self) -> bool:
        return self.tau is not None


@dataclass
class StepReport:
    dt: float
    cfl: dict[str, float]
    min_f: float
    traces: dict[str, TraceRecord]
    face_current: np.ndarray
    field: FieldState | None = None
    entropy_production: float = 0.0
    local_maxwellian: np.ndarray | None = dc_field(default=None, repr=False)


def _run_blocks(fn: Callable[[slice], None], n: int, workers: int) -> None:
    if workers <= 1 or n < 2:
        fn(slice(0, n))
        return
    bounds = np.linspace(0, n, min(workers, n) + 1).astype(int)
    blocks = [slice(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    with ThreadPoolExecutor(max_workers=len(blocks)) as pool:
        for fut in [pool.submit(fn, blk) for blk in blocks]:
            fut.result()


# --------------------------------------------------------------------------
# initial data

def _gauss(v: np.ndarray, u: float, temp: float) -> np.ndarray:
    return np.exp(-((v - u) ** 2) / (2.0 * temp)) / math.sqrt(2.0 * math.pi * temp)


def initial_condition(preset: str, params: Mapping[str, float], sgrid: SpatialGrid,
                      vgrid: VelocityGrid) -> tuple[np.ndarray, float]:
    """Build ``f_in`` from a named preset and return it with its ``C_0``.

    Presets
    -------
    maxwellian
        ``rho0 / sqrt(2 pi T0) exp(-(v - u0)^2 / (2 T0))``, uniform in ``x``.
    two_bump
        Two Gaussians at ``+-u0`` with temperature ``T0`` and a spatial
        modulation ``rho0 (1 + amplitude cos(2 pi x / Lx))``.
    uniform_box
        ``value`` on ``[a, b] x [-w, w]`` (cell centres / nodes inside), zero
        elsewhere.
    """
    p = dict(params)
    x, v = sgrid.centers, vgrid.nodes
    if preset == "maxwellian":
        rho0, u0, t0 = p.get("rho0", 1.0), p.get("u0", 0.0), p.get("T0", 1.0)
        _require_positive(rho0=rho0, T0=t0)
        f = np.outer(np.full(x.size, rho0), _gauss(v, u0, t0))
    elif preset == "two_bump":
        rho0, u0, t0 = p.get("rho0", 1.0), p.get("u0", 1.5), p.get("T0", 0.5)
        amp = p.get("amplitude", 0.5)
        _require_positive(rho0=rho0, T0=t0)
        if not 0 <= amp < 1:
            raise ValueError(f"amplitude must lie in [0, 1), got {amp}")
        profile = rho0 * (1.0 + amp * np.cos(2.0 * math.pi * x / sgrid.length))
        f = np.outer(profile, 0.5 * (_gauss(v, u0, t0) + _gauss(v, -u0, t0)))
    elif preset == "uniform_box":
        value = p.get("value", 1.0)
        a, b = p.get("a", 0.25 * sgrid.length), p.get("b", 0.75 * sgrid.length)
        w = p.get("w", 0.5 * vgrid.v_max)
        _require_positive(value=value, w=w)
        if not a < b:
            raise ValueError("uniform_box needs a < b")
        inside = np.outer((x >= a) & (x <= b), np.abs(v) <= w)
        f = np.where(inside, value, 0.0)
    else:
        raise ValueError(f"unknown initial-condition preset {preset!r}")
    if not np.all(np.isfinite(f)) or np.any(f < 0):
        raise ValueError(f"preset {preset!r} produced negative or non-finite values")
    return f, c0_functional(f, sgrid, vgrid)


def _require_positive(**kw: float) -> None:
    for k, val in kw.items():
        if not val > 0:
            raise ValueError(f"{k} must be positive, got {val}")


def c0_functional(f: np.ndarray, sgrid: SpatialGrid, vgrid: VelocityGrid) -> float:
    """``int int f (1 + v^2 + |log f|)`` with ``0 log 0 = 0``."""
    v, w = vgrid.nodes, vgrid.weights
    logf = np.zeros_like(f)
    pos = f > 0
    logf[pos] = np.abs(np.log(f[pos]))
    return float(np.sum(f * (1.0 + v * v + logf) * w) * sgrid.width)


# --------------------------------------------------------------------------
# transport

def advection_number(dt: float, sgrid: SpatialGrid, vgrid: VelocityGrid) -> float:
    return float(np.max(np.abs(vgrid.nodes))) * dt / sgrid.width


def wall_traces(f: np.ndarray, walls: Mapping[str, WallSpec], time: float = 0.0) -> dict[str, TraceRecord]:
    """Outgoing boundary-cell values and their Maxwell reflection per wall."""
    out = {}
    for name, row in ((LEFT, f[0]), (RIGHT, f[-1])):
        spec = walls[name]
        gplus = row[spec.quadrature.outgoing].copy()
        gminus, alpha = maxwell_reflect(gplus, spec)
        out[name] = TraceRecord(name, time, gplus, gminus, outgoing_flux(gplus, spec.quadrature), alpha)
    return out


def transport_step(f: np.ndarray, dt: float, walls: Mapping[str, WallSpec], sgrid: SpatialGrid,
                   vgrid: VelocityGrid, time: float = 0.0, workers: int = 1
                   ) -> tuple[np.ndarray, dict[str, TraceRecord], np.ndarray]:
    """First-order upwind step of ``f_t + v f_x = 0``.

    Returns the new state, the wall traces used as inflow data, and the face
    mass flux ``sum_j F_{i+1/2, j} w_j`` (``Nx + 1`` values).
    """
    number = advection_number(dt, sgrid, vgrid)
    if number > 1.0 + _CFL_SLACK:
        raise CFLError("advection", number, sgrid.width / float(np.max(np.abs(vgrid.nodes))))
    traces = wall_traces(f, walls, time)
    nx, nv = f.shape
    v = vgrid.nodes
    ghost_left = np.zeros(nv)
    ghost_right = np.zeros(nv)
    ghost_left[walls[LEFT].quadrature.incoming] = traces[LEFT].incoming
    ghost_right[walls[RIGHT].quadrature.incoming] = traces[RIGHT].incoming
    ratio = dt / sgrid.width
    new = np.empty_like(f)
    faces = np.empty((nx + 1, nv))

    def block(cols: slice) -> None:
        vb = v[cols]
        fb = f[:, cols]
        # upwind states on the Nx + 1 faces
        left_state = np.vstack([ghost_left[cols], fb])
        right_state = np.vstack([fb, ghost_right[cols]])
        flux = np.where(vb > 0, vb * left_state, vb * right_state)
        faces[:, cols] = flux
        new[:, cols] = fb - ratio * (flux[1:] - flux[:-1])

    _run_blocks(block, nv, workers)
    face_current = np.sum(faces * vgrid.weights, axis=1)
    return new, traces, face_current


# --------------------------------------------------------------------------
# Fokker-Planck in velocity

def _bernoulli(x: np.ndarray) -> np.ndarray:
    """``x / (exp(x) - 1)`` with the removable singularity filled."""
    x = np.asarray(x, dtype=float)
    out = np.ones_like(x)
    nz = np.abs(x) > 1e-8
    out[nz] = x[nz] / np.expm1(x[nz])
    small = ~nz
    out[small] = 1.0 - 0.5 * x[small]
    return out


def _fp_coefficients(e_cells: np.ndarray, nu: float, lam: float, vgrid: VelocityGrid
                     ) -> tuple[np.ndarray, np.ndarray]:
    """Face coefficients ``(A, B)`` with ``J_{j+1/2} = A f_j - B f_{j+1}``.

    Scharfetter-Gummel fitting of the drift ``-(E + lam v)`` against ``nu``;
    plain upwind when ``nu = 0`` or the cell Peclet number is huge. Shapes are ``(Nx, Nv - 1)``.
    """
    dv = vgrid.spacing
    vface = 0.5 * (vgrid.nodes[:-1] + vgrid.nodes[1:])
    drift = -(e_cells[:, None] + lam * vface[None, :])
    a, b = np.maximum(drift, 0.0), -np.minimum(drift, 0.0)
    if nu > 0:
        with np.errstate(over="ignore"):
            peclet = drift * dv / nu
        # beyond |P| = 700 the fitted flux equals upwind to within exp(-700)
        fit = np.abs(peclet) <= 700.0
        a[fit] = nu / dv * _bernoulli(-peclet[fit])
        b[fit] = nu / dv * _bernoulli(peclet[fit])
    return a, b


def fp_numbers(dt: float, e_cells: np.ndarray, nu: float, lam: float, vgrid: VelocityGrid) -> dict[str, float]:
    """CFL numbers of the velocity operator.

    ``positivity`` is the exact bound: the diagonal coefficient of the explicit
    update stays non-negative iff it is <= 1.
    """
    dv = vgrid.spacing
    a, b = _fp_coefficients(e_cells, nu, lam, vgrid)
    leave = np.zeros((e_cells.size, vgrid.node_count))
    leave[:, :-1] += a
    leave[:, 1:] += b
    vmax = float(np.max(np.abs(vgrid.nodes)))
    return {
        "diffusion": nu * dt / dv**2,
        "drift": (float(np.max(np.abs(e_cells))) + abs(lam) * vmax) * dt / dv,
        "positivity": float(np.max(leave)) * dt / dv,
    }


def fokker_planck_step(f: np.ndarray, dt: float, nu: float, lam: float, e_cells: np.ndarray,
                       vgrid: VelocityGrid, workers: int = 1) -> np.ndarray:
    """Conservative update of ``f_t = d_v((E + lam v) f) + nu d_vv f``.

    Zero flux through ``v = +-v_max`` keeps every cell's velocity mass.
    """
    e_cells = np.asarray(e_cells, dtype=float)
    if nu == 0 and lam == 0 and not np.any(e_cells):
        return f.copy()
    numbers = fp_numbers(dt, e_cells, nu, lam, vgrid)
    if numbers["positivity"] > 1.0 + _CFL_SLACK:
        raise CFLError("fokker-planck", numbers["positivity"], dt / numbers["positivity"])
    ratio = dt / vgrid.spacing
    new = np.empty_like(f)

    def block(rows: slice) -> None:
        a, b = _fp_coefficients(e_cells[rows], nu, lam, vgrid)
        fb = f[rows]
        # convex form: every term is non-negative once ratio * leave <= 1
        leave = np.zeros_like(fb)
        leave[:, :-1] += a
        leave[:, 1:] += b
        out = np.maximum(1.0 - ratio * leave, 0.0) * fb
        out[:, 1:] += ratio * (a * fb[:, :-1])
        out[:, :-1] += ratio * (b * fb[:, 1:])
        new[rows] = out

    _run_blocks(block, f.shape[0], workers)
    return new


# --------------------------------------------------------------------------
# BGK

def _solve3(a: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Elementwise Cramer solve of stacked symmetric 3x3 systems."""
    a00, a01, a02 = a[:, 0, 0], a[:, 0, 1], a[:, 0, 2]
    a11, a12, a22 = a[:, 1, 1], a[:, 1, 2], a[:, 2, 2]
    c00 = a11 * a22 - a12 * a12
    c01 = a02 * a12 - a01 * a22
    c02 = a01 * a12 - a02 * a11
    c11 = a00 * a22 - a02 * a02
    c12 = a01 * a02 - a00 * a12
    c22 = a00 * a11 - a01 * a01
    det = a00 * c00 + a01 * c01 + a02 * c02
    x0 = (c00 * r[:, 0] + c01 * r[:, 1] + c02 * r[:, 2]) / det
    x1 = (c01 * r[:, 0] + c11 * r[:, 1] + c12 * r[:, 2]) / det
    x2 = (c02 * r[:, 0] + c12 * r[:, 1] + c22 * r[:, 2]) / det
    return np.stack([x0, x1, x2], axis=1)


def _moment_basis(vgrid: VelocityGrid) -> np.ndarray:
    xi = vgrid.nodes / vgrid.v_max
    return np.stack([np.ones_like(xi), xi, xi * xi])


def _exponent(theta: np.ndarray, basis: np.ndarray) -> np.ndarray:
    # elementwise on purpose: a BLAS product may round differently per batch shape
    return theta[:, 0:1] * basis[0] + theta[:, 1:2] * basis[1] + theta[:, 2:3] * basis[2]


def local_maxwellian(f: np.ndarray, vgrid: VelocityGrid, tol: float = 1e-12, max_iter: int = 100,
                     first_cell: int = 0) -> np.ndarray:
    """Discrete-moment-matched ``exp(a + b v + c v^2)`` per cell.

    Newton on the convex dual so that ``sum_j w_j (1, v, v^2) M_j`` equals the
    same sums of ``f`` to ``tol`` (relative). Vacuum cells get ``M = 0``.
    ``first_cell`` only offsets indices in error messages.
    """
    w = vgrid.weights
    basis = _moment_basis(vgrid)                      # (3, Nv)
    phi_w = basis * w                                  # (3, Nv)
    moments = np.stack([np.sum(f * phi_w[k], axis=1) for k in range(3)], axis=1)
    out = np.zeros_like(f)
    live = moments[:, 0] > 0
    if not np.any(live):
        return out
    m = moments[live]
    rho = m[:, 0]
    mean = m[:, 1] / rho
    var = m[:, 2] / rho - mean * mean
    bad = np.flatnonzero(~(var > 0))
    if bad.size:
        cell = first_cell + int(np.flatnonzero(live)[bad[0]])
        raise MomentMatchingError(f"degenerate temperature in cell {cell}")
    vm = vgrid.v_max
    # a Gaussian narrower than one node underflows everywhere; start no narrower than dv
    g_var = np.maximum(var, vgrid.spacing**2)
    theta = np.stack([np.log(rho / np.sqrt(2 * math.pi * g_var)) - mean**2 / (2 * g_var),
                      mean * vm / g_var, -0.5 * vm * vm / g_var], axis=1)
    scale = np.stack([rho, rho, rho], axis=1)
    done = np.zeros(rho.size, dtype=bool)

    def dual(th: np.ndarray, mm: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        with np.errstate(over="ignore"):
            e = np.exp(_exponent(th, basis))
        return np.sum(e * w, axis=1) - np.sum(th * mm, axis=1), e

    for _ in range(max_iter):
        act = np.flatnonzero(~done)
        if act.size == 0:
            break
        th, mm = theta[act], m[act]
        val, e = dual(th, mm)
        grad = np.stack([np.sum(e * phi_w[k], axis=1) for k in range(3)], axis=1) - mm
        conv = np.all(np.abs(grad) <= tol * scale[act], axis=1)
        done[act[conv]] = True
        act, th, mm, val, e, grad = act[~conv], th[~conv], mm[~conv], val[~conv], e[~conv], grad[~conv]
        if act.size == 0:
            break
        hess = np.empty((act.size, 3, 3))
        for k in range(3):
            for l in range(k, 3):
                hess[:, k, l] = hess[:, l, k] = np.sum(e * phi_w[k] * basis[l], axis=1)
        step = _solve3(hess, -grad)
        t = np.ones(act.size)
        trial = th + step
        slope = np.sum(grad * step, axis=1)
        # the dual value is a difference of O(|theta . m|) terms; below that
        # roundoff floor Armijo cannot tell steps apart, so the full step is taken
        noise = 64 * np.finfo(float).eps * (np.sum(e * w, axis=1) + np.sum(np.abs(th * mm), axis=1))
        for _ in range(60):
            tv, _e = dual(trial, mm)
            worse = ~(tv <= val + 1e-4 * t * slope + noise)
            if not np.any(worse):
                break
            t[worse] *= 0.5
            trial = th + t[:, None] * step
        theta[act] = trial
    if not np.all(done):
        cell = first_cell + int(np.flatnonzero(live)[np.flatnonzero(~done)[0]])
        raise MomentMatchingError(f"moment matching did not converge in cell {cell}")
    out[live] = np.exp(_exponent(theta, basis))
    return out


def entropy_production_density(f: np.ndarray, mloc: np.ndarray, tau: float) -> np.ndarray:
    """``(M - f)(log M - log f) / tau`` with ``0 log 0 = 0`` and ``f = 0`` floored."""
    tiny = np.finfo(float).tiny
    both = (f > 0) | (mloc > 0)
    out = np.zeros_like(f)
    lm = np.log(np.maximum(mloc[both], tiny))
    lf = np.log(np.maximum(f[both], tiny))
    out[both] = (mloc[both] - f[both]) * (lm - lf) / tau
    return out


def bgk_step(f: np.ndarray, dt: float, tau: float, vgrid: VelocityGrid, dx: float = 1.0,
             workers: int = 1) -> tuple[np.ndarray, float, np.ndarray]:
    """Relax towards the moment-matched local Maxwellian.

    Returns ``(f', e_total, M_loc)`` with ``e_total = -sum Q log f dx dv``
    evaluated in its symmetric non-negative form.
    """
    if not tau > 0:
        raise ValueError("tau must be positive")
    if dt / tau > 1.0 + _CFL_SLACK:
        raise CFLError("bgk", dt / tau, tau)
    mloc = np.empty_like(f)

    def block(rows: slice) -> None:
        mloc[rows] = local_maxwellian(f[rows], vgrid, first_cell=rows.start)

    _run_blocks(block, f.shape[0], workers)
    new = f + (dt / tau) * (mloc - f)
    e = entropy_production_density(f, mloc, tau)
    e_total = float(np.sum(np.sum(e * vgrid.weights, axis=1)) * dx)
    return new, e_total, mloc


# --------------------------------------------------------------------------
# assembly

def max_stable_dt(model: ModelConfig, sgrid: SpatialGrid, vgrid: VelocityGrid,
                  e_cells: np.ndarray | None = None) -> float:
    """Largest ``dt`` meeting every active CFL constraint at the given field."""
    bounds = [sgrid.width / float(np.max(np.abs(vgrid.nodes)))]
    if model.fokker_planck:
        e = np.zeros(sgrid.cell_count) if e_cells is None else e_cells
        pos = fp_numbers(1.0, e, model.nu, model.lam, vgrid)["positivity"]
        if pos > 0:
            bounds.append(1.0 / pos)
    if model.bgk:
        bounds.append(model.tau)
    return min(bounds)


def step(f: np.ndarray, model: ModelConfig, walls: Mapping[str, WallSpec], dt: float,
         sgrid: SpatialGrid, vgrid: VelocityGrid, time: float = 0.0, workers: int = 1
         ) -> tuple[np.ndarray, StepReport]:
    """One split step: transport, field, Fokker-Planck, BGK."""
    g, traces, face_current = transport_step(f, dt, walls, sgrid, vgrid, time, workers)
    cfl = {"advection": advection_number(dt, sgrid, vgrid)}
    fstate = None
    e_cells = np.zeros(sgrid.cell_count)
    if model.poisson:
        rho, j, _ = density_moments(g, vgrid)
        fstate = solve_poisson(rho, sgrid)
        fstate.current = j
        e_cells = fstate.cell_field
    if model.fokker_planck:
        cfl.update(fp_numbers(dt, e_cells, model.nu, model.lam, vgrid))
        g = fokker_planck_step(g, dt, model.nu, model.lam, e_cells, vgrid, workers)
    e_total = 0.0
    mloc = None
    if model.bgk:
        cfl["bgk"] = dt / model.tau
        g, e_total, mloc = bgk_step(g, dt, model.tau, vgrid, sgrid.width, workers)
    min_f = float(np.min(g))
    if min_f < 0:
        raise ArithmeticError(f"positivity lost: min f = {min_f:.3e}")
    return g, StepReport(dt, cfl, min_f, traces, face_current, fstate, e_total, mloc)
