"""Per-step functionals of a run and the pass/fail checks built on them.

A ledger row ``n`` describes the state ``f^n`` at ``t_n`` together with the
wall traces that drive the step leaving it. Columns prefixed ``cum_`` hold
time integrals up to ``t_n`` (left Riemann sums with the step sizes used).
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .boundary import (TraceRecord, WallSpec, boundary_entropy_flux, dg_information, entropy_flux_gap,
                       h, incoming_flux)
from .core import ModelConfig, entropy_production_density, local_maxwellian
from .field import FieldState
from .grid import LEFT, RIGHT, WALLS, SpatialGrid, VelocityGrid, wall_maxwellian

BASE_COLUMNS = [
    "step", "time", "dt", "mass", "momentum", "kinetic_energy", "entropy", "relative_entropy",
    "field_energy", "fisher", "bgk_entropy_production", "normal_momentum",
]
WALL_COLUMNS = [
    "flux", "alpha", "dg_information", "entropy_flux", "gap", "l1_flux", "lambda2_flux",
    "sqrt_flux", "flux_identity_residual", "l1_identity_residual", "trace_margin", "sqrt_chi_flux",
]
CUM_COLUMNS = [
    "cum_alpha_dg", "cum_fisher", "cum_bgk", "cum_sqrt_flux", "cum_sqrt_chi_flux", "cum_lambda2",
    "cum_l1_flux", "cum_kinetic_energy",
]
TAIL_COLUMNS = ["field_identity_residual", "cfl_advection", "cfl_positivity", "min_f"]
COLUMNS = (BASE_COLUMNS + [f"{w}_{c}" for w in WALLS for c in WALL_COLUMNS]
           + CUM_COLUMNS + TAIL_COLUMNS)

# columns that must stay non-negative up to roundoff
DISSIPATION_COLUMNS = ["fisher", "bgk_entropy_production"] + [
    f"{w}_{c}" for w in WALLS for c in ("dg_information", "gap")]

CHI_RADIUS = 2.0


class NonFiniteFunctional(ArithmeticError):
    pass


@dataclass
class DiagnosticsLedger:
    rows: list[dict[str, float]] = field(default_factory=list)

    def append(self, row: Mapping[str, float]) -> None:
        for name in COLUMNS:
            if not math.isfinite(row[name]):
                raise NonFiniteFunctional(f"column {name!r} is not finite at step {row['step']}")
        self.rows.append({name: float(row[name]) for name in COLUMNS})

    def __len__(self) -> int:
        return len(self.rows)

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.rows])

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(COLUMNS)
        for r in self.rows:
            writer.writerow([repr(r[c]) for c in COLUMNS])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "DiagnosticsLedger":
        reader = csv.reader(io.StringIO(text))
        header = next(reader)
        if header != COLUMNS:
            raise ValueError("ledger header does not match the expected column order")
        return cls([{c: float(x) for c, x in zip(header, line)} for line in reader])


def fisher_information(f: np.ndarray, vgrid: VelocityGrid, dx: float) -> float:
    """``int int |d_v f|^2 / f`` from one-sided differences; 0 on pairs touching vacuum."""
    dv = vgrid.spacing
    left, right = f[:, :-1], f[:, 1:]
    ok = (left > 0) & (right > 0)
    q = np.zeros_like(left)
    q[ok] = (right[ok] - left[ok]) ** 2 / (dv * dv * left[ok])
    return float(np.sum(q) * dv * dx)


def _sum_xlogx_abs(f: np.ndarray) -> np.ndarray:
    out = np.zeros_like(f)
    pos = f > 0
    out[pos] = f[pos] * np.abs(np.log(f[pos]))
    return out


class Recorder:
    """Turns solver snapshots into ledger rows and keeps the running integrals."""

    def __init__(self, sgrid: SpatialGrid, vgrid: VelocityGrid, walls: Mapping[str, WallSpec],
                 model: ModelConfig):
        self.sgrid, self.vgrid, self.walls, self.model = sgrid, vgrid, walls, model
        self.reference = wall_maxwellian(vgrid, model.theta).full_maxwellian
        self.normal = 2.0 * sgrid.centers / sgrid.length - 1.0
        self.chi_const = {}
        for name, spec in walls.items():
            wq = spec.quadrature
            chi = wq.speeds <= CHI_RADIUS
            self.chi_const[name] = math.sqrt(spec.accommodation.lower_bound) * float(
                np.sum(np.sqrt(wq.maxwellian) * chi * wq.speeds**2 * wq.weights))
        self.cum = {c: 0.0 for c in CUM_COLUMNS}
        self.ledger = DiagnosticsLedger()

    def wall_columns(self, trace: TraceRecord) -> dict[str, float]:
        spec = self.walls[trace.wall]
        wq = spec.quadrature
        gp, gm, flux, alpha = trace.outgoing, trace.incoming, trace.flux, trace.alpha
        s, w, m = wq.speeds, wq.weights, wq.maxwellian
        dg = dg_information(gp / m, wq)
        ent = boundary_entropy_flux(gp, gm, wq)
        lam2 = float(np.sum((gp + gm) * s * s * w))
        in_v2 = float(np.sum(gm * s * s * w))
        in_l1 = float(np.sum(gm * (1.0 + s * s) * s * w))
        tiny = np.finfo(float).tiny
        chi = s <= CHI_RADIUS
        return {
            "flux": flux,
            "alpha": alpha,
            "dg_information": dg,
            "entropy_flux": ent,
            "gap": entropy_flux_gap(gp, spec),
            "l1_flux": float(np.sum(gp * (1.0 + s * s) * s * w)) + in_l1,
            "lambda2_flux": lam2,
            "sqrt_flux": math.sqrt(flux),
            "flux_identity_residual": abs(flux - wq.C1 * in_v2) / max(flux, tiny),
            "l1_identity_residual": abs(in_l1 - wq.C2 * flux) / max(wq.C2 * flux, tiny),
            "trace_margin": float(np.min(gm - spec.accommodation.lower_bound * m * flux)),
            "sqrt_chi_flux": float(np.sum(np.sqrt(gm) * chi * s * s * w)),
        }

    def record(self, step: int, time: float, dt: float, f: np.ndarray, traces: Mapping[str, TraceRecord],
               fstate: FieldState | None = None, field_residual: float = 0.0,
               cfl: Mapping[str, float] | None = None) -> dict[str, float]:
        vg, dx = self.vgrid, self.sgrid.width
        v, w = vg.nodes, vg.weights
        per_v = np.sum(f * w, axis=1)
        mref = self.reference
        ratio = f / mref
        fisher = fisher_information(f, vg, dx)
        if self.model.bgk:
            mloc = local_maxwellian(f, vg)
            bgk = float(np.sum(entropy_production_density(f, mloc, self.model.tau) * w) * dx)
        else:
            bgk = 0.0
        row: dict[str, float] = {
            "step": step,
            "time": time,
            "dt": dt,
            "mass": float(np.sum(per_v) * dx),
            "momentum": float(np.sum(f * (v * w)) * dx),
            "kinetic_energy": float(np.sum(f * (v * v * w)) * dx),
            "entropy": float(np.sum(_sum_xlogx_abs(f) * w) * dx),
            "relative_entropy": float(np.sum(h(ratio) * mref * w) * dx),
            "field_energy": 0.0 if fstate is None else 2.0 * fstate.energy(dx),
            "fisher": fisher,
            "bgk_entropy_production": bgk,
            "normal_momentum": float(np.sum(self.normal[:, None] * f * (v * w)) * dx),
        }
        alpha_dg = sqrt_flux = sqrt_chi = lam2 = l1 = 0.0
        for name in WALLS:
            cols = self.wall_columns(traces[name])
            row.update({f"{name}_{k}": val for k, val in cols.items()})
            alpha_dg += cols["alpha"] * cols["dg_information"]
            sqrt_flux += self.chi_const[name] * cols["sqrt_flux"]
            sqrt_chi += cols["sqrt_chi_flux"]
            lam2 += cols["lambda2_flux"]
            l1 += cols["l1_flux"]
        row.update(self.cum)
        cfl = cfl or {}
        row["field_identity_residual"] = field_residual
        row["cfl_advection"] = cfl.get("advection", 0.0)
        row["cfl_positivity"] = cfl.get("positivity", 0.0)
        row["min_f"] = float(np.min(f))
        self.ledger.append(row)
        rates = {
            "cum_alpha_dg": alpha_dg,
            "cum_fisher": self.model.nu * fisher,
            "cum_bgk": bgk,
            "cum_sqrt_flux": sqrt_flux,
            "cum_sqrt_chi_flux": sqrt_chi,
            "cum_lambda2": lam2,
            "cum_l1_flux": l1,
            "cum_kinetic_energy": row["kinetic_energy"],
        }
        for k, rate in rates.items():
            self.cum[k] += rate * dt
        return row


# --------------------------------------------------------------------------
# checks

def _report(name: str, passed: bool, **details) -> dict:
    return {"check": name, "passed": bool(passed), **details}


def check_entropy_balance(ledger: DiagnosticsLedger, alpha_hat: float | None = None,
                          tol: float = 1e-8, balance_tol: float = 1e-3, cum_tol: float = 1e-6) -> dict:
    """Discrete relative-entropy balance for free-transport runs.

    * ``dH/dt + sum_walls alpha E <= tol`` at every step (the dissipation
      inequality), with ``alpha`` the realised value unless ``alpha_hat`` given;
    * ``|dH/dt + boundary entropy outflow|`` is the scheme defect, reported and
      compared with ``balance_tol``;
    * cumulative ``alpha E`` never exceeds ``H(0) - H(t) + cum_tol``.
    """
    if len(ledger) < 2:
        raise ValueError("entropy balance needs at least two rows")
    H = ledger.column("relative_entropy")
    dt = ledger.column("dt")[:-1]
    rate = np.diff(H) / dt
    outflow = sum(ledger.column(f"{w}_entropy_flux") for w in WALLS)[:-1]
    if alpha_hat is None:
        alpha_e = sum(ledger.column(f"{w}_alpha") * ledger.column(f"{w}_dg_information") for w in WALLS)[:-1]
    else:
        alpha_e = alpha_hat * sum(ledger.column(f"{w}_dg_information") for w in WALLS)[:-1]
    ineq = rate + alpha_e
    defect = np.abs(rate + outflow)
    cum = ledger.column("cum_alpha_dg")
    slack = (H[0] - H) - cum
    per_step_increase = np.diff(H)
    return _report(
        "entropy_balance",
        bool(np.all(ineq <= tol) and np.all(slack >= -cum_tol)),
        max_inequality=float(np.max(ineq)),
        max_balance_defect=float(np.max(defect)),
        balance_within_tolerance=bool(np.max(defect) < balance_tol),
        max_entropy_increase=float(np.max(per_step_increase)),
        min_cumulative_slack=float(np.min(slack)),
        tolerance=tol,
    )


def check_trace_moment_bound(ledger: DiagnosticsLedger, walls: Mapping[str, WallSpec],
                             sgrid: SpatialGrid, free_transport: bool = True, tol: float = 1e-12,
                             bound_slack: float = 0.1) -> dict:
    """Trace moment identities at diffuse walls and the time-integrated ``lambda_2`` bound.

    The bound compares ``int_0^T sum_walls int gamma f v^2`` with the interior
    side ``[int f n v]_T^0 + (2/L) int_0^T int f v^2`` obtained by testing the
    free transport equation against ``n(x) v`` with ``n(x) = 2x/L - 1``.
    """
    constants = {w: {"C1": walls[w].quadrature.C1, "C2": walls[w].quadrature.C2} for w in WALLS}
    worst_flux = worst_l1 = 0.0
    diffuse_rows = 0
    for w in WALLS:
        alpha = ledger.column(f"{w}_alpha")
        mask = alpha == 1.0
        diffuse_rows += int(np.sum(mask))
        if np.any(mask):
            worst_flux = max(worst_flux, float(np.max(ledger.column(f"{w}_flux_identity_residual")[mask])))
            worst_l1 = max(worst_l1, float(np.max(ledger.column(f"{w}_l1_identity_residual")[mask])))
    identities_ok = worst_flux <= tol and worst_l1 <= tol
    details = dict(constants=constants, diffuse_rows=diffuse_rows, max_flux_identity_residual=worst_flux,
                   max_l1_identity_residual=worst_l1)
    bound_ok = True
    if free_transport:
        nm = ledger.column("normal_momentum")
        lhs = ledger.column("cum_lambda2")
        rhs = nm[0] - nm + 2.0 / sgrid.length * ledger.column("cum_kinetic_energy")
        scale = max(float(np.max(np.abs(rhs))), np.finfo(float).tiny)
        excess = float(np.max(lhs - rhs)) / scale
        bound_ok = excess <= bound_slack
        details.update(lambda2_total=float(lhs[-1]), interior_bound=float(rhs[-1]),
                       max_relative_excess=excess, bound_slack=bound_slack)
    return _report("trace_moment_bound", identities_ok and bound_ok, identities_hold=identities_ok,
                   lambda2_bounded=bound_ok, **details)


def check_sqrt_trace_bound(ledger: DiagnosticsLedger, tol: float = 1e-12) -> dict:
    """``gamma_- f >= alpha_bar M flux`` nodewise, and the cumulative sqrt-flux bound it implies."""
    margin = min(float(np.min(ledger.column(f"{w}_trace_margin"))) for w in WALLS)
    lhs = ledger.column("cum_sqrt_flux")
    rhs = ledger.column("cum_sqrt_chi_flux")
    chain = float(np.max(lhs - rhs))
    return _report("sqrt_trace_bound", margin >= -tol and chain <= tol * max(1.0, float(np.max(rhs))),
                   min_margin=margin, max_chain_excess=chain,
                   cum_sqrt_flux=float(lhs[-1]), cum_sqrt_chi_flux=float(rhs[-1]))


def check_weighted_collision_bound(f: np.ndarray, mloc: np.ndarray, tau: float, vgrid: VelocityGrid,
                                   radius: float | None = None) -> dict:
    """Smallest per-cell ``C_R`` in ``int_{|v|<R} Q^pm/(1+f) <= C_R int [(1+v^2) f + e]``."""
    r = 0.5 * vgrid.v_max if radius is None else radius
    v, w = vgrid.nodes, vgrid.weights
    ball = np.abs(v) <= r
    gain = np.sum(mloc / tau / (1.0 + f) * ball * w, axis=1)
    loss = np.sum(f / tau / (1.0 + f) * ball * w, axis=1)
    e = entropy_production_density(f, mloc, tau)
    rhs = np.sum(((1.0 + v * v) * f + e) * w, axis=1)
    cr = np.zeros(f.shape[0])
    live = rhs > 0
    cr[live] = np.maximum(gain[live], loss[live]) / rhs[live]
    vacuum_ok = bool(np.all(gain[~live] <= 0) and np.all(loss[~live] <= 0))
    c_max = float(np.max(cr))
    return _report("weighted_collision_bound", math.isfinite(c_max) and vacuum_ok, C_R=c_max,
                   radius=r, per_cell=cr.tolist())


BOUNDED_COLUMNS = ["mass", "kinetic_energy", "entropy", "field_energy", "cum_fisher", "cum_bgk",
                   "cum_alpha_dg", "cum_sqrt_flux"]


def check_boundedness(ledger: DiagnosticsLedger, factor: float = 10.0) -> dict:
    """Every bounded functional stays below ``factor`` times the step-0 anchor.

    The anchor is ``mass + kinetic energy + entropy + field energy`` at step 0.
    """
    r0 = ledger.rows[0]
    anchor = r0["mass"] + r0["kinetic_energy"] + r0["entropy"] + r0["field_energy"]
    limit = factor * anchor
    sup = {c: float(np.max(ledger.column(c))) for c in BOUNDED_COLUMNS}
    total = (ledger.column("mass") + ledger.column("kinetic_energy") + ledger.column("entropy")
             + ledger.column("field_energy") + ledger.column("cum_fisher") + ledger.column("cum_bgk"))
    ok = all(val <= limit for val in sup.values()) and float(np.max(total)) <= limit
    return _report("boundedness", ok, anchor=anchor, limit=limit, sup=sup,
                   sup_total=float(np.max(total)))


def check_dissipation_signs(ledger: DiagnosticsLedger, tol: float = 1e-10) -> dict:
    worst = min(float(np.min(ledger.column(c))) for c in DISSIPATION_COLUMNS)
    cum = ledger.column("cum_alpha_dg")
    return _report("dissipation_signs", worst >= -tol and bool(np.all(np.diff(cum) >= 0)),
                   min_value=worst)


def check_mass(ledger: DiagnosticsLedger, tol: float) -> dict:
    mass = ledger.column("mass")
    drift = float(np.max(np.abs(mass - mass[0]))) / max(abs(float(mass[0])), np.finfo(float).tiny)
    return _report("mass_conservation", drift <= tol, max_relative_drift=drift, tolerance=tol)
