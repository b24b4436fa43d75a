"""Time loop for a scenario plus the artifacts it leaves on disk."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .core import CFLError, initial_condition, local_maxwellian, max_stable_dt, step, wall_traces
from .diagnostics import (
    DiagnosticsLedger, Recorder, check_boundedness, check_dissipation_signs, check_entropy_balance,
    check_mass, check_sqrt_trace_bound, check_trace_moment_bound, check_weighted_collision_bound,
)
from .field import FieldState, density_moments, field_energy_identity_residual, solve_poisson
from .scenario import Scenario, serialize_scenario

SUMMARY_SCHEMA = 1
# relative tolerance on the final time; guards against an extra sliver step
_TIME_SLACK = 1e-12


class RunError(RuntimeError):
    def __init__(self, step_index: int, cause: Exception):
        super().__init__(f"step {step_index}: {type(cause).__name__}: {cause}")
        self.step_index = step_index
        self.cause = cause


@dataclass
class RunResult:
    scenario: Scenario
    ledger: DiagnosticsLedger
    final_state: np.ndarray
    c0: float
    checks: dict[str, dict] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks.values() if c.get("applicable", True))


def _field_of(f: np.ndarray, scenario: Scenario, sgrid, vgrid) -> FieldState | None:
    if not scenario.model.poisson:
        return None
    rho, j, _ = density_moments(f, vgrid)
    fs = solve_poisson(rho, sgrid)
    fs.current = j
    return fs


def simulate(scenario: Scenario, workers: int | None = None) -> RunResult:
    """Run the scenario to ``T_final`` and evaluate every applicable check."""
    sgrid, vgrid = scenario.spatial_grid(), scenario.velocity_grid()
    walls = scenario.wall_specs(vgrid)
    model = scenario.model
    run = scenario.run
    workers = run.workers if workers is None else workers
    f, c0 = initial_condition(scenario.initial.preset, scenario.initial.params, sgrid, vgrid)
    rec = Recorder(sgrid, vgrid, walls, model)
    fs = _field_of(f, scenario, sgrid, vgrid)
    t, n = 0.0, 0
    residual = 0.0
    end = run.T_final * (1.0 - _TIME_SLACK)
    while t < end:
        e_cells = None if fs is None else fs.cell_field
        if run.dt is None:
            dt = run.cfl_factor * max_stable_dt(model, sgrid, vgrid, e_cells)
        else:
            dt = run.dt
        dt = min(dt, run.T_final - t)
        try:
            try:
                g, report = step(f, model, walls, dt, sgrid, vgrid, t, workers)
            except CFLError as exc:
                # the field moved between the estimate and the Fokker-Planck sub-step
                if run.dt is not None:
                    raise
                dt = min(dt, run.cfl_factor * exc.max_dt)
                g, report = step(f, model, walls, dt, sgrid, vgrid, t, workers)
            if fs is not None:
                fs.face_current = report.face_current
            rec.record(n, t, dt, f, report.traces, fs, residual, report.cfl)
        except Exception as exc:  # noqa: BLE001 - every module error aborts the run
            raise RunError(n, exc) from exc
        if fs is not None:
            residual = float(field_energy_identity_residual([fs, report.field], dt, model.theta,
                                                            sgrid.width)[0])
            fs = report.field
        f = g
        t += dt
        n += 1
    try:
        rec.record(n, t, 0.0, f, wall_traces(f, walls, t), fs, residual, {})
    except Exception as exc:  # noqa: BLE001
        raise RunError(n, exc) from exc
    result = RunResult(scenario, rec.ledger, f, c0)
    result.checks = evaluate_checks(result)
    return result


def evaluate_checks(result: RunResult) -> dict[str, dict]:
    s = result.scenario
    model = s.model
    ledger = result.ledger
    sgrid, vgrid = s.spatial_grid(), s.velocity_grid()
    walls = s.wall_specs(vgrid)
    free = not model.fokker_planck and not model.bgk
    checks = {
        "mass_conservation": check_mass(ledger, 1e-10 if free else 1e-8),
        "dissipation_signs": check_dissipation_signs(ledger),
        "trace_moment_bound": check_trace_moment_bound(ledger, walls, sgrid, free_transport=free),
        "sqrt_trace_bound": check_sqrt_trace_bound(ledger),
        "boundedness": check_boundedness(ledger),
    }
    if free and len(ledger) > 1:
        checks["entropy_balance"] = check_entropy_balance(ledger)
    else:
        checks["entropy_balance"] = {"check": "entropy_balance", "passed": True, "applicable": False}
    if model.bgk:
        mloc = local_maxwellian(result.final_state, vgrid)
        rep = check_weighted_collision_bound(result.final_state, mloc, model.tau, vgrid)
        rep.pop("per_cell")
        checks["weighted_collision_bound"] = rep
    if model.poisson:
        res = ledger.column("field_identity_residual")[1:]
        checks["field_energy_identity"] = {"check": "field_energy_identity", "passed": True,
                                           "max_residual": float(np.max(res)) if res.size else 0.0,
                                           "mean_residual": float(np.mean(res)) if res.size else 0.0}
    return checks


def summary(result: RunResult) -> dict:
    ledger = result.ledger
    maxima = {c: float(np.max(np.abs(ledger.column(c)))) for c in
              ("mass", "kinetic_energy", "entropy", "relative_entropy", "field_energy",
               "cum_alpha_dg", "cum_fisher", "cum_bgk", "cum_sqrt_flux", "cum_l1_flux")}
    return {
        "schema_version": SUMMARY_SCHEMA,
        "version": __version__,
        "steps": len(ledger) - 1,
        "final_time": ledger.rows[-1]["time"],
        "C0": result.c0,
        "run_maxima": maxima,
        "passed": result.passed,
        "checks": result.checks,
    }


def write_final_state(path: Path, f: np.ndarray, time: float) -> None:
    nx, nv = f.shape
    lines = [f"# Nx={nx} Nv={nv} time={time!r}"]
    lines += [" ".join(repr(float(x)) for x in row) for row in f]
    path.write_text("\n".join(lines) + "\n")


def read_final_state(path: Path) -> np.ndarray:
    text = Path(path).read_text().splitlines()
    return np.array([[float(x) for x in line.split()] for line in text[1:]])


def write_artifacts(result: RunResult, out: Path, figures: bool = True) -> dict[str, Path]:
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "ledger": out / "ledger.csv",
        "summary": out / "summary.json",
        "final_state": out / "final_state.txt",
        "scenario": out / "scenario.toml",
    }
    paths["ledger"].write_text(result.ledger.to_csv())
    paths["summary"].write_text(json.dumps(_finite(summary(result)), indent=2) + "\n")
    write_final_state(paths["final_state"], result.final_state, result.ledger.rows[-1]["time"])
    paths["scenario"].write_text(serialize_scenario(result.scenario))
    if figures:
        from .plotting import render_run
        paths.update(render_run(result, out))
    return paths


def _finite(obj):
    """JSON cannot carry inf/nan; map them to strings so the document stays valid."""
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    return obj
