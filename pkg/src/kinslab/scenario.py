"""Scenario documents: sectioned TOML in, validated dataclasses out.

Sections are ``[grid]``, ``[walls.left]``, ``[walls.right]``, ``[model]``,
``[initial]`` and ``[run]``. Only ``grid`` and ``run.T_final`` are required;
everything else defaults to a free-transport run between fully diffusing walls
at ``Theta = 1``.
"""
from __future__ import annotations

import math
import sys
from dataclasses import asdict, dataclass, field
from typing import Any, Mapping

import tomli_w

if sys.version_info >= (3, 11):
    import tomllib as tomli
else:
    import tomli

from .boundary import ConstantAccommodation, FluxDependentAccommodation, LOCAL_KINDS, WallSpec
from .core import ModelConfig
from .grid import WALLS, SpatialGrid, VelocityGrid, build_velocity_grid, wall_maxwellian

PRESETS = {
    "maxwellian": ("rho0", "u0", "T0"),
    "two_bump": ("rho0", "u0", "T0", "amplitude"),
    "uniform_box": ("value", "a", "b", "w"),
}


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class GridConfig:
    Lx: float
    Nx: int
    v_max: float
    Nv: int


@dataclass(frozen=True)
class WallConfig:
    theta: float = 1.0
    kind: str = "specular"
    law: str = "constant"
    alpha: float = 1.0        # constant law
    alpha_bar: float = 1.0    # flux law
    c: float = 1.0

    def accommodation(self):
        if self.law == "constant":
            return ConstantAccommodation(self.alpha)
        return FluxDependentAccommodation(self.alpha_bar, self.c)


@dataclass(frozen=True)
class InitialConfig:
    preset: str = "maxwellian"
    params: dict[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class RunConfig:
    T_final: float
    dt: float | None = None
    cfl_factor: float = 0.9
    out: str = "out"
    seed: int = 0
    workers: int = 1


@dataclass(frozen=True)
class Scenario:
    grid: GridConfig
    walls: dict[str, WallConfig]
    model: ModelConfig
    initial: InitialConfig
    run: RunConfig

    def spatial_grid(self) -> SpatialGrid:
        return SpatialGrid(self.grid.Lx, self.grid.Nx)

    def velocity_grid(self) -> VelocityGrid:
        return build_velocity_grid(self.grid.v_max, self.grid.Nv)

    def wall_specs(self, vgrid: VelocityGrid | None = None) -> dict[str, WallSpec]:
        vg = vgrid or self.velocity_grid()
        return {w: WallSpec(wall_maxwellian(vg, c.theta, wall=w), c.accommodation(), c.kind)
                for w, c in self.walls.items()}


# --------------------------------------------------------------------------
# parsing

def _take(section: Mapping[str, Any], name: str, allowed: set[str]) -> dict[str, Any]:
    unknown = sorted(set(section) - allowed)
    if unknown:
        raise ScenarioError(f"unknown keys in [{name}]: {', '.join(unknown)}")
    return dict(section)


def _number(d: Mapping[str, Any], key: str, where: str, default: Any = None, integer: bool = False):
    if key not in d:
        if default is None:
            raise ScenarioError(f"[{where}] is missing required key {key!r}")
        return default
    val = d[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ScenarioError(f"{where}.{key} must be a number, got {val!r}")
    if integer:
        if int(val) != val:
            raise ScenarioError(f"{where}.{key} must be an integer, got {val!r}")
        return int(val)
    if not math.isfinite(val):
        raise ScenarioError(f"{where}.{key} must be finite, got {val!r}")
    return float(val)


def _bound(ok: bool, key: str, bound: str, val: Any) -> None:
    if not ok:
        raise ScenarioError(f"{key} must {bound}, got {val!r}")


def _parse_grid(d: Mapping[str, Any]) -> GridConfig:
    d = _take(d, "grid", {"Lx", "Nx", "v_max", "Nv"})
    g = GridConfig(_number(d, "Lx", "grid"), _number(d, "Nx", "grid", integer=True),
                   _number(d, "v_max", "grid"), _number(d, "Nv", "grid", integer=True))
    _bound(g.Lx > 0, "grid.Lx", "be > 0", g.Lx)
    _bound(g.Nx >= 2, "grid.Nx", "be an integer >= 2", g.Nx)
    _bound(g.v_max > 0, "grid.v_max", "be > 0", g.v_max)
    _bound(g.Nv >= 4 and g.Nv % 2 == 0, "grid.Nv", "be an even integer >= 4", g.Nv)
    return g


def _parse_wall(name: str, d: Mapping[str, Any]) -> WallConfig:
    where = f"walls.{name}"
    d = _take(d, where, {"theta", "kind", "law", "alpha", "alpha_bar", "c"})
    kind = d.get("kind", "specular")
    law = d.get("law", "constant")
    _bound(kind in LOCAL_KINDS, f"{where}.kind", f"be one of {LOCAL_KINDS}", kind)
    _bound(law in ("constant", "flux"), f"{where}.law", "be 'constant' or 'flux'", law)
    if law == "constant" and ({"alpha_bar", "c"} & set(d)):
        raise ScenarioError(f"{where}: alpha_bar and c only apply to law = 'flux'")
    if law == "flux" and "alpha" in d:
        raise ScenarioError(f"{where}: alpha only applies to law = 'constant'")
    w = WallConfig(
        theta=_number(d, "theta", where, 1.0),
        kind=kind,
        law=law,
        alpha=_number(d, "alpha", where, 1.0),
        alpha_bar=_number(d, "alpha_bar", where, 1.0),
        c=_number(d, "c", where, 1.0),
    )
    _bound(w.theta > 0, f"{where}.theta", "be > 0", w.theta)
    _bound(0 < w.alpha <= 1, f"{where}.alpha", "lie in (0,1]", w.alpha)
    _bound(0 < w.alpha_bar <= 1, f"{where}.alpha_bar", "lie in (0,1]", w.alpha_bar)
    _bound(w.c >= 0, f"{where}.c", "be >= 0", w.c)
    return w


def _parse_model(d: Mapping[str, Any]) -> ModelConfig:
    d = _take(d, "model", {"nu", "lam", "poisson", "tau", "theta"})
    poisson = d.get("poisson", False)
    if not isinstance(poisson, bool):
        raise ScenarioError(f"model.poisson must be true or false, got {poisson!r}")
    tau = d.get("tau")
    if tau is not None:
        tau = _number(d, "tau", "model")
        _bound(tau > 0, "model.tau", "be > 0", tau)
    nu = _number(d, "nu", "model", 0.0)
    theta = _number(d, "theta", "model", 1.0)
    _bound(nu >= 0, "model.nu", "be >= 0", nu)
    _bound(theta > 0, "model.theta", "be > 0", theta)
    return ModelConfig(nu=nu, lam=_number(d, "lam", "model", 0.0), poisson=poisson, tau=tau, theta=theta)


def _parse_initial(d: Mapping[str, Any]) -> InitialConfig:
    preset = d.get("preset", "maxwellian")
    _bound(preset in PRESETS, "initial.preset", f"be one of {tuple(PRESETS)}", preset)
    d = _take(d, "initial", {"preset", *PRESETS[preset]})
    params = {k: _number(d, k, "initial") for k in PRESETS[preset] if k in d}
    return InitialConfig(preset, params)


def _parse_run(d: Mapping[str, Any]) -> RunConfig:
    d = _take(d, "run", {"T_final", "dt", "cfl_factor", "out", "seed", "workers"})
    if "dt" in d and "cfl_factor" in d:
        raise ScenarioError("run.dt and run.cfl_factor are mutually exclusive")
    r = RunConfig(
        T_final=_number(d, "T_final", "run"),
        dt=_number(d, "dt", "run") if "dt" in d else None,
        cfl_factor=_number(d, "cfl_factor", "run", 0.9),
        out=str(d.get("out", "out")),
        seed=_number(d, "seed", "run", 0, integer=True),
        workers=_number(d, "workers", "run", 1, integer=True),
    )
    _bound(r.T_final > 0, "run.T_final", "be > 0", r.T_final)
    _bound(r.dt is None or r.dt > 0, "run.dt", "be > 0", r.dt)
    _bound(0 < r.cfl_factor <= 1, "run.cfl_factor", "lie in (0,1]", r.cfl_factor)
    _bound(r.workers >= 1, "run.workers", "be >= 1", r.workers)
    return r


def scenario_from_dict(doc: Mapping[str, Any]) -> Scenario:
    doc = _take(doc, "top level", {"grid", "walls", "model", "initial", "run"})
    if "grid" not in doc:
        raise ScenarioError("scenario needs a [grid] section")
    walls_doc = _take(doc.get("walls", {}), "walls", set(WALLS))
    return Scenario(
        grid=_parse_grid(doc["grid"]),
        walls={w: _parse_wall(w, walls_doc.get(w, {})) for w in WALLS},
        model=_parse_model(doc.get("model", {})),
        initial=_parse_initial(doc.get("initial", {})),
        run=_parse_run(doc.get("run", {})),
    )


def parse_scenario(text: str) -> Scenario:
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ScenarioError(f"malformed scenario document: {exc}") from exc
    return scenario_from_dict(doc)


# --------------------------------------------------------------------------
# serialisation

def scenario_to_dict(s: Scenario) -> dict[str, Any]:
    walls = {}
    for name, w in s.walls.items():
        d: dict[str, Any] = {"theta": w.theta, "kind": w.kind, "law": w.law}
        if w.law == "constant":
            d["alpha"] = w.alpha
        else:
            d.update(alpha_bar=w.alpha_bar, c=w.c)
        walls[name] = d
    model: dict[str, Any] = {"nu": s.model.nu, "lam": s.model.lam, "poisson": s.model.poisson,
                             "theta": s.model.theta}
    if s.model.tau is not None:
        model["tau"] = s.model.tau
    run = {k: v for k, v in asdict(s.run).items() if v is not None}
    if s.run.dt is not None:
        run.pop("cfl_factor")
    return {
        "grid": asdict(s.grid),
        "walls": walls,
        "model": model,
        "initial": {"preset": s.initial.preset, **s.initial.params},
        "run": run,
    }


def serialize_scenario(s: Scenario) -> str:
    return tomli_w.dumps(scenario_to_dict(s))
