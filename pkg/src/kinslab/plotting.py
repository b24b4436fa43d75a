"""PNG figures written next to the ledger of a run."""
from __future__ import annotations

from pathlib import Path
from typing import TYPE_CHECKING

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .grid import WALLS  # noqa: E402

if TYPE_CHECKING:
    from .runner import RunResult


def _series(ax, t, ys, labels, ylabel):
    for y, lab in zip(ys, labels):
        ax.plot(t, y, label=lab, lw=1.2)
    ax.set_xlabel("t")
    ax.set_ylabel(ylabel)
    ax.grid(True, alpha=0.3)
    ax.legend(loc="best", frameon=False, fontsize=8)


def render_run(result: "RunResult", out: Path) -> dict[str, Path]:
    ledger = result.ledger
    t = ledger.column("time")
    paths = {}

    fig, axes = plt.subplots(2, 2, figsize=(9, 6))
    _series(axes[0, 0], t, [ledger.column("mass")], ["mass"], "mass")
    _series(axes[0, 1], t, [ledger.column("relative_entropy")], ["H"], "relative entropy")
    _series(axes[1, 0], t, [ledger.column(c) for c in ("cum_alpha_dg", "cum_fisher", "cum_bgk")],
            ["wall DG", "Fisher", "BGK"], "cumulative dissipation")
    _series(axes[1, 1], t, [ledger.column("kinetic_energy"), ledger.column("field_energy")],
            ["kinetic", "field"], "energy")
    fig.tight_layout()
    paths["fig_timeseries"] = out / "timeseries.png"
    fig.savefig(paths["fig_timeseries"], dpi=120)
    plt.close(fig)

    fig, axes = plt.subplots(1, 2, figsize=(9, 3.2))
    _series(axes[0], t, [ledger.column(f"{w}_flux") for w in WALLS], list(WALLS), "outgoing flux")
    _series(axes[1], t, [ledger.column(f"{w}_dg_information") for w in WALLS], list(WALLS),
            "DG information")
    fig.tight_layout()
    paths["fig_walls"] = out / "wall_fluxes.png"
    fig.savefig(paths["fig_walls"], dpi=120)
    plt.close(fig)

    s = result.scenario
    fig, ax = plt.subplots(figsize=(5.5, 4))
    mesh = ax.imshow(result.final_state.T, origin="lower", aspect="auto", cmap="viridis",
                     extent=(0.0, s.grid.Lx, -s.grid.v_max, s.grid.v_max))
    fig.colorbar(mesh, ax=ax, label="f")
    ax.set_xlabel("x")
    ax.set_ylabel("v")
    ax.set_title(f"t = {t[-1]:.4g}")
    fig.tight_layout()
    paths["fig_state"] = out / "final_state.png"
    fig.savefig(paths["fig_state"], dpi=120)
    plt.close(fig)
    return paths
