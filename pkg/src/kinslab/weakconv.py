"""Finite-sequence witnesses for renormalized and biting convergence on [0, 1].

Everything is sampled on a uniform grid of ``R`` cells. Weak limits are
estimated by averaging pairings against the indicators of ``B`` dyadic cells
over the tail (last half) of a sequence; a pairing whose tail variance exceeds
a cutoff is flagged rather than trusted.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

TAIL_FRACTION = 0.5
VARIANCE_CUTOFF = 1e-3


@dataclass
class GridFunctionSequence:
    resolution: int
    samples: list[np.ndarray]
    tag: str
    clip_counts: list[int] = field(default_factory=list)

    def __post_init__(self) -> None:
        for k, s in enumerate(self.samples):
            if s.shape != (self.resolution,):
                raise ValueError(f"sample {k} has shape {s.shape}, expected ({self.resolution},)")
            if not np.all(np.isfinite(s)) or np.any(s < 0):
                raise ValueError(f"sample {k} has negative or non-finite entries")

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def spacing(self) -> float:
        return 1.0 / self.resolution

    def tail(self, fraction: float = TAIL_FRACTION) -> list[np.ndarray]:
        start = int(len(self.samples) * (1.0 - fraction))
        return self.samples[start:]


@dataclass
class WeakLimitEstimate:
    level: float
    values: np.ndarray          # piecewise-constant estimate on the sample grid
    cell_means: np.ndarray      # tail-averaged mean over each basis cell
    tail_variance: np.ndarray
    flagged: np.ndarray         # tail variance above the cutoff
    basis_size: int
    renormalizer: str = "truncation"


# --------------------------------------------------------------------------
# elementary operations

def truncate(phi: np.ndarray, level: float) -> np.ndarray:
    """``T_M(s) = min(s, M)`` nodewise."""
    if not level >= 0:
        raise ValueError(f"truncation level must be >= 0, got {level}")
    return np.minimum(np.asarray(phi, dtype=float), level)


def rational_renormalizer(phi: np.ndarray, level: float) -> np.ndarray:
    """``M s / (M + s)``: smooth, concave, increasing to the identity as ``M`` grows."""
    if not level > 0:
        raise ValueError(f"renormalizing level must be > 0, got {level}")
    phi = np.asarray(phi, dtype=float)
    return level * phi / (level + phi)


RENORMALIZERS: dict[str, Callable[[np.ndarray, float], np.ndarray]] = {
    "truncation": truncate,
    "rational": rational_renormalizer,
}


def weak_pairing(phi: np.ndarray, g: np.ndarray) -> float:
    """Riemann sum ``sum phi g dy`` on the uniform grid of ``[0, 1]``."""
    phi = np.asarray(phi, dtype=float)
    g = np.asarray(g, dtype=float)
    if phi.shape != g.shape:
        raise ValueError("function and test function live on different grids")
    return float(np.sum(phi * g)) / phi.size


def decode_index(n: int) -> tuple[int, int]:
    """Write ``n = p (p - 1) / 2 + k + 1`` with ``0 <= k < p``."""
    if n < 1:
        raise ValueError(f"sequence index must be >= 1, got {n}")
    p = int((1 + math.isqrt(8 * (n - 1) + 1)) // 2)
    while p * (p - 1) // 2 >= n:
        p -= 1
    while (p + 1) * p // 2 < n:
        p += 1
    return p, n - 1 - p * (p - 1) // 2


# --------------------------------------------------------------------------
# generator families

def concentration_sequence(n: int, resolution: int) -> np.ndarray:
    """Cell averages of ``p 1_[k/p, (k+1)/p]``.

    In units of ``1/(pR)`` every cell average is an integer, so the values are
    exact and the ``L^1`` norm is exactly one for every ``R``.
    """
    p, k = decode_index(n)
    i = np.arange(resolution)
    lo = np.maximum(i * p, k * resolution)
    hi = np.minimum((i + 1) * p, (k + 1) * resolution)
    return np.maximum(hi - lo, 0).astype(float)


def oscillation_blowup_sequence(n: int, resolution: int,
                                cap: float = np.finfo(float).max) -> tuple[np.ndarray, int]:
    """Midpoint samples of the periodic extension of ``1/y`` rescaled by ``n``.

    Returns ``(samples, clip_count)``; samples landing on a pole are set to
    ``cap``. The fractional part is formed in integer arithmetic.
    """
    if n < 1:
        raise ValueError(f"sequence index must be >= 1, got {n}")
    i = np.arange(resolution, dtype=np.int64)
    num = (n * (2 * i + 1)) % (2 * resolution)
    out = np.full(resolution, cap)
    hit = num > 0
    out[hit] = np.minimum(2.0 * resolution / num[hit], cap)
    return out, int(np.sum(out >= cap))


def build_sequence(family: str, terms: int, resolution: int,
                   function: np.ndarray | None = None) -> GridFunctionSequence:
    if terms < 1:
        raise ValueError("need at least one term")
    if family == "concentration":
        return GridFunctionSequence(resolution, [concentration_sequence(n, resolution)
                                                 for n in range(1, terms + 1)], family)
    if family == "oscillation":
        pairs = [oscillation_blowup_sequence(n, resolution) for n in range(1, terms + 1)]
        return GridFunctionSequence(resolution, [p[0] for p in pairs], family, [p[1] for p in pairs])
    if family == "constant":
        if function is None:
            y = (np.arange(resolution) + 0.5) / resolution
            function = 1.0 + 0.5 * np.sin(2.0 * math.pi * y)
        return GridFunctionSequence(resolution, [np.array(function, dtype=float)] * terms, family)
    raise ValueError(f"unknown sequence family {family!r}")


# --------------------------------------------------------------------------
# estimates

def _basis_cells(resolution: int, basis_size: int) -> int:
    if basis_size < 1 or basis_size & (basis_size - 1):
        raise ValueError(f"basis size must be a power of two, got {basis_size}")
    if resolution % basis_size:
        raise ValueError(f"basis size {basis_size} does not divide the grid resolution {resolution}")
    return resolution // basis_size


def estimate_renormalized_limit(seq: GridFunctionSequence, levels: Sequence[float], basis_size: int,
                                renormalizer: str = "truncation", tail_fraction: float = TAIL_FRACTION,
                                variance_cutoff: float = VARIANCE_CUTOFF) -> list[WeakLimitEstimate]:
    """Tail-averaged weak limits of ``T(phi_n)`` for each level.

    The indicator basis is orthogonal, so the least-squares coefficients are
    the mean pairings divided by the cell measure.
    """
    if len(seq) < 32:
        raise ValueError(f"sequence too short for a tail estimate ({len(seq)} < 32 terms)")
    per = _basis_cells(seq.resolution, basis_size)
    ren = RENORMALIZERS[renormalizer]
    tail = seq.tail(tail_fraction)
    out = []
    for level in levels:
        # cell means of T(phi_n) for each tail term: shape (terms, B)
        means = np.stack([ren(s, level).reshape(basis_size, per).mean(axis=1) for s in tail])
        cell = means.mean(axis=0)
        var = means.var(axis=0)
        out.append(WeakLimitEstimate(float(level), np.repeat(cell, per), cell, var,
                                     var > variance_cutoff, basis_size, renormalizer))
    return out


def monotonicity_report(estimates: Sequence[WeakLimitEstimate], tol: float = 1e-12) -> dict:
    """Checks ``T_M <= T_M'`` for ``M <= M'``; violations are reported, never repaired."""
    order = sorted(estimates, key=lambda e: e.level)
    worst = 0.0
    for a, b in zip(order[:-1], order[1:]):
        worst = max(worst, float(np.max(a.cell_means - b.cell_means)))
    return {"monotone": worst <= tol, "max_decrease": worst}


def limit_verdict(estimates: Sequence[WeakLimitEstimate], tol: float = 1e-3) -> dict:
    """Bounded if the top two levels agree within ``tol``, unbounded otherwise.

    A limit that keeps growing with the level is reported as unbounded rather
    than by a sentinel number.
    """
    order = sorted(estimates, key=lambda e: e.level)
    top = order[-1].cell_means
    growth = float(np.max(top - order[-2].cell_means)) if len(order) > 1 else 0.0
    sup = float(np.max(top))
    bounded = growth <= tol
    return {"bounded": bounded, "growth_at_top": growth, "sup_at_top": sup,
            "limit": top.tolist() if bounded else "unbounded"}


def delta_table(seq: GridFunctionSequence, levels: Sequence[float],
                tail_fraction: float = TAIL_FRACTION) -> dict[float, float]:
    """``delta(M) = sup_{n in tail} meas{phi_n >= M}``."""
    tail = seq.tail(tail_fraction)
    return {float(m): max(float(np.mean(s >= m)) for s in tail) for m in levels}


def biting_set_search(seq: GridFunctionSequence, epsilon: float, threshold: float = 0.1,
                      level: float = 8.0, basis_size: int = 64, table_levels: Sequence[float] = (1, 2, 4, 8, 16),
                      tail_fraction: float = TAIL_FRACTION) -> dict:
    """Greedy search for a large set on which the tail is uniformly integrable.

    The witness on a union ``A`` of dyadic cells is
    ``sup_{n in tail} int_A phi_n 1{phi_n >= level} <= threshold``. Cells with
    the largest individual statistic are removed one at a time while the
    retained measure stays ``>= 1 - epsilon``.
    """
    if not 0 < epsilon < 0.5:
        raise ValueError(f"epsilon must lie in (0, 1/2), got {epsilon}")
    per = _basis_cells(seq.resolution, basis_size)
    tail = seq.tail(tail_fraction)
    # high-part mass of each tail term in each cell: shape (terms, B)
    high = np.stack([(np.where(s >= level, s, 0.0).reshape(basis_size, per).sum(axis=1)) * seq.spacing
                     for s in tail])
    keep = np.ones(basis_size, dtype=bool)
    cell_measure = 1.0 / basis_size

    def witness(mask: np.ndarray) -> float:
        return float(np.max(high[:, mask].sum(axis=1))) if np.any(mask) else 0.0

    removed: list[int] = []
    found = witness(keep) <= threshold
    while not found:
        if (np.sum(keep) - 1) * cell_measure < 1.0 - epsilon - 1e-12:
            break
        stat = np.where(keep, high.max(axis=0), -np.inf)
        worst = int(np.argmax(stat))
        keep[worst] = False
        removed.append(worst)
        found = witness(keep) <= threshold
    table = delta_table(seq, table_levels, tail_fraction)
    cells = np.flatnonzero(keep)
    return {
        "verdict": "biting set found" if found else f"no biting set at epsilon={epsilon}",
        "found": bool(found),
        "retained_cells": cells.tolist(),
        "removed_cells": removed,
        "retained_measure": float(np.sum(keep)) * cell_measure,
        "witness": witness(keep),
        "threshold": threshold,
        "level": level,
        "delta": {str(k): v for k, v in table.items()},
    }


def restricted_pairings(seq: GridFunctionSequence, retained_cells: Sequence[int], basis_size: int,
                        tail_fraction: float = TAIL_FRACTION) -> np.ndarray:
    """Tail-averaged cell means of ``phi_n`` itself on the retained cells."""
    per = _basis_cells(seq.resolution, basis_size)
    means = np.stack([s.reshape(basis_size, per).mean(axis=1) for s in seq.tail(tail_fraction)])
    return means.mean(axis=0)[list(retained_cells)]
