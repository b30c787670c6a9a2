"""Kolmogorov-Smirnov distances between wait-time laws.

Three flavours are needed downstream: continuous vs continuous (exact law vs
exponential-sum approximation, compared through survival curves on a shared
grid), continuous vs discrete (counter models place mass on multiples of a
timestep; the cumulative of a discrete law is extended to all t as the
right-continuous step function summing atoms strictly below t), and weighted
averages of per-edge statistics for semi-Markov processes.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from qcoarse.errors import InputError

__all__ = [
    "KsReport",
    "DiscretePmf",
    "default_grid",
    "ks_survival",
    "ks_continuous_discrete",
    "averaged_ks",
    "best_memoryless_ks",
]

GRID_POINTS = 1000
GRID_TAIL = 1e-6


@dataclass(frozen=True)
class KsReport:
    """Result of a KS comparison: the statistic and where it was attained."""

    statistic: float
    argmax_t: float
    grid_size: int

    def __float__(self):
        return self.statistic


@dataclass(frozen=True)
class DiscretePmf:
    """Wait-time law with atoms at ``n * delta_t``.

    ``masses[n]`` is the probability of waiting exactly ``n * delta_t``
    (``masses[0]`` is usually zero); ``residual`` is the probability mass
    beyond the truncation horizon.
    """

    masses: np.ndarray
    delta_t: float
    residual: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "masses", np.asarray(self.masses, dtype=float))
        if self.delta_t <= 0:
            raise InputError("delta_t must be positive")
        if np.any(self.masses < -1e-15):
            raise InputError("probability masses must be non-negative")
        total = float(self.masses.sum()) + self.residual
        if abs(total - 1.0) > 1e-9:
            raise InputError(f"masses + residual must sum to 1, got {total!r}")


def default_grid(survivals, n_points: int = GRID_POINTS, tail: float = GRID_TAIL,
                 t_max: float = 1.0, max_extent: float = 64.0) -> np.ndarray:
    """Uniform grid on the unit domain, extended until every survival < tail."""
    extent = t_max
    while extent < max_extent and any(float(s(extent)) >= tail for s in survivals):
        extent *= 2.0
    n = max(2, int(round(n_points * extent / t_max)))
    return np.linspace(0.0, extent, n)


def ks_survival(phi_a, phi_b, grid=None, n_points: int = GRID_POINTS,
                tail: float = GRID_TAIL) -> KsReport:
    """Sup-distance between two survival curves on a shared grid.

    ``phi_a`` and ``phi_b`` are callables (evaluated on ``grid``, which
    defaults to :func:`default_grid`) or arrays already on ``grid``.
    """
    if grid is None:
        if not (callable(phi_a) and callable(phi_b)):
            raise InputError("array survival curves require an explicit grid")
        grid = default_grid((phi_a, phi_b), n_points=n_points, tail=tail)
    grid = np.asarray(grid, dtype=float)
    a = phi_a(grid) if callable(phi_a) else np.asarray(phi_a, dtype=float)
    b = phi_b(grid) if callable(phi_b) else np.asarray(phi_b, dtype=float)
    if a.shape != grid.shape or b.shape != grid.shape:
        raise InputError("survival curves must match the evaluation grid")
    diff = np.abs(a - b)
    idx = int(np.argmax(diff))
    return KsReport(float(diff[idx]), float(grid[idx]), grid.size)


def ks_continuous_discrete(dist, pmf: DiscretePmf, grid=None) -> KsReport:
    """KS distance between a continuous law and a discrete-step law.

    The discrete cumulative jumps at the atom locations; against a monotone
    continuous cumulative the sup is attained at an atom (just before or just
    after its jump) or in the tail, so those candidate points are evaluated
    exactly.  ``grid`` may add further evaluation points; for a monotone
    continuous law they can only lose against the jump points.
    """
    masses = pmf.masses
    n = masses.size
    times = np.arange(n) * pmf.delta_t
    cdf_cont = 1.0 - np.asarray(dist.survival(times), dtype=float)
    cum_after = np.cumsum(masses)
    cum_before = cum_after - masses
    diffs = np.maximum(np.abs(cdf_cont - cum_before), np.abs(cdf_cont - cum_after))
    idx = int(np.argmax(diffs))
    best = float(diffs[idx])
    best_t = float(times[idx])
    # tail: the discrete cumulative stays at its final value, the continuous one -> 1
    tail_gap = abs(1.0 - float(cum_after[-1]))
    if tail_gap > best:
        best = tail_gap
        best_t = float(times[-1])
    n_extra = 0
    if grid is not None:
        grid = np.asarray(grid, dtype=float)
        cont = 1.0 - np.asarray(dist.survival(grid), dtype=float)
        pos = np.searchsorted(times, grid, side="right") - 1
        disc = np.where(pos >= 0, cum_after[np.clip(pos, 0, n - 1)], 0.0)
        gd = np.abs(cont - disc)
        gidx = int(np.argmax(gd))
        if float(gd[gidx]) > best:
            best = float(gd[gidx])
            best_t = float(grid[gidx])
        n_extra = grid.size
    return KsReport(best, best_t, n + n_extra)


def averaged_ks(weights, ks_values) -> float:
    """Probability-weighted average of per-edge KS statistics.

    ``weights`` and ``ks_values`` are mappings with identical keys; the
    weights must sum to one within 1e-9.
    """
    if set(weights) != set(ks_values):
        missing = set(weights) ^ set(ks_values)
        raise InputError(f"weight/KS key mismatch: {sorted(map(str, missing))}")
    total = float(sum(weights.values()))
    if abs(total - 1.0) > 1e-9:
        raise InputError(f"weights must sum to 1, got {total!r}")
    return float(sum(weights[k] * float(ks_values[k]) for k in weights))


def best_memoryless_ks(dist, rate_span=(1e-3, 1e3), refinements: int = 6,
                       points: int = 41, **ks_kwargs) -> tuple[float, float]:
    """Best exponential fit of ``dist`` by KS: deterministic log-grid search.

    Returns ``(ks, rate)``.  The grid is refined around the incumbent a fixed
    number of times, which is enough for the smooth one-parameter objective.
    """
    lo, hi = rate_span

    def objective(rate):
        surv = lambda t, r=rate: np.exp(-r * np.asarray(t, dtype=float))
        return ks_survival(dist.survival, surv, **ks_kwargs).statistic

    best_rate, best = None, np.inf
    for _ in range(refinements):
        rates = np.geomspace(lo, hi, points)
        vals = [objective(r) for r in rates]
        i = int(np.argmin(vals))
        if vals[i] < best:
            best, best_rate = vals[i], rates[i]
        lo = rates[max(0, i - 1)]
        hi = rates[min(points - 1, i + 1)]
    return float(best), float(best_rate)
