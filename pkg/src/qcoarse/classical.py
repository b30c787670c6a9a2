"""Classical counter baseline: a finite-state clock fitted to a wait law.

The model is a deterministic counter over states 0..N: after an event it
restarts at 0; at each step in state s it emits the event with probability
p_s, otherwise it advances, looping from the terminal state N back to a
configurable state R.  Its wait-time law is a lattice distribution whose
shape is controlled by the N+1 emission probabilities, the step size, and
the loop position.  Fitting minimizes the KS statistic by finite-difference
gradient descent from many random starts, keeping the best iterate found.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from qcoarse import _kernels
from qcoarse._util import parallel_map
from qcoarse.errors import InputError, NonTerminatingError
from qcoarse.metrics import DiscretePmf

__all__ = [
    "ClassicalCounterModel",
    "FitHyper",
    "HYPER_PRESETS",
    "classical_wait_pmf",
    "fit_classical",
    "best_counter_ks",
]

CDF_GRID_DT = 1e-3
CDF_TAIL = 1e-12
MAX_ATOMS = 50_000


@dataclass(frozen=True)
class ClassicalCounterModel:
    """Counter over ``len(p)`` states with loop target ``r_idx``."""

    p: np.ndarray
    delta_t: float
    r_idx: int

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        object.__setattr__(self, "p", p)
        if p.ndim != 1 or p.size < 1:
            raise InputError("p must be a non-empty probability vector")
        if np.any(p < 0) or np.any(p > 1) or not np.all(np.isfinite(p)):
            raise InputError("emission probabilities must lie in [0, 1]")
        if not (self.delta_t > 0 and np.isfinite(self.delta_t)):
            raise InputError("delta_t must be a positive finite number")
        if not 0 <= self.r_idx < p.size:
            raise InputError("loop index must name one of the states")

    @property
    def dimension(self) -> int:
        return int(self.p.size)

    def state_path(self, n_steps: int) -> np.ndarray:
        """Deterministic state visited at each step since the last event."""
        n_states = self.p.size
        path = np.empty(n_steps, dtype=np.int64)
        s = 0
        for n in range(n_steps):
            path[n] = s
            s = s + 1 if s < n_states - 1 else self.r_idx
        return path


def classical_wait_pmf(model: ClassicalCounterModel, max_steps: int) -> DiscretePmf:
    """Wait-time law of the counter, truncated at ``max_steps`` atoms."""
    if max_steps < 1:
        raise InputError("max_steps must be at least 1")
    p = model.p
    if np.all(p == 0.0):
        raise NonTerminatingError("every emission probability is zero")
    path = model.state_path(max_steps)
    emit = p[path]
    no_emit = np.concatenate(([1.0], np.cumprod(1.0 - emit)[:-1]))
    masses = np.concatenate(([0.0], no_emit * emit))
    residual = float(no_emit[-1] * (1.0 - emit[-1]))
    return DiscretePmf(masses=masses, delta_t=model.delta_t, residual=residual)


@dataclass(frozen=True)
class FitHyper:
    """Descent hyperparameters; presets mirror the published fitting setup."""

    eta_p: float = 1e-4
    eta_t: float = 1e-8
    dp: float = 1e-3
    dt_fd: float = 1e-4
    s_factor: int = 2500
    w_seeds: int = 50
    warmup_frac: float = 0.0
    warmup_factor: float = 10.0
    rng_seed: int = 0
    # fix the step size instead of drawing it, for comparisons that must
    # stay in the fine-lattice regime (counter step well below the mean wait)
    dt_pin: float | None = None

    def steps_for(self, dimension: int) -> int:
        return int(self.s_factor * max(dimension - 1, 1))


HYPER_PRESETS = {
    "desk": FitHyper(),
    "paper": FitHyper(s_factor=12500, w_seeds=1000),
    "bimodal-warmup": FitHyper(s_factor=6250, w_seeds=1000, warmup_frac=0.2),
}


def _cdf_grid(dist):
    """Continuous CDF sampled at CDF_GRID_DT spacing out past the tail."""
    t_hi = 1.0
    while float(dist.survival(t_hi)) >= CDF_TAIL and t_hi < 64.0:
        t_hi *= 2.0
    n = int(round(t_hi / CDF_GRID_DT)) + 1
    grid = np.arange(n) * CDF_GRID_DT
    return 1.0 - np.asarray(dist.survival(grid), dtype=float)


def fit_classical(dist, dimension: int, hyper: FitHyper | None = None,
                  workers=None):
    """Fit the counter family to a wait-time law by KS descent.

    For every loop index R and every random start (p uniform in [0,1],
    step size exponentially distributed around mean_wait/dimension), runs
    finite-difference descent and keeps the best iterate; ties break toward
    the smaller R, then the smaller seed index.

    Returns ``(best model, best KS, report rows)``; each row is
    ``(R, seed_index, final_KS, delta_t, p_0..p_N)``.
    """
    if dimension < 1:
        raise InputError("dimension must be at least 1")
    hyper = hyper or HYPER_PRESETS["desk"]
    if hyper.dt_pin is not None and not hyper.dt_pin > 0:
        raise InputError("dt_pin must be positive when set")
    cdf = _cdf_grid(dist)
    dt0 = dist.mean_wait() / dimension
    steps = hyper.steps_for(dimension)
    warmup_steps = int(round(hyper.warmup_frac * steps))

    rng = np.random.default_rng(hyper.rng_seed)
    jobs = []
    for r_idx in range(dimension):
        for seed_index in range(hyper.w_seeds):
            p_init = rng.random(dimension)
            # the draw is consumed either way so pinning does not shift the
            # p sequences of later seeds
            dt_draw = -np.log(rng.random()) * dt0
            dt_init = dt_draw if hyper.dt_pin is None else hyper.dt_pin
            jobs.append((r_idx, seed_index, p_init, dt_init))

    def work(job):
        r_idx, seed_index, p_init, dt_init = job
        ks, p_best, dt_best = _kernels.counter_descent(
            p_init, dt_init, r_idx, cdf, CDF_GRID_DT,
            hyper.eta_p, hyper.eta_t, hyper.dp, hyper.dt_fd,
            steps, warmup_steps, hyper.warmup_factor, MAX_ATOMS)
        return r_idx, seed_index, float(ks), float(dt_best), p_best

    results = parallel_map(work, jobs, workers=workers)
    best = min(results, key=lambda row: (row[2], row[0], row[1]))
    model = ClassicalCounterModel(p=best[4], delta_t=best[3], r_idx=best[0])
    rows = [(r, s, ks, dt, *p.tolist()) for r, s, ks, dt, p in results]
    return model, best[2], rows


def best_counter_ks(dist, model: ClassicalCounterModel,
                    max_atoms: int = MAX_ATOMS) -> float:
    """KS objective of a fixed counter model against a wait law."""
    cdf = _cdf_grid(dist)
    return float(_kernels.counter_ks(model.p, model.r_idx, model.delta_t,
                                     cdf, CDF_GRID_DT, max_atoms))
