"""Trajectory sampling from quantum models by repeated measurement.

Each timestep adjoins a fresh ancilla, applies the model unitary, and
measures the ancilla: outcome 0 keeps the (renormalized) evolved memory,
outcome 1 records an event and collapses the memory back to the reset
state.  The uniform variates come from numpy's default generator (PCG64),
consumed one per step; the seed and generator name are recorded in every
sample artifact so runs are reproducible.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from qcoarse import _kernels
from qcoarse._util import fmt_float, parallel_map, text_hash
from qcoarse.errors import InputError, NumericalFailureError
from qcoarse.qmodel import QuantumModel

__all__ = [
    "Trajectory",
    "run_trajectory",
    "sample_waits",
    "empirical_survival",
    "save_waits",
    "load_waits",
    "model_hash",
]

RNG_NAME = "pcg64"
DEFAULT_MAX_STEPS = 10_000_000
_BLOCK = 1 << 16


@dataclass(frozen=True)
class Trajectory:
    """Measured event record: inter-event step counts for one seed."""

    seed: int
    delta_t: float
    events: np.ndarray
    truncated: bool = False
    total_steps: int = 0

    def wait_times(self) -> np.ndarray:
        return self.events * self.delta_t


def model_hash(model: QuantumModel) -> str:
    """Short content hash tying sample artifacts to their model."""
    return text_hash(model.dumps())


def run_trajectory(model: QuantumModel, seed: int,
                   max_steps: int = DEFAULT_MAX_STEPS,
                   n_events=None) -> Trajectory:
    """Sample one trajectory; deterministic given the seed.

    Stops after ``max_steps`` timesteps or ``n_events`` completed intervals,
    whichever comes first.  An interval cut off by the step budget sets the
    truncated flag and contributes no wait sample.
    """
    if max_steps < 1:
        raise InputError("max_steps must be at least 1")
    if n_events is not None and n_events < 1:
        raise InputError("n_events must be positive when given")
    rng = np.random.default_rng(seed)
    a_block = np.ascontiguousarray(model.no_event_block)
    t_block = np.ascontiguousarray(model.event_block)
    reset = np.ascontiguousarray(model.reset)
    x = reset.copy()
    chunks = []
    total = 0
    steps_done = 0
    collected = 0
    while total < max_steps and (n_events is None or collected < n_events):
        block = min(_BLOCK, max_steps - total)
        uniforms = rng.random(block)
        cap = block if n_events is None else min(block, n_events - collected)
        counts = np.zeros(cap, dtype=np.int64)
        got, used, steps_done, status = _kernels.renewal_sweep(
            a_block, t_block, reset, x, steps_done, uniforms, counts)
        if status != 0:
            raise NumericalFailureError(
                "per-step outcome probabilities failed the unit-sum check; "
                "the model violates its isometry contract", residual=status)
        total += used
        collected += got
        if got:
            chunks.append(counts[:got].copy())
    events = np.concatenate(chunks) if chunks else np.zeros(0, dtype=np.int64)
    return Trajectory(seed=int(seed), delta_t=model.delta_t, events=events,
                      truncated=steps_done > 0, total_steps=total)


def sample_waits(model: QuantumModel, seeds, n_events: int,
                 max_steps: int = DEFAULT_MAX_STEPS, workers=None) -> np.ndarray:
    """Pool wait samples (step counts) from several seeds, sorted merge.

    Each seed runs an independent trajectory targeting an equal share of
    ``n_events``; the pooled samples are sorted, so the result does not
    depend on worker scheduling.
    """
    seeds = [int(s) for s in seeds]
    if not seeds:
        raise InputError("need at least one seed")
    share = -(-int(n_events) // len(seeds))

    def work(seed):
        return run_trajectory(model, seed, max_steps=max_steps,
                              n_events=share).events

    parts = parallel_map(work, seeds, workers=workers)
    merged = np.sort(np.concatenate(parts))[:n_events]
    if merged.size < n_events:
        raise NumericalFailureError(
            f"collected only {merged.size} of {n_events} waits within "
            f"max_steps={max_steps}", residual=float(merged.size))
    return merged


def empirical_survival(waits, delta_t: float, grid) -> np.ndarray:
    """Empirical survival: fraction of sampled waits strictly above t.

    ``waits`` are integer step counts; the curve is the right-continuous
    complementary CDF of the times ``waits * delta_t`` on the given grid.
    """
    waits = np.asarray(waits)
    if waits.size == 0:
        raise InputError("need at least one wait sample")
    times = np.sort(waits.astype(float) * delta_t)
    grid = np.asarray(grid, dtype=float)
    below = np.searchsorted(times, grid, side="right")
    return 1.0 - below / times.size


def save_waits(path, waits, model: QuantumModel, seeds, truncated=False):
    """One step count per line with a reproducibility header."""
    seeds = [int(s) for s in np.atleast_1d(seeds)]
    with open(path, "w") as fh:
        fh.write("# qcoarse wait samples (integer step counts)\n")
        fh.write(f"# seed={','.join(str(s) for s in seeds)}\n")
        fh.write(f"# rng={RNG_NAME}\n")
        fh.write(f"# delta_t={fmt_float(model.delta_t)}\n")
        fh.write(f"# model_hash={model_hash(model)}\n")
        fh.write(f"# truncated={int(bool(truncated))}\n")
        for w in np.asarray(waits).ravel():
            fh.write(f"{int(w)}\n")


def load_waits(path):
    """Returns (waits array, metadata dict) from a sample artifact."""
    meta = {}
    values = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    key, _, val = body.partition("=")
                    meta[key.strip()] = val.strip()
                continue
            values.append(int(line))
    if not values:
        raise InputError(f"no samples found in {path}")
    return np.asarray(values, dtype=np.int64), meta
