"""Trajectory sampling: statistical oracles and artifact round-trips."""

import math

import numpy as np
import pytest

from qcoarse.errors import InputError, NumericalFailureError
from qcoarse.expsum import ExpSum
from qcoarse.qmodel import QuantumModel, build_unitary
from qcoarse.simulate import (empirical_survival, load_waits, model_hash,
                              run_trajectory, sample_waits, save_waits)


@pytest.fixture(scope="module")
def poisson_model():
    # normalized single term, gamma = 1: event rate 2 on the unit domain
    total = ExpSum.from_terms([(1.0, 1.0, 0.0)])
    return build_unitary(total, 2e-3)


def test_empirical_mean_matches_poisson_oracle(poisson_model):
    lam, dt = 2.0, poisson_model.delta_t
    waits = sample_waits(poisson_model, [1, 2, 3, 4], 100_000)
    mean = float(waits.mean()) * dt
    se = float(waits.std(ddof=1)) * dt / math.sqrt(waits.size)
    # exact mean of the lattice law, and the continuous limit 1/(2 gamma)
    disc = dt / (1.0 - math.exp(-lam * dt))
    assert abs(mean - disc) <= 3 * se
    assert abs(mean - 1.0 / lam) <= 3 * se


def test_same_seed_reproduces_trajectory(poisson_model):
    a = run_trajectory(poisson_model, 7, n_events=200)
    b = run_trajectory(poisson_model, 7, n_events=200)
    assert np.array_equal(a.events, b.events)
    assert a.seed == 7 and a.delta_t == poisson_model.delta_t
    assert np.array_equal(a.wait_times(), a.events * a.delta_t)


def test_sample_waits_deterministic_and_sorted(poisson_model):
    a = sample_waits(poisson_model, [5, 6], 1000)
    b = sample_waits(poisson_model, [5, 6], 1000)
    assert np.array_equal(a, b)
    assert np.all(np.diff(a) >= 0)
    assert a.size == 1000
    assert np.all(a >= 1)


def test_event_collapses_memory_to_reset(example_models):
    # the event block must be rank one onto the reset state
    for model in example_models.values():
        t_block = model.event_block
        proj = np.outer(model.reset, model.reset.conj())
        residual = np.max(np.abs(t_block - proj @ t_block))
        assert residual <= 1e-10


def test_events_all_at_least_one(ap_model):
    traj = run_trajectory(ap_model, 3, n_events=500)
    assert traj.events.size == 500
    assert np.all(traj.events >= 1)
    assert not traj.truncated


def test_truncation_flag_and_shortfall(exp_model):
    traj = run_trajectory(exp_model, 1, max_steps=3)
    assert traj.total_steps == 3
    assert traj.truncated
    assert traj.events.size == 0
    with pytest.raises(NumericalFailureError):
        sample_waits(exp_model, [1, 2], 1000, max_steps=10)


def test_run_trajectory_validation(exp_model):
    with pytest.raises(InputError):
        run_trajectory(exp_model, 0, max_steps=0)
    with pytest.raises(InputError):
        run_trajectory(exp_model, 0, n_events=0)
    with pytest.raises(InputError):
        sample_waits(exp_model, [], 10)


def test_broken_unitary_fails_probability_check(exp_model):
    hacked = QuantumModel(exp_model.exp_sum, exp_model.gram,
                          exp_model.generators, exp_model.reset,
                          0.9 * exp_model.unitary)
    with pytest.raises(NumericalFailureError):
        run_trajectory(hacked, 0, n_events=10)


def test_empirical_survival_step_shape():
    waits = [1, 2, 2, 5]
    grid = np.array([0.0, 0.1, 0.2, 0.3, 0.5, 0.6])
    curve = empirical_survival(waits, 0.1, grid)
    assert np.allclose(curve, [1.0, 0.75, 0.25, 0.25, 0.0, 0.0], atol=1e-15)
    with pytest.raises(InputError):
        empirical_survival([], 0.1, grid)


def test_empirical_survival_tracks_model(exp_model):
    waits = sample_waits(exp_model, [11, 12], 20_000)
    steps = np.arange(1, int(waits.max()) + 1)
    exact = exp_model.survival_curve(steps)
    emp = empirical_survival(waits, exp_model.delta_t, steps * exp_model.delta_t)
    assert float(np.max(np.abs(exact - emp))) <= 0.01


def test_save_load_round_trip(tmp_path, exp_model):
    waits = sample_waits(exp_model, [1, 2], 500)
    path = tmp_path / "waits.txt"
    save_waits(path, waits, exp_model, seeds=[1, 2])
    again, meta = load_waits(path)
    assert np.array_equal(again, waits)
    assert meta["seed"] == "1,2"
    assert meta["rng"] == "pcg64"
    assert float(meta["delta_t"]) == exp_model.delta_t
    assert meta["model_hash"] == model_hash(exp_model)
    assert meta["truncated"] == "0"


def test_load_waits_requires_samples(tmp_path):
    path = tmp_path / "empty.txt"
    path.write_text("# nothing here\n")
    with pytest.raises(InputError):
        load_waits(path)
