"""Gram construction, unitary assembly, memory states, and kernel rank."""

import math

import numpy as np
import pytest

from qcoarse.errors import InputError, TailUnderflowError
from qcoarse.expsum import ExpSum, ExpTerm
from qcoarse.qmodel import (GramMatrix, QuantumModel, build_unitary,
                            embed_generators, gram_matrix, kernel_spectrum,
                            memory_state, model_survival)

DT = 1e-3


def one_term(gamma=1.3, omega=0.0):
    return ExpSum.from_terms([(1.0, gamma, omega)])


def two_term():
    return ExpSum.from_terms([(1.0, 1.0, 0.0), (0.5, 3.0, 0.0)])


def complex_two_term():
    # nonzero frequencies keep the O(dt) Gram correction alive; for purely
    # real sums it cancels pairwise and the decay turns quadratic
    return ExpSum.from_terms([(1.0, 1.0, 2.0), (complex(0.5, 0.3), 3.0, -1.0)])


def fake_gram(matrix):
    n = matrix.shape[0]
    return GramMatrix(matrix=matrix, eta=1.0, delta_t=DT,
                      c_prime=np.ones(n, dtype=complex), event_amps=np.zeros(n))


def test_single_term_gram_is_exactly_one():
    # |c|^2 = 2 gamma makes c' = 1 bit-exactly (same sqrt both places)
    gamma = 1.3
    total = ExpSum([ExpTerm(math.sqrt(2 * gamma), gamma, 0.0)])
    gram = gram_matrix(total, DT)
    assert gram.matrix.shape == (1, 1)
    assert gram.matrix[0, 0] == 1.0
    assert gram.eta == 1.0
    assert gram.event_amps[0] == pytest.approx(
        math.sqrt(1.0 - math.exp(-2 * gamma * DT)), abs=1e-15)


def test_gram_invariants_on_example_models(example_models):
    for model in example_models.values():
        g = model.gram.matrix
        assert np.max(np.abs(g - g.conj().T)) <= 1e-12
        assert np.allclose(np.diag(g).real, model.eta**2, atol=1e-12)
        evals = np.linalg.eigvalsh(g)
        assert evals[0] >= -1e-10 * np.trace(g).real


def test_cross_overlap_small_timestep_limit():
    # G12 / eta^2 -> 2 sqrt(g1 g2) / (g1 + g2); convergence is quadratic here
    limit = 2.0 * math.sqrt(3.0) / 4.0
    total = two_term()

    def m12(dt):
        gram = gram_matrix(total, dt)
        return float(np.real(gram.matrix[0, 1])) / gram.eta**2

    err_h = abs(m12(1e-3) - limit)
    err_half = abs(m12(5e-4) - limit)
    assert err_h <= 1e-5
    assert 3.0 <= err_h / err_half <= 5.0
    richardson = (4.0 * m12(5e-4) - m12(1e-3)) / 3.0
    assert abs(richardson - limit) <= 1e-9


def test_eta_deviation_decays_linearly():
    total = complex_two_term()
    errs = [abs(gram_matrix(total, dt).eta**2 - 1.0)
            for dt in (1e-2, 5e-3, 2.5e-3)]
    assert 1.6 <= errs[0] / errs[1] <= 2.4
    assert 1.6 <= errs[1] / errs[2] <= 2.4


def test_gram_rejects_bad_timestep():
    with pytest.raises(InputError):
        gram_matrix(one_term(), 0.0)
    with pytest.raises(InputError):
        gram_matrix(one_term(), -1e-3)


def test_embed_identity_gram():
    d, v = embed_generators(fake_gram(np.eye(3, dtype=complex)))
    assert d == 3
    assert np.max(np.abs(v.conj().T @ v - np.eye(3))) <= 1e-12


def test_embed_all_ones_gram_is_rank_one():
    d, v = embed_generators(fake_gram(np.ones((3, 3), dtype=complex)))
    assert d == 1
    assert v.shape == (1, 3)
    assert np.allclose(v, v[0, 0], atol=1e-12)  # identical columns
    assert abs(v[0, 0]) == pytest.approx(1.0, abs=1e-12)


def test_embed_reconstructs_random_psd():
    rng = np.random.default_rng(3)
    a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    g = a.conj().T @ a
    g = g / np.trace(g).real
    d, v = embed_generators(fake_gram(g))
    assert d <= 4
    assert np.max(np.abs(v.conj().T @ v - g)) <= 1e-10


def test_single_term_event_probability():
    gamma = 1.3
    model = build_unitary(one_term(gamma), DT)
    prob = float(np.linalg.norm(model.event_block @ model.reset) ** 2)
    assert prob == pytest.approx(1.0 - math.exp(-2 * gamma * DT), abs=1e-12)


def test_unitarity_and_isometry_on_example_models(example_models):
    for model in example_models.values():
        dim = model.unitary.shape[0]
        defect = np.max(np.abs(model.unitary.conj().T @ model.unitary - np.eye(dim)))
        assert defect <= 1e-10
        assert model.diagnostics["isometry_defect"] <= 1e-10
        assert model.diagnostics["unitarity_defect"] <= 1e-10


def test_generator_columns_reproduce_gram(example_models):
    for model in example_models.values():
        v = model.generators
        assert np.max(np.abs(v.conj().T @ v - model.gram.matrix)) <= 1e-10
        assert np.linalg.norm(model.reset) == pytest.approx(1.0, abs=1e-12)
        assert model.memory_dim <= len(model.exp_sum.terms)


def test_unitary_action_matches_prescription(example_models):
    for model in example_models.values():
        d = model.memory_dim
        phases = np.exp(np.array([t.z for t in model.exp_sum.terms]) * model.delta_t)
        for j in range(model.n_generators):
            vin = np.zeros(2 * d, dtype=complex)
            vin[0::2] = model.generators[:, j]
            out = model.unitary @ vin
            want = np.zeros(2 * d, dtype=complex)
            want[0::2] = phases[j] * model.generators[:, j]
            want[1::2] = model.gram.event_amps[j] * model.reset
            assert np.max(np.abs(out - want)) <= 1e-10


def test_memory_state_at_zero_is_reset(example_models):
    for model in example_models.values():
        state = model.memory_state(0.0)
        assert np.max(np.abs(state.vector - model.reset)) <= 1e-12


def test_single_term_memory_state_is_stationary():
    model = build_unitary(one_term(1.3, omega=4.0), DT)
    base = model.memory_state(0.0).vector
    for t in (0.3, 1.0, 2.5):
        vec = model.memory_state(t).vector
        assert abs(np.vdot(base, vec)) == pytest.approx(1.0, abs=1e-12)


def test_memory_state_underflows_far_in_the_tail(exp_model):
    with pytest.raises(TailUnderflowError):
        exp_model.memory_state(1e4)
    with pytest.raises(Exception):
        exp_model.memory_state(-1.0)


def test_prenorm_tracks_survival_linearly_in_dt(ap_scans):
    total = complex_two_term()
    times = (0.1, 0.5, 1.0)

    def worst(dt):
        model = build_unitary(total, dt)
        errs = [abs(model.memory_state(t).prenorm_sq - total.survival(t))
                / total.survival(t) for t in times]
        return max(errs)

    e1, e2, e3 = worst(1e-2), worst(5e-3), worst(2.5e-3)
    assert 1.6 <= e1 / e2 <= 2.4
    assert 1.6 <= e2 / e3 <= 2.4

    # the fitted sums decay at least this fast as well
    ap_total, _ = ap_scans[4]

    def worst_ap(dt):
        model = build_unitary(ap_total, dt)
        return max(abs(model.memory_state(t).prenorm_sq - ap_total.survival(t))
                   / ap_total.survival(t) for t in times)

    assert worst_ap(5e-3) <= 0.75 * worst_ap(1e-2)


def test_model_survival_at_zero(example_models):
    for model in example_models.values():
        assert model.model_survival(0) == pytest.approx(1.0, abs=1e-12)


def test_single_term_model_survival_closed_form(exp_model):
    gamma = exp_model.exp_sum.terms[0].gamma
    for n in (1, 10, 100):
        want = math.exp(-2 * gamma * n * exp_model.delta_t)
        assert model_survival(exp_model, n) == pytest.approx(want, abs=1e-10)


def test_multi_term_survival_converges_linearly():
    total = complex_two_term()
    times = (0.2, 0.5, 1.0)

    def worst(dt):
        model = build_unitary(total, dt)
        steps = [int(round(t / dt)) for t in times]
        curve = model.survival_curve(steps)
        return max(abs(c - total.survival(n * dt))
                   for c, n in zip(curve, steps))

    e1, e2 = worst(1e-2), worst(5e-3)
    assert 1.5 <= e1 / e2 <= 2.5


def test_model_survival_non_increasing(ap_model):
    curve = ap_model.survival_curve(range(0, 200))
    assert np.all(np.diff(curve) <= 1e-12)


def test_survival_curve_validates_steps(ap_model):
    with pytest.raises(InputError):
        ap_model.survival_curve([-1])
    with pytest.raises(InputError):
        ap_model.survival_curve([5, 3])


def test_wait_pmf_single_term_geometric(exp_model):
    gamma = exp_model.exp_sum.terms[0].gamma
    dt = exp_model.delta_t
    pmf = exp_model.wait_pmf(50)
    assert pmf.masses[0] == 0.0
    p_step = 1.0 - math.exp(-2 * gamma * dt)
    for n in (1, 2, 10, 50):
        want = math.exp(-2 * gamma * (n - 1) * dt) * p_step
        assert pmf.masses[n] == pytest.approx(want, abs=1e-12)
    with pytest.raises(InputError):
        exp_model.wait_pmf(0)


def test_gauge_invariance_under_global_phase(ap_scans):
    total, _ = ap_scans[4]
    phase = np.exp(1j * 0.7)
    rotated = ExpSum([ExpTerm(t.c * phase, t.gamma, t.omega) for t in total.terms])
    grid = np.linspace(0.0, 1.0, 101)
    assert np.max(np.abs(rotated.pdf(grid) - total.pdf(grid))) <= 1e-12
    assert np.max(np.abs(rotated.survival(grid) - total.survival(grid))) <= 1e-12
    g_a = gram_matrix(total, DT)
    g_b = gram_matrix(rotated, DT)
    assert np.max(np.abs(g_a.matrix - g_b.matrix)) <= 1e-12
    m_a, m_b = build_unitary(total, DT), build_unitary(rotated, DT)
    for n in (1, 10, 50):
        assert abs(m_a.model_survival(n) - m_b.model_survival(n)) <= 1e-12


def test_kernel_one_term_is_rank_one():
    spec = kernel_spectrum(one_term(), n_grid=400)
    assert spec.rank() == 1
    assert spec.trace == pytest.approx(1.0, abs=1e-3)
    assert spec.warning == ""
    assert spec.truncation_bound < 1e-4


def test_kernel_rank_bounded_by_term_count(ap_scans, bm_scans):
    for n in (4, 8):
        source = ap_scans[n][0] if n == 4 else bm_scans[n][0]
        spec = kernel_spectrum(source, n_grid=300)
        assert spec.rank() <= n
        assert np.all(np.diff(spec.eigenvalues) <= 1e-15)


def test_kernel_distribution_input_matches_sum_rank():
    from qcoarse.processes import Exponential

    spec = kernel_spectrum(Exponential(2.0), n_grid=200)
    assert spec.rank() == 1
    assert spec.trace == pytest.approx(1.0, abs=1e-3)


def test_kernel_grid_refinement(ap_scans):
    # sub-leading eigenvalues converge at the same absolute rate as the
    # leading one, so changes are measured against the spectrum scale
    total, _ = ap_scans[4]
    coarse = kernel_spectrum(total, n_grid=800).eigenvalues[:3]
    fine = kernel_spectrum(total, n_grid=1600).eigenvalues[:3]
    assert np.max(np.abs(coarse - fine)) <= 1e-4 * fine[0]


def test_kernel_validation():
    with pytest.raises(InputError):
        kernel_spectrum(one_term(), n_grid=4)
    from qcoarse.processes import Exponential

    with pytest.raises(InputError):
        kernel_spectrum(Exponential(2.0), n_grid=100, t_max=1.0)


def test_save_load_round_trip(tmp_path, ap_model):
    path = tmp_path / "model.txt"
    ap_model.save(path)
    again = QuantumModel.load(path)
    assert np.array_equal(again.unitary, ap_model.unitary)
    assert np.array_equal(again.generators, ap_model.generators)
    assert np.array_equal(again.reset, ap_model.reset)
    assert again.delta_t == ap_model.delta_t
    assert again.exp_sum.terms == ap_model.exp_sum.terms


def test_load_rejects_tampered_unitary(tmp_path, exp_model):
    lines = exp_model.dumps().splitlines()
    k = lines.index("begin unitary")
    width = len(lines[k + 1].split())
    lines[k + 1] = " ".join(["0"] * width)
    with pytest.raises(InputError):
        QuantumModel.loads("\n".join(lines))


def test_memory_state_functional_form(exp_model):
    a = memory_state(exp_model, 0.1)
    b = exp_model.memory_state(0.1)
    assert np.array_equal(a.vector, b.vector)
    assert a.prenorm_sq == b.prenorm_sq
