"""Exponential-sum decomposition: recovery oracles and normalization laws."""

import math

import numpy as np
import pytest

from qcoarse.errors import (DomainError, EmptyDecompositionError, InputError,
                            NumericalFailureError)
from qcoarse.expsum import (Candidates, ExpSum, ExpTerm, beylkin_monzon,
                            default_eps_grid, l2_norm, phi_tilde, postprocess,
                            scan_epsilon, survival_tilde)
from qcoarse.processes import AlternatingPoisson, Exponential, sample_grid, tail_cutoff

M = 100


def test_single_exponential_recovery():
    h = np.exp(-np.arange(M + 1) / M)
    cands = beylkin_monzon(h, 1e-10)
    lead = cands.terms[0]
    assert cands.domain_scale == M
    assert M * (-lead.gamma) == pytest.approx(-1.0, abs=1e-6)
    assert abs(lead.c) == pytest.approx(1.0, abs=1e-6)
    assert cands.residual <= 1e-8


def test_constant_samples_give_unit_root():
    cands = beylkin_monzon(np.ones(M + 1), 1e-8)
    lead = cands.terms[0]
    assert abs(lead.c) == pytest.approx(1.0, abs=1e-6)
    assert abs(lead.gamma) <= 1e-8  # gamma = 0: dropped later by postprocess
    assert abs(lead.omega) <= 1e-8


def test_two_exponential_recovery():
    j = np.arange(M + 1)
    h = np.exp(-j / M) + np.exp(-3.0 * j / M)
    total = postprocess(beylkin_monzon(h, 1e-10), 2)
    gammas = sorted(t.gamma for t in total.terms)
    assert gammas[0] == pytest.approx(1.0, rel=1e-5)
    assert gammas[1] == pytest.approx(3.0, rel=1e-5)


def test_five_term_recovery_with_conjugate_pair():
    # three real decays plus one conjugate pair; samples stay real
    zs = [complex(-0.5, 0.0), complex(-1.5, 0.0), complex(-2.5, 0.0),
          complex(-4.0, 7.0), complex(-4.0, -7.0)]
    cs = [1.0, 0.7, 0.4, complex(0.3, 0.2), complex(0.3, -0.2)]
    j = np.arange(201) / 200.0
    h = np.real(sum(c * np.exp(z * j) for c, z in zip(cs, zs)))
    cands = beylkin_monzon(h, 1e-10)
    assert cands.residual <= 1e-6
    total = postprocess(cands, 5)
    got = sorted((t.gamma, t.omega) for t in total.terms)
    want = sorted((-z.real, z.imag) for z in zs)
    for (gg, go), (wg, wo) in zip(got, want):
        assert gg == pytest.approx(wg, rel=1e-4)
        assert go == pytest.approx(wo, rel=1e-4, abs=1e-4)


def test_beylkin_monzon_input_validation():
    with pytest.raises(InputError):
        beylkin_monzon(np.ones(4), 1e-6)  # m odd
    with pytest.raises(InputError):
        beylkin_monzon([1.0, np.nan, 1.0], 1e-6)
    with pytest.raises(InputError):
        beylkin_monzon(np.ones(5), -1.0)
    with pytest.raises(InputError):
        beylkin_monzon(np.zeros(5), 1e-6)
    with pytest.raises(InputError):
        beylkin_monzon(np.ones(5), 1e-6, transpose="adjoint")


def test_conjugate_least_squares_beats_plain_transpose():
    ap = AlternatingPoisson(2.0)
    h = sample_grid(ap, 200, domain=tail_cutoff(ap))
    conj = beylkin_monzon(h, 1e-6, transpose="conjugate")
    plain = beylkin_monzon(h, 1e-6, transpose="plain")
    assert conj.residual <= plain.residual + 1e-12


def test_postprocess_drops_growing_and_normalizes():
    cands = [ExpTerm(1.0, -0.5, 0.0), ExpTerm(0.1, 2.0, 0.0)]
    total = postprocess(cands, 2)
    assert len(total.terms) == 1
    term = total.terms[0]
    assert term.gamma == 2.0
    assert abs(term.c) == pytest.approx(2.0, abs=1e-12)  # |c|^2 = 2 gamma


def test_postprocess_keeps_all_when_n_exceeds_count():
    cands = [ExpTerm(1.0, 1.0, 0.0), ExpTerm(0.5, 2.0, 0.0), ExpTerm(0.2, 3.0, 0.0)]
    total = postprocess(cands, 10)
    assert len(total.terms) == 3
    assert total.truncated_weight == 0.0


def test_postprocess_records_truncated_weight():
    cands = [ExpTerm(1.0, 1.0, 0.0), ExpTerm(0.5, 2.0, 0.0), ExpTerm(0.2, 3.0, 0.0)]
    total = postprocess(cands, 1)
    assert total.terms[0].gamma == 1.0
    assert total.truncated_weight == pytest.approx(0.7, abs=1e-15)


def test_postprocess_errors():
    with pytest.raises(InputError):
        postprocess([ExpTerm(1.0, 1.0, 0.0)], 0)
    with pytest.raises(EmptyDecompositionError):
        postprocess([ExpTerm(1.0, -1.0, 0.0), ExpTerm(1.0, 0.0, 0.0)], 2)


def test_postprocess_scales_candidate_exponents_to_unit_domain():
    cands = Candidates(terms=(ExpTerm(1.0, 0.01, 0.02),), domain_scale=100,
                       eps=1e-8, eigenvalue=1e-8, residual=0.0, cond=1.0,
                       used_pseudo_solve=False)
    total = postprocess(cands, 1)
    assert total.terms[0].gamma == pytest.approx(1.0, rel=1e-12)
    assert total.terms[0].omega == pytest.approx(2.0, rel=1e-12)


def test_l2_norm_closed_forms():
    assert l2_norm([ExpTerm(math.sqrt(2.0), 1.0, 0.0)]) == pytest.approx(1.0, abs=1e-12)
    assert l2_norm([ExpTerm(1.0, 0.5, 0.0)]) == pytest.approx(1.0, abs=1e-12)
    assert l2_norm([]) == 0.0
    with pytest.raises(DomainError):
        l2_norm([ExpTerm(1.0, 0.0, 0.0)])


def test_normalized_single_term_closed_forms():
    gamma = 1.3
    total = ExpSum.from_terms([(1.0, gamma, 0.0)])
    t = np.linspace(0.0, 4.0, 200)
    assert np.allclose(phi_tilde(total, t), 2 * gamma * np.exp(-2 * gamma * t), atol=1e-12)
    assert np.allclose(survival_tilde(total, t), np.exp(-2 * gamma * t), atol=1e-12)


def random_sum(rng, k=4):
    terms = [(complex(rng.normal(), rng.normal()),
              0.5 + 2.0 * rng.random(), 3.0 * rng.normal()) for _ in range(k)]
    return ExpSum.from_terms(terms)


def test_survival_matches_density_quadrature():
    rng = np.random.default_rng(7)
    for _ in range(3):
        total = random_sum(rng)
        grid = np.linspace(0.5, 24.0, 200_001)
        tail = float(np.trapezoid(total.pdf(grid), grid))
        assert total.survival(0.5) == pytest.approx(tail, abs=1e-6)


def test_survival_at_zero_equals_norm_squared():
    rng = np.random.default_rng(11)
    for _ in range(3):
        total = random_sum(rng)
        assert total.survival(0.0) == pytest.approx(1.0, abs=1e-12)
        assert total.l2_norm() == pytest.approx(1.0, abs=1e-12)


def test_negative_time_rejected():
    total = ExpSum.from_terms([(1.0, 1.0, 0.0)])
    with pytest.raises(DomainError):
        total.pdf(-0.1)
    with pytest.raises(DomainError):
        total.survival(np.array([0.0, -1.0]))


def test_density_non_negative_and_survival_monotone(ap_scans, bm_scans):
    grid = np.linspace(0.0, 1.5, 4001)
    for total, _ in (ap_scans[4], bm_scans[8]):
        assert np.all(total.pdf(grid) >= 0.0)
        surv = total.survival(grid)
        assert np.all(np.diff(surv) <= 1e-12)
        assert total.l2_norm() == pytest.approx(1.0, abs=1e-9)


def test_default_eps_grid_span():
    grid = default_eps_grid()
    assert grid.size == 23
    assert grid[0] == pytest.approx(1e-12, rel=1e-12)
    assert grid[-1] == pytest.approx(1e-1, rel=1e-12)


def test_scan_exponential_is_exactly_representable(exp_scan):
    best, entries = exp_scan
    assert len(entries) == 1
    assert best.metadata["ks"] <= 1e-6
    assert len(best.terms) == 1
    assert best.time_scale == 8.0


def test_scan_reports_every_eps_and_failures_inline():
    best, entries = scan_epsilon(Exponential(2.0), 1,
                                 eps_list=[1e-10, 1e-6, 1e3], m=200)
    assert len(entries) == 3
    errored = [e for e in entries if e.error]
    valid = [e for e in entries if not e.error]
    assert len(errored) == 1 and entries[2].error
    assert all(np.isfinite(e.ks) for e in valid)
    assert best.metadata["ks"] == min(e.ks for e in valid)


def test_scan_raises_when_every_eps_fails():
    with pytest.raises(NumericalFailureError):
        scan_epsilon(Exponential(2.0), 1, eps_list=[1e3, 1e4], m=200)


def test_more_terms_fit_alternating_poisson_better(ap_scans):
    ks = {n: ap_scans[n][0].metadata["ks"] for n in (1, 2)}
    assert ks[2] < ks[1]


def test_scan_determinism():
    ap = AlternatingPoisson(2.0)
    a, _ = scan_epsilon(ap, 2, eps_list=[1e-8, 1e-6, 1e-4], m=200)
    b, _ = scan_epsilon(ap, 2, eps_list=[1e-8, 1e-6, 1e-4], m=200)
    assert a.terms == b.terms


def test_rescaled_preserves_norm_and_moves_density():
    total = ExpSum.from_terms([(1.0, 1.0, 2.0), (0.4, 2.0, -1.0)])
    fast = total.rescaled(0.5)
    assert fast.l2_norm() == pytest.approx(1.0, abs=1e-12)
    t = np.linspace(0.0, 3.0, 64)
    assert np.allclose(fast.pdf(t), total.pdf(t / 0.5) / 0.5, atol=1e-12)


def test_save_load_round_trip(tmp_path, ap_scans):
    total, _ = ap_scans[4]
    path = tmp_path / "sum.txt"
    total.save(path)
    again = ExpSum.load(path)
    assert again.terms == total.terms  # 17-digit floats survive the text format
    assert again.domain_scale == total.domain_scale
    assert again.time_scale == total.time_scale
    assert again.truncated_weight == total.truncated_weight


def test_loads_requires_header():
    with pytest.raises(InputError):
        ExpSum.loads("1.0 0.0 1.0 0.0\n")
    with pytest.raises(InputError):
        ExpSum.loads("2 100\n1.0 0.0 1.0 0.0\n")
