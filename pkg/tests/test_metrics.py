"""KS metrics: closed-form oracles for the continuous and discrete flavours."""

import math

import numpy as np
import pytest

from qcoarse.errors import InputError
from qcoarse.metrics import (DiscretePmf, KsReport, averaged_ks,
                             best_memoryless_ks, ks_continuous_discrete,
                             ks_survival)
from qcoarse.processes import Exponential, TopHat

# sup_t |e^{-t} - e^{-1.1 t}| attained at t* = ln(1.1)/0.1, value
# e^{-t*} (1 - 1/1.1) = 1.1^{-10} * 0.1/1.1
RATE_MISMATCH_T = math.log(1.1) / 0.1
RATE_MISMATCH_KS = 1.1 ** -10 * (0.1 / 1.1)


def test_identical_curves_give_zero():
    surv = Exponential(1.0).survival
    rep = ks_survival(surv, surv)
    assert rep.statistic == 0.0


def test_rate_mismatch_closed_form():
    rep = ks_survival(Exponential(1.0).survival, Exponential(1.1).survival)
    assert rep.statistic == pytest.approx(RATE_MISMATCH_KS, abs=1e-4)
    assert rep.argmax_t == pytest.approx(RATE_MISMATCH_T, abs=0.05)


def test_ks_survival_symmetry():
    a, b = Exponential(1.0).survival, TopHat(1.0, 0.5).survival
    assert ks_survival(a, b).statistic == ks_survival(b, a).statistic


def test_grid_refinement_is_stable():
    a, b = Exponential(1.0).survival, Exponential(1.1).survival
    coarse = ks_survival(a, b, n_points=1000).statistic
    fine = ks_survival(a, b, n_points=8000).statistic
    assert abs(coarse - fine) <= 1e-3


def test_triangle_inequality_on_shared_grid():
    grid = np.linspace(0.0, 12.0, 2001)
    a, b, c = (Exponential(r).survival for r in (1.0, 1.5, 2.0))
    ab = ks_survival(a, b, grid=grid).statistic
    bc = ks_survival(b, c, grid=grid).statistic
    ac = ks_survival(a, c, grid=grid).statistic
    assert ac <= ab + bc + 1e-15


def test_arrays_without_grid_rejected():
    with pytest.raises(InputError):
        ks_survival(np.ones(5), np.ones(5))


def test_ks_report_float_protocol():
    assert float(KsReport(0.25, 1.0, 10)) == 0.25


def test_single_atom_vs_exponential():
    # all mass at t=1: sup is max(F(1), 1-F(1)) at the jump
    pmf = DiscretePmf([0.0, 1.0], delta_t=1.0)
    rep = ks_continuous_discrete(Exponential(1.0), pmf)
    assert rep.statistic == pytest.approx(1.0 - math.exp(-1.0), abs=1e-14)
    assert rep.argmax_t == 1.0


def test_uniform_vs_lattice_discretization():
    # staircase matching the CDF at every atom: gap = one step = delta_t
    dist = TopHat(1.0, 1.0)
    dt = 1.0 / 64.0
    times = np.arange(97) * dt
    cdf = 1.0 - dist.survival(times)
    masses = np.diff(cdf, prepend=0.0)
    rep = ks_continuous_discrete(dist, DiscretePmf(masses, dt))
    assert rep.statistic == pytest.approx(dt, abs=1e-12)


def test_exponential_vs_geometric_bound():
    lam, dt, n = 1.0, 0.01, 3000
    k = np.arange(n + 1)
    masses = np.where(k == 0, 0.0,
                      np.exp(-(k - 1) * dt * lam) * (1.0 - math.exp(-lam * dt)))
    pmf = DiscretePmf(masses, dt, residual=math.exp(-lam * n * dt))
    rep = ks_continuous_discrete(Exponential(lam), pmf)
    bound = 1.0 - math.exp(-lam * dt)
    assert rep.statistic == pytest.approx(bound, abs=1e-12)
    assert rep.statistic <= bound + 1e-12


def test_extra_grid_cannot_beat_jump_points():
    pmf = DiscretePmf([0.0, 1.0], delta_t=1.0)
    dist = Exponential(1.0)
    plain = ks_continuous_discrete(dist, pmf).statistic
    extra = ks_continuous_discrete(dist, pmf, grid=np.linspace(0, 5, 501)).statistic
    assert extra == pytest.approx(plain, abs=1e-12)


def test_discrete_pmf_validation():
    with pytest.raises(InputError):
        DiscretePmf([0.0, 0.5], delta_t=1.0)  # mass deficit
    with pytest.raises(InputError):
        DiscretePmf([0.0, -0.1, 1.1], delta_t=1.0)
    with pytest.raises(InputError):
        DiscretePmf([0.0, 1.0], delta_t=0.0)


def test_averaged_ks():
    assert averaged_ks({"a": 1.0}, {"a": 0.3}) == pytest.approx(0.3)
    pair = averaged_ks({"a": 0.5, "b": 0.5},
                       {"a": KsReport(0.2, 0.0, 1), "b": KsReport(0.4, 0.0, 1)})
    assert pair == pytest.approx(0.3, abs=1e-15)
    with pytest.raises(InputError):
        averaged_ks({"a": 0.6, "b": 0.6}, {"a": 0.1, "b": 0.1})
    with pytest.raises(InputError):
        averaged_ks({"a": 1.0}, {"b": 0.1})


def test_best_memoryless_recovers_exponential():
    ks, rate = best_memoryless_ks(Exponential(2.0))
    assert ks < 1e-6
    assert rate == pytest.approx(2.0, rel=1e-3)


def test_best_memoryless_narrow_tophat_near_half():
    # nearly deterministic wait: the best exponential splits the jump, KS -> 1/2
    ks, _ = best_memoryless_ks(TopHat(1.0, 1.0 / 16.0))
    assert 0.45 <= ks < 0.5
