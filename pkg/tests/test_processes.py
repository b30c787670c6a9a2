"""Wait-time distribution closed forms, normalization, and parsing."""

import math

import numpy as np
import pytest

from qcoarse.errors import InputError
from qcoarse.processes import (AlternatingPoisson, BimodalGaussian,
                               Exponential, Tabulated, TopHat,
                               parse_dist_spec, sample_grid, tail_cutoff,
                               unit_rate)

ALL_BUILTINS = [
    Exponential(2.0),
    AlternatingPoisson(1.0),
    AlternatingPoisson(2.0),
    BimodalGaussian(1.0, 1.0, math.sqrt(5.0), math.sqrt(33.8), 1.0, 1.0),
    TopHat(1.0, 1.0),
    TopHat(0.0853, 0.0213),
]


def quadrature_mass(dist, n=200_001):
    t_hi = tail_cutoff(dist, threshold=1e-9)
    grid = np.linspace(0.0, t_hi, n)
    if isinstance(dist, TopHat):
        # trapezoid needs the jump locations on the grid to see the edges
        lo, hi = dist.tau - dist.width, dist.tau
        eps = 1e-12
        extra = np.array([lo - eps, lo, hi, hi + eps])
        grid = np.unique(np.concatenate([grid, extra[extra >= 0.0]]))
    return float(np.trapezoid(dist.pdf(grid), grid))


def test_pdf_alternating_poisson_closed_form():
    # gamma^2 t e^{-gamma t} at gamma=1, t=1
    dist = AlternatingPoisson(1.0)
    assert dist.pdf(1.0) == pytest.approx(math.exp(-1.0), abs=1e-12)


def test_pdf_tophat_outside_support():
    assert TopHat(1.0, 1.0).pdf(2.0) == 0.0


def test_pdf_bimodal_at_first_peak():
    dist = BimodalGaussian(1.0, 1.0, math.sqrt(5.0), math.sqrt(33.8), 1.0, 1.0)
    gap = math.sqrt(5.0) - math.sqrt(33.8)
    expected = dist.p1 + dist.p2 * math.exp(-gap * gap)
    assert dist.pdf(math.sqrt(5.0)) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("dist", ALL_BUILTINS)
def test_survival_at_zero_is_one(dist):
    assert dist.survival(0.0) == 1.0


def test_survival_exponential_closed_form():
    dist = Exponential(0.7)
    t = np.array([0.1, 1.0, 3.0])
    assert np.allclose(dist.survival(t), np.exp(-0.7 * t), atol=1e-14)


def test_survival_tophat_ends_at_tau():
    assert TopHat(1.3, 0.4).survival(1.3) == pytest.approx(0.0, abs=1e-14)


@pytest.mark.parametrize("dist", ALL_BUILTINS)
def test_survival_non_increasing(dist):
    grid = np.linspace(0.0, tail_cutoff(dist), 2000)
    surv = dist.survival(grid)
    assert np.all(np.diff(surv) <= 1e-15)


def test_mean_firing_rate_closed_forms():
    assert Exponential(1.7).mean_firing_rate() == pytest.approx(1.7, rel=1e-12)
    assert AlternatingPoisson(3.0).mean_firing_rate() == pytest.approx(1.5, rel=1e-12)
    tau, width = 1.0, 0.4
    assert TopHat(tau, width).mean_firing_rate() == pytest.approx(
        1.0 / (tau - width / 2.0), rel=1e-12)


def test_steady_state_density_closed_forms():
    assert Exponential(2.5).steady_state_density(0.0) == pytest.approx(2.5, rel=1e-12)
    # uniform on [0,1]: mu=2, survival(0.5)=0.5
    assert TopHat(1.0, 1.0).steady_state_density(0.5) == pytest.approx(1.0, rel=1e-12)


@pytest.mark.parametrize("dist", ALL_BUILTINS)
def test_steady_state_density_normalized(dist):
    t_hi = tail_cutoff(dist, threshold=1e-9)
    grid = np.linspace(0.0, t_hi, 200_001)
    mass = float(np.trapezoid(dist.steady_state_density(grid), grid))
    assert mass == pytest.approx(1.0, abs=1e-6)


def test_sqrt_wave_closed_forms():
    assert Exponential(1.0).sqrt_wave(0.0) == pytest.approx(1.0, abs=1e-12)
    assert TopHat(1.0, 0.5).sqrt_wave(2.0) == 0.0
    assert AlternatingPoisson(1.0).sqrt_wave(1.0) == pytest.approx(
        math.sqrt(math.exp(-1.0)), abs=1e-12)


@pytest.mark.parametrize("dist", ALL_BUILTINS)
def test_sqrt_wave_squares_to_pdf(dist):
    grid = np.linspace(0.0, tail_cutoff(dist), 777)
    assert np.max(np.abs(dist.sqrt_wave(grid) ** 2 - dist.pdf(grid))) <= 1e-12


@pytest.mark.parametrize("dist", ALL_BUILTINS)
def test_pdf_normalized(dist):
    assert quadrature_mass(dist) == pytest.approx(1.0, abs=1e-6)


def test_sample_grid_exponential_closed_form():
    h = sample_grid(Exponential(1.0), 4, domain=1.0)
    expected = np.exp(-np.arange(5) / 8.0)
    assert np.allclose(h, expected, atol=1e-14)


def test_sample_grid_constant_tabulated():
    dist = Tabulated([0.0, 1.0], [1.0, 1.0])
    assert np.allclose(sample_grid(dist, 2, domain=1.0), np.ones(3), atol=1e-12)


def test_tail_cutoff_covers_tail():
    for dist in ALL_BUILTINS:
        t = tail_cutoff(dist)
        assert dist.survival(t) < 1e-6
        # dyadic cutoffs keep rescalings float-exact
        assert math.log2(t) == round(math.log2(t))


def test_parse_dist_spec_round_trip():
    for dist in ALL_BUILTINS:
        again = parse_dist_spec(dist.spec_string())
        assert type(again) is type(dist)
        grid = np.linspace(0.0, 2.0, 101)
        assert np.allclose(again.pdf(grid), dist.pdf(grid), atol=0, rtol=0)


def test_parse_dist_spec_rejects_garbage():
    with pytest.raises(InputError):
        parse_dist_spec("exponential")
    with pytest.raises(InputError):
        parse_dist_spec("nosuch:gamma=1")
    with pytest.raises(InputError):
        parse_dist_spec("exponential:gamma=abc")


def test_unit_rate_pass_through_and_rescale():
    ap = AlternatingPoisson(2.0)
    assert unit_rate(ap) is ap  # already rate 1; must not be touched
    slow = AlternatingPoisson(0.5)
    scaled = unit_rate(slow)
    assert scaled.mean_firing_rate() == pytest.approx(1.0, rel=1e-12)


def test_rescaled_survival_equivariance():
    dist = AlternatingPoisson(2.0)
    fast = dist.rescaled(0.5)  # half the time scale: twice as fast
    t = np.linspace(0.0, 3.0, 50)
    assert np.allclose(fast.survival(t), dist.survival(2.0 * t), atol=1e-13)


def test_tabulated_renormalizes():
    dist = Tabulated([0.0, 1.0, 2.0], [3.0, 3.0, 0.0])
    assert quadrature_mass(dist) == pytest.approx(1.0, abs=1e-6)
