import numpy as np
import pytest

from oracles import norm_cdf, norm_pdf, simpson
from tswlad.baseline import (
    L2Baseline,
    SaturatedMeanModel,
    baseline_update,
    saturated_mean,
    saturated_mean_slope,
    saturated_mean_slope_infimum,
)
from tswlad.model import CustomNoise, Datum, Gaussian, GaussianMixture, SaturationSpec
from tswlad.projection import Box

SPEC = SaturationSpec(0.0, 0.0, 25.0, 25.0)
M1 = SaturatedMeanModel(Gaussian(1.0), SPEC)


def mean_oracle(x, sigma=1.0, spec=SPEC):
    L, l, u, U = spec.as_tuple()
    a, b = l - x, u - x
    lo, hi = max(a, -12 * sigma), min(b, 12 * sigma)
    inner = simpson(lambda t: (x + t) * norm_pdf(t, sigma), lo, hi) if hi > lo else 0.0
    return L * norm_cdf(a, sigma) + U * (1 - norm_cdf(b, sigma)) + inner


def test_saturated_mean_examples():
    assert saturated_mean(12.5, M1) == pytest.approx(12.5, abs=1e-6)
    assert saturated_mean(-100.0, M1) == pytest.approx(0.0, abs=1e-10)
    assert saturated_mean(25.0, M1) == pytest.approx(24.60106, abs=5e-6)
    assert saturated_mean(25.0, M1) == pytest.approx(mean_oracle(25.0), abs=1e-9)


def test_saturated_mean_against_quadrature():
    for sigma in (1.0, 3.0):
        m = SaturatedMeanModel(Gaussian(sigma), SPEC)
        for x in np.linspace(-5, 30, 15):
            assert saturated_mean(x, m) == pytest.approx(mean_oracle(x, sigma), abs=1e-8)


def test_custom_noise_uses_quadrature():
    g = Gaussian(2.0)
    custom = CustomNoise(g.cdf, g.pdf, g.sample, g.variance)
    for x in (-1.0, 3.0, 24.0):
        a = saturated_mean(x, SaturatedMeanModel(custom, SPEC))
        b = saturated_mean(x, SaturatedMeanModel(g, SPEC))
        assert a == pytest.approx(b, abs=1e-9)


def test_slope_examples():
    assert saturated_mean_slope(12.5, M1) == pytest.approx(1.0, abs=1e-6)
    assert saturated_mean_slope(25.0, M1) == pytest.approx(0.5, abs=1e-10)
    assert saturated_mean_slope(0.0, M1) == pytest.approx(0.5, abs=1e-10)


@pytest.mark.parametrize("noise", [Gaussian(1.0), GaussianMixture(0.3)])
@pytest.mark.parametrize("spec", [SPEC, SaturationSpec(-2.0, 0.0, 25.0, 27.0)])
def test_mean_monotone_bounded_and_slope_matches(noise, spec):
    m = SaturatedMeanModel(noise, spec)
    L, U = spec.lower_clip, spec.upper_clip
    xs = np.linspace(-20, 45, 400)
    g = np.array([saturated_mean(x, m) for x in xs])
    assert np.all(np.diff(g) >= -1e-12)
    assert np.all((g >= L) & (g <= U))
    h = 1e-5
    for x in xs[::7]:
        fd = (saturated_mean(x + h, m) - saturated_mean(x - h, m)) / (2 * h)
        assert abs(fd - saturated_mean_slope(x, m)) <= 1e-4
        assert saturated_mean_slope(x, m) >= 0
        if spec.is_continuous:
            assert saturated_mean_slope(x, m) <= 1


def test_slope_infimum():
    # G' is smallest at the edges of the symmetric range
    assert saturated_mean_slope_infimum(M1, 40.0) == pytest.approx(
        min(saturated_mean_slope(-40.0, M1), saturated_mean_slope(40.0, M1)))


def test_residual_zero_at_truth_interior():
    est = L2Baseline(Gaussian(1.0), Box(np.zeros(1), 20.0), theta0=[12.0], theta_bar0=[12.0])
    v, beta = est.step2_terms(Datum(np.ones(1), 12.0, SPEC), 12.0, 12.0)
    assert v == pytest.approx(0.0, abs=1e-9)
    assert beta == pytest.approx(1.0, abs=1e-9)


def test_baseline_keeps_invariants():
    rng = np.random.default_rng(0)
    D = Box(np.zeros(3), 10.0)
    est = L2Baseline(GaussianMixture(0.0), D)
    theta = np.array([6.0, 3.0, -2.0])
    for _ in range(500):
        phi = rng.normal(size=3)
        y = min(max(phi @ theta + rng.normal(), 0.0), 25.0)
        st = baseline_update(est, Datum(phi, y, SPEC))
        assert D.contains(st.step2.estimate)
        np.linalg.cholesky(st.step2.P)
        np.linalg.cholesky(st.step1.P)
    assert est.label == "tsqn-analog"
