"""Least-squares two-step baseline ("TSQN-analog").

Same projected two-step skeleton as :class:`~tswlad.estimator.TSWLAD`, but
driven by the l2 residual ``y - G(phi' theta)`` where ``G`` is the mean of the
saturated output.  This is a reconstruction for comparison purposes; it is
not claimed to match any earlier recursion exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .errors import NumericalError
from .estimator import DK_ZERO, SLOPE_FLOOR, TwoStepEstimator, step1_range
from .model import Gaussian, GaussianMixture, NoiseModel, SaturationSpec, _grid_infimum


@dataclass(frozen=True)
class SaturatedMeanModel:
    noise: NoiseModel
    spec: SaturationSpec


def _partial_first_moment(noise: NoiseModel, a: float, b: float) -> float:
    """``int_a^b t f(t) dt``."""
    if isinstance(noise, Gaussian):
        return noise.variance * (noise.pdf(a) - noise.pdf(b))
    if isinstance(noise, GaussianMixture):
        return ((1.0 - noise.q) * _partial_first_moment(noise.first, a, b)
                + noise.q * _partial_first_moment(noise.second, a, b))
    val, err = quad(lambda t: t * noise.pdf(t), a, b, epsabs=1e-10, epsrel=1e-10, limit=200)
    if not math.isfinite(val) or err > 1e-8:
        raise NumericalError(f"quadrature for saturated mean did not converge (error estimate {err:.2e})")
    return val


def saturated_mean(x: float, m: SaturatedMeanModel) -> float:
    """``E[S(x + eps)]`` for the model's noise and thresholds."""
    L, l, u, U = m.spec.as_tuple()
    F = m.noise.cdf
    a, b = l - x, u - x
    Fa, Fb = F(a), F(b)
    val = L * Fa + U * (1.0 - Fb) + x * (Fb - Fa) + _partial_first_moment(m.noise, a, b)
    return min(max(val, L), U)


def saturated_mean_slope(x: float, m: SaturatedMeanModel) -> float:
    """Derivative of :func:`saturated_mean`.

    ``F(u - x) - F(l - x)`` for a continuous map; jumps at the thresholds add
    ``(U - u) f(u - x) + (l - L) f(l - x)``.
    """
    L, l, u, U = m.spec.as_tuple()
    F = m.noise.cdf
    val = F(u - x) - F(l - x)
    if U > u:
        val += (U - u) * m.noise.pdf(u - x)
    if l > L:
        val += (l - L) * m.noise.pdf(l - x)
    return max(val, 0.0)


def saturated_mean_slope_infimum(m: SaturatedMeanModel, radius: float) -> float:
    radius = max(radius, 0.0)
    if m.noise.symmetric_unimodal and m.spec.is_continuous:
        # the slope is a box-smoothed unimodal density, so unimodal itself
        return min(saturated_mean_slope(-radius, m), saturated_mean_slope(radius, m))
    return _grid_infimum(lambda t: saturated_mean_slope(t, m), -radius, radius)


class L2Baseline(TwoStepEstimator):
    label = "tsqn-analog"

    def step1_terms(self, datum, x_bar, C):
        m = SaturatedMeanModel(self.state.assumed_noise, datum.spec)
        v_bar = datum.y - saturated_mean(x_bar, m)
        R = step1_range(C, datum.spec.lower_threshold, datum.spec.upper_threshold)
        beta_bar = max(saturated_mean_slope_infimum(m, R), SLOPE_FLOOR)
        return v_bar, beta_bar

    def step2_terms(self, datum, x, x_bar):
        m = SaturatedMeanModel(self.state.assumed_noise, datum.spec)
        gx = saturated_mean(x, m)
        v = datum.y - gx
        d = x_bar - x
        if abs(d) < DK_ZERO:
            beta = saturated_mean_slope(x, m)
        else:
            beta = max((saturated_mean(x_bar, m) - gx) / d, 0.0)
        return v, beta


def baseline_update(est: L2Baseline, datum):
    est.update(datum)
    return est.state
