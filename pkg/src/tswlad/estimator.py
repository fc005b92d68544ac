"""Two-step weighted least absolute deviation (TSWLAD) recursion.

Step 1 runs a conservative recursion whose gain slope is the density
infimum over the reachable range; it is guaranteed to converge but can be
very slow.  Step 2 reuses the Step 1 estimate to form a divided-difference
slope and runs an accelerated recursion on the same data.  Both steps share
:func:`step_update`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import ConfigError, NumericalError
from .model import (
    Datum,
    NoiseModel,
    Regime,
    SaturationSpec,
    WeightPolicy,
    classify_regime,
    saturate,
    sgn,
)
from .projection import AdmissibleSet, project, regressor_bound

#: Divided differences with ``|d| < DK_ZERO`` fall back to the density limit.
DK_ZERO = 1e-12
#: Smallest gain slope emitted by Step 1; keeps the slope strictly positive
#: when the density infimum underflows.
SLOPE_FLOOR = np.finfo(float).tiny
#: Condition number above which the projection metric is formed by Cholesky
#: solves rather than an explicit inverse.
COND_LIMIT = 1e12


@dataclass(frozen=True)
class Innovation:
    v: float
    regime: Regime
    sign: float


@dataclass(frozen=True)
class StepState:
    """State of one recursion: estimate, gain matrix and step-size factor."""

    estimate: np.ndarray
    P: np.ndarray
    mu: float
    gain: float = math.nan
    slope: float = math.nan


def innovation(y, phi, theta_hat, spec: SaturationSpec, noise: NoiseModel,
               regime: Regime | None = None) -> Innovation:
    """Sign residual plus the CDF correction for saturated predictions.

    ``regime`` overrides the classification of ``phi' theta_hat``; by default
    it is derived from ``spec``.
    """
    x = float(np.dot(phi, theta_hat))
    return _innovation_at(y, x, spec, noise, regime)


def _innovation_at(y, x, spec, noise, regime=None):
    if regime is None:
        regime = classify_regime(x, spec)
    s = sgn(y - saturate(x, spec))
    v = s
    if regime is Regime.UPPER:
        v += noise.cdf(spec.upper_threshold - x)
    elif regime is Regime.LOWER:
        v -= 1.0 - noise.cdf(spec.lower_threshold - x)
    return Innovation(v, regime, s)


def step1_range(C: float, l: float, u: float) -> float:
    return max(2.0 * C, C + l, C - u, 0.0)


def step1_gain_slope(noise: NoiseModel, C: float, l: float, u: float) -> float:
    """Density infimum over the range Step 1 can reach."""
    if C < 0:
        raise ValueError(f"regressor bound must be non-negative, got {C}")
    return max(noise.pdf_infimum(step1_range(C, l, u)), SLOPE_FLOOR)


def step2_gain_slope(noise: NoiseModel, spec: SaturationSpec, phi, theta, theta_bar,
                     regime: Regime | None = None) -> float:
    xk = float(np.dot(phi, theta))
    xb = float(np.dot(phi, theta_bar))
    return _step2_slope_at(noise, spec, xk, xb, regime)


def _step2_slope_at(noise, spec, xk, xb, regime=None):
    if regime is None:
        regime = classify_regime(xk, spec)
    d = xb - xk
    small = abs(d) < DK_ZERO
    if regime is Regime.LOWER:
        l = spec.lower_threshold
        if small:
            return noise.pdf(l - xk)
        return max((noise.cdf(l - xk) - noise.cdf(l - xb)) / d, 0.0)
    if regime is Regime.UPPER:
        u = spec.upper_threshold
        if small:
            return noise.pdf(u - xk)
        return max((noise.cdf(u - xk) - noise.cdf(u - xb)) / d, 0.0)
    if small:
        return 2.0 * noise.pdf(0.0)
    return max((1.0 - 2.0 * noise.cdf(xk - xb)) / d, 0.0)


def projection_metric(P: np.ndarray) -> np.ndarray:
    """``P^{-1}``, computed by Cholesky solves when ``P`` is ill-conditioned."""
    w = np.linalg.eigvalsh(P)
    if w[0] > 0 and w[-1] <= COND_LIMIT * w[0]:
        Q = np.linalg.inv(P)
    else:
        Q = cho_solve(cho_factor(P), np.eye(P.shape[0]))
    return 0.5 * (Q + Q.T)


def _check_pd(P: np.ndarray) -> np.ndarray:
    """Symmetrize ``P``; repair tiny negative eigenvalues, reject large ones."""
    P = 0.5 * (P + P.T)
    try:
        np.linalg.cholesky(P)
        return P
    except np.linalg.LinAlgError:
        pass
    w, V = np.linalg.eigh(P)
    tr = float(np.trace(P))
    if w[0] < -1e-10 * abs(tr):
        raise NumericalError(
            f"gain matrix lost positive definiteness: min eigenvalue {w[0]:.3e}, trace {tr:.3e}"
        )
    w = np.maximum(w, max(1e-300, 1e-16 * abs(tr)))
    return (V * w) @ V.T


#: Full Cholesky check of the gain matrix every this many updates.  The
#: rank-one downdate shrinks P along P phi by the factor
#: mu / (mu + beta b^2 phi'P phi) > 0, so P stays definite up to rounding.
PD_CHECK_EVERY = 32


def step_update(state: StepState, phi, weight: float, beta: float, v: float,
                D: AdmissibleSet, mu: float | None = None) -> StepState:
    """One projected quasi-Newton step shared by both recursions."""
    if beta < 0:
        raise ValueError(f"gain slope must be non-negative, got {beta}")
    if not 0.0 < weight <= 1.0:
        raise ValueError(f"weight must lie in (0, 1], got {weight}")
    if mu is not None:
        state = replace(state, mu=float(mu))
    return _step(state, np.asarray(phi, dtype=float), weight, beta, v, D, True)


def _step(state, phi, weight, beta, v, D, full_check):
    mu = state.mu
    P = state.P
    Pphi = P @ phi
    bb = beta * weight * weight
    a = 1.0 / (mu + bb * (phi @ Pphi))
    P_new = P - (a * bb) * (Pphi[:, None] * Pphi)
    if full_check:
        P_new = _check_pd(P_new)
    raw = state.estimate + (a * weight * v) * Pphi
    if not D.contains(raw):
        raw = project(raw, projection_metric(P_new), D, check=False)
    return StepState(raw, P_new, mu, a, beta)


def initial_point(D: AdmissibleSet, theta0=None) -> np.ndarray:
    if theta0 is None:
        return D.centroid()
    theta0 = np.asarray(theta0, dtype=float).ravel()
    if theta0.size != D.dim:
        raise ConfigError(f"initial estimate has d={theta0.size}, admissible set has d={D.dim}")
    if D.contains(theta0):
        return theta0.copy()
    return project(theta0, np.eye(D.dim), D)


@dataclass
class UpdateRecord:
    """What one update saw; consumed by the diagnostics."""

    k: int
    prediction: float
    weight: float
    v_bar: float
    v: float
    slope_bar: float
    slope: float


@dataclass
class EstimatorState:
    step1: StepState
    step2: StepState
    assumed_noise: NoiseModel
    admissible_set: AdmissibleSet
    k: int = 0
    weight_policy: WeightPolicy = field(default_factory=WeightPolicy)
    bound: float | None = None

    @property
    def dim(self):
        return self.step2.estimate.size


class TwoStepEstimator:
    """Common skeleton of the two coupled projected recursions.

    Subclasses define the innovations and the two gain slopes.
    """

    label = "two-step"

    def __init__(self, assumed_noise: NoiseModel, admissible_set: AdmissibleSet, *,
                 mu_bar: float = 1.0, mu: float = 1.0, theta_bar0=None, theta0=None,
                 P_bar0=None, P0=None, weight_policy: WeightPolicy | None = None,
                 bound: float | None = None):
        if not assumed_noise.has_density:
            raise ConfigError("assumed noise must have a continuous density (noise-density assumption)")
        for name, val in (("mu_bar", mu_bar), ("mu", mu)):
            if not (0 < val < math.inf):
                raise ConfigError(f"{name} must be positive and finite, got {val}")
        if bound is not None and bound < 0:
            raise ConfigError(f"regressor bound C must be non-negative, got {bound}")
        D = admissible_set
        d = D.dim
        P_bar0 = np.eye(d) if P_bar0 is None else np.array(P_bar0, dtype=float)
        P0 = np.eye(d) if P0 is None else np.array(P0, dtype=float)
        for name, M in (("P_bar0", P_bar0), ("P0", P0)):
            if M.shape != (d, d):
                raise ConfigError(f"{name} must be {d}x{d}, got {M.shape}")
            try:
                np.linalg.cholesky(0.5 * (M + M.T))
            except np.linalg.LinAlgError:
                raise ConfigError(f"{name} must be positive definite") from None
        self.state = EstimatorState(
            step1=StepState(initial_point(D, theta_bar0), P_bar0, float(mu_bar)),
            step2=StepState(initial_point(D, theta0), P0, float(mu)),
            assumed_noise=assumed_noise,
            admissible_set=D,
            weight_policy=weight_policy or WeightPolicy(),
            bound=bound,
        )

    # -- accessors
    @property
    def theta(self) -> np.ndarray:
        return self.state.step2.estimate

    @property
    def theta_bar(self) -> np.ndarray:
        return self.state.step1.estimate

    @property
    def k(self) -> int:
        return self.state.k

    def predict(self, phi, spec: SaturationSpec) -> float:
        return saturate(float(np.dot(phi, self.theta)), spec)

    # -- hooks
    def step1_terms(self, datum: Datum, x_bar: float, C: float) -> tuple[float, float]:
        raise NotImplementedError

    def step2_terms(self, datum: Datum, x: float, x_bar: float) -> tuple[float, float]:
        raise NotImplementedError

    # -- recursion
    def update(self, datum: Datum) -> UpdateRecord:
        st = self.state
        phi = np.asarray(datum.phi, dtype=float)
        if phi.shape != (st.dim,):
            raise ConfigError(f"regressor has shape {phi.shape}, estimator expects ({st.dim},)")
        spec = datum.spec
        D = st.admissible_set
        x = float(phi @ st.step2.estimate)
        x_bar = float(phi @ st.step1.estimate)
        pred = saturate(x, spec)
        b = st.weight_policy.weight(st.k, pred, datum.weight)
        C = st.bound if st.bound is not None else regressor_bound(D, phi)

        v_bar, beta_bar = self.step1_terms(datum, x_bar, C)
        v, beta = self.step2_terms(datum, x, x_bar)
        full = (st.k + 1) % PD_CHECK_EVERY == 0
        st.step1 = _step(st.step1, phi, b, beta_bar, v_bar, D, full)
        st.step2 = _step(st.step2, phi, b, beta, v, D, full)
        st.k += 1
        return UpdateRecord(st.k - 1, pred, b, v_bar, v, beta_bar, beta)

    def run(self, data) -> list[UpdateRecord]:
        return [self.update(d) for d in data]

    # -- snapshots
    def snapshot(self) -> dict:
        """Flat record of the state with a fixed field order."""
        st = self.state
        d = st.dim
        rec = {"k": st.k}
        for i in range(d):
            rec[f"theta_bar_{i}"] = float(st.step1.estimate[i])
        for i in range(d):
            rec[f"theta_{i}"] = float(st.step2.estimate[i])
        for i in range(d):
            for j in range(d):
                rec[f"P_bar_{i}_{j}"] = float(st.step1.P[i, j])
        for i in range(d):
            for j in range(d):
                rec[f"P_{i}_{j}"] = float(st.step2.P[i, j])
        rec["mu_bar"] = st.step1.mu
        rec["mu"] = st.step2.mu
        return rec

    def restore(self, rec: dict) -> None:
        st = self.state
        d = st.dim
        st.k = int(rec["k"])
        tb = np.array([rec[f"theta_bar_{i}"] for i in range(d)])
        th = np.array([rec[f"theta_{i}"] for i in range(d)])
        Pb = np.array([[rec[f"P_bar_{i}_{j}"] for j in range(d)] for i in range(d)])
        P = np.array([[rec[f"P_{i}_{j}"] for j in range(d)] for i in range(d)])
        st.step1 = StepState(tb, Pb, float(rec["mu_bar"]))
        st.step2 = StepState(th, P, float(rec["mu"]))


class TSWLAD(TwoStepEstimator):
    label = "tswlad"

    def step1_terms(self, datum, x_bar, C):
        spec = datum.spec
        noise = self.state.assumed_noise
        v_bar = _innovation_at(datum.y, x_bar, spec, noise).v
        beta_bar = step1_gain_slope(noise, C, spec.lower_threshold, spec.upper_threshold)
        return v_bar, beta_bar

    def step2_terms(self, datum, x, x_bar):
        spec = datum.spec
        noise = self.state.assumed_noise
        inn = _innovation_at(datum.y, x, spec, noise)
        beta = _step2_slope_at(noise, spec, x, x_bar, inn.regime)
        return inn.v, beta


def tswlad_update(est: TwoStepEstimator, datum: Datum) -> EstimatorState:
    """Advance ``est`` by one datum and return its state.

    Works for any two-step estimator; the estimator owns and mutates its state.
    """
    est.update(datum)
    return est.state


def copy_state(state: EstimatorState) -> EstimatorState:
    return replace(
        state,
        step1=replace(state.step1, estimate=state.step1.estimate.copy(), P=state.step1.P.copy()),
        step2=replace(state.step2, estimate=state.step2.estimate.copy(), P=state.step2.P.copy()),
    )


__all__ = [
    "Innovation", "StepState", "EstimatorState", "UpdateRecord", "TwoStepEstimator", "TSWLAD",
    "innovation", "step1_gain_slope", "step2_gain_slope", "step_update", "tswlad_update",
    "initial_point", "projection_metric", "copy_state",
]
