"""Excitation tracking, convergence and regret metrics, and innovation-mean oracles."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .model import NoiseModel, Regime, SaturationSpec, classify_regime, saturate

METRIC_COLUMNS = (
    "k",
    "param_err",
    "param_err_bar",
    "regret_avg",
    "pred_err_avg",
    "lambda_min",
    "lambda_max",
    "rate_ratio",
    "lyapunov",
)


class InformationTracker:
    """Running information matrix ``P0^{-1} + sum phi phi'`` and its extreme eigenvalues.

    Eigenvalues are refreshed every ``every`` updates and on demand through
    :meth:`refresh`.
    """

    def __init__(self, P0_inv, every: int = 10):
        self.matrix = np.array(P0_inv, dtype=float)
        self.every = every
        self.count = 0
        self.lambda_min = math.nan
        self.lambda_max = math.nan
        self.refresh()

    def update(self, phi) -> "InformationTracker":
        phi = np.asarray(phi, dtype=float)
        self.matrix += phi[:, None] * phi
        self.count += 1
        if self.every and self.count % self.every == 0:
            self.refresh()
        return self

    def refresh(self) -> tuple[float, float]:
        w = np.linalg.eigvalsh(self.matrix)
        self.lambda_min, self.lambda_max = float(w[0]), float(w[-1])
        return self.lambda_min, self.lambda_max


def update_tracker(t: InformationTracker, phi) -> InformationTracker:
    t.update(phi)
    t.refresh()
    return t


def rate_ratio(t: InformationTracker, err: float) -> float:
    """``err**2 * lambda_min / log(lambda_max + e)``; bounded when the rate bound holds."""
    if not t.lambda_min > 0:
        raise ValueError("information matrix must be positive definite")
    return err * err * t.lambda_min / math.log(t.lambda_max + math.e)


def excitation_condition(t: InformationTracker) -> float:
    """``log lambda_max / lambda_min``; tends to zero under the weak excitation condition."""
    return math.log(t.lambda_max) / t.lambda_min


def regret_step(y_star: float, y_hat: float, b: float) -> float:
    if not 0.0 < b <= 1.0:
        raise ValueError(f"weight must lie in (0, 1], got {b}")
    return b * abs(y_star - y_hat)


def avg_prediction_error(observations, predictions, weights=None) -> float:
    """``(1/n) sum b_k |y_{k+1} - yhat_{k+1}|``."""
    y = np.asarray(observations, dtype=float)
    yh = np.asarray(predictions, dtype=float)
    if y.size == 0:
        raise ValueError("need at least one prediction")
    b = np.ones_like(y) if weights is None else np.asarray(weights, dtype=float)
    return float(np.mean(b * np.abs(y - yh)))


def psi_value(phi, theta_hat, theta, spec: SaturationSpec, noise: NoiseModel,
              regime: Regime | None = None) -> float:
    """Conditional mean of the innovation at ``theta_hat`` when the truth is ``theta``."""
    x_hat = float(np.dot(phi, theta_hat))
    x = float(np.dot(phi, theta))
    return psi_at(x_hat, x, spec, noise, regime)


def psi_at(x_hat: float, x: float, spec: SaturationSpec, noise: NoiseModel,
           regime: Regime | None = None) -> float:
    if regime is None:
        regime = classify_regime(x_hat, spec)
    F = noise.cdf
    if regime is Regime.LOWER:
        l = spec.lower_threshold
        return F(l - x_hat) - F(l - x)
    if regime is Regime.UPPER:
        u = spec.upper_threshold
        return F(u - x_hat) - F(u - x)
    return 1.0 - 2.0 * F(x_hat - x)


def sentencing_accuracy(pairs) -> float:
    """``1 - mean(|y - yhat| / y)`` over (observed, predicted) pairs."""
    arr = np.asarray(list(pairs), dtype=float).reshape(-1, 2)
    if arr.shape[0] == 0:
        raise DataError("no pairs to score")
    y, yh = arr[:, 0], arr[:, 1]
    if np.any(y <= 0):
        raise DataError("accuracy requires strictly positive observations")
    return float(1.0 - np.mean(np.abs(y - yh) / y))


@dataclass
class MetricSeries:
    """Checkpointed metrics for one estimator on one trajectory."""

    rows: list = field(default_factory=list)

    def append(self, row: dict) -> None:
        self.rows.append(tuple(float(row[c]) if c != "k" else int(row[c]) for c in METRIC_COLUMNS))

    def __len__(self):
        return len(self.rows)

    def column(self, name: str) -> np.ndarray:
        i = METRIC_COLUMNS.index(name)
        return np.array([r[i] for r in self.rows])

    def at(self, k: int) -> dict:
        for r in self.rows:
            if r[0] == k:
                return dict(zip(METRIC_COLUMNS, r))
        raise KeyError(k)


class MetricRecorder:
    """Accumulates regret and prediction error for one estimator and emits rows.

    Call :meth:`observe` before each estimator update (it needs the
    pre-update estimate) and :meth:`checkpoint` after it.
    """

    def __init__(self, theta_true, P0, every: int = 10):
        self.theta = np.asarray(theta_true, dtype=float)
        self.tracker = InformationTracker(np.linalg.inv(P0), every=0)
        self.every = every
        self.regret_sum = 0.0
        self.pred_err_sum = 0.0
        self.n = 0
        self.series = MetricSeries()
        self.predictions = []
        self.observations = []
        self.weights = []

    def observe(self, datum, prediction: float, weight: float) -> None:
        y_star = saturate(float(datum.phi @ self.theta), datum.spec)
        self.regret_sum += regret_step(y_star, prediction, weight)
        self.pred_err_sum += weight * abs(datum.y - prediction)
        self.predictions.append(prediction)
        self.observations.append(datum.y)
        self.weights.append(weight)
        self.tracker.update(datum.phi)
        self.n += 1

    def checkpoint(self, estimator, force: bool = False) -> None:
        if not force and (self.every <= 0 or self.n % self.every):
            return
        if self.series.rows and self.series.rows[-1][0] == self.n:
            return
        t = self.tracker
        t.refresh()
        err_vec = self.theta - estimator.theta
        err = float(np.linalg.norm(err_vec))
        P = estimator.state.step2.P
        self.series.append({
            "k": self.n,
            "param_err": err,
            "param_err_bar": float(np.linalg.norm(self.theta - estimator.theta_bar)),
            "regret_avg": self.regret_sum / self.n,
            "pred_err_avg": self.pred_err_sum / self.n,
            "lambda_min": t.lambda_min,
            "lambda_max": t.lambda_max,
            "rate_ratio": rate_ratio(t, err),
            "lyapunov": float(err_vec @ np.linalg.solve(P, err_vec)),
        })
