"""Saturated observation model: thresholds, noise laws, regressors and simulation."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigError, NumericalError

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


class Regime(enum.Enum):
    LOWER = "lower"
    INTERIOR = "interior"
    UPPER = "upper"


@dataclass(frozen=True)
class SaturationSpec:
    """Thresholds of the censoring map.

    Inputs below ``lower_threshold`` read as ``lower_clip``, inputs above
    ``upper_threshold`` read as ``upper_clip``, everything in between is
    observed exactly.
    """

    lower_clip: float
    lower_threshold: float
    upper_threshold: float
    upper_clip: float

    def __post_init__(self):
        L, l, u, U = self.as_tuple()
        if not all(math.isfinite(v) for v in (L, l, u, U)):
            raise ConfigError("saturation thresholds must be finite (saturation assumption)")
        if not (L <= l <= u <= U):
            raise ConfigError(
                f"saturation thresholds must satisfy L <= l <= u <= U, got {self.as_tuple()} "
                "(saturation assumption)"
            )
        if L == l == u == U:
            raise ConfigError("saturation thresholds may not all coincide (saturation assumption)")

    @classmethod
    def continuous(cls, low: float, high: float) -> "SaturationSpec":
        return cls(low, low, high, high)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.lower_clip, self.lower_threshold, self.upper_threshold, self.upper_clip)

    @property
    def is_continuous(self) -> bool:
        return self.lower_clip == self.lower_threshold and self.upper_threshold == self.upper_clip


def saturate(x: float, spec: SaturationSpec) -> float:
    if x < spec.lower_threshold:
        return spec.lower_clip
    if x > spec.upper_threshold:
        return spec.upper_clip
    return x


def saturate_array(x: np.ndarray, spec: SaturationSpec) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    out = np.where(x < spec.lower_threshold, spec.lower_clip, x)
    return np.where(x > spec.upper_threshold, spec.upper_clip, out)


def classify_regime(x: float, spec: SaturationSpec) -> Regime:
    # Lower wins over Upper, both win over Interior at exact boundary hits.
    s = saturate(x, spec)
    if s == spec.lower_clip:
        return Regime.LOWER
    if s == spec.upper_clip:
        return Regime.UPPER
    return Regime.INTERIOR


def sgn(x: float) -> float:
    if x > 0:
        return 1.0
    if x < 0:
        return -1.0
    return 0.0


# --------------------------------------------------------------------------
# Noise models


class NoiseModel:
    """Conditional law of the additive noise.

    Subclasses provide ``cdf``, ``pdf``, ``sample`` and ``variance``.  Models
    that declare ``symmetric_unimodal`` let the estimator take density infima
    in closed form (the infimum over ``|x| <= R`` is ``pdf(R)``).
    """

    symmetric_unimodal = False
    #: False for laws without a density (usable only as simulator noise).
    has_density = True

    def cdf(self, x: float) -> float:
        raise NotImplementedError

    def pdf(self, x: float) -> float:
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError

    @property
    def variance(self) -> float:
        raise NotImplementedError

    def evaluate(self, x: float) -> tuple[float, float]:
        return self.cdf(x), self.pdf(x)

    def pdf_infimum(self, radius: float) -> float:
        """Infimum of the density over ``[-radius, radius]``."""
        radius = max(float(radius), 0.0)
        if self.symmetric_unimodal:
            return self.pdf(radius)
        return _grid_infimum(self.pdf, -radius, radius)

    def pdf_supremum(self, radius: float) -> float:
        radius = max(float(radius), 0.0)
        if self.symmetric_unimodal:
            return self.pdf(0.0)
        return -_grid_infimum(lambda t: -self.pdf(t), -radius, radius)

    def to_dict(self) -> dict:
        raise NotImplementedError


def _grid_infimum(func: Callable[[float], float], lo: float, hi: float) -> float:
    if hi <= lo:
        return func(lo)
    grid = np.linspace(lo, hi, 4097)
    vals = np.array([func(t) for t in grid])
    i = int(np.argmin(vals))
    a = grid[max(i - 1, 0)]
    b = grid[min(i + 1, grid.size - 1)]
    # trisection on the bracketing cells
    while b - a > 1e-10:
        m1 = a + (b - a) / 3.0
        m2 = b - (b - a) / 3.0
        if func(m1) <= func(m2):
            b = m2
        else:
            a = m1
    return min(float(vals[i]), func(0.5 * (a + b)))


class Gaussian(NoiseModel):
    symmetric_unimodal = True

    def __init__(self, sigma: float = 1.0):
        if not sigma > 0 or not math.isfinite(sigma):
            raise ConfigError(f"Gaussian sigma must be positive and finite, got {sigma}")
        self.sigma = float(sigma)
        self._scale = 1.0 / (self.sigma * _SQRT2)

    def cdf(self, x: float) -> float:
        return 0.5 * math.erfc(-x * self._scale)

    def pdf(self, x: float) -> float:
        z = x / self.sigma
        return _INV_SQRT_2PI / self.sigma * math.exp(-0.5 * z * z)

    def sample(self, rng, size):
        return self.sigma * rng.standard_normal(size)

    @property
    def variance(self) -> float:
        return self.sigma**2

    def to_dict(self) -> dict:
        return {"kind": "gaussian", "sigma": self.sigma}

    def __repr__(self):
        return f"Gaussian(sigma={self.sigma!r})"


class GaussianMixture(NoiseModel):
    """Zero-mean two-component Gaussian mixture.

    With probability ``1 - q`` the noise is ``N(0, sigma1**2)``, otherwise
    ``N(0, sigma2**2)``.
    """

    symmetric_unimodal = True

    def __init__(self, q: float, sigma1: float = 1.0, sigma2: float = math.sqrt(10.0)):
        if not 0.0 <= q <= 1.0:
            raise ConfigError(f"mixture weight q must lie in [0, 1], got {q}")
        self.q = float(q)
        self.first = Gaussian(sigma1)
        self.second = Gaussian(sigma2)

    def cdf(self, x):
        return (1.0 - self.q) * self.first.cdf(x) + self.q * self.second.cdf(x)

    def pdf(self, x):
        return (1.0 - self.q) * self.first.pdf(x) + self.q * self.second.pdf(x)

    def sample(self, rng, size):
        # one uniform then one normal per draw, regardless of component
        u = rng.random(size)
        z = rng.standard_normal(size)
        scale = np.where(u < self.q, self.second.sigma, self.first.sigma)
        return scale * z

    @property
    def variance(self):
        return (1.0 - self.q) * self.first.variance + self.q * self.second.variance

    def to_dict(self):
        return {
            "kind": "mixture",
            "q": self.q,
            "sigma1": self.first.sigma,
            "sigma2": self.second.sigma,
        }

    def __repr__(self):
        return f"GaussianMixture(q={self.q!r}, sigma1={self.first.sigma!r}, sigma2={self.second.sigma!r})"


class CustomNoise(NoiseModel):
    """User-supplied law given by callables; infima are found numerically."""

    def __init__(self, cdf, pdf, sampler, variance=math.nan):
        self._cdf = cdf
        self._pdf = pdf
        self._sampler = sampler
        self._variance = variance

    def cdf(self, x):
        return float(self._cdf(x))

    def pdf(self, x):
        return float(self._pdf(x))

    def sample(self, rng, size):
        return np.asarray(self._sampler(rng, size), dtype=float)

    @property
    def variance(self):
        return self._variance

    def to_dict(self):
        raise ConfigError("custom noise models cannot be serialized")


class ZeroNoise(NoiseModel):
    """Degenerate noise fixed at zero. Only valid as simulator noise."""

    has_density = False

    def cdf(self, x):
        return 1.0 if x >= 0 else 0.0

    def pdf(self, x):
        raise ConfigError("zero noise has no density; it cannot be assumed by an estimator")

    def sample(self, rng, size):
        return np.zeros(size)

    @property
    def variance(self):
        return 0.0

    def to_dict(self):
        return {"kind": "zero"}


def noise_from_dict(d: dict) -> NoiseModel:
    kind = d.get("kind")
    extra = set(d) - {"kind", "sigma", "q", "sigma1", "sigma2"}
    if extra:
        raise ConfigError(f"unknown noise keys: {sorted(extra)}")
    if kind == "gaussian":
        return Gaussian(d.get("sigma", 1.0))
    if kind == "mixture":
        return GaussianMixture(d["q"], d.get("sigma1", 1.0), d.get("sigma2", math.sqrt(10.0)))
    if kind == "zero":
        return ZeroNoise()
    raise ConfigError(f"unknown noise kind {kind!r}")


def noise_eval(model: NoiseModel, x: float) -> tuple[float, float]:
    return model.evaluate(x)


def noise_quantile(model: NoiseModel, p: float, tol: float = 1e-10, max_iter: int = 200) -> float:
    """Invert the CDF by bracketing bisection."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"quantile level must lie in (0, 1), got {p}")
    if p == 0.5 and model.cdf(0.0) == 0.5:
        return 0.0
    lo, hi = -1.0, 1.0
    while model.cdf(lo) > p:
        lo *= 2.0
        if lo < -1e300:
            raise NumericalError("could not bracket quantile from below")
    while model.cdf(hi) < p:
        hi *= 2.0
        if hi > 1e300:
            raise NumericalError("could not bracket quantile from above")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fm = model.cdf(mid)
        if abs(fm - p) <= tol:
            return mid
        if fm < p:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 4 * np.finfo(float).eps * max(1.0, abs(mid)):
            # interval collapsed to machine resolution
            if abs(fm - p) <= tol:
                return mid
            break
    raise NumericalError(f"quantile bisection did not reach |F(x) - p| <= {tol} in {max_iter} iterations")


# --------------------------------------------------------------------------
# Regressors and systems


@dataclass(frozen=True)
class ARProcess:
    """Vector AR(1) regressors ``phi[k+1] = A phi[k] + v[k+1]``.

    Component ``j`` of ``v[k+1]`` is ``scale[j] * (k + 1) ** -decay[j]`` times
    a standard normal draw.  The process starts from ``phi[0] = 0``.
    """

    A: np.ndarray
    scale: np.ndarray
    decay: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        d = A.shape[0]
        if A.shape != (d, d):
            raise ConfigError(f"AR matrix must be square, got shape {A.shape}")
        scale = np.broadcast_to(np.asarray(self.scale, dtype=float), (d,)).copy()
        decay = np.broadcast_to(np.asarray(self.decay, dtype=float), (d,)).copy()
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "scale", scale)
        object.__setattr__(self, "decay", decay)

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    def generate(self, horizon: int, rng: np.random.Generator) -> np.ndarray:
        """Return ``phi[0..horizon-1]`` as a ``(horizon, d)`` array."""
        d = self.dim
        phis = np.zeros((horizon, d))
        if horizon <= 1:
            return phis
        k = np.arange(1, horizon, dtype=float)[:, None]
        v = rng.standard_normal((horizon - 1, d)) * self.scale * k ** (-self.decay)
        A = self.A
        diagonal = np.count_nonzero(A - np.diag(np.diagonal(A))) == 0
        a = np.diagonal(A)
        phi = np.zeros(d)
        for i in range(1, horizon):
            phi = (a * phi if diagonal else A @ phi) + v[i - 1]
            phis[i] = phi
        return phis


@dataclass(frozen=True)
class FixedDesign:
    """Regressors read from a dataset, replayed in order."""

    phis: np.ndarray
    specs: tuple = ()

    @property
    def dim(self) -> int:
        return self.phis.shape[1]

    def generate(self, horizon: int, rng=None) -> np.ndarray:
        if horizon > self.phis.shape[0]:
            raise ConfigError(
                f"horizon {horizon} exceeds fixed design length {self.phis.shape[0]}"
            )
        return np.array(self.phis[:horizon], dtype=float)


@dataclass(frozen=True)
class Datum:
    """One time step: regressor, saturated observation, thresholds and weight.

    ``weight`` may be None when the estimator's weight policy decides it.
    """

    phi: np.ndarray
    y: float
    spec: SaturationSpec
    weight: float | None = None

    def __post_init__(self):
        if self.weight is not None and not 0.0 < self.weight <= 1.0:
            raise ConfigError(f"weight must lie in (0, 1], got {self.weight} (weight assumption)")
        if not self.spec.lower_clip <= self.y <= self.spec.upper_clip:
            raise ConfigError(f"observation {self.y} outside [L, U] = "
                              f"[{self.spec.lower_clip}, {self.spec.upper_clip}]")


def spec_at(schedule, k: int) -> SaturationSpec:
    if isinstance(schedule, SaturationSpec):
        return schedule
    if callable(schedule):
        return schedule(k)
    return schedule[k]


@dataclass(frozen=True)
class SystemSpec:
    theta: np.ndarray
    regressors: ARProcess | FixedDesign
    noise: NoiseModel
    saturation: object  # SaturationSpec, sequence of specs, or callable k -> spec
    weights: np.ndarray | None = None

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float).ravel()
        object.__setattr__(self, "theta", theta)
        if self.regressors.dim != theta.size:
            raise ConfigError(
                f"dimension mismatch: regressors have d={self.regressors.dim}, theta has d={theta.size}"
            )

    @property
    def dim(self) -> int:
        return self.theta.size


def simulate_trajectory(system: SystemSpec, horizon: int, rng) -> list[Datum]:
    """Draw ``horizon`` data points from the saturated system.

    ``rng`` is a seed, ``SeedSequence`` or ``Generator``.  Regressors and
    observation noise use separate child streams so the regressor path for a
    seed does not depend on the noise law.
    """
    if horizon < 0:
        raise ConfigError(f"horizon must be non-negative, got {horizon}")
    reg_rng, noise_rng = _child_streams(rng)
    phis = system.regressors.generate(horizon, reg_rng)
    eps = system.noise.sample(noise_rng, horizon)
    clean = phis @ system.theta + eps
    data = []
    for k in range(horizon):
        spec = spec_at(system.saturation, k)
        w = None if system.weights is None else float(system.weights[k])
        data.append(Datum(phis[k], saturate(clean[k], spec), spec, w))
    return data


def _child_streams(rng):
    if isinstance(rng, np.random.Generator):
        seq = rng.bit_generator.seed_seq
    elif isinstance(rng, np.random.SeedSequence):
        seq = rng
    else:
        seq = np.random.SeedSequence(rng)
    a, b = seq.spawn(2)
    return np.random.default_rng(a), np.random.default_rng(b)


# --------------------------------------------------------------------------
# Weights


@dataclass(frozen=True)
class WeightPolicy:
    """How the loss weight ``b_k`` is chosen.

    ``kind`` is ``"constant"``, ``"inverse_prediction"`` or ``"sequence"``.
    Emitted weights are clamped into ``[floor, 1]``.
    """

    kind: str = "constant"
    value: float = 1.0
    values: tuple = field(default=())
    floor: float = 1e-6

    def __post_init__(self):
        if self.kind not in ("constant", "inverse_prediction", "sequence"):
            raise ConfigError(f"unknown weight policy {self.kind!r}")
        if self.kind == "constant" and not 0.0 < self.value <= 1.0:
            raise ConfigError(f"constant weight must lie in (0, 1], got {self.value} (weight assumption)")
        if not 0.0 < self.floor <= 1.0:
            raise ConfigError("weight floor must lie in (0, 1]")

    def weight(self, k: int, prediction: float, datum_weight: float | None = None) -> float:
        if datum_weight is not None:
            b = datum_weight
        elif self.kind == "constant":
            b = self.value
        elif self.kind == "sequence":
            b = self.values[k]
        elif prediction <= 1.0:
            b = 1.0
        else:
            b = 1.0 / prediction
        return min(max(b, self.floor), 1.0)

    def to_dict(self):
        d = {"kind": self.kind}
        if self.kind == "constant":
            d["value"] = self.value
        elif self.kind == "sequence":
            d["values"] = list(self.values)
        return d
