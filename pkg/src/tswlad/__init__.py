"""Recursive weighted-l1 identification of stochastic systems with saturated observations."""

__version__ = "0.1.0"

from .errors import ConfigError, DataError, NumericalError  # noqa: E402
from .model import (  # noqa: E402
    ARProcess,
    CustomNoise,
    Datum,
    FixedDesign,
    Gaussian,
    GaussianMixture,
    Regime,
    SaturationSpec,
    SystemSpec,
    WeightPolicy,
    ZeroNoise,
    classify_regime,
    noise_eval,
    noise_quantile,
    saturate,
    simulate_trajectory,
)
from .projection import Ball, Box, project, regressor_bound, weighted_norm  # noqa: E402
from .estimator import (  # noqa: E402
    TSWLAD,
    innovation,
    step1_gain_slope,
    step2_gain_slope,
    step_update,
    tswlad_update,
)
from .baseline import L2Baseline, saturated_mean, saturated_mean_slope  # noqa: E402
from .diagnostics import (  # noqa: E402
    InformationTracker,
    psi_value,
    rate_ratio,
    regret_step,
    sentencing_accuracy,
)
