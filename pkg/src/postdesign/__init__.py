"""Simulation-based Bayesian study design: sample size and critical value."""

from .config import DesignConfig, parse_config
from .core import (
    CapabilityError,
    ConfigurationError,
    DesignError,
    InfeasibleError,
    NumericalError,
    inv_logit,
    logit,
    xi,
)
from .design import augment_m, bootstrap_cis, initial_n0, optimize
from .models import (
    GaussianRegressionModel,
    IntervalHypothesis,
    LogisticRegressionModel,
    NormalMeanModel,
    DataGenProcess,
)
from .sampdist import estimate, oc_estimate

__version__ = "0.1.0"

__all__ = [
    "CapabilityError",
    "ConfigurationError",
    "DataGenProcess",
    "DesignConfig",
    "DesignError",
    "GaussianRegressionModel",
    "InfeasibleError",
    "IntervalHypothesis",
    "LogisticRegressionModel",
    "NormalMeanModel",
    "NumericalError",
    "augment_m",
    "bootstrap_cis",
    "estimate",
    "initial_n0",
    "inv_logit",
    "logit",
    "oc_estimate",
    "optimize",
    "parse_config",
    "xi",
]
