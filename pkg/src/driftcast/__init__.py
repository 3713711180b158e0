"""Meta-continual mobility forecasting for proactive handover.

A GRU forecaster with joint trajectory/handover heads, Reptile and first-order
MAML meta-training over spatial tasks, EWMA residual drift detection with
compact online updates, a parametric radio layer, baselines and metrics.
"""

__version__ = "0.1.0"

from .config import ConfigError, ExperimentConfig, load_config, parse_config
from .forecaster import ModelConfig, Sample, forward, grad_joint, predict
from .estimators import (
    ConstantVelocityForecaster, EwmaDriftDetector, GRUForecaster, KalmanForecaster,
    MetaForecaster, OnlineAdapter,
)

__all__ = [
    "ConfigError", "ConstantVelocityForecaster", "EwmaDriftDetector", "ExperimentConfig",
    "GRUForecaster", "KalmanForecaster", "MetaForecaster", "ModelConfig", "OnlineAdapter",
    "Sample", "__version__", "forward", "grad_joint", "load_config", "parse_config", "predict",
]
