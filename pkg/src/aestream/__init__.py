"""Streaming anomaly detection with incrementally retrained autoencoders and
rank-test drift detection."""

from .autoencoder import AeConfig, Autoencoder, ConfigurationError, init_autoencoder, train_window
from .drift import DriftState, MwuResult, mwu_test
from .engine import METHODS, Engine, EngineConfig, StepOutput
from .experiment import RunTrace, run_repetition, run_stream
from .iforest import IForest, IForestConfig, fit_iforest
from .prequential import PrequentialTracker, aggregate, prequential_gmean
from .scoring import calc_anomaly_threshold
from .streams import StreamSpec, make_stream
from .windows import SlidingWindow

__all__ = [
    "AeConfig", "Autoencoder", "ConfigurationError", "DriftState", "Engine", "EngineConfig",
    "IForest", "IForestConfig", "METHODS", "MwuResult", "PrequentialTracker", "RunTrace",
    "SlidingWindow", "StepOutput", "StreamSpec", "aggregate", "calc_anomaly_threshold",
    "fit_iforest", "init_autoencoder", "make_stream", "mwu_test", "prequential_gmean",
    "run_repetition", "run_stream", "train_window",
]
__version__ = "0.1.0"
