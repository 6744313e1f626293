"""Percentile anomaly threshold and the reconstruction-loss decision rule."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .autoencoder import Autoencoder, losses


@dataclass
class ThresholdState:
    theta: float
    b: int
    set_at: int = 0


def calc_anomaly_threshold(loss_values, b: float) -> float:
    """Nearest-rank ``b``-th percentile of ``loss_values``.

    Returns the element at 1-based rank ``ceil(b/100 * n)`` of the ascending
    sort, so the result is always one of the supplied losses and ``b=100``
    gives the maximum.
    """
    arr = np.sort(np.asarray(loss_values, dtype=np.float64).ravel())
    n = arr.size
    if n == 0:
        raise ValueError("cannot compute a threshold from an empty loss vector")
    if not 0 <= b <= 100:
        raise ValueError(f"percentile must be within [0, 100], got {b}")
    rank = max(1, math.ceil(b * n / 100))
    return float(arr[rank - 1])


def predict(model: Autoencoder, theta: float, x) -> int:
    """1 if the reconstruction loss of ``x`` is strictly above ``theta``."""
    return int(losses(model, x)[0] > theta)


def predict_loss(loss: float, theta: float) -> int:
    return int(loss > theta)
