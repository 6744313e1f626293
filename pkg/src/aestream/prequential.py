"""Prequential G-mean with fading factors and aggregation across repetitions."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass
class PrequentialTracker:
    """Faded confusion counts; every cell decays by ``xi`` each step."""

    xi: float = 0.99
    f_tp: float = 0.0
    f_fn: float = 0.0
    f_tn: float = 0.0
    f_fp: float = 0.0

    def __post_init__(self) -> None:
        if not 0 < self.xi <= 1:
            raise ValueError(f"fading factor must be in (0, 1], got {self.xi}")

    @property
    def recall_pos(self) -> float:
        den = self.f_tp + self.f_fn
        return self.f_tp / den if den > 0 else 0.0

    @property
    def recall_neg(self) -> float:
        den = self.f_tn + self.f_fp
        return self.f_tn / den if den > 0 else 0.0

    @property
    def gmean(self) -> float:
        return math.sqrt(self.recall_pos * self.recall_neg)

    def update(self, y: int, y_hat: int) -> float:
        xi = self.xi
        self.f_tp = xi * self.f_tp + (y == 1 and y_hat == 1)
        self.f_fn = xi * self.f_fn + (y == 1 and y_hat == 0)
        self.f_tn = xi * self.f_tn + (y == 0 and y_hat == 0)
        self.f_fp = xi * self.f_fp + (y == 0 and y_hat == 1)
        return self.gmean


def gmean(recall_pos: float, recall_neg: float) -> float:
    return math.sqrt(recall_pos * recall_neg)


def prequential_gmean(y, y_hat, xi: float = 0.99) -> np.ndarray:
    """Faded G-mean after every step of a prediction trace."""
    tracker = PrequentialTracker(xi)
    return np.array([tracker.update(int(a), int(b)) for a, b in zip(y, y_hat)])


def aggregate(traces) -> tuple[np.ndarray, np.ndarray]:
    """Per-step mean and standard error across equally long traces.

    The standard error uses the sample standard deviation (ddof=1) and is 0
    for a single trace.
    """
    arrs = [np.asarray(t, dtype=np.float64) for t in traces]
    if not arrs:
        raise ValueError("need at least one trace")
    if len({a.shape for a in arrs}) != 1:
        raise ValueError(f"traces differ in length: {sorted({a.size for a in arrs})}")
    stack = np.vstack(arrs)
    mean = stack.mean(axis=0)
    if stack.shape[0] < 2:
        return mean, np.zeros_like(mean)
    return mean, stack.std(axis=0, ddof=1) / math.sqrt(stack.shape[0])
