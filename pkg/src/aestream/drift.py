"""Mann-Whitney U drift test on reconstruction losses and the warn/alarm flags."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata


@dataclass(frozen=True)
class MwuResult:
    u_ref: float
    u_mov: float
    u: float
    z: float
    p_value: float


def _norm_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def mwu_test(ref_losses, mov_losses, tie_correction: bool = False) -> MwuResult:
    """Two-sided Mann-Whitney U test with the normal approximation.

    Ranks are assigned over the pooled sample with tied values sharing the
    midpoint rank. ``U`` is the smaller of the two per-sample statistics and
    ``p = 2 * Phi(-|Z|)``. By default the variance carries no tie correction.
    A zero variance yields ``p = 1``.
    """
    ref = np.asarray(ref_losses, dtype=np.float64).ravel()
    mov = np.asarray(mov_losses, dtype=np.float64).ravel()
    n_ref, n_mov = ref.size, mov.size
    if n_ref == 0 or n_mov == 0:
        raise ValueError("both samples must be non-empty")
    ranks = rankdata(np.concatenate([ref, mov]), method="average")
    r_ref = float(ranks[:n_ref].sum())
    r_mov = float(ranks[n_ref:].sum())
    nn = n_ref * n_mov
    u_ref = nn + n_ref * (n_ref + 1) / 2.0 - r_ref
    u_mov = nn + n_mov * (n_mov + 1) / 2.0 - r_mov
    u = min(u_ref, u_mov)
    mu = nn / 2.0
    var = nn * (n_ref + n_mov + 1) / 12.0
    if tie_correction:
        n = n_ref + n_mov
        _, counts = np.unique(ranks, return_counts=True)
        var -= nn * float(np.sum(counts**3 - counts)) / (12.0 * n * (n - 1)) if n > 1 else 0.0
    if var <= 0:
        return MwuResult(u_ref, u_mov, u, 0.0, 1.0)
    z = (u - mu) / math.sqrt(var)
    p = min(1.0, 2.0 * _norm_cdf(-abs(z)))
    return MwuResult(u_ref, u_mov, u, z, p)


@dataclass
class DriftState:
    """Two-level drift flags.

    ``warn_age`` counts ticks since the warning was raised; the warning is
    dropped once it exceeds ``expiry_time`` without an alarm.
    """

    p_warn: float = 0.01
    p_alarm: float = 0.001
    expiry_time: int = 100
    flag_warn: bool = False
    flag_alarm: bool = False
    warn_age: int = 0
    last_p: float = 1.0

    def __post_init__(self) -> None:
        if not self.p_alarm < self.p_warn:
            raise ValueError(f"p_alarm ({self.p_alarm}) must be below p_warn ({self.p_warn})")
        if self.expiry_time < 1:
            raise ValueError(f"expiry_time must be positive, got {self.expiry_time}")

    def reset(self) -> None:
        self.flag_warn = False
        self.flag_alarm = False
        self.warn_age = 0


def update_flags(state: DriftState, p_value: float) -> DriftState:
    """Raise the warning and/or alarm flag for ``p_value`` (inclusive compare)."""
    state.last_p = p_value
    if not state.flag_warn and p_value <= state.p_warn:
        state.flag_warn = True
        state.warn_age = 0
    if p_value <= state.p_alarm:
        state.flag_alarm = True
    return state


def tick_warning(state: DriftState) -> bool:
    """Age an active warning by one step.

    Returns True when the warning has just expired; the caller then empties
    its warning buffer.
    """
    if not state.flag_warn or state.flag_alarm:
        return False
    state.warn_age += 1
    if state.warn_age > state.expiry_time:
        state.flag_warn = False
        state.warn_age = 0
        return True
    return False
