"""Streaming detection engine: pretrain, then test-then-train one instance at a time.

Four methods share the loop:

* ``baseline``  -- pretrained autoencoder, never updated.
* ``straem``    -- autoencoder retrained on a sliding window whenever ``p``
  percent of it has been replaced; threshold recomputed after each training.
* ``straem_dd`` -- ``straem`` plus a Mann-Whitney drift detector on
  reconstruction losses. A warning pauses training and starts buffering
  instances; an alarm replaces the model with a fresh one trained on the
  buffer and empties every window.
* ``iforest``   -- the ``straem`` loop with an isolation forest in place of
  the autoencoder.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .autoencoder import AeConfig, Autoencoder, ConfigurationError, init_autoencoder, losses, train_window
from .drift import DriftState, mwu_test, tick_warning, update_flags
from .iforest import IForest, IForestConfig, anomaly_score, fit_iforest, iforest_threshold
from .scoring import calc_anomaly_threshold
from .windows import SlidingWindow

logger = logging.getLogger(__name__)

METHODS = ("baseline", "straem", "straem_dd", "iforest")


@dataclass(frozen=True)
class EngineConfig:
    method: str = "straem_dd"
    w_train: int = 1000
    w_drift: int = 200
    b: float = 80
    p_replace: float = 50.0
    p_warn: float = 0.01
    p_alarm: float = 0.001
    expiry_time: int = 100
    ae_config: AeConfig = field(default_factory=lambda: AeConfig(input_dim=2, hidden_dims=(64, 8)))
    pretrain_size: int = 2000
    pretrain_epochs: int = 100
    tie_correction: bool = False
    iforest_config: IForestConfig = field(default_factory=IForestConfig)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ConfigurationError(f"unknown method {self.method!r}; expected one of {METHODS}")
        for name in ("w_train", "w_drift", "expiry_time", "pretrain_size", "pretrain_epochs"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be positive, got {getattr(self, name)}")
        if not 0 <= self.b <= 100:
            raise ConfigurationError(f"b must be within [0, 100], got {self.b}")
        if not 0 < self.p_replace <= 100:
            raise ConfigurationError(f"p_replace must be in (0, 100], got {self.p_replace}")
        if not self.p_alarm < self.p_warn:
            raise ConfigurationError(f"p_alarm ({self.p_alarm}) must be below p_warn ({self.p_warn})")
        if self.pretrain_size < self.w_drift:
            raise ConfigurationError("pretrain_size must be at least w_drift")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ae_config"]["hidden_dims"] = list(d["ae_config"]["hidden_dims"])
        return d


@dataclass(frozen=True)
class StepOutput:
    t: int
    y_hat: int
    loss: float
    flag_warn: bool
    flag_alarm: bool
    model_generation: int


def _derive_seed(*parts: int) -> int:
    return int(np.random.SeedSequence([p & 0xFFFFFFFF for p in parts]).generate_state(1)[0])


class Engine:
    """One detector bound to one stream."""

    def __init__(self, config: EngineConfig) -> None:
        self.config = config
        self.t = 0
        self.generation = 0
        self.n_trainings = 0
        self.n_warnings = 0
        self.alarm_steps: list[int] = []
        self.train_steps: list[int] = []
        self.rebuild_sizes: list[int] = []
        self.tests_run = 0
        self.last_mwu = None
        self.model: Autoencoder | IForest | None = None
        self.theta: float | None = None
        self.theta_set_at = 0
        self.mov_train = SlidingWindow(config.w_train)
        self.ref_driftx = SlidingWindow(config.w_drift)
        self.mov_driftx = SlidingWindow(config.w_drift)
        self.mov_warn = SlidingWindow(config.w_drift)
        self.drift = DriftState(config.p_warn, config.p_alarm, config.expiry_time)
        self._model_version = 0
        self._ref_cache: tuple[tuple[int, int], np.ndarray] | None = None

    # -------------------------------------------------------------- models
    @property
    def uses_forest(self) -> bool:
        return self.config.method == "iforest"

    def _new_model(self, generation: int):
        seed = _derive_seed(self.config.seed, generation)
        if self.uses_forest:
            return replace(self.config.iforest_config, seed=seed)
        return init_autoencoder(replace(self.config.ae_config, seed=seed))

    def _fit(self, data: np.ndarray, epochs: int | None = None) -> None:
        """(Re)train the current model on ``data`` and reset the threshold."""
        if self.uses_forest:
            # Forests are refit from scratch; a fresh seed per fit keeps runs reproducible.
            cfg = replace(self.config.iforest_config,
                          seed=_derive_seed(self.config.seed, self.generation, self.n_trainings))
            self.model = fit_iforest(cfg, data)
            self.theta = iforest_threshold(self.model, data)
        else:
            train_window(self.model, data, epochs=epochs)
            self.theta = calc_anomaly_threshold(losses(self.model, data), self.config.b)
        self.theta_set_at = self.t
        self._model_version += 1

    def score(self, xs) -> np.ndarray:
        """Anomaly score per instance: reconstruction loss or forest score."""
        xs = np.atleast_2d(np.asarray(xs, dtype=np.float64))
        if self.uses_forest:
            return np.atleast_1d(anomaly_score(self.model, xs))
        return losses(self.model, xs)

    def pretrain(self, data) -> None:
        """Fit the initial model on unlabelled normal data and set the threshold."""
        data = np.asarray(data, dtype=np.float64)
        if data.ndim != 2 or data.shape[0] == 0:
            raise ConfigurationError("pretraining data must be a non-empty (n, d) array")
        data = data[: self.config.pretrain_size]
        if self.uses_forest:
            self._fit(data)
        else:
            self.model = self._new_model(0)
            self._fit(data, epochs=self.config.pretrain_epochs)
        logger.debug("pretrained %s on %d instances, theta=%.5f", self.config.method, len(data), self.theta)

    # ---------------------------------------------------------------- loop
    def step(self, x) -> StepOutput:
        if self.model is None:
            raise RuntimeError("engine must be pretrained before streaming")
        x = np.asarray(x, dtype=np.float64)
        self.t += 1
        cfg = self.config
        loss = float(self.score(x)[0])
        y_hat = int(loss > self.theta)

        if cfg.method != "baseline":
            self.mov_train.append(x)
            paused = cfg.method == "straem_dd" and self.drift.flag_warn
            if (self.mov_train.is_full()
                    and self.mov_train.replaced_fraction() >= cfg.p_replace / 100.0
                    and not paused):
                self._fit(self.mov_train.as_array())
                self.mov_train.mark_reset()
                self.n_trainings += 1
                self.train_steps.append(self.t)

        warn = alarm = False
        if cfg.method == "straem_dd":
            warn, alarm = self._drift_step(x)

        return StepOutput(self.t, y_hat, loss, warn, alarm, self.generation)

    def _ref_losses(self) -> np.ndarray:
        key = (self._model_version, self.generation)
        if self._ref_cache is None or self._ref_cache[0] != key:
            self._ref_cache = (key, self.score(self.ref_driftx.as_array()))
        return self._ref_cache[1]

    def _drift_step(self, x: np.ndarray) -> tuple[bool, bool]:
        """Drift bookkeeping for one instance; returns the (warn, alarm) flags
        as raised during this step, before any alarm reset."""
        if self.ref_driftx.is_full():
            self.mov_driftx.append(x)
        else:
            self.ref_driftx.append(x)

        alarm_seen = False
        if self.mov_driftx.is_full():
            result = mwu_test(self._ref_losses(), self.score(self.mov_driftx.as_array()),
                              tie_correction=self.config.tie_correction)
            self.tests_run += 1
            self.last_mwu = result
            was_warn = self.drift.flag_warn
            update_flags(self.drift, result.p_value)
            if self.drift.flag_warn and not was_warn:
                self.n_warnings += 1
            alarm_seen = self.drift.flag_alarm

        if self.drift.flag_warn and not self.drift.flag_alarm:
            self.mov_warn.append(x)
            if tick_warning(self.drift):
                self.mov_warn.clear()

        warn = self.drift.flag_warn
        if alarm_seen:
            self.handle_alarm()
        return warn, alarm_seen

    def handle_alarm(self) -> None:
        """Replace the model with a fresh one trained on the warning buffer."""
        if len(self.mov_warn) < self.mov_warn.capacity:
            # Short or empty buffer (the alarm may even come without a warning):
            # train on mov_warn | mov_driftx. The buffer only ever holds the
            # newest instances of mov_driftx, so the union is mov_driftx itself.
            data = self.mov_driftx.as_array()
        else:
            data = self.mov_warn.as_array()
        self.generation += 1
        self.alarm_steps.append(self.t)
        self.rebuild_sizes.append(len(data))
        logger.debug("alarm at t=%d, rebuilding on %d instances", self.t, len(data))
        if self.uses_forest:
            self._fit(data)
        else:
            self.model = self._new_model(self.generation)
            self._fit(data)
        for w in (self.ref_driftx, self.mov_train, self.mov_driftx, self.mov_warn):
            w.clear()
        self.drift.reset()

    def run(self, xs) -> list[StepOutput]:
        return [self.step(x) for x in xs]
