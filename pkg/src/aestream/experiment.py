"""Running repetitions and collecting per-step traces."""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .engine import Engine, EngineConfig
from .prequential import PrequentialTracker
from .streams import StreamSpec, make_stream

TRACE_HEADER = ["t", "gmean", "y", "y_hat", "loss", "flag_warn", "flag_alarm", "generation"]


@dataclass
class RunTrace:
    seed: int
    t: np.ndarray
    gmean: np.ndarray
    y: np.ndarray
    y_hat: np.ndarray
    loss: np.ndarray
    flag_warn: np.ndarray
    flag_alarm: np.ndarray
    generation: np.ndarray
    alarm_steps: list[int]
    n_warnings: int
    n_trainings: int

    def __len__(self) -> int:
        return self.t.size

    def window_mean(self, start: int, stop: int) -> float:
        """Mean G-mean over steps ``start <= t <= stop`` (1-based)."""
        mask = (self.t >= start) & (self.t <= stop)
        return float(self.gmean[mask].mean())

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(TRACE_HEADER)
            for row in zip(self.t, self.gmean, self.y, self.y_hat, self.loss,
                           self.flag_warn, self.flag_alarm, self.generation):
                t, g, y, yh, loss, fw, fa, gen = row
                w.writerow([int(t), f"{g:.6f}", int(y), int(yh), repr(float(loss)),
                            int(fw), int(fa), int(gen)])


def run_stream(engine_config: EngineConfig, x: np.ndarray, y: np.ndarray, pool: np.ndarray,
               seed: int, xi: float = 0.99) -> RunTrace:
    """Pretrain on ``pool`` and evaluate prequentially over ``(x, y)``."""
    engine = Engine(engine_config)
    engine.pretrain(pool)
    tracker = PrequentialTracker(xi)
    n = len(y)
    cols = {k: np.empty(n) for k in ("gmean", "loss")}
    y_hat = np.empty(n, dtype=np.int64)
    warn = np.empty(n, dtype=bool)
    alarm = np.empty(n, dtype=bool)
    gen = np.empty(n, dtype=np.int64)
    for i in range(n):
        out = engine.step(x[i])
        y_hat[i] = out.y_hat
        cols["loss"][i] = out.loss
        warn[i], alarm[i], gen[i] = out.flag_warn, out.flag_alarm, out.model_generation
        cols["gmean"][i] = tracker.update(int(y[i]), out.y_hat)
    return RunTrace(seed, np.arange(1, n + 1), cols["gmean"], np.asarray(y), y_hat, cols["loss"],
                    warn, alarm, gen, list(engine.alarm_steps), engine.n_warnings, engine.n_trainings)


def run_repetition(stream_spec: StreamSpec, engine_config: EngineConfig, seed: int,
                   idx_paths=None, xi: float = 0.99) -> RunTrace:
    """One repetition: stream and engine both seeded from ``seed``."""
    spec = replace(stream_spec, seed=seed)
    stream = make_stream(spec, idx_paths)
    cfg = replace(engine_config, seed=seed)
    return run_stream(cfg, stream.x, stream.y, stream.pool, seed, xi)
