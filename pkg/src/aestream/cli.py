"""Command-line front end: ``generate``, ``run`` and ``compare``.

Experiments are described by INI files with ``[stream]``, ``[engine]``,
``[iforest]`` and ``[experiment]`` sections. ``--config`` accepts either a
path or the name of a shipped preset (``sea``, ``circle``, ``mnist01``,
``mnist23``). Every output is a CSV or JSON file; nothing is plotted.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

from .autoencoder import AeConfig, ConfigurationError
from .engine import EngineConfig
from .experiment import RunTrace, run_repetition
from .iforest import IForestConfig
from .prequential import aggregate
from .streams import IngestionError, StreamSpec, make_stream, write_stream_csv

logger = logging.getLogger("aestream")

# Hyper-parameters shared by every preset; per-dataset overrides follow.
_COMMON = {
    "engine": {"w_train": "1000", "w_drift": "200", "b": "80", "p_warn": "0.01",
               "p_alarm": "0.001", "expiry_time": "100", "minibatch_size": "128"},
    "experiment": {"repetitions": "20", "base_seed": "0"},
}

PRESETS: dict[str, dict[str, dict[str, str]]] = {
    "sea": {
        "stream": {"dataset": "sea", "length": "10000", "drift_at": "5000", "anomaly_rate": "0.01"},
        "engine": {"hidden_dims": "64,8", "learning_rate": "0.001", "epochs": "10"},
    },
    "circle": {
        "stream": {"dataset": "circle", "length": "10000", "drift_at": "5000", "anomaly_rate": "0.001"},
        "engine": {"hidden_dims": "8", "learning_rate": "0.001", "epochs": "5"},
    },
    "mnist01": {
        "stream": {"dataset": "mnist01", "length": "5000", "drift_at": "2500", "anomaly_rate": "0.001"},
        "engine": {"hidden_dims": "512,256", "learning_rate": "0.0001", "epochs": "10"},
    },
    "mnist23": {
        "stream": {"dataset": "mnist23", "length": "5000", "drift_at": "2500", "anomaly_rate": "0.01"},
        "engine": {"hidden_dims": "512,256", "learning_rate": "0.0001", "epochs": "10"},
    },
}

_AE_KEYS = {"hidden_dims", "learning_rate", "minibatch_size", "epochs", "hidden_activation"}


class InputError(Exception):
    """Bad configuration or input files; reported with exit code 2."""


class RepetitionError(Exception):
    def __init__(self, seed: int, cause: BaseException) -> None:
        super().__init__(f"repetition with seed {seed} failed: {cause!r}")
        self.seed = seed


@dataclass(frozen=True)
class ExperimentConfig:
    stream: StreamSpec
    engine: EngineConfig
    repetitions: int = 20
    base_seed: int = 0
    output_dir: str = "runs"
    xi: float = 0.99
    images: str | None = None
    labels: str | None = None

    @property
    def idx_paths(self) -> tuple[str, str] | None:
        if self.images is None or self.labels is None:
            return None
        return self.images, self.labels

    def seeds(self) -> list[int]:
        return [self.base_seed + r for r in range(self.repetitions)]

    def to_dict(self) -> dict:
        """Every resolved parameter, defaults included."""
        stream = asdict(self.stream)
        stream.pop("seed")
        stream["anomaly_side"] = self.stream.resolved_anomaly_side
        engine = self.engine.to_dict()
        engine.pop("seed")
        engine["ae_config"].pop("seed")
        engine["iforest_config"].pop("seed")
        return {
            "stream": stream,
            "engine": engine,
            "experiment": {"repetitions": self.repetitions, "base_seed": self.base_seed,
                           "seeds": self.seeds(), "xi": self.xi,
                           "images": self.images, "labels": self.labels},
            "implicit": {"percentile_method": "nearest-rank",
                         "prediction_rule": "loss > theta",
                         "mwu_tie_correction": self.engine.tie_correction,
                         "pretrain_epochs": self.engine.pretrain_epochs,
                         "pretrain_size": self.engine.pretrain_size},
        }


def _parse_optional_int(s: str) -> int | None:
    return None if s.strip().lower() in ("", "none") else int(s)


def _convert(value: str, target_type):
    if target_type is bool:
        return value.strip().lower() in ("1", "true", "yes", "on")
    return target_type(value)


def _typed_fields(cls) -> dict[str, type]:
    types = {"int": int, "float": float, "str": str, "bool": bool}
    out = {}
    for f in fields(cls):
        name = f.type if isinstance(f.type, str) else f.type.__name__
        if name in types:
            out[f.name] = types[name]
    return out


def load_parser(source: str | Path | None) -> configparser.ConfigParser:
    """Read a preset name or INI path, layered on the shared defaults."""
    cp = configparser.ConfigParser()
    cp.read_dict(_COMMON)
    if source is None:
        source = "sea"
    if str(source) in PRESETS:
        cp.read_dict(PRESETS[str(source)])
        return cp
    path = Path(source)
    if not path.is_file():
        raise InputError(f"config {path} not found (presets: {', '.join(PRESETS)})")
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except configparser.Error as exc:
        raise InputError(f"{path}: {exc}") from exc
    return cp


def build_config(cp: configparser.ConfigParser) -> ExperimentConfig:
    """Turn parsed sections into validated dataclasses."""
    for section in cp.sections():
        if section not in ("stream", "engine", "iforest", "experiment"):
            raise InputError(f"unknown config section [{section}]")
    try:
        s = dict(cp["stream"]) if cp.has_section("stream") else {}
        images, labels = s.pop("images", None), s.pop("labels", None)
        stream_kw = {}
        for key, value in s.items():
            if key == "drift_at":
                stream_kw[key] = _parse_optional_int(value)
            elif key == "anomaly_side":
                stream_kw[key] = value or None
            elif key in ("length",):
                stream_kw[key] = int(value)
            elif key == "anomaly_rate":
                stream_kw[key] = float(value)
            elif key == "dataset":
                stream_kw[key] = value
            else:
                raise InputError(f"unknown key stream.{key}")
        stream = StreamSpec(**stream_kw)

        e = dict(cp["engine"]) if cp.has_section("engine") else {}
        ae_kw = {"input_dim": stream.n_features}
        engine_kw = {}
        engine_types = _typed_fields(EngineConfig)
        ae_types = _typed_fields(AeConfig)
        for key, value in e.items():
            if key == "hidden_dims":
                ae_kw[key] = tuple(int(v) for v in value.split(",") if v.strip())
            elif key in _AE_KEYS:
                ae_kw[key] = _convert(value, ae_types[key])
            elif key in engine_types and key != "seed":
                engine_kw[key] = _convert(value, engine_types[key])
            else:
                raise InputError(f"unknown key engine.{key}")

        f = dict(cp["iforest"]) if cp.has_section("iforest") else {}
        forest_types = _typed_fields(IForestConfig)
        forest_kw = {}
        for key, value in f.items():
            if key not in forest_types or key == "seed":
                raise InputError(f"unknown key iforest.{key}")
            forest_kw[key] = _convert(value, forest_types[key])

        engine = EngineConfig(ae_config=AeConfig(**ae_kw), iforest_config=IForestConfig(**forest_kw),
                              **engine_kw)

        x = dict(cp["experiment"]) if cp.has_section("experiment") else {}
        exp_kw = {}
        for key, value in x.items():
            if key in ("repetitions", "base_seed"):
                exp_kw[key] = int(value)
            elif key == "xi":
                exp_kw[key] = float(value)
            elif key == "output_dir":
                exp_kw[key] = value
            else:
                raise InputError(f"unknown key experiment.{key}")
        cfg = ExperimentConfig(stream, engine, images=images, labels=labels, **exp_kw)
    except InputError:
        raise
    except (ValueError, TypeError) as exc:
        raise InputError(f"invalid configuration: {exc}") from exc
    if cfg.repetitions < 1:
        raise InputError("experiment.repetitions must be positive")
    if not 0 < cfg.xi <= 1:
        raise InputError("experiment.xi must be in (0, 1]")
    if stream.dataset.startswith("mnist") and cfg.idx_paths is None:
        raise InputError("MNIST runs need stream.images and stream.labels IDX paths")
    return cfg


def resolve(args: argparse.Namespace) -> ExperimentConfig:
    cfg = build_config(load_parser(args.config))
    overrides = {}
    if args.seed is not None:
        overrides["base_seed"] = args.seed
    if getattr(args, "reps", None) is not None:
        if args.reps < 1:
            raise InputError("--reps must be positive")
        overrides["repetitions"] = args.reps
    if args.out is not None:
        overrides["output_dir"] = args.out
    if getattr(args, "method", None) is not None:
        try:
            overrides["engine"] = replace(cfg.engine, method=args.method)
        except ConfigurationError as exc:
            raise InputError(str(exc)) from exc
    return replace(cfg, **overrides)


# ------------------------------------------------------------------ commands

def cmd_generate(cfg: ExperimentConfig) -> list[Path]:
    """Write one labelled stream and its pretraining pool per seed."""
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for seed in cfg.seeds():
        stream = make_stream(replace(cfg.stream, seed=seed), cfg.idx_paths)
        for name, x, y in ((f"stream_seed{seed}.csv", stream.x, stream.y),
                           (f"pool_seed{seed}.csv", stream.pool, None)):
            write_stream_csv(out / name, x, y)
            written.append(out / name)
    return written


def _run_one(cfg: ExperimentConfig, seed: int) -> RunTrace:
    try:
        return run_repetition(cfg.stream, cfg.engine, seed, cfg.idx_paths, cfg.xi)
    except Exception as exc:  # re-raised with the seed attached
        raise RepetitionError(seed, exc) from exc


def run_all(cfg: ExperimentConfig, serial: bool = False) -> list[RunTrace]:
    seeds = cfg.seeds()
    workers = min(len(seeds), os.cpu_count() or 1)
    if serial or workers < 2:
        return [_run_one(cfg, s) for s in seeds]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_one, [cfg] * len(seeds), seeds))


def write_aggregate(path: Path, columns: dict[str, tuple[np.ndarray, np.ndarray]], n: int) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if list(columns) == [""]:
            w.writerow(["t", "mean_gmean", "stderr"])
        else:
            w.writerow(["t"] + [f"{k}_{c}" for k in columns for c in ("mean", "stderr")])
        for i in range(n):
            row = [i + 1]
            for mean, se in columns.values():
                row += [f"{mean[i]:.6f}", f"{se[i]:.6f}"]
            w.writerow(row)


def cmd_run(cfg: ExperimentConfig, serial: bool = False) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    traces = run_all(cfg, serial)
    for tr in traces:
        tr.write_csv(out / f"trace_seed{tr.seed}.csv")
    mean, se = aggregate([tr.gmean for tr in traces])
    write_aggregate(out / "aggregate.csv", {"": (mean, se)}, mean.size)
    meta = cfg.to_dict()
    meta["results"] = {str(tr.seed): {"alarm_steps": tr.alarm_steps, "n_warnings": tr.n_warnings,
                                      "n_trainings": tr.n_trainings} for tr in traces}
    with open(out / "metadata.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return out


def _read_aggregate(path: Path) -> tuple[np.ndarray, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["t", "mean_gmean", "stderr"]:
            raise InputError(f"{path}: not a single-method aggregate file")
        rows = np.array([r for r in reader if r], dtype=np.float64)
    return rows[:, 1], rows[:, 2]


def cmd_compare(run_dirs: list[str | Path], out: str | Path) -> Path:
    """Merge the aggregates of several ``run`` outputs into one CSV."""
    if not run_dirs:
        raise InputError("compare needs at least one run directory")
    columns: dict[str, tuple[np.ndarray, np.ndarray]] = {}
    stream_ref = None
    for d in map(Path, run_dirs):
        meta_path, agg_path = d / "metadata.json", d / "aggregate.csv"
        if not meta_path.is_file() or not agg_path.is_file():
            raise InputError(f"{d} is not a run directory (metadata.json/aggregate.csv missing)")
        with open(meta_path) as fh:
            meta = json.load(fh)
        if stream_ref is None:
            stream_ref = meta["stream"]
        elif meta["stream"] != stream_ref:
            raise InputError(f"{d}: stream spec differs from {run_dirs[0]}")
        label = meta["engine"]["method"]
        if label in columns:
            label = d.name
        if label in columns:
            raise InputError(f"duplicate column label {label!r}")
        columns[label] = _read_aggregate(agg_path)
    lengths = {m.size for m, _ in columns.values()}
    if len(lengths) != 1:
        raise InputError(f"aggregates differ in length: {sorted(lengths)}")
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_aggregate(out, columns, lengths.pop())
    return out


# ---------------------------------------------------------------------- main

def build_arg_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aestream", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, reps: bool = True) -> None:
        p.add_argument("--config", help="INI file or preset name (default: sea)")
        p.add_argument("--seed", type=int, help="base seed; repetition r uses seed + r")
        if reps:
            p.add_argument("--reps", type=int, help="number of repetitions")
        p.add_argument("--out", help="output directory")

    g = sub.add_parser("generate", help="write labelled streams and pretraining pools")
    common(g)
    r = sub.add_parser("run", help="run repetitions and write traces and the aggregate")
    common(r)
    r.add_argument("--method", help="override engine.method")
    r.add_argument("--serial", action="store_true", help="run repetitions sequentially")
    c = sub.add_parser("compare", help="merge aggregates of several runs")
    c.add_argument("runs", nargs="+", help="directories written by 'run'")
    c.add_argument("--out", required=True, help="merged CSV path")
    p = sub.add_parser("preset", help="print a shipped preset as INI")
    p.add_argument("name", choices=sorted(PRESETS))
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_arg_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "generate":
            for path in cmd_generate(resolve(args)):
                print(path)
        elif args.command == "run":
            print(cmd_run(resolve(args), serial=args.serial))
        elif args.command == "compare":
            print(cmd_compare(args.runs, args.out))
        elif args.command == "preset":
            load_parser(args.name).write(sys.stdout)
    except (InputError, IngestionError) as exc:
        print(f"aestream: error: {exc}", file=sys.stderr)
        return 2
    except RepetitionError as exc:
        print(f"aestream: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"aestream: error: {exc.strerror or exc}: {exc.filename or ''}".rstrip(": "), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
