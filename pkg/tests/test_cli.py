import csv
import json

import pytest

from aestream.cli import PRESETS, InputError, build_config, cmd_compare, load_parser, main

SMALL = """\
[stream]
dataset = {dataset}
length = 400
drift_at = 200
anomaly_rate = {rate}

[engine]
method = {method}
w_train = 100
w_drift = 30
hidden_dims = 4
epochs = 1
pretrain_epochs = 2
pretrain_size = 100

[iforest]
n_estimators = 10

[experiment]
repetitions = 2
base_seed = 7
"""


@pytest.fixture
def write_cfg(tmp_path):
    def write(method="straem_dd", dataset="sea", rate=0.01, name=None):
        path = tmp_path / (name or f"{method}.ini")
        path.write_text(SMALL.format(method=method, dataset=dataset, rate=rate))
        return path
    return write


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_presets_resolve_to_shared_defaults():
    for name in ("sea", "circle"):
        cfg = build_config(load_parser(name))
        assert (cfg.engine.w_train, cfg.engine.w_drift, cfg.engine.b) == (1000, 200, 80)
        assert (cfg.engine.p_warn, cfg.engine.p_alarm, cfg.engine.expiry_time) == (0.01, 0.001, 100)
    assert build_config(load_parser("circle")).engine.ae_config.epochs == 5
    assert build_config(load_parser("sea")).engine.ae_config.epochs == 10
    assert build_config(load_parser("sea")).engine.ae_config.hidden_dims == (64, 8)


def test_mnist_preset_requires_idx_paths():
    assert "mnist23" in PRESETS
    with pytest.raises(InputError):
        build_config(load_parser("mnist23"))


def test_unknown_key_rejected(tmp_path):
    path = tmp_path / "bad.ini"
    path.write_text("[engine]\nw_trian = 5\n")
    with pytest.raises(InputError):
        build_config(load_parser(path))


def test_invalid_value_rejected(tmp_path):
    path = tmp_path / "bad.ini"
    path.write_text("[engine]\np_warn = 0.0001\np_alarm = 0.01\n")
    with pytest.raises(InputError):
        build_config(load_parser(path))


def test_generate_is_deterministic(tmp_path, write_cfg, capsys):
    cfg = write_cfg()
    for out in ("a", "b"):
        assert main(["generate", "--config", str(cfg), "--out", str(tmp_path / out)]) == 0
    for name in ("stream_seed7.csv", "pool_seed7.csv", "stream_seed8.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert len(read_rows(tmp_path / "a" / "stream_seed7.csv")) == 401
    assert len(read_rows(tmp_path / "a" / "pool_seed7.csv")) == 2001


def test_run_writes_traces_aggregate_and_metadata(tmp_path, write_cfg):
    out = tmp_path / "run"
    assert main(["run", "--config", str(write_cfg()), "--out", str(out), "--reps", "3", "--seed", "1"]) == 0
    assert sorted(p.name for p in out.glob("trace_seed*.csv")) == [
        "trace_seed1.csv", "trace_seed2.csv", "trace_seed3.csv"]
    rows = read_rows(out / "aggregate.csv")
    assert rows[0] == ["t", "mean_gmean", "stderr"] and len(rows) == 401
    trace = read_rows(out / "trace_seed1.csv")
    assert trace[0] == ["t", "gmean", "y", "y_hat", "loss", "flag_warn", "flag_alarm", "generation"]
    meta = json.loads((out / "metadata.json").read_text())
    assert meta["experiment"]["seeds"] == [1, 2, 3]
    assert meta["implicit"]["pretrain_epochs"] == 2
    assert meta["implicit"]["mwu_tie_correction"] is False
    assert meta["stream"]["anomaly_side"] == "negative"


def test_run_is_reproducible_parallel_vs_serial(tmp_path, write_cfg):
    cfg = str(write_cfg())
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "p")]) == 0
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "s"), "--serial"]) == 0
    for name in ("aggregate.csv", "trace_seed7.csv", "trace_seed8.csv", "metadata.json"):
        assert (tmp_path / "p" / name).read_bytes() == (tmp_path / "s" / name).read_bytes()


def test_compare_merges_methods(tmp_path, write_cfg):
    dirs = []
    for method in ("baseline", "straem", "iforest"):
        d = tmp_path / method
        assert main(["run", "--config", str(write_cfg(method)), "--out", str(d), "--serial"]) == 0
        dirs.append(str(d))
    merged = tmp_path / "merged.csv"
    assert main(["compare", *dirs, "--out", str(merged)]) == 0
    rows = read_rows(merged)
    assert rows[0] == ["t", "baseline_mean", "baseline_stderr", "straem_mean", "straem_stderr",
                       "iforest_mean", "iforest_stderr"]
    assert len(rows) == 401
    single = tmp_path / "single.csv"
    cmd_compare([dirs[0]], single)
    assert [r[1:] for r in read_rows(single)[1:]] == [r[1:] for r in read_rows(tmp_path / "baseline" / "aggregate.csv")[1:]]


def test_compare_rejects_mismatched_streams(tmp_path, write_cfg, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    main(["run", "--config", str(write_cfg()), "--out", str(a), "--reps", "1"])
    main(["run", "--config", str(write_cfg(dataset="circle", name="c.ini")), "--out", str(b), "--reps", "1"])
    assert main(["compare", str(a), str(b), "--out", str(tmp_path / "m.csv")]) == 2
    assert "stream spec differs" in capsys.readouterr().err


def test_missing_config_exit_code(capsys):
    assert main(["run", "--config", "/nonexistent.ini"]) == 2
    assert "not found" in capsys.readouterr().err


def test_unwritable_output_reports_path(tmp_path, write_cfg, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["generate", "--config", str(write_cfg()), "--out", str(blocker / "sub")]) != 0
    assert str(blocker) in capsys.readouterr().err


def test_repetition_failure_reports_seed(tmp_path, capsys):
    path = tmp_path / "m.ini"
    path.write_text("[stream]\ndataset = mnist01\nlength = 100\ndrift_at = 50\n"
                    f"images = {tmp_path}/none.idx\nlabels = {tmp_path}/none.idx\n"
                    "[experiment]\nrepetitions = 1\nbase_seed = 3\n")
    assert main(["run", "--config", str(path), "--out", str(tmp_path / "o"), "--serial"]) == 1
    assert "seed 3" in capsys.readouterr().err
