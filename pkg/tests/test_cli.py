import csv
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from latentlabel import cli
from latentlabel.data_model import load_model
from latentlabel.exceptions import LineSearchFailed
from latentlabel.solver import predict_transductive
from latentlabel.views import ViewAssembly, assemble_view, DEFAULT_KERNELS

SMALL = {"n_samples": 30, "c": 5, "k_true": 3, "modality_dims": [4, 6],
         "label_threshold": 0.5}


def _config(path, **extra):
    doc = {"synthetic": SMALL, "k": 3, "alpha": 0.1, "beta": 0.01,
           "solver": {"max_outer_iters": 40}, **extra}
    path.write_text(json.dumps(doc))
    return str(path)


@pytest.fixture
def dataset(tmp_path):
    cfg = _config(tmp_path / "cfg.json")
    data = tmp_path / "data"
    assert cli.main(["synth", "--config", cfg, "--out-dir", str(data), "--seed", "2"]) == 0
    return tmp_path, cfg, data


def _files(data):
    return ["--motor", str(data / "motor.csv"), "--nonmotor", str(data / "nonmotor.csv")]


def _read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def _drop_labels(data, keep):
    rows = _read_csv(data / "labels.csv")
    path = data / "labels_partial.csv"
    with open(path, "w", newline="") as fh:
        csv.writer(fh, lineterminator="\n").writerows(rows[:keep + 1])
    return str(path)


def test_synth_shapes(tmp_path):
    assert cli.main(["synth", "--out-dir", str(tmp_path), "--seed", "0"]) == 0
    motor, nonmotor, labels = (_read_csv(tmp_path / f) for f in
                               ("motor.csv", "nonmotor.csv", "labels.csv"))
    assert len(motor) == 137 and len(motor[0]) == 56
    assert len(nonmotor[0]) == 144
    assert len(labels) == 137 and len(labels[0]) == 32
    planted = json.loads((tmp_path / "planted.json").read_text())
    assert planted["spec"]["k_true"] == 10
    assert np.array(planted["V"]).shape == (10, 31)


def test_train_predict_round_trip(dataset):
    tmp, cfg, data = dataset
    labels = _drop_labels(data, 24)
    out = tmp / "model"
    assert cli.main(["train", "--config", cfg, *_files(data), "--labels", labels,
                     "--out-dir", str(out)]) == 0
    doc = json.loads((out / "model.json").read_text())
    assert doc["n_train"] == 24 and doc["k"] == 3
    pred = tmp / "pred"
    assert cli.main(["predict", "--config", cfg, *_files(data), "--model",
                     str(out / "model.json"), "--out-dir", str(pred)]) == 0
    rows = _read_csv(pred / "scores.csv")
    assert rows[0][0] == "sample_id" and len(rows) == 31
    scores = {r[0]: np.array(r[1:], dtype=float) for r in rows[1:]}

    # rebuild the fitted view and compare with the transductive scores
    model = load_model(out / "model.json")
    assembly = ViewAssembly.from_dict(doc["views"])
    order = doc["sample_ids"]
    motor = np.array([r[1:] for r in _read_csv(data / "motor.csv")[1:]], dtype=float)
    nonmotor = np.array([r[1:] for r in _read_csv(data / "nonmotor.csv")[1:]], dtype=float)
    ids = [r[0] for r in _read_csv(data / "motor.csv")[1:]]
    idx = [ids.index(s) for s in order]
    view = assemble_view(motor[idx], nonmotor[idx], "minmax", DEFAULT_KERNELS,
                         sample_ids=order)
    S, _ = predict_transductive(model, view)
    for i, sid in enumerate(order):
        np.testing.assert_allclose(scores[sid], S[i], rtol=0, atol=1e-12)
    assert assembly.anchors.shape[0] == 30


def test_predict_empty_input(dataset):
    tmp, cfg, data = dataset
    out = tmp / "model"
    assert cli.main(["train", "--config", cfg, *_files(data), "--labels",
                     str(data / "labels.csv"), "--out-dir", str(out)]) == 0
    empty = tmp / "empty"
    empty.mkdir()
    for name in ("motor.csv", "nonmotor.csv"):
        header = _read_csv(data / name)[0]
        (empty / name).write_text(",".join(header) + "\n")
    pred = tmp / "pred"
    assert cli.main(["predict", *_files(empty), "--model", str(out / "model.json"),
                     "--out-dir", str(pred)]) == 0
    for name in ("scores.csv", "labels.csv"):
        rows = _read_csv(pred / name)
        assert len(rows) == 1 and rows[0][0] == "sample_id"


def test_predict_anchor_mismatch(dataset, capsys):
    tmp, cfg, data = dataset
    out = tmp / "model"
    assert cli.main(["train", "--config", cfg, *_files(data), "--labels",
                     str(data / "labels.csv"), "--out-dir", str(out)]) == 0
    doc = json.loads((out / "model.json").read_text())
    doc["views"]["anchors"] = doc["views"]["anchors"][:-1]
    doc["views"]["anchor_ids"] = doc["views"]["anchor_ids"][:-1]
    (out / "model.json").write_text(json.dumps(doc))
    assert cli.main(["predict", *_files(data), "--model", str(out / "model.json"),
                     "--out-dir", str(tmp / "p")]) == 2
    assert "anchors" in capsys.readouterr().err


def test_malformed_cell(dataset, capsys):
    tmp, cfg, data = dataset
    rows = _read_csv(data / "motor.csv")
    rows[3][2] = "abc"
    with open(data / "motor.csv", "w", newline="") as fh:
        csv.writer(fh, lineterminator="\n").writerows(rows)
    assert cli.main(["train", "--config", cfg, *_files(data), "--labels",
                     str(data / "labels.csv"), "--out-dir", str(tmp / "m")]) == 2
    err = capsys.readouterr().err
    assert "line 4" in err and "'m1'" in err and "abc" in err


def test_non_binary_label(dataset, capsys):
    tmp, cfg, data = dataset
    rows = _read_csv(data / "labels.csv")
    rows[1][1] = "2"
    with open(data / "labels.csv", "w", newline="") as fh:
        csv.writer(fh, lineterminator="\n").writerows(rows)
    assert cli.main(["train", "--config", cfg, *_files(data), "--labels",
                     str(data / "labels.csv")]) == 2
    assert "not 0/1" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    ["train"],
    ["train", "--config", "/nonexistent.json"],
    ["predict", "--model", "/nonexistent.json", "--motor", "x", "--nonmotor", "y"],
])
def test_input_errors_exit_2(argv, tmp_path):
    assert cli.main([*argv, "--out-dir", str(tmp_path)]) == 2


def test_unknown_config_key(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"alpah": 1}))
    assert cli.main(["synth", "--config", str(path), "--out-dir", str(tmp_path)]) == 2


def test_invalid_k_exit_2(dataset):
    tmp, cfg, data = dataset
    assert cli.main(["train", "--config", cfg, *_files(data), "--labels",
                     str(data / "labels.csv"), "--k", "500", "--out-dir",
                     str(tmp / "m")]) == 2


def test_numerical_failure_exit_3(dataset, monkeypatch):
    tmp, cfg, data = dataset

    def boom(*a, **kw):
        raise LineSearchFailed("step fell below 1e-18")

    monkeypatch.setattr(cli, "fit", boom)
    assert cli.main(["train", "--config", cfg, *_files(data), "--labels",
                     str(data / "labels.csv"), "--out-dir", str(tmp / "m")]) == 3


def test_cv_fold_entries(dataset):
    tmp, cfg, data = dataset
    out = tmp / "cv"
    assert cli.main(["cv", "--config", cfg, *_files(data), "--labels",
                     str(data / "labels.csv"), "--repeats", "2", "--folds", "3",
                     "--out-dir", str(out)]) == 0
    report = json.loads((out / "cv.json").read_text())
    assert len(report["per_fold"]) == 6
    rows = _read_csv(out / "cv_summary.csv")
    assert rows[0] == ["metric", "mean", "sd", "seed"] and len(rows) == 8


def test_cv_needs_all_labels(dataset):
    tmp, cfg, data = dataset
    assert cli.main(["cv", "--config", cfg, *_files(data), "--labels",
                     _drop_labels(data, 20), "--out-dir", str(tmp / "cv")]) == 2


def test_grid_single_cell(tmp_path, dataset):
    tmp, _, data = dataset
    cfg = _config(tmp / "g.json", grid={"alpha_values": [0.2], "beta_values": [0.05],
                                        "k_values": [2]})
    out = tmp / "grid"
    assert cli.main(["grid", "--config", cfg, *_files(data), "--labels",
                     str(data / "labels.csv"), "--out-dir", str(out)]) == 0
    doc = json.loads((out / "grid.json").read_text())
    assert doc["best"] == {"alpha": 0.2, "beta": 0.05, "k": 2}


def test_inputs_not_mutated(dataset):
    tmp, cfg, data = dataset
    before = {p.name: p.read_bytes() for p in data.iterdir()}
    cli.main(["train", "--config", cfg, *_files(data), "--labels",
              str(data / "labels.csv"), "--out-dir", str(tmp / "m")])
    assert {p.name: p.read_bytes() for p in data.iterdir()} == before


def test_console_script_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "latentlabel.cli", "--version"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.strip()


FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")


def test_default_config_on_shipped_fixture(tmp_path):
    # 60 samples x (55 + 143) features, 31 labels; last 10 samples unlabeled
    rows = _read_csv(os.path.join(FIXTURES, "labels.csv"))
    labels = tmp_path / "labels.csv"
    with open(labels, "w", newline="") as fh:
        csv.writer(fh, lineterminator="\n").writerows(rows[:51])
    feats = ["--motor", os.path.join(FIXTURES, "motor.csv"),
             "--nonmotor", os.path.join(FIXTURES, "nonmotor.csv")]
    assert cli.main(["train", *feats, "--labels", str(labels), "--out-dir", str(tmp_path)]) == 0
    trace = json.loads((tmp_path / "trace.json").read_text())
    seq = [trace["initial_objective"], *trace["objective"]]
    assert all(b <= a + 1e-10 for a, b in zip(seq, seq[1:]))
    model = json.loads((tmp_path / "model.json").read_text())
    assert (model["alpha"], model["beta"], model["k"]) == (0.3, 0.1, 50)
    assert model["n_train"] == 50
