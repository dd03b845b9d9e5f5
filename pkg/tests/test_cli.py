import json

import numpy as np
import pytest

from stsm.cli import main
from test_pipeline import TINY


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    data = root / "data"
    assert main(["synth", "--locations", "16", "--days", "3", "--interval", "30", "--seed", "3",
                 "--out-dir", str(data)]) == 0
    cfg = dict(TINY, data={"data_dir": str(data)})
    (root / "exp.json").write_text(json.dumps(cfg))
    return root


def test_synth_writes_csvs(workspace):
    for name in ("locations.csv", "observations.csv", "poi.csv", "roads.csv"):
        assert (workspace / "data" / name).exists()
    header = (workspace / "data" / "observations.csv").read_text().splitlines()[0]
    assert header.startswith("timestamp,S000")


def test_build_graph(workspace):
    out = workspace / "graph"
    assert main(["build-graph", "--config", str(workspace / "exp.json"), "--out-dir", str(out)]) == 0
    for name in ("A_s.csv", "A_sg.csv", "A_dtw.csv", "split.json"):
        assert (out / name).exists()
    split = json.loads((out / "split.json").read_text())
    test = set(split["test_ids"])
    observed = set(split["train_ids"]) | set(split["valid_ids"])
    edges = (out / "A_dtw.csv").read_text().splitlines()[1:]
    assert not any(e.split(",")[0] in test and e.split(",")[1] in observed for e in edges)


def test_train_predict_evaluate(workspace):
    cfg = str(workspace / "exp.json")
    out = workspace / "model"
    assert main(["train", "--config", cfg, "--out-dir", str(out)]) == 0
    for name in ("checkpoint.npz", "training_log.csv", "mask_audit.json"):
        assert (out / name).exists()
    assert main(["predict", "--config", cfg, "--checkpoint", str(out / "checkpoint.npz"), "--out-dir", str(out)]) == 0
    with np.load(out / "predictions.npz") as z:
        assert z["predictions"].shape == z["targets"].shape
        assert "baseline_idw_persistence" in z.files
    assert main(["evaluate", "--config", cfg, "--predictions", str(out / "predictions.npz"),
                 "--out-dir", str(out)]) == 0
    metrics = json.loads((out / "metrics.json").read_text())
    assert set(metrics["model"]) == {"rmse", "mae", "mape", "r2"}


def test_predict_rejects_mismatched_split(workspace, capsys):
    cfg = dict(TINY, data={"data_dir": str(workspace / "data")}, split={"method": "horizontal"})
    (workspace / "other.json").write_text(json.dumps(cfg))
    ckpt = workspace / "model" / "checkpoint.npz"
    if not ckpt.exists():
        pytest.skip("needs the trained checkpoint")
    code = main(["predict", "--config", str(workspace / "other.json"), "--checkpoint", str(ckpt),
                 "--out-dir", str(workspace / "x")])
    assert code == 2
    assert "split" in capsys.readouterr().err


def test_run_with_variant_and_seed(workspace):
    out = workspace / "run"
    assert main(["run", "--config", str(workspace / "exp.json"), "--variant", "STSM-R", "--seed", "4",
                 "--no-plots", "--out-dir", str(out)]) == 0
    res = json.loads((out / "results.json").read_text())
    assert res["variant"] == "STSM-R" and res["seed"] == 4
    assert set(res["baselines"]) == {"mean", "idw_persistence"}


def test_bad_config_exit_code(tmp_path, capsys):
    (tmp_path / "bad.json").write_text('{"variant": "nope"}')
    assert main(["run", "--config", str(tmp_path / "bad.json"), "--out-dir", str(tmp_path)]) == 2
    assert "unknown variant" in capsys.readouterr().err
