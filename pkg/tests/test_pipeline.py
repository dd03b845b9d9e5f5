import json
import math

import numpy as np
import pytest
import torch
from hypothesis import given, settings, strategies as st

from stsm.config import VARIANTS, ExperimentConfig
from stsm.data import SensorPanel, generate_synthetic
from stsm.errors import ConfigError, DivergenceError, InputError
from stsm.graph import apply_weights, idw_matrix
from stsm.model import load_checkpoint, save_checkpoint
from stsm.pipeline import (build_view, epoch_mask, epoch_views, evaluate, evaluate_prediction, predict_unobserved,
                           prepare, run_experiment, train, unobserved_view)

TINY = {
    "epochs": 2, "batch_size": 8, "K": 5, "epsilon_sg": 0.9, "train_stride": 2, "valid_stride": 4,
    "data": {"n_locations": 16, "days": 3, "interval_minutes": 30, "synth_seed": 3},
    "model": {"hidden": 8, "cl_dim": 8, "T": 4, "T_prime": 4},
}


def tiny(**kw):
    return ExperimentConfig.from_dict(TINY).with_overrides(**kw) if kw else ExperimentConfig.from_dict(TINY)


@pytest.fixture(scope="module")
def ctx():
    return prepare(tiny())


@pytest.fixture(scope="module")
def trained(ctx):
    return train(ctx.config, ctx)


# ---------------------------------------------------------------- metrics

def test_evaluate_perfect_and_mean():
    y = np.array([1.0, 2.0, 3.0, 4.0])
    r = evaluate(y, y)
    assert (r.rmse, r.mae, r.mape, r.r2) == (0, 0, 0, 1)
    assert evaluate(np.full(4, y.mean()), y).r2 == 0


def test_evaluate_direct_formulas(rng):
    p, y = rng.normal(5, 2, 10), rng.normal(5, 2, 10)
    r = evaluate(p, y)
    e = p - y
    assert r.rmse == pytest.approx(math.sqrt(sum(e ** 2) / 10), abs=1e-12)
    assert r.mae == pytest.approx(sum(abs(e)) / 10, abs=1e-12)
    assert r.mape == pytest.approx(sum(abs(e) / abs(y)) / 10, abs=1e-12)
    assert r.r2 == pytest.approx(1 - sum(e ** 2) / sum((y - y.mean()) ** 2), abs=1e-12)


def test_evaluate_floor_mask_and_empty():
    r = evaluate(np.array([1.0, 5.0]), np.array([0.05, 4.0]))
    assert r.mape == pytest.approx(0.25)
    r = evaluate(np.array([0.0, 100.0]), np.array([0.0, 1.0]), mask=np.array([True, False]))
    assert r.rmse == 0
    with pytest.raises(InputError):
        evaluate(np.zeros(0), np.zeros(0))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3)), min_size=2, max_size=40))
def test_evaluate_invariants(pairs):
    p, y = np.array(pairs).T
    r = evaluate(p, y)
    assert r.rmse >= r.mae - 1e-9 >= -1e-9
    assert r.r2 <= 1


# ---------------------------------------------------------------- config

def test_variant_matrix():
    seen = {}
    for v in VARIANTS:
        c = ExperimentConfig(variant=v) if "NC" not in v else ExperimentConfig(variant=v, lam=0.0)
        seen[(c.masking, c.contrastive)] = v
    assert seen == {("selective", True): "STSM", ("selective", False): "STSM-NC",
                    ("random", True): "STSM-R", ("random", False): "STSM-RNC"}
    assert ExperimentConfig(variant="STSM-NC").lam == 0


def test_config_rejects_inconsistent():
    with pytest.raises(ConfigError):
        ExperimentConfig(variant="STSM-R", masking="selective")
    with pytest.raises(ConfigError):
        ExperimentConfig(variant="STSM", lam=0.0)
    with pytest.raises(ConfigError):
        ExperimentConfig(variant="XYZ")
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"epochz": 3})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"model": {"hiden": 3}})


def test_config_json_round_trip(tmp_path):
    c = tiny(variant="STSM-R", seed=9)
    c.dump(tmp_path / "c.json")
    assert "lambda" in json.loads((tmp_path / "c.json").read_text())
    assert ExperimentConfig.load(tmp_path / "c.json") == c
    assert tiny(variant="STSM-RNC").with_overrides(variant="STSM").lam == 0.5


# ---------------------------------------------------------------- views and masks

def test_masks_depend_on_seed_and_epoch_only(ctx):
    a_mask, a_view = epoch_views(ctx, 4)
    fresh = prepare(tiny())
    epoch_views(fresh, 0)  # consuming other epochs must not matter
    b_mask, b_view = epoch_views(fresh, 4)
    assert a_mask == b_mask
    assert np.array_equal(a_view.A_dtw, b_view.A_dtw)
    assert set(a_mask.masked_ids) <= set(ctx.split.train_ids)


def test_masked_rows_use_unmasked_sources_only(ctx):
    mask, view = epoch_views(ctx, 1)
    if not mask.masked_ids:
        pytest.skip("empty mask for this epoch")
    ids = list(view.ids)
    m = [ids.index(k) for k in mask.masked_ids]
    u = [i for i in range(len(ids)) if i not in m]
    idx = ctx.index(ids)
    W = idw_matrix(ctx.coords[idx[m]], ctx.coords[idx[u]])
    np.testing.assert_allclose(view.values[:, m], apply_weights(ctx.values[:, idx[u]], W), atol=1e-12)
    assert view.A_dtw[np.ix_(m, u)].sum() == 0


def test_unobserved_inputs_are_pseudo_observations(ctx):
    view = unobserved_view(ctx)
    ids = list(view.ids)
    t = [ids.index(k) for k in ctx.split.test_ids]
    o = [ids.index(k) for k in ctx.split.observed_ids]
    idx = ctx.index(ids)
    W = idw_matrix(ctx.coords[idx[t]], ctx.coords[idx[o]])
    np.testing.assert_array_equal(view.values[:, t], apply_weights(ctx.values[:, idx[o]], W))
    np.testing.assert_array_equal(view.values[:, o], ctx.values[:, idx[o]])
    assert view.A_dtw[np.ix_(t, o)].sum() == 0


def test_unobserved_view_rejects_bad_ids(ctx):
    with pytest.raises(InputError):
        unobserved_view(ctx, ["nope"])
    with pytest.raises(InputError):
        unobserved_view(ctx, [ctx.split.train_ids[0]])


def test_empty_mask_redraw_then_warn(ctx, caplog):
    saved = ctx.plan.probabilities
    ctx.plan.probabilities = np.zeros_like(saved)
    try:
        m = epoch_mask(ctx, 0)
    finally:
        ctx.plan.probabilities = saved
    assert m.masked_ids == ()
    assert "unmasked" in caplog.text


# ---------------------------------------------------------------- training and prediction

def test_training_log_and_best_epoch(trained):
    assert len(trained.log.rows) == 2
    assert trained.best_epoch == int(np.argmin(trained.val_rmse))
    assert all(r[3] == r[1] + 0.5 * r[2] for r in trained.log.rows)


def test_prediction_shapes_and_region(ctx, trained):
    pred = predict_unobserved(trained.model, ctx)
    assert pred.test_ids == ctx.split.test_ids
    W = len(pred.starts)
    assert pred.predictions.shape == (W, len(ctx.split.test_ids), 4, 1)
    assert pred.targets.shape == pred.predictions.shape
    rep = evaluate_prediction(ctx, pred)
    assert set(rep) == {"model", "mean", "idw_persistence"}
    assert pred.starts.min() >= ctx.train_stop


def test_checkpoint_round_trip_predictions(tmp_path, ctx, trained):
    save_checkpoint(trained.model, tmp_path / "c.npz")
    model, _ = load_checkpoint(tmp_path / "c.npz")
    a = predict_unobserved(trained.model, ctx).predictions
    b = predict_unobserved(model, ctx).predictions
    assert a.tobytes() == b.tobytes()


def test_training_is_deterministic(ctx, trained):
    again = train(ctx.config, prepare(tiny()))
    assert again.log.rows == trained.log.rows


def test_no_contrastive_variant_logs_zero_cl():
    res = train(tiny(variant="STSM-RNC", epochs=1))
    assert res.log.rows[0][2] == 0.0


def test_divergence_reports_epoch():
    c = prepare(tiny(epochs=1))
    c.values = c.values.copy()
    c.values[5, c.index([c.split.train_ids[0]])[0]] = np.nan
    with pytest.raises(DivergenceError, match="epoch 0"):
        train(c.config, c)


def test_constant_signal_prediction_band():
    b = generate_synthetic(16, 3, 30, seed=3)
    vals = np.full_like(b.panel.values, 50.0)
    p = b.panel
    b.panel = SensorPanel(p.timestamps, vals, p.present_mask, p.ids)
    cfg = tiny(epochs=5, variant="STSM-NC")
    c = prepare(cfg, b)
    pred = predict_unobserved(train(cfg, c).model, c)
    assert np.all(np.abs(pred.predictions - 50.0) < 1.0)


def test_run_experiment_artifacts(tmp_path):
    res = run_experiment(tiny(), tmp_path)
    for name in ("results.json", "training_log.csv", "mask_audit.json", "checkpoint.npz", "config.json",
                 "predictions.npz", "predictions.png", "losses.png"):
        assert (tmp_path / name).exists(), name
    saved = json.loads((tmp_path / "results.json").read_text())
    assert set(saved["metrics"]) == {"rmse", "mae", "mape", "r2"}
    assert saved == json.loads(json.dumps(res))
    audit = json.loads((tmp_path / "mask_audit.json").read_text())
    assert audit[0].keys() >= {"epoch", "seed", "masked_ids", "P"}
