"""Training, unobserved-region prediction, metrics and the end-to-end run."""
from __future__ import annotations

import copy
import dataclasses
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import torch

from .config import ExperimentConfig
from .data import (DatasetBundle, NormStats, RegionSplit, WindowSet, generate_synthetic, load_dataset_dir,
                   split_region, temporal_split, zscore_fit_apply)
from .errors import DivergenceError, InputError
from .graph import (apply_weights, daily_profiles, default_sigma, dtw_matrix, gaussian_threshold_adjacency,
                    idw_matrix, temporal_adjacency_from_distances)
from .masking import MaskingPlan, build_masking_plan
from .model import STModel, build_model, load_checkpoint, propagation_matrix, save_checkpoint
from .objectives import LossReport, TrainingLog, contrastive_loss, graph_representation, prediction_loss, total_loss

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class MetricReport:
    rmse: float
    mae: float
    mape: float
    r2: float

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def evaluate(predictions, targets, mask=None, mape_floor: float = 0.1) -> MetricReport:
    """RMSE, MAE, MAPE (over ``|target| > mape_floor``) and R2 about the target mean."""
    p = np.asarray(predictions, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    if p.shape != y.shape:
        raise InputError(f"prediction shape {p.shape} does not match target shape {y.shape}")
    if mask is not None:
        m = np.broadcast_to(np.asarray(mask, dtype=bool), y.shape)
        p, y = p[m], y[m]
    p, y = p.ravel(), y.ravel()
    if y.size == 0:
        raise InputError("no targets to evaluate")
    err = p - y
    rmse = math.sqrt(float(np.mean(err ** 2)))
    mae = float(np.mean(np.abs(err)))
    big = np.abs(y) > mape_floor
    mape = float(np.mean(np.abs(err[big]) / np.abs(y[big]))) if big.any() else math.nan
    sst = float(np.sum((y - y.mean()) ** 2))
    sse = float(np.sum(err ** 2))
    r2 = 1.0 - sse / sst if sst > 0 else (1.0 if sse == 0 else -math.inf)
    return MetricReport(rmse, mae, mape, r2)


# ---------------------------------------------------------------------------
# experiment context

@dataclass
class GraphView:
    """A node set with some rows replaced by IDW pseudo-observations."""

    ids: tuple[str, ...]
    target_ids: frozenset
    values: np.ndarray  # [T_total, n, C] normalised, targets filled
    A_s: np.ndarray
    A_dtw: np.ndarray

    @property
    def target_positions(self) -> np.ndarray:
        return np.array([i for i, k in enumerate(self.ids) if k in self.target_ids], dtype=np.int64)


@dataclass
class Context:
    config: ExperimentConfig
    bundle: DatasetBundle
    split: RegionSplit
    train_stop: int
    norm: NormStats
    values: np.ndarray  # normalised panel values [T_total, N, C]
    interval_ids: np.ndarray
    coords: np.ndarray
    sigma: float
    A_s: np.ndarray
    A_sg: np.ndarray
    plan: MaskingPlan
    profiles: dict = field(default_factory=dict)  # id -> daily profile (observed only)
    dtw_cache: dict = field(default_factory=dict)  # (id, id) -> distance between observed profiles

    @property
    def ids(self) -> tuple[str, ...]:
        return self.bundle.ids

    def index(self, ids: Sequence[str]) -> np.ndarray:
        return self.bundle.panel.index_of(ids)

    @property
    def model_config(self):
        return dataclasses.replace(self.config.model, steps_per_day=self.bundle.panel.steps_per_day)


def load_bundle(config: ExperimentConfig) -> DatasetBundle:
    d = config.data
    if d.data_dir:
        return load_dataset_dir(d.data_dir)
    return generate_synthetic(d.n_locations, d.days, d.interval_minutes, d.synth_seed, d.noise)


def prepare(config: ExperimentConfig, bundle: DatasetBundle | None = None) -> Context:
    """Split, normalise and build the static graphs for one experiment."""
    bundle = bundle or load_bundle(config)
    panel = bundle.panel
    s = config.split
    side = tuple(s.side) if isinstance(s.side, list) else s.side
    split = split_region(bundle.locations, s.method, s.unobserved_ratio, side)
    T, Tp = config.model.T, config.model.T_prime
    train_panel, _ = temporal_split(panel, s.train_fraction, min_length=T + Tp)
    train_stop = train_panel.n_steps
    norm_panel, norm = zscore_fit_apply(panel, split, fit_stop=train_stop)
    coords = bundle.coords
    sigma = default_sigma(coords)
    A_s = gaussian_threshold_adjacency(coords, sigma, config.epsilon_s)
    A_sg = gaussian_threshold_adjacency(coords, sigma, config.epsilon_sg)
    plan = build_masking_plan(bundle, split.train_ids, split.test_ids, A_sg, config.r_poi,
                              config.delta_m, min(config.K, len(split.train_ids)))
    ctx = Context(config, bundle, split, train_stop, norm, norm_panel.values, panel.interval_ids(), coords,
                  sigma, A_s, A_sg, plan)
    observed = list(split.observed_ids)
    prof = daily_profiles(ctx.values[:train_stop, ctx.index(observed), 0], ctx.interval_ids[:train_stop],
                          panel.steps_per_day)
    ctx.profiles = dict(zip(observed, prof))
    D = dtw_matrix(prof)
    ctx.dtw_cache = {(a, b): D[i, j] for i, a in enumerate(observed) for j, b in enumerate(observed)}
    return ctx


def build_view(ctx: Context, node_ids: Sequence[str], target_ids: Sequence[str]) -> GraphView:
    """Fill ``target_ids`` with IDW pseudo-observations from the remaining
    nodes and build the matching DTW adjacency."""
    cfg = ctx.config
    node_ids = tuple(node_ids)
    targets = frozenset(target_ids)
    idx = ctx.index(node_ids)
    values = ctx.values[:, idx].copy()
    obs_pos = [i for i, k in enumerate(node_ids) if k not in targets]
    tgt_pos = [i for i, k in enumerate(node_ids) if k in targets]
    n = len(node_ids)
    D = np.full((n, n), np.inf)
    for i in obs_pos:
        for j in obs_pos:
            D[i, j] = ctx.dtw_cache[(node_ids[i], node_ids[j])]
    if tgt_pos:
        W = idw_matrix(ctx.coords[idx[tgt_pos]], ctx.coords[idx[obs_pos]], cfg.idw_k_nearest)
        values[:, tgt_pos] = apply_weights(values[:, obs_pos], W)
        tprof = daily_profiles(values[:ctx.train_stop, tgt_pos, 0], ctx.interval_ids[:ctx.train_stop],
                               ctx.bundle.panel.steps_per_day)
        oprof = np.stack([ctx.profiles[node_ids[i]] for i in obs_pos])
        D[np.ix_(tgt_pos, obs_pos)] = dtw_matrix(tprof, oprof)
    A_dtw = temporal_adjacency_from_distances(D, node_ids, obs_pos, tgt_pos, cfg.q_kk, cfg.q_ku)
    return GraphView(node_ids, targets, values, ctx.A_s[np.ix_(idx, idx)], A_dtw)


def _windows(values: np.ndarray, interval_ids: np.ndarray, start: int, stop: int, T: int, Tp: int,
             stride: int) -> WindowSet:
    span = stop - start
    starts = np.arange(start, stop - T - Tp + 1, stride, dtype=np.int64)
    if span < T + Tp or starts.size == 0:
        raise InputError(f"span of {span} steps is too short for T+T'={T + Tp}")
    return WindowSet(values, interval_ids, starts, T, Tp)


def _tensor(x, dtype):
    return torch.as_tensor(np.ascontiguousarray(x), dtype=dtype)


def _dtype(config: ExperimentConfig):
    return getattr(torch, config.dtype)


# ---------------------------------------------------------------------------
# training

@dataclass
class EpochMask:
    epoch: int
    masked_ids: tuple[str, ...]
    centers: tuple[str, ...]


def epoch_mask(ctx: Context, epoch: int) -> EpochMask:
    """The mask for ``epoch``; depends on (seed, epoch) only."""
    rng = np.random.default_rng([ctx.config.seed, epoch])
    draw = ctx.plan.draw(ctx.config.masking, rng)
    if not draw.masked:
        draw = ctx.plan.draw(ctx.config.masking, rng)
        if not draw.masked:
            log.warning("epoch %d: empty mask drawn twice; training this epoch unmasked", epoch)
    ids = ctx.plan.ids
    return EpochMask(epoch, tuple(ids[i] for i in sorted(draw.masked)), tuple(ids[i] for i in draw.centers))


def epoch_views(ctx: Context, epoch: int) -> tuple[EpochMask, GraphView]:
    mask = epoch_mask(ctx, epoch)
    return mask, build_view(ctx, ctx.split.train_ids, mask.masked_ids)


@dataclass
class TrainResult:
    model: STModel
    log: TrainingLog
    masks: list[EpochMask]
    val_rmse: list[float]
    best_epoch: int


def _validation_rmse(model: STModel, ctx: Context, view: GraphView, windows: WindowSet, batch: int) -> float:
    pred = _predict_view(model, ctx, view, windows, batch)
    tpos = view.target_positions
    truth = windows.targets()[:, tpos]
    truth = ctx.norm.invert(truth)
    return evaluate(pred, truth).rmse


def _predict_view(model: STModel, ctx: Context, view: GraphView, windows: WindowSet, batch: int) -> np.ndarray:
    """Denormalised predictions ``[W, n_targets, T', C]`` for the view's targets."""
    dtype = _dtype(ctx.config)
    A_s, A_dtw = _tensor(view.A_s, dtype), _tensor(view.A_dtw, dtype)
    props = [propagation_matrix(A_s), propagation_matrix(A_dtw)]
    tpos = view.target_positions
    out = []
    model.eval()
    with torch.no_grad():
        for b in range(0, len(windows), batch):
            idx = np.arange(b, min(b + batch, len(windows)))
            X = _tensor(windows.inputs(idx), dtype)
            TE = torch.as_tensor(windows.time_index(idx))
            pred, _ = model(X, TE, A_s, A_dtw, props)
            out.append(pred[:, tpos].numpy().astype(np.float64))
    return ctx.norm.invert(np.concatenate(out))


def train(config: ExperimentConfig, ctx: Context | None = None, bundle: DatasetBundle | None = None) -> TrainResult:
    """Masked-view training with optional graph contrastive loss and early
    stopping on validation-region RMSE."""
    ctx = ctx or prepare(config, bundle)
    cfg = ctx.config
    dtype = _dtype(cfg)
    T, Tp = cfg.model.T, cfg.model.T_prime
    torch.manual_seed(cfg.seed)
    model = build_model(ctx.model_config, seed=cfg.seed, dtype=dtype)
    opt = torch.optim.Adam(model.parameters(), lr=cfg.learning_rate)
    sched = torch.optim.lr_scheduler.ExponentialLR(opt, gamma=cfg.lr_decay)

    full_view = build_view(ctx, ctx.split.train_ids, ())
    full_windows = _windows(full_view.values, ctx.interval_ids, 0, ctx.train_stop, T, Tp, cfg.train_stride)
    A_s = _tensor(full_view.A_s, dtype)
    A_dtw_full = _tensor(full_view.A_dtw, dtype)
    P_s = propagation_matrix(A_s)
    props_full = [P_s, propagation_matrix(A_dtw_full)]

    val_view = build_view(ctx, ctx.split.train_ids + ctx.split.valid_ids, ctx.split.valid_ids)
    val_windows = _windows(val_view.values, ctx.interval_ids, 0, ctx.train_stop, T, Tp, cfg.valid_stride)

    training_log = TrainingLog()
    masks: list[EpochMask] = []
    val_hist: list[float] = []
    best = (math.inf, -1, None)
    for epoch in range(cfg.epochs):
        mask, view = epoch_views(ctx, epoch)
        masks.append(mask)
        masked_windows = WindowSet(view.values, ctx.interval_ids, full_windows.starts, T, Tp)
        A_dtw_m = _tensor(view.A_dtw, dtype)
        props_m = [P_s, propagation_matrix(A_dtw_m)]
        order = np.random.default_rng([cfg.seed, epoch, 1]).permutation(len(full_windows))
        model.train()
        sums = np.zeros(2)
        n_batches = 0
        for b in range(0, len(order), cfg.batch_size):
            idx = order[b:b + cfg.batch_size]
            if cfg.contrastive and len(idx) < 2:
                continue
            TE = torch.as_tensor(full_windows.time_index(idx))
            Y = _tensor(full_windows.targets(idx), dtype)
            Xm = _tensor(masked_windows.inputs(idx), dtype)
            pred_m, h_m = model(Xm, TE, A_s, A_dtw_m, props_m)
            try:
                L_pred = prediction_loss(pred_m, Y)
            except DivergenceError as exc:
                raise DivergenceError(f"epoch {epoch}: {exc}") from None
            if cfg.contrastive:
                Xf = _tensor(full_windows.inputs(idx), dtype)
                _, h_f = model(Xf, TE, A_s, A_dtw_full, props_full)
                L_cl = contrastive_loss(graph_representation(h_f, model.cl_head),
                                        graph_representation(h_m, model.cl_head), cfg.tau)
            else:
                L_cl = torch.zeros((), dtype=dtype)
            L = total_loss(L_pred, L_cl, cfg.lam)
            if not torch.isfinite(L):
                raise DivergenceError(f"non-finite loss at epoch {epoch}")
            opt.zero_grad()
            L.backward()
            opt.step()
            sums += (L_pred.item(), L_cl.item())
            n_batches += 1
        sched.step()
        mp, mc = (float(v) for v in sums[:2] / max(n_batches, 1))
        mt = total_loss(mp, mc, cfg.lam)
        training_log.append(epoch, LossReport(mp, mc, mt, cfg.lam, cfg.tau, cfg.batch_size))
        val = _validation_rmse(model, ctx, val_view, val_windows, 256)
        val_hist.append(val)
        log.info("epoch %d  L_pred %.4f  L_cl %.4f  val_rmse %.4f  masked %d",
                 epoch, mp, mc, val, len(mask.masked_ids))
        if val < best[0]:
            best = (val, epoch, copy.deepcopy(model.state_dict()))
        elif epoch - best[1] >= cfg.patience:
            break
    model.load_state_dict(best[2])
    return TrainResult(model, training_log, masks, val_hist, best[1])


# ---------------------------------------------------------------------------
# testing

@dataclass
class Prediction:
    test_ids: tuple[str, ...]
    predictions: np.ndarray  # [W, N_u, T', C] denormalised
    targets: np.ndarray  # [W, N_u, T', C] raw observations
    present: np.ndarray  # [W, N_u, T'] target cells actually observed
    inputs: np.ndarray  # [W, N_u, T, C] normalised model inputs at the test locations
    starts: np.ndarray
    view: GraphView


def unobserved_view(ctx: Context, test_ids: Sequence[str] | None = None) -> GraphView:
    test_ids = tuple(ctx.split.test_ids if test_ids is None else test_ids)
    unknown = [k for k in test_ids if k not in set(ctx.ids)]
    if unknown:
        raise InputError(f"unknown location id {unknown[0]!r}")
    observed = tuple(ctx.split.observed_ids)
    overlap = set(test_ids) & set(observed)
    if overlap:
        raise InputError(f"location {sorted(overlap)[0]!r} is observed, not unobserved")
    return build_view(ctx, observed + test_ids, test_ids)


def predict_unobserved(model: STModel, ctx: Context, test_ids: Sequence[str] | None = None) -> Prediction:
    """Forecast the unobserved region over every window of the test span."""
    cfg = ctx.config
    T, Tp = cfg.model.T, cfg.model.T_prime
    view = unobserved_view(ctx, test_ids)
    windows = _windows(view.values, ctx.interval_ids, ctx.train_stop, len(ctx.interval_ids), T, Tp,
                       cfg.eval_stride)
    pred = _predict_view(model, ctx, view, windows, 256)
    tpos = view.target_positions
    tidx = ctx.index([view.ids[i] for i in tpos])
    raw = ctx.bundle.panel.values[:, tidx]
    present = ctx.bundle.panel.present_mask[:, tidx]
    rows = windows.starts[:, None] + T + np.arange(Tp)
    targets = np.transpose(raw[rows], (0, 2, 1, 3))
    pres = np.transpose(present[rows], (0, 2, 1))
    inputs = windows.inputs()[:, tpos]
    return Prediction(tuple(view.ids[i] for i in tpos), pred, targets, pres, inputs, windows.starts, view)


def baseline_predictions(ctx: Context, prediction: Prediction) -> dict[str, np.ndarray]:
    """Mean predictor and IDW-persistence (last pseudo-observation held)."""
    Tp = ctx.config.model.T_prime
    mean = np.broadcast_to(ctx.norm.mean, prediction.targets.shape).copy()
    last = ctx.norm.invert(prediction.inputs[:, :, -1:, :])
    persist = np.repeat(last, Tp, axis=2)
    return {"mean": mean, "idw_persistence": persist}


def evaluate_prediction(ctx: Context, prediction: Prediction) -> dict:
    floor = ctx.config.mape_floor
    mask = prediction.present[..., None]
    report = {"model": evaluate(prediction.predictions, prediction.targets, mask, floor).to_dict()}
    for name, p in baseline_predictions(ctx, prediction).items():
        report[name] = evaluate(p, prediction.targets, mask, floor).to_dict()
    return report


def run_experiment(config: ExperimentConfig, out_dir, bundle: DatasetBundle | None = None,
                   plots: bool = True) -> dict:
    """load -> split -> train -> predict -> evaluate, writing every artifact to ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ctx = prepare(config, bundle)
    result = train(config, ctx)
    prediction = predict_unobserved(result.model, ctx)
    scores = evaluate_prediction(ctx, prediction)

    save_checkpoint(result.model, out / "checkpoint.npz",
                    extra={"split": ctx.split.to_dict(), "norm_mean": ctx.norm.mean.tolist(),
                           "norm_std": ctx.norm.std.tolist()})
    result.log.write(out / "training_log.csv")
    write_mask_records(ctx, result.masks, out / "mask_audit.json")
    config.dump(out / "config.json")
    results = {
        "variant": config.variant,
        "seed": config.seed,
        "dataset": ctx.bundle.name,
        "n_locations": len(ctx.ids),
        "n_train": len(ctx.split.train_ids),
        "n_valid": len(ctx.split.valid_ids),
        "n_test": len(ctx.split.test_ids),
        "n_test_windows": int(len(prediction.starts)),
        "epochs_run": len(result.val_rmse),
        "best_epoch": result.best_epoch,
        "val_rmse": result.val_rmse,
        "metrics": scores["model"],
        "baselines": {k: v for k, v in scores.items() if k != "model"},
    }
    (out / "results.json").write_text(json.dumps(results, indent=2, sort_keys=True))
    np.savez(out / "predictions.npz", predictions=prediction.predictions, targets=prediction.targets,
             present=prediction.present, test_ids=np.array(prediction.test_ids), starts=prediction.starts)
    if plots:
        from .plots import plot_losses, plot_predictions
        plot_predictions(prediction, out / "predictions.png")
        plot_losses(result.log, result.val_rmse, out / "losses.png")
    return results


def write_mask_records(ctx: Context, masks: list[EpochMask], path) -> None:
    from .masking import write_mask_audit
    P = [float(p) for p in ctx.plan.probabilities]
    write_mask_audit([{"epoch": m.epoch, "seed": ctx.config.seed, "masked_ids": list(m.masked_ids),
                       "centers": list(m.centers), "P": P} for m in masks], path)


def load_trained(checkpoint) -> STModel:
    model, _ = load_checkpoint(checkpoint)
    return model
