"""Command-line entry point: ``stsm <subcommand> [options]``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .config import VARIANTS, ExperimentConfig
from .errors import StsmError

log = logging.getLogger("stsm")


def _config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    over = {}
    if args.seed is not None:
        over["seed"] = args.seed
    if getattr(args, "variant", None):
        over["variant"] = args.variant
    if args.data_dir:
        over["data"] = {**cfg.to_dict()["data"], "data_dir": str(args.data_dir)}
    return cfg.with_overrides(**over) if over else cfg


def _out(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_synth(args) -> int:
    from .data import generate_synthetic, write_dataset
    bundle = generate_synthetic(args.locations, args.days, args.interval, seed=7 if args.seed is None else args.seed,
                                noise=args.noise)
    write_dataset(bundle, _out(args))
    print(f"wrote {len(bundle.ids)} locations x {bundle.panel.n_steps} steps to {args.out_dir}")
    return 0


def cmd_build_graph(args) -> int:
    from .graph import export_edges_csv
    from .pipeline import prepare, unobserved_view
    cfg = _config(args)
    out = _out(args)
    ctx = prepare(cfg)
    view = unobserved_view(ctx)
    export_edges_csv(ctx.A_s, ctx.ids, out / "A_s.csv")
    export_edges_csv(ctx.A_sg, ctx.ids, out / "A_sg.csv")
    export_edges_csv(view.A_dtw, view.ids, out / "A_dtw.csv")
    (out / "split.json").write_text(json.dumps(ctx.split.to_dict(), indent=2))
    print(f"sigma={ctx.sigma:.3f} m  |A_s|={int(ctx.A_s.sum())}  |A_sg|={int(ctx.A_sg.sum())}  "
          f"|A_dtw|={int(view.A_dtw.sum())}")
    return 0


def cmd_train(args) -> int:
    from .model import save_checkpoint
    from .pipeline import prepare, train, write_mask_records
    cfg = _config(args)
    out = _out(args)
    ctx = prepare(cfg)
    result = train(cfg, ctx)
    save_checkpoint(result.model, out / "checkpoint.npz", extra={"split": ctx.split.to_dict()})
    result.log.write(out / "training_log.csv")
    write_mask_records(ctx, result.masks, out / "mask_audit.json")
    cfg.dump(out / "config.json")
    print(f"best epoch {result.best_epoch}  val rmse {min(result.val_rmse):.4f}")
    return 0


def cmd_predict(args) -> int:
    from .errors import InputError
    from .model import load_checkpoint
    from .pipeline import baseline_predictions, predict_unobserved, prepare
    cfg = _config(args)
    out = _out(args)
    ctx = prepare(cfg)
    model, extra = load_checkpoint(args.checkpoint)
    if extra.get("split") and extra["split"] != ctx.split.to_dict():
        raise InputError("checkpoint was trained on a different region split than this config produces")
    pred = predict_unobserved(model, ctx)
    base = baseline_predictions(ctx, pred)
    np.savez(out / "predictions.npz", predictions=pred.predictions, targets=pred.targets, present=pred.present,
             test_ids=np.array(pred.test_ids), starts=pred.starts,
             **{f"baseline_{k}": v for k, v in base.items()})
    print(f"predicted {len(pred.test_ids)} locations x {len(pred.starts)} windows")
    return 0


def cmd_evaluate(args) -> int:
    from .pipeline import evaluate
    cfg = _config(args)
    out = _out(args)
    with np.load(args.predictions) as z:
        mask = z["present"][..., None]
        report = {"model": evaluate(z["predictions"], z["targets"], mask, cfg.mape_floor).to_dict()}
        for key in z.files:
            if key.startswith("baseline_"):
                report[key[len("baseline_"):]] = evaluate(z[key], z["targets"], mask, cfg.mape_floor).to_dict()
    (out / "metrics.json").write_text(json.dumps(report, indent=2, sort_keys=True))
    print(json.dumps(report["model"]))
    return 0


def cmd_run(args) -> int:
    from .pipeline import run_experiment
    cfg = _config(args)
    results = run_experiment(cfg, _out(args), plots=not args.no_plots)
    print(json.dumps({"metrics": results["metrics"], "baselines": results["baselines"]}, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="experiment config JSON")
    common.add_argument("--seed", type=int)
    common.add_argument("--out-dir", type=Path, default=Path("out"))
    common.add_argument("--data-dir", type=Path, help="dataset directory (overrides the config)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="stsm", description="Forecasting for unobserved regions of a sensor network.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", parents=[common], help="write a synthetic dataset as CSV files")
    s.add_argument("--locations", type=int, default=60)
    s.add_argument("--days", type=int, default=14)
    s.add_argument("--interval", type=int, default=5, help="minutes between observations")
    s.add_argument("--noise", type=float, default=1.0)
    s.set_defaults(func=cmd_synth)

    sub.add_parser("build-graph", parents=[common], help="export adjacency edge lists").set_defaults(
        func=cmd_build_graph)
    sub.add_parser("train", parents=[common], help="train and write a checkpoint").set_defaults(func=cmd_train)

    s = sub.add_parser("predict", parents=[common], help="forecast the unobserved region")
    s.add_argument("--checkpoint", type=Path, required=True)
    s.set_defaults(func=cmd_predict)

    s = sub.add_parser("evaluate", parents=[common], help="score a predictions archive")
    s.add_argument("--predictions", type=Path, required=True)
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("run", parents=[common], help="train, predict and evaluate in one go")
    s.add_argument("--variant", choices=sorted(VARIANTS))
    s.add_argument("--no-plots", action="store_true")
    s.set_defaults(func=cmd_run)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except StsmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
