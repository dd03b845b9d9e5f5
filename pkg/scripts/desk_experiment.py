"""End-to-end run on the synthetic desk dataset with wall-clock timing.

    python scripts/desk_experiment.py [--config configs/desk.json] [--out-dir runs/desk]
"""
import argparse
import json
import logging
import time
from pathlib import Path

from stsm.config import ExperimentConfig
from stsm.pipeline import run_experiment


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--config", type=Path, default=Path(__file__).parent.parent / "configs" / "desk.json")
    p.add_argument("--out-dir", type=Path, default=Path("runs/desk"))
    p.add_argument("--variant")
    p.add_argument("--seed", type=int)
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    cfg = ExperimentConfig.load(args.config)
    over = {k: v for k, v in (("variant", args.variant), ("seed", args.seed)) if v is not None}
    if over:
        cfg = cfg.with_overrides(**over)
    t0 = time.time()
    res = run_experiment(cfg, args.out_dir)
    elapsed = time.time() - t0
    rows = {"model": res["metrics"], **res["baselines"]}
    print(f"\n{'':16s} {'RMSE':>8s} {'MAE':>8s} {'MAPE':>8s} {'R2':>8s}")
    for name, m in rows.items():
        print(f"{name:16s} {m['rmse']:8.4f} {m['mae']:8.4f} {m['mape']:8.4f} {m['r2']:8.4f}")
    print(f"\n{res['epochs_run']} epochs (best {res['best_epoch']}), {elapsed:.1f} s wall clock")
    (args.out_dir / "timing.json").write_text(json.dumps({"seconds": elapsed}))


if __name__ == "__main__":
    main()
