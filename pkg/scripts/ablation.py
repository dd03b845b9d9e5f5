"""Variant ablation on the synthetic desk dataset: test RMSE per (variant, seed).

    python scripts/ablation.py --config configs/desk.json --seeds 0 1 2 --variants STSM STSM-RNC
"""
import argparse
import json
import time
from pathlib import Path

import numpy as np

from stsm.config import ExperimentConfig
from stsm.pipeline import run_experiment


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--config", type=Path, default=Path(__file__).parent.parent / "configs" / "desk.json")
    p.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    p.add_argument("--variants", nargs="+", default=["STSM", "STSM-NC", "STSM-R", "STSM-RNC"])
    p.add_argument("--out-dir", type=Path, default=Path("runs/ablation"))
    args = p.parse_args()

    base = ExperimentConfig.load(args.config)
    table = {}
    for variant in args.variants:
        rmses = []
        for seed in args.seeds:
            t0 = time.time()
            cfg = base.with_overrides(variant=variant, seed=seed)
            res = run_experiment(cfg, args.out_dir / f"{variant}-s{seed}", plots=False)
            rmses.append(res["metrics"]["rmse"])
            print(f"{variant:9s} seed {seed}  rmse {rmses[-1]:.4f}  r2 {res['metrics']['r2']:.4f}  "
                  f"({time.time() - t0:.0f} s)", flush=True)
        table[variant] = {"rmse": rmses, "mean_rmse": float(np.mean(rmses))}
    args.out_dir.mkdir(parents=True, exist_ok=True)
    (args.out_dir / "summary.json").write_text(json.dumps(table, indent=2))
    for variant, row in table.items():
        print(f"{variant:9s} mean rmse {row['mean_rmse']:.4f}")


if __name__ == "__main__":
    main()
