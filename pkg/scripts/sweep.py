"""One-parameter sweep scored on validation RMSE (test RMSE is shown but not
used for selection).

    python scripts/sweep.py --param lam --values 0.01 0.1 0.5 1 --seeds 0
"""
import argparse
import json
from pathlib import Path

import numpy as np

from stsm.config import ExperimentConfig
from stsm.pipeline import run_experiment


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--config", type=Path, default=Path(__file__).parent.parent / "configs" / "desk.json")
    p.add_argument("--param", required=True, help="top-level config field, e.g. lam or epsilon_sg")
    p.add_argument("--values", type=json.loads, nargs="+", required=True)
    p.add_argument("--seeds", type=int, nargs="+", default=[0])
    p.add_argument("--out-dir", type=Path, default=Path("runs/sweep"))
    args = p.parse_args()
    base = ExperimentConfig.load(args.config)
    rows = []
    for v in args.values:
        val, test = [], []
        for s in args.seeds:
            res = run_experiment(base.with_overrides(**{args.param: v, "seed": s}),
                                 args.out_dir / f"{args.param}={v}-s{s}", plots=False)
            val.append(min(res["val_rmse"]))
            test.append(res["metrics"]["rmse"])
        rows.append((v, float(np.mean(val)), float(np.mean(test))))
        print(f"{args.param}={v}: val rmse {rows[-1][1]:.4f}  test rmse {rows[-1][2]:.4f}", flush=True)
    best = min(rows, key=lambda r: r[1])
    print(f"selected {args.param}={best[0]} by validation RMSE")


if __name__ == "__main__":
    main()
