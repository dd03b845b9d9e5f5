"""Mean similarity of masked sub-graph centers to the unobserved region,
selective versus random masking, over seeded epochs.

    python scripts/similarity_gain.py --epochs 200
"""
import argparse
from pathlib import Path

import numpy as np

from stsm.config import ExperimentConfig
from stsm.pipeline import prepare


def center_similarities(plan, strategy: str, seed: int, epochs: int) -> float:
    centers = []
    for e in range(epochs):
        centers += plan.draw(strategy, np.random.default_rng([seed, e])).centers
    return plan.center_similarity(centers)


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--config", type=Path, default=Path(__file__).parent.parent / "configs" / "desk.json")
    p.add_argument("--epochs", type=int, default=200)
    args = p.parse_args()
    cfg = ExperimentConfig.load(args.config)
    plan = prepare(cfg).plan
    sel = center_similarities(plan, "selective", cfg.seed, args.epochs)
    rnd = center_similarities(plan, "random", cfg.seed, args.epochs)
    print(f"selective {sel:.4f}  random {rnd:.4f}  gain {100 * (sel - rnd) / rnd:+.2f}%")


if __name__ == "__main__":
    main()
