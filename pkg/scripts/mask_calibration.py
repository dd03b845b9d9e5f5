"""Monte-Carlo masked fraction of the random strategy as a function of the
sub-graph threshold, on the synthetic desk graph.

    python scripts/mask_calibration.py --draws 10000
"""
import argparse

import numpy as np

from stsm.data import generate_synthetic
from stsm.graph import default_sigma, gaussian_threshold_adjacency, subgraph_sizes
from stsm.masking import draw_random_mask


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--draws", type=int, default=10_000)
    p.add_argument("--delta-m", type=float, default=0.5)
    p.add_argument("--thresholds", type=float, nargs="+", default=[0.5, 0.7, 0.8, 0.9, 0.95])
    args = p.parse_args()
    b = generate_synthetic(60, 14, 5, seed=7)
    sigma = default_sigma(b.coords)
    n = len(b.ids)
    print(f"{'eps_sg':>7s} {'mean |SG|':>10s} {'masked fraction':>16s}")
    for eps in args.thresholds:
        A = gaussian_threshold_adjacency(b.coords, sigma, eps)
        frac = np.mean([len(draw_random_mask(n, A, args.delta_m, np.random.default_rng([0, e])).masked) / n
                        for e in range(args.draws)])
        print(f"{eps:7.2f} {subgraph_sizes(A).mean():10.2f} {frac:16.4f}")


if __name__ == "__main__":
    main()
