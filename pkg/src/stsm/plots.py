"""Diagnostic figures written by experiment runs."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def plot_predictions(prediction, path, n_locations: int = 4, horizon_step: int = 0) -> None:
    """Truth vs forecast at a fixed horizon step for a few unobserved locations."""
    ids = prediction.test_ids
    pick = np.linspace(0, len(ids) - 1, min(n_locations, len(ids))).round().astype(int)
    fig, axes = plt.subplots(len(pick), 1, figsize=(9, 2.2 * len(pick)), sharex=True, squeeze=False)
    for ax, k in zip(axes[:, 0], pick):
        ax.plot(prediction.targets[:, k, horizon_step, 0], lw=0.8, label="truth")
        ax.plot(prediction.predictions[:, k, horizon_step, 0], lw=0.8, label="forecast")
        ax.set_ylabel(ids[k])
    axes[0, 0].legend(loc="upper right", fontsize=8)
    axes[-1, 0].set_xlabel(f"test window (horizon step {horizon_step + 1})")
    fig.tight_layout()
    fig.savefig(path, dpi=90)
    plt.close(fig)


def plot_losses(training_log, val_rmse, path) -> None:
    rows = np.array(training_log.rows, dtype=np.float64)
    fig, (a, b) = plt.subplots(1, 2, figsize=(9, 3))
    a.plot(rows[:, 0], rows[:, 1], label="L_pred")
    a.plot(rows[:, 0], rows[:, 2], label="L_cl")
    a.plot(rows[:, 0], rows[:, 3], label="L_total")
    a.set_xlabel("epoch")
    a.legend(fontsize=8)
    b.plot(rows[:, 0], val_rmse, color="k")
    b.set_xlabel("epoch")
    b.set_ylabel("validation RMSE")
    fig.tight_layout()
    fig.savefig(path, dpi=90)
    plt.close(fig)
