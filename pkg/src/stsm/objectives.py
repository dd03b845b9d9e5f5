"""Prediction, contrastive and combined training losses."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import torch
import torch.nn.functional as F

from .errors import ConfigError, DivergenceError
from .model import ContrastiveHead


@dataclass(frozen=True)
class LossReport:
    L_pred: float
    L_cl: float
    L_total: float
    lam: float
    tau: float
    M: int


def prediction_loss(predicted: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Mean squared error over locations, horizon steps and channels."""
    if predicted.shape != target.shape:
        raise RuntimeError(f"shape mismatch {tuple(predicted.shape)} vs {tuple(target.shape)}")
    if not (torch.isfinite(predicted).all() and torch.isfinite(target).all()):
        raise DivergenceError("non-finite values in prediction loss")
    return ((predicted - target) ** 2).mean()


def graph_representation(h_last: torch.Tensor, head: ContrastiveHead) -> torch.Tensor:
    """``phi(ReLU(phi(sum_i h_i)))`` for node vectors ``[..., N, C']``."""
    return head(h_last)


def contrastive_loss(Z_full: torch.Tensor, Z_masked: torch.Tensor, tau: float) -> torch.Tensor:
    """Graph-level InfoNCE between full and masked views of ``M`` windows.

    The positive pair sits on the diagonal; the denominator sums over the
    ``M - 1`` masked views of the other windows only.
    """
    M = Z_full.shape[0]
    if M < 2:
        raise ConfigError("contrastive loss needs at least two windows per batch")
    if tau <= 0:
        raise ConfigError(f"tau must be positive, got {tau}")
    sim = F.cosine_similarity(Z_full[:, None, :], Z_masked[None, :, :], dim=-1) / tau
    eye = torch.eye(M, dtype=torch.bool, device=sim.device)
    positive = sim.diagonal()
    negatives = torch.logsumexp(sim.masked_fill(eye, float("-inf")), dim=1)
    return -(positive - negatives).mean()


def total_loss(L_pred, L_cl, lam: float):
    if lam < 0:
        raise ConfigError(f"lambda must be >= 0, got {lam}")
    return L_pred + lam * L_cl


class TrainingLog:
    """Per-epoch loss rows written as ``epoch,L_pred,L_cl,L_total``."""

    columns = ("epoch", "L_pred", "L_cl", "L_total")

    def __init__(self):
        self.rows: list[tuple[int, float, float, float]] = []

    def append(self, epoch: int, report: LossReport) -> None:
        self.rows.append((epoch, report.L_pred, report.L_cl, report.L_total))

    def write(self, path) -> None:
        with open(Path(path), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.columns)
            for e, p, c, t in self.rows:
                w.writerow([e, repr(p), repr(c), repr(t)])
