"""Spatial and temporal adjacency, sub-graphs and IDW pseudo-observations.

Adjacency matrices are dense float arrays indexed ``A[src, dst]``: a 1 at
``(i, j)`` means location ``i`` sends messages to ``j``. Spatial matrices are
symmetric; the DTW matrix is not once target locations are present.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from numba import njit

from .errors import ConfigError, InputError


@dataclass
class AdjacencySet:
    ids: tuple[str, ...]
    A_s: np.ndarray
    A_sg: np.ndarray
    A_dtw: np.ndarray
    epsilon_s: float
    epsilon_sg: float
    sigma: float


@dataclass
class IdwWeights:
    """Row ``k`` of ``matrix`` holds the weights of ``sources`` for ``targets[k]``."""

    targets: tuple[str, ...]
    sources: tuple[str, ...]
    matrix: np.ndarray

    def row(self, target: str) -> list[tuple[str, float]]:
        k = self.targets.index(target)
        return [(s, float(w)) for s, w in zip(self.sources, self.matrix[k])]


def pairwise_distances(a: np.ndarray, b: np.ndarray | None = None) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    b = a if b is None else np.asarray(b, dtype=np.float64)
    diff = a[:, None, :] - b[None, :, :]
    return np.sqrt((diff ** 2).sum(axis=-1))


def default_sigma(coords: np.ndarray) -> float:
    """Standard deviation of all pairwise distances (each unordered pair once)."""
    d = pairwise_distances(coords)
    iu = np.triu_indices(len(d), k=1)
    sigma = float(d[iu].std()) if iu[0].size else 0.0
    return sigma if sigma > 0 else 1.0


def gaussian_threshold_adjacency(coords: np.ndarray, sigma: float, epsilon: float) -> np.ndarray:
    """Binary adjacency: 1 where ``exp(-d^2 / sigma^2) >= epsilon``."""
    coords = np.asarray(coords, dtype=np.float64)
    if not np.all(np.isfinite(coords)):
        raise InputError("non-finite coordinates")
    if sigma <= 0:
        raise ConfigError(f"sigma must be positive, got {sigma}")
    if not 0.0 <= epsilon <= 1.0:
        raise ConfigError(f"epsilon must lie in [0, 1], got {epsilon}")
    d = pairwise_distances(coords)
    return (np.exp(-(d ** 2) / sigma ** 2) >= epsilon).astype(np.float64)


def one_hop_subgraph(A_sg: np.ndarray, center, ids: Sequence[str] | None = None) -> frozenset:
    """The center plus its 1-hop neighbours under ``A_sg``.

    ``center`` is an id when ``ids`` is given (the result is then a set of
    ids), otherwise a row index.
    """
    if ids is not None:
        try:
            c = list(ids).index(center)
        except ValueError:
            raise InputError(f"unknown location id {center!r}") from None
    else:
        c = int(center)
        if not 0 <= c < len(A_sg):
            raise InputError(f"location index {center} out of range")
    members = set(np.flatnonzero(A_sg[c] > 0).tolist()) | {c}
    if ids is None:
        return frozenset(members)
    return frozenset(ids[i] for i in members)


def subgraph_sizes(A_sg: np.ndarray) -> np.ndarray:
    """``|V_SG_i|`` for every row: neighbours plus the center itself."""
    A = A_sg > 0
    return A.sum(axis=1) + (~np.diag(A)).astype(np.int64)


def idw_weights(target_coord, source_coords) -> np.ndarray:
    """Normalised inverse-distance weights of every source for one target."""
    src = np.atleast_2d(np.asarray(source_coords, dtype=np.float64))
    if src.shape[0] == 0:
        raise InputError("IDW needs at least one source")
    d = np.hypot(*(src - np.asarray(target_coord, dtype=np.float64)).T)
    if np.any(d == 0):
        raise InputError("target coincides with a source location; deduplicate coordinates first")
    inv = 1.0 / d
    return inv / inv.sum()


def idw_matrix(target_coords, source_coords, k_nearest: int | None = None) -> np.ndarray:
    """Stacked IDW rows ``[n_targets, n_sources]``.

    ``k_nearest`` keeps only the closest sources per target (off by default).
    """
    tgt = np.atleast_2d(np.asarray(target_coords, dtype=np.float64))
    src = np.atleast_2d(np.asarray(source_coords, dtype=np.float64))
    W = np.zeros((len(tgt), len(src)))
    for k, c in enumerate(tgt):
        if k_nearest is not None and k_nearest < len(src):
            d = np.hypot(*(src - c).T)
            keep = np.argsort(d, kind="stable")[:k_nearest]
            W[k, keep] = idw_weights(c, src[keep])
        else:
            W[k] = idw_weights(c, src)
    return W


def build_idw(targets: Sequence[str], sources: Sequence[str], coords_by_id: dict,
              k_nearest: int | None = None) -> IdwWeights:
    W = idw_matrix([coords_by_id[t] for t in targets], [coords_by_id[s] for s in sources], k_nearest) \
        if len(targets) else np.zeros((0, len(sources)))
    return IdwWeights(tuple(targets), tuple(sources), W)


def apply_weights(values: np.ndarray, W: np.ndarray) -> np.ndarray:
    """Weighted source average per time step: ``[T, n_s, C] -> [T, n_t, C]``."""
    return np.einsum("us,tsc->tuc", W, values)


def pseudo_observations(panel, targets: Sequence[str], sources: Sequence[str], weights: IdwWeights) -> np.ndarray:
    """IDW-filled series ``[T, len(targets), C]`` built from the source series."""
    if len(targets) == 0:
        return np.zeros((panel.n_steps, 0, panel.values.shape[2]))
    rows = []
    for t in targets:
        if t not in weights.targets:
            raise RuntimeError(f"no IDW weight row for target {t!r}")
        rows.append(weights.targets.index(t))
    col = {s: j for j, s in enumerate(weights.sources)}
    W = np.zeros((len(targets), len(sources)))
    for k, r in enumerate(rows):
        for j, s in enumerate(sources):
            W[k, j] = weights.matrix[r, col[s]] if s in col else 0.0
    src = panel.values[:, panel.index_of(sources)]
    return apply_weights(src, W)


# ---------------------------------------------------------------------------
# DTW

@njit(cache=True)
def _dtw(a, b):
    n = a.shape[0]
    m = b.shape[0]
    prev = np.full(m + 1, np.inf)
    prev[0] = 0.0
    cur = np.empty(m + 1)
    for i in range(1, n + 1):
        cur[0] = np.inf
        for j in range(1, m + 1):
            best = prev[j - 1]
            if prev[j] < best:
                best = prev[j]
            if cur[j - 1] < best:
                best = cur[j - 1]
            cur[j] = abs(a[i - 1] - b[j - 1]) + best
        prev, cur = cur, prev
    return prev[m]


@njit(cache=True)
def _dtw_cross(A, B):
    out = np.empty((A.shape[0], B.shape[0]))
    for i in range(A.shape[0]):
        for j in range(B.shape[0]):
            out[i, j] = _dtw(A[i], B[j])
    return out


@njit(cache=True)
def _dtw_self(A):
    n = A.shape[0]
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            d = _dtw(A[i], A[j])
            out[i, j] = d
            out[j, i] = d
    return out


def dtw_distance(a, b) -> float:
    """Unconstrained DTW with absolute-difference local cost."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.size == 0 or b.size == 0:
        raise InputError("DTW needs non-empty sequences")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise InputError("DTW needs finite sequences")
    return float(_dtw(a, b))


def dtw_matrix(A: np.ndarray, B: np.ndarray | None = None) -> np.ndarray:
    """DTW between every row of ``A`` and every row of ``B`` (or of ``A``)."""
    A = np.ascontiguousarray(A, dtype=np.float64)
    if B is None:
        return _dtw_self(A)
    return _dtw_cross(A, np.ascontiguousarray(B, dtype=np.float64))


def daily_profiles(values: np.ndarray, interval_ids: np.ndarray, steps_per_day: int) -> np.ndarray:
    """Mean value per interval-of-day for each location, z-scored per location.

    ``values`` is ``[T, N]`` (first channel); returns ``[N, Td]``.
    """
    values = np.asarray(values, dtype=np.float64)
    sums = np.zeros((steps_per_day, values.shape[1]))
    counts = np.zeros(steps_per_day)
    np.add.at(sums, interval_ids, values)
    np.add.at(counts, interval_ids, 1.0)
    if np.any(counts == 0):
        raise InputError("training span does not cover every interval of the day")
    prof = (sums / counts[:, None]).T
    mu = prof.mean(axis=1, keepdims=True)
    sd = prof.std(axis=1, keepdims=True)
    return (prof - mu) / np.where(sd > 0, sd, 1.0)


def temporal_adjacency_from_distances(D: np.ndarray, ids: Sequence[str], observed: Sequence[int],
                                      targets: Sequence[int], q_kk: int = 1, q_ku: int = 1) -> np.ndarray:
    """Top-q DTW links over node indices.

    ``D[i, j]`` must hold DTW distances for observed-observed and
    target-observed pairs. Observed picks are symmetrised; a target only
    receives edges from its ``q_ku`` closest observed locations.
    """
    if q_kk < 1 or q_ku < 1:
        raise ConfigError("q_kk and q_ku must be >= 1")
    n = len(ids)
    A = np.zeros((n, n))
    observed = list(observed)

    def nearest(i, q):
        cand = [j for j in observed if j != i]
        cand.sort(key=lambda j: (D[i, j], ids[j]))
        return cand[:q]

    for i in observed:
        for j in nearest(i, q_kk):
            A[i, j] = A[j, i] = 1.0
    for u in targets:
        for j in nearest(u, q_ku):
            A[j, u] = 1.0
    return A


def temporal_adjacency(profiles: np.ndarray, ids: Sequence[str], observed_ids: Sequence[str],
                       target_ids: Sequence[str], q_kk: int = 1, q_ku: int = 1) -> np.ndarray:
    """DTW adjacency over ``ids`` (rows of ``profiles`` follow ``ids``)."""
    pos = {k: i for i, k in enumerate(ids)}
    obs = [pos[k] for k in observed_ids]
    tgt = [pos[k] for k in target_ids]
    P = np.asarray(profiles, dtype=np.float64)
    D = np.full((len(ids), len(ids)), np.inf)
    if obs:
        D[np.ix_(obs, obs)] = dtw_matrix(P[obs])
        if tgt:
            D[np.ix_(tgt, obs)] = dtw_matrix(P[tgt], P[obs])
    return temporal_adjacency_from_distances(D, list(ids), obs, tgt, q_kk, q_ku)


def export_edges_csv(A: np.ndarray, ids: Sequence[str], path) -> None:
    """Coordinate-list dump: one ``src,dst,weight`` row per non-zero entry."""
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["src", "dst", "weight"])
        for i, j in zip(*np.nonzero(A)):
            w.writerow([ids[i], ids[j], repr(float(A[i, j]))])
