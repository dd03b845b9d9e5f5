"""Location embeddings from POI and road features, similarity of sub-graphs to
the unobserved region, and the two sub-graph masking strategies."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .data import N_POI_CATEGORIES, DatasetBundle, PoiTable
from .errors import ConfigError, InputError
from .graph import one_hop_subgraph, subgraph_sizes

PARK_CATEGORY = 9
EMBEDDING_DIM = N_POI_CATEGORIES + 5


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def poi_region_embedding(coord, pois: PoiTable, r_poi: float) -> tuple[np.ndarray, float]:
    """POI counts per category within ``r_poi`` metres, and the raw scale
    (summed building levels plus park area) in the same circle."""
    if r_poi <= 0:
        raise ConfigError(f"r_poi must be positive, got {r_poi}")
    counts = np.zeros(N_POI_CATEGORIES, dtype=np.int64)
    if len(pois) == 0:
        return counts, 0.0
    bad = np.flatnonzero((pois.category < 1) | (pois.category > N_POI_CATEGORIES))
    if bad.size:
        k = int(bad[0])
        raise InputError(f"POI row {k + 1} ({pois.ids[k]}) has unknown category {int(pois.category[k])}")
    d = np.hypot(*(pois.xy - np.asarray(coord, dtype=np.float64)).T)
    inside = d <= r_poi
    np.add.at(counts, pois.category[inside] - 1, 1)
    scale = float(pois.levels[inside].sum() + pois.area_m2[inside & (pois.category == PARK_CATEGORY)].sum())
    return counts, scale


def location_embedding(region_part, road_part) -> np.ndarray:
    region_part = np.asarray(region_part, dtype=np.float64)
    road_part = np.asarray(road_part, dtype=np.float64)
    if region_part.shape != (N_POI_CATEGORIES + 1,) or road_part.shape != (4,):
        raise RuntimeError(f"embedding parts must have lengths 27 and 4, got {region_part.shape} and {road_part.shape}")
    return np.concatenate([region_part, road_part])


def minmax_scale(E: np.ndarray) -> np.ndarray:
    """Per-column min-max scaling to [0, 1]; constant columns map to 0."""
    E = np.asarray(E, dtype=np.float64)
    lo = E.min(axis=0)
    span = E.max(axis=0) - lo
    return np.where(span > 0, (E - lo) / np.where(span > 0, span, 1.0), 0.0)


def location_embeddings(bundle: DatasetBundle, r_poi: float, scale: bool = True) -> np.ndarray:
    """``[N, 31]`` embeddings for every location of ``bundle`` in id order."""
    coords = bundle.coords
    parts = [poi_region_embedding(c, bundle.pois, r_poi) for c in coords]
    counts = np.stack([p[0] for p in parts]).astype(np.float64)
    raw_scale = np.array([p[1] for p in parts])
    top = raw_scale.max() if raw_scale.size else 0.0
    scale_col = raw_scale / top if top > 0 else np.zeros_like(raw_scale)
    roads = bundle.roads.matrix(bundle.ids)
    E = np.stack([location_embedding(np.append(c, s), r) for c, s, r in zip(counts, scale_col, roads)])
    return minmax_scale(E) if scale else E


def subgraph_embedding(member_embeddings) -> np.ndarray:
    M = np.asarray(member_embeddings, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] == 0:
        raise InputError("sub-graph embedding needs at least one member")
    return M.mean(axis=0)


def subgraph_embeddings(E: np.ndarray, A_sg: np.ndarray) -> np.ndarray:
    """Mean member embedding of every 1-hop sub-graph (row order of ``A_sg``)."""
    return np.stack([subgraph_embedding(E[sorted(one_hop_subgraph(A_sg, i))]) for i in range(len(A_sg))])


def cosine(a, b) -> float:
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def similarity_scores(subgraph_embs: np.ndarray, l_u: np.ndarray, coords: np.ndarray, c_u) -> tuple[np.ndarray, np.ndarray]:
    """Cosine similarity of each sub-graph to the unobserved region, and the
    inverse distance of each center to the region centroid (floored at 1 m)."""
    S = np.array([cosine(e, l_u) for e in subgraph_embs])
    d = np.hypot(*(np.asarray(coords, dtype=np.float64) - np.asarray(c_u, dtype=np.float64)).T)
    SP = 1.0 / np.maximum(d, 1.0)
    return S, SP


def masking_probabilities(S, SP, delta_m: float, delta_s: float, K: int, clip: bool = True) -> np.ndarray:
    """Per-center Bernoulli parameters.

    Similarities outside the top-``K`` are zeroed, then both score vectors
    are rescaled so their mean equals ``delta_m / delta_s`` and averaged.
    """
    S = np.asarray(S, dtype=np.float64).copy()
    SP = np.asarray(SP, dtype=np.float64)
    if not 0.0 < delta_m < 1.0:
        raise ConfigError(f"delta_m must lie in (0, 1), got {delta_m}")
    if K < 1:
        raise ConfigError(f"K must be >= 1, got {K}")
    if delta_s <= 0:
        raise ConfigError(f"delta_s must be positive, got {delta_s}")
    n = len(S)
    if K < n:
        order = np.argsort(-S, kind="stable")
        S[order[K:]] = 0.0
    delta_ms = delta_m / delta_s
    mean_s, mean_sp = S.mean(), SP.mean()
    if mean_s == 0 and mean_sp == 0:
        raise ConfigError("similarity and proximity scores are all zero")
    if mean_s == 0:
        P = SP * delta_ms / mean_sp
    elif mean_sp == 0:
        P = S * delta_ms / mean_s
    else:
        P = (S * delta_ms / mean_s + SP * delta_ms / mean_sp) / 2.0
    return np.clip(P, 0.0, 1.0) if clip else P


class Mask(NamedTuple):
    masked: frozenset  # row indices into the observed set
    centers: tuple  # centers drawn, in draw order


def draw_selective_mask(P, A_sg: np.ndarray, rng_seed) -> Mask:
    """Bernoulli draw per center; the mask is the union of drawn sub-graphs."""
    rng = _rng(rng_seed)
    rho = rng.random(len(P)) < np.asarray(P)
    centers = tuple(int(i) for i in np.flatnonzero(rho))
    masked: set[int] = set()
    for c in centers:
        masked |= one_hop_subgraph(A_sg, c)
    return Mask(frozenset(masked), centers)


def draw_random_mask(n_observed: int, A_sg: np.ndarray, delta_m: float, rng_seed) -> Mask:
    """Mask random sub-graphs until at least ``n_observed * delta_m`` rows are hidden."""
    if not 0.0 < delta_m < 1.0:
        raise ConfigError(f"delta_m must lie in (0, 1), got {delta_m}")
    rng = _rng(rng_seed)
    target = n_observed * delta_m
    masked: set[int] = set()
    centers = []
    while len(masked) < target:
        free = [i for i in range(n_observed) if i not in masked]
        if not free:
            break
        c = free[int(rng.integers(len(free)))]
        centers.append(c)
        masked |= one_hop_subgraph(A_sg, c)
    return Mask(frozenset(masked), tuple(centers))


@dataclass
class MaskingPlan:
    """Scores and probabilities for the observed (training) locations."""

    ids: tuple[str, ...]
    similarities: np.ndarray
    proximities: np.ndarray
    probabilities: np.ndarray
    delta_m: float
    delta_s: float
    K: int
    A_sg: np.ndarray
    masked_ids: frozenset = field(default_factory=frozenset)

    @property
    def delta_ms(self) -> float:
        return self.delta_m / self.delta_s

    def draw(self, strategy: str, rng_seed) -> Mask:
        if strategy == "selective":
            return draw_selective_mask(self.probabilities, self.A_sg, rng_seed)
        if strategy == "random":
            return draw_random_mask(len(self.ids), self.A_sg, self.delta_m, rng_seed)
        raise ConfigError(f"unknown masking strategy {strategy!r}")

    def center_similarity(self, centers: Sequence[int]) -> float:
        return float(np.mean(self.similarities[list(centers)])) if len(centers) else math.nan


def build_masking_plan(bundle: DatasetBundle, observed_ids: Sequence[str], unobserved_ids: Sequence[str],
                       A_sg_full: np.ndarray, r_poi: float, delta_m: float, K: int) -> MaskingPlan:
    """Scores the sub-graphs of ``observed_ids`` against the unobserved region.

    ``A_sg_full`` covers every location of ``bundle``; sub-graphs are taken
    within the observed set only.
    """
    idx_o = bundle.panel.index_of(observed_ids)
    idx_u = bundle.panel.index_of(unobserved_ids)
    E = location_embeddings(bundle, r_poi)
    A_sg = A_sg_full[np.ix_(idx_o, idx_o)]
    sub = subgraph_embeddings(E[idx_o], A_sg)
    l_u = E[idx_u].mean(axis=0)
    coords = bundle.coords
    c_u = coords[idx_u].mean(axis=0)
    S, SP = similarity_scores(sub, l_u, coords[idx_o], c_u)
    delta_s = float(subgraph_sizes(A_sg).mean())
    P = masking_probabilities(S, SP, delta_m, delta_s, K)
    return MaskingPlan(tuple(observed_ids), S, SP, P, delta_m, delta_s, K, A_sg)


def write_mask_audit(records: list[dict], path) -> None:
    """``records`` hold ``epoch, seed, masked_ids, P`` entries."""
    Path(path).write_text(json.dumps(records, indent=1))
