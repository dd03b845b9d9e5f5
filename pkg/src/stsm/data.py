"""Sensor-network datasets: loading, splitting, normalisation, windowing and
a synthetic generator for desk-scale experiments.

All coordinates handled downstream are planar metres. Files that carry
WGS84 lat/lon are projected on load (equirectangular about the sensor
centroid).
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError, FormatError, InputError, IntervalError

log = logging.getLogger(__name__)

EARTH_RADIUS_M = 6_371_008.8
N_POI_CATEGORIES = 26
ROAD_FIELDS = ("highway_level", "maxspeed", "is_oneway", "lanes")
SPLIT_METHODS = ("horizontal", "vertical", "ring")


@dataclass(frozen=True)
class Location:
    id: str
    coord: tuple[float, float]  # planar (x, y) metres
    nearest_road_ref: str | None = None


@dataclass
class SensorPanel:
    """Observation tensor ``values[t, n, c]`` with a presence mask ``[t, n]``."""

    timestamps: np.ndarray  # datetime64[m], uniform step
    values: np.ndarray
    present_mask: np.ndarray
    ids: tuple[str, ...]
    interval_minutes: int = 0  # inferred from timestamps when 0

    def __post_init__(self):
        if self.values.ndim != 3:
            raise InputError(f"values must be [T, N, C], got shape {self.values.shape}")
        if self.present_mask.shape != self.values.shape[:2]:
            raise InputError("present_mask shape does not match values")
        if len(self.ids) != self.values.shape[1]:
            raise InputError("ids length does not match values")
        if len(self.timestamps) != self.values.shape[0]:
            raise InputError("timestamps length does not match values")
        step = _check_timestamps(self.timestamps)
        if not self.interval_minutes:
            if step is None:
                raise IntervalError("cannot infer the recording interval from one timestamp")
            self.interval_minutes = step

    @property
    def steps_per_day(self) -> int:
        return 1440 // self.interval_minutes

    @property
    def n_steps(self) -> int:
        return self.values.shape[0]

    def interval_ids(self) -> np.ndarray:
        """Position of every timestamp within its day, in ``[0, Td-1]``."""
        minutes = (self.timestamps - self.timestamps.astype("datetime64[D]")) / np.timedelta64(1, "m")
        return (minutes.astype(np.int64) // self.interval_minutes) % self.steps_per_day

    def index_of(self, ids: Sequence[str]) -> np.ndarray:
        pos = {k: i for i, k in enumerate(self.ids)}
        try:
            return np.array([pos[k] for k in ids], dtype=np.int64)
        except KeyError as exc:
            raise InputError(f"unknown location id {exc.args[0]!r}") from None

    def select(self, ids: Sequence[str]) -> "SensorPanel":
        idx = self.index_of(ids)
        return SensorPanel(self.timestamps, self.values[:, idx], self.present_mask[:, idx], tuple(ids),
                           self.interval_minutes)

    def slice_time(self, start: int, stop: int) -> "SensorPanel":
        return SensorPanel(self.timestamps[start:stop], self.values[start:stop], self.present_mask[start:stop],
                           self.ids, self.interval_minutes)

    def with_values(self, values: np.ndarray) -> "SensorPanel":
        return SensorPanel(self.timestamps, values, self.present_mask, self.ids, self.interval_minutes)


def _check_timestamps(ts: np.ndarray) -> int | None:
    """Validate a uniform timestamp grid and return its step in minutes."""
    if len(ts) == 0:
        raise IntervalError("no timestamps")
    if len(ts) == 1:
        return None
    steps = np.diff(ts)
    if np.any(steps <= np.timedelta64(0, "m")):
        raise IntervalError("timestamps are not strictly increasing")
    if np.any(steps != steps[0]):
        raise IntervalError("timestamps are not evenly spaced")
    minutes = steps[0] / np.timedelta64(1, "m")
    if minutes != int(minutes) or 1440 % int(minutes):
        raise IntervalError(f"interval of {minutes} min does not divide a day")
    return int(minutes)


@dataclass
class PoiTable:
    ids: list[str]
    xy: np.ndarray  # [P, 2] planar metres
    category: np.ndarray  # int in 1..26
    levels: np.ndarray
    area_m2: np.ndarray

    def __len__(self) -> int:
        return len(self.ids)


@dataclass
class RoadTable:
    features: dict[str, np.ndarray]  # sensor_id -> (highway_level, maxspeed, is_oneway, lanes)

    def matrix(self, ids: Sequence[str]) -> np.ndarray:
        return np.stack([self.features.get(i, np.zeros(4)) for i in ids]).astype(np.float64)


@dataclass
class DatasetBundle:
    locations: list[Location]
    panel: SensorPanel
    pois: PoiTable
    roads: RoadTable
    origin_lonlat: tuple[float, float] | None = None
    name: str = "dataset"

    @property
    def ids(self) -> tuple[str, ...]:
        return self.panel.ids

    @property
    def coords(self) -> np.ndarray:
        return np.array([loc.coord for loc in self.locations], dtype=np.float64)


@dataclass(frozen=True)
class RegionSplit:
    train_ids: tuple[str, ...]
    valid_ids: tuple[str, ...]
    test_ids: tuple[str, ...]
    method: str

    @property
    def observed_ids(self) -> tuple[str, ...]:
        return self.train_ids + self.valid_ids

    def to_dict(self) -> dict:
        return {"method": self.method, "train_ids": list(self.train_ids),
                "valid_ids": list(self.valid_ids), "test_ids": list(self.test_ids)}


@dataclass(frozen=True)
class NormStats:
    mean: np.ndarray  # per channel
    std: np.ndarray

    def apply(self, values):
        return (values - self.mean) / self.std

    def invert(self, values):
        return values * self.std + self.mean


@dataclass
class WindowSet:
    """Sliding windows over a panel, stored as start offsets.

    Window ``w`` covers inputs ``values[s:s+T]`` and targets
    ``values[s+T:s+T+T']`` with ``s = starts[w]``.
    """

    values: np.ndarray  # [T_total, N, C]
    interval_ids: np.ndarray  # [T_total]
    starts: np.ndarray
    T: int
    T_prime: int
    steps_per_day: int = field(default=0)

    def __len__(self) -> int:
        return len(self.starts)

    def __getitem__(self, w: int):
        s = int(self.starts[w])
        return (self.values[s:s + self.T], self.values[s + self.T:s + self.T + self.T_prime],
                self.interval_ids[s:s + self.T])

    def inputs(self, idx=None) -> np.ndarray:
        """``[W, N, T, C]`` input slices."""
        return self._gather(idx, 0, self.T)

    def targets(self, idx=None) -> np.ndarray:
        """``[W, N, T', C]`` target slices."""
        return self._gather(idx, self.T, self.T_prime)

    def time_index(self, idx=None) -> np.ndarray:
        starts = self.starts if idx is None else self.starts[idx]
        return self.interval_ids[starts[:, None] + np.arange(self.T)]

    def _gather(self, idx, offset, length):
        starts = self.starts if idx is None else self.starts[idx]
        rows = starts[:, None] + offset + np.arange(length)
        return np.transpose(self.values[rows], (0, 2, 1, 3))


# ---------------------------------------------------------------------------
# loading

def project_lonlat(lon, lat, origin: tuple[float, float]) -> np.ndarray:
    """Equirectangular projection to metres about ``origin = (lon0, lat0)``."""
    lon0, lat0 = origin
    lon = np.asarray(lon, dtype=np.float64)
    lat = np.asarray(lat, dtype=np.float64)
    x = np.radians(lon - lon0) * math.cos(math.radians(lat0)) * EARTH_RADIUS_M
    y = np.radians(lat - lat0) * EARTH_RADIUS_M
    return np.stack([x, y], axis=-1)


def unproject(xy: np.ndarray, origin: tuple[float, float]) -> tuple[np.ndarray, np.ndarray]:
    lon0, lat0 = origin
    lon = lon0 + np.degrees(xy[:, 0] / (EARTH_RADIUS_M * math.cos(math.radians(lat0))))
    lat = lat0 + np.degrees(xy[:, 1] / EARTH_RADIUS_M)
    return lon, lat


def _read_rows(path: Path, expected: Sequence[str]) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in expected:
            if col not in header:
                raise FormatError(f"{path.name}: missing column {col!r}")
        return list(reader)


def _float(row: dict, col: str, path: Path, blank: float | None = None) -> float:
    raw = (row.get(col) or "").strip()
    if raw == "" and blank is not None:
        return blank
    try:
        return float(raw)
    except ValueError:
        raise FormatError(f"{path.name}: column {col!r} has non-numeric value {raw!r}") from None


def load_dataset(locations_path, observations_path, poi_path=None, roads_path=None,
                 name: str = "dataset") -> DatasetBundle:
    """Read the four CSV inputs into a :class:`DatasetBundle`.

    Missing observation cells are flagged in ``present_mask`` and filled by
    last-value-carried-forward.
    """
    locations_path = Path(locations_path)
    observations_path = Path(observations_path)

    rows = _read_rows(locations_path, ("sensor_id", "lat", "lon"))
    if not rows:
        raise FormatError(f"{locations_path.name}: no locations")
    ids = [r["sensor_id"].strip() for r in rows]
    if len(set(ids)) != len(ids):
        raise FormatError(f"{locations_path.name}: duplicate sensor_id")
    lat = np.array([_float(r, "lat", locations_path) for r in rows])
    lon = np.array([_float(r, "lon", locations_path) for r in rows])
    if not (np.all(np.isfinite(lat)) and np.all(np.isfinite(lon))):
        raise FormatError(f"{locations_path.name}: non-finite coordinate")
    origin = (float(lon.mean()), float(lat.mean()))
    xy = project_lonlat(lon, lat, origin)

    with open(observations_path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        body = list(reader)
    if header is None or not body:
        raise IntervalError(f"{observations_path.name}: no observations")
    obs_ids = [h.strip() for h in header[1:]]
    unknown = set(obs_ids) - set(ids)
    if unknown:
        raise FormatError(f"{observations_path.name}: column {sorted(unknown)[0]!r} is not a known sensor_id")
    col_of = {k: j for j, k in enumerate(obs_ids)}
    try:
        timestamps = np.array([np.datetime64(r[0].strip().replace("Z", ""), "m") for r in body])
    except ValueError as exc:
        raise FormatError(f"{observations_path.name}: bad timestamp ({exc})") from None
    _check_timestamps(timestamps)

    values = np.zeros((len(body), len(ids), 1))
    present = np.zeros((len(body), len(ids)), dtype=bool)
    for t, r in enumerate(body):
        for n, sid in enumerate(ids):
            j = col_of.get(sid)
            if j is None or j + 1 >= len(r):
                continue
            cell = r[j + 1].strip()
            if cell == "":
                continue
            try:
                values[t, n, 0] = float(cell)
            except ValueError:
                raise FormatError(f"{observations_path.name}: column {sid!r} has non-numeric value {cell!r}") from None
            present[t, n] = np.isfinite(values[t, n, 0])
    panel = fill_missing(SensorPanel(timestamps, values, present, tuple(ids)))

    pois = PoiTable([], np.zeros((0, 2)), np.zeros(0, dtype=np.int64), np.zeros(0), np.zeros(0))
    if poi_path is not None:
        poi_path = Path(poi_path)
        prow = _read_rows(poi_path, ("poi_id", "lat", "lon", "category", "levels", "area_m2"))
        cats = []
        for k, r in enumerate(prow):
            c = int(_float(r, "category", poi_path))
            if not 1 <= c <= N_POI_CATEGORIES:
                raise InputError(f"{poi_path.name}: row {k + 1} has unknown category {c}")
            cats.append(c)
        pois = PoiTable(
            [r["poi_id"] for r in prow],
            project_lonlat([_float(r, "lon", poi_path) for r in prow],
                           [_float(r, "lat", poi_path) for r in prow], origin).reshape(-1, 2),
            np.array(cats, dtype=np.int64),
            np.array([_float(r, "levels", poi_path, blank=0.0) for r in prow]),
            np.array([_float(r, "area_m2", poi_path, blank=0.0) for r in prow]),
        )

    roads = RoadTable({})
    if roads_path is not None:
        roads_path = Path(roads_path)
        rrow = _read_rows(roads_path, ("sensor_id",) + ROAD_FIELDS)
        roads = RoadTable({r["sensor_id"].strip(): np.array([_float(r, f, roads_path) for f in ROAD_FIELDS])
                           for r in rrow})

    locations = [Location(i, (float(p[0]), float(p[1])), i if i in roads.features else None)
                 for i, p in zip(ids, xy)]
    return DatasetBundle(locations, panel, pois, roads, origin, name)


def load_dataset_dir(directory, name: str | None = None) -> DatasetBundle:
    d = Path(directory)
    poi = d / "poi.csv"
    roads = d / "roads.csv"
    return load_dataset(d / "locations.csv", d / "observations.csv",
                        poi if poi.exists() else None, roads if roads.exists() else None,
                        name=name or d.name)


def write_dataset(bundle: DatasetBundle, directory) -> None:
    """Write a bundle in the CSV layout read by :func:`load_dataset`."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    origin = bundle.origin_lonlat or (0.0, 0.0)
    lon, lat = unproject(bundle.coords, origin)
    with open(d / "locations.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sensor_id", "lat", "lon"])
        for sid, a, o in zip(bundle.ids, lat, lon):
            w.writerow([sid, repr(float(a)), repr(float(o))])
    panel = bundle.panel
    with open(d / "observations.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["timestamp", *panel.ids])
        for t, ts in enumerate(panel.timestamps):
            cells = [repr(float(v)) if p else "" for v, p in zip(panel.values[t, :, 0], panel.present_mask[t])]
            w.writerow([str(ts), *cells])
    plon, plat = unproject(bundle.pois.xy.reshape(-1, 2), origin)
    with open(d / "poi.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["poi_id", "lat", "lon", "category", "levels", "area_m2"])
        for k, pid in enumerate(bundle.pois.ids):
            w.writerow([pid, repr(float(plat[k])), repr(float(plon[k])), int(bundle.pois.category[k]),
                        repr(float(bundle.pois.levels[k])), repr(float(bundle.pois.area_m2[k]))])
    with open(d / "roads.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sensor_id", *ROAD_FIELDS])
        for sid in bundle.ids:
            h, m, o, n = bundle.roads.features.get(sid, np.zeros(4))
            w.writerow([sid, int(h), repr(float(m)), int(o), int(n)])


def fill_missing(panel: SensorPanel) -> SensorPanel:
    """Last-value-carried-forward per location; leading gaps take the first
    present value."""
    values = panel.values.copy()
    present = panel.present_mask
    for n in range(values.shape[1]):
        rows = np.flatnonzero(present[:, n])
        if rows.size == 0:
            raise InputError(f"location {panel.ids[n]!r} has no observations")
        if rows.size == len(present):
            continue
        last = np.maximum.accumulate(np.where(present[:, n], np.arange(len(present)), -1))
        last[last < 0] = rows[0]
        values[:, n] = values[last, n]
    return panel.with_values(values)


# ---------------------------------------------------------------------------
# splits, normalisation, windows

def split_region(locations: Sequence[Location], method: str, unobserved_ratio: float,
                 axis_or_center=None) -> RegionSplit:
    """Partition locations into contiguous train / validation / test sets.

    ``horizontal`` orders by y (north-south cut), ``vertical`` by x. The test
    region is the ``high`` end of that ordering unless ``axis_or_center`` is
    ``"low"``; validation sits between train and test. ``ring`` orders by
    distance from ``axis_or_center`` (default: centroid), outermost = test.
    Observed locations are split 4:1 train:valid.
    """
    if method not in SPLIT_METHODS:
        raise ConfigError(f"unknown split method {method!r}")
    if not 0.0 < unobserved_ratio < 1.0:
        raise ConfigError(f"unobserved_ratio must lie in (0, 1), got {unobserved_ratio}")
    n = len(locations)
    n_test = int(math.floor(n * unobserved_ratio + 1e-9))
    n_obs = n - n_test
    if n_test < 1 or n_obs < 2:
        raise ConfigError(f"ratio {unobserved_ratio} leaves an empty region for {n} locations")
    n_valid = max(1, int(round(n_obs / 5)))
    n_train = n_obs - n_valid

    coords = np.array([loc.coord for loc in locations], dtype=np.float64)
    if method == "ring":
        center = coords.mean(axis=0) if axis_or_center is None else np.asarray(axis_or_center, dtype=np.float64)
        key = np.hypot(*(coords - center).T)
    else:
        key = coords[:, 1] if method == "horizontal" else coords[:, 0]
        if axis_or_center == "low":
            key = -key
        elif axis_or_center not in (None, "high"):
            raise ConfigError(f"axis side must be 'low' or 'high', got {axis_or_center!r}")
    order = sorted(range(n), key=lambda i: (key[i], locations[i].id))
    ids = [locations[i].id for i in order]
    return RegionSplit(tuple(ids[:n_train]), tuple(ids[n_train:n_obs]), tuple(ids[n_obs:]), method)


def temporal_split(panel: SensorPanel, train_fraction: float, min_length: int = 1):
    """Contiguous prefix / suffix split on the time axis.

    ``min_length`` is typically ``T + T'``; either part shorter than it is
    a configuration error.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ConfigError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    cut = int(math.floor(panel.n_steps * train_fraction + 1e-9))
    if cut < min_length or panel.n_steps - cut < min_length:
        raise ConfigError(f"split at {cut}/{panel.n_steps} steps leaves a part shorter than {min_length}")
    return panel.slice_time(0, cut), panel.slice_time(cut, panel.n_steps)


def zscore_fit_apply(panel: SensorPanel, split: RegionSplit, fit_stop: int | None = None):
    """Normalise with statistics from observed-train cells in ``[0, fit_stop)``."""
    idx = panel.index_of(split.train_ids)
    stop = panel.n_steps if fit_stop is None else fit_stop
    vals = panel.values[:stop, idx]
    mask = panel.present_mask[:stop, idx]
    if not mask.any():
        raise InputError("no observed-train cells to fit normalisation")
    cells = vals[mask]  # [n_cells, C]
    mean = cells.mean(axis=0)
    std = cells.std(axis=0)
    if np.any(std == 0):
        log.warning("zero variance channel in normalisation data; clamping std to 1")
        std = np.where(std == 0, 1.0, std)
    stats = NormStats(mean, std)
    return panel.with_values(stats.apply(panel.values)), stats


def make_windows(panel: SensorPanel, T: int, T_prime: int, stride: int = 1) -> WindowSet:
    if min(T, T_prime, stride) < 1:
        raise ConfigError("T, T' and stride must be >= 1")
    span = T + T_prime
    if panel.n_steps < span:
        raise ConfigError(f"panel of {panel.n_steps} steps is shorter than T+T'={span}")
    starts = np.arange(0, panel.n_steps - span + 1, stride, dtype=np.int64)
    return WindowSet(panel.values, panel.interval_ids(), starts, T, T_prime, panel.steps_per_day)


# ---------------------------------------------------------------------------
# synthetic data

class _SmoothField:
    """Random-Fourier-feature Gaussian field over the plane."""

    def __init__(self, rng: np.random.Generator, length_scale: float, n_features: int = 64):
        self.w = rng.normal(0.0, 1.0 / length_scale, size=(n_features, 2))
        self.b = rng.uniform(0.0, 2 * np.pi, size=n_features)
        self.scale = math.sqrt(2.0 / n_features)

    def __call__(self, xy: np.ndarray) -> np.ndarray:
        return self.scale * np.cos(xy @ self.w.T + self.b).sum(axis=-1)


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def generate_synthetic(n_locations: int = 60, days: int = 14, interval_minutes: int = 5, seed: int = 0,
                       noise: float = 1.0, extent_m: float = 10_000.0,
                       length_scale_m: float | None = None) -> DatasetBundle:
    """Planar sensor network whose signal is a rush-hour diurnal profile plus
    spatially correlated dynamics and noise.

    A smooth latent "urbanness" field drives POI density, road attributes and
    the depth of the rush-hour dips, so nearby and feature-similar locations
    behave alike. ``noise=0`` yields a signal that is exactly periodic in
    the day.
    """
    if n_locations < 12:
        raise ConfigError("synthetic datasets need at least 12 locations")
    if 1440 % interval_minutes:
        raise ConfigError(f"interval of {interval_minutes} min does not divide a day")
    rng = np.random.default_rng(seed)
    # one correlation length per region: the two halves of a split share dynamics
    length = extent_m if length_scale_m is None else length_scale_m
    urban_f, base_f, shift_f, lane_f = (_SmoothField(rng, length) for _ in range(4))

    # rejection sampling keeps sensors at least 150 m apart
    min_sep = 150.0
    pts: list[np.ndarray] = []
    while len(pts) < n_locations:
        p = rng.uniform(0.0, extent_m, size=2)
        if all(np.hypot(*(p - q)) >= min_sep for q in pts):
            pts.append(p)
    xy = np.array(pts) - np.array(pts).mean(axis=0)
    ids = [f"S{i:03d}" for i in range(n_locations)]

    urban = _sigmoid(2.0 * urban_f(xy))

    # POIs: thinned uniform process with urban-dependent categories
    n_cand = rng.poisson(60.0 * (extent_m / 1000.0) ** 2)
    cand = rng.uniform(0.0, extent_m, size=(n_cand, 2)) - np.array(pts).mean(axis=0)
    u_c = _sigmoid(2.0 * urban_f(cand))
    keep = rng.random(n_cand) < 0.1 + 0.9 * u_c
    cand, u_c = cand[keep], u_c[keep]
    gamma = rng.normal(0.0, 2.5, size=N_POI_CATEGORIES)
    delta = rng.normal(0.0, 0.5, size=N_POI_CATEGORIES)
    logits = u_c[:, None] * gamma[None, :] + delta[None, :]
    probs = np.exp(logits - logits.max(axis=1, keepdims=True))
    probs /= probs.sum(axis=1, keepdims=True)
    cum = probs.cumsum(axis=1)
    draws = rng.random(len(cand))[:, None]
    category = (draws > cum).sum(axis=1) + 1
    category = np.minimum(category, N_POI_CATEGORIES)
    levels = np.where(np.isin(category, (2, 3, 17)), 1 + rng.poisson(12.0 * u_c), 0).astype(np.float64)
    area = np.where(category == 9, rng.exponential(4000.0, size=len(cand)), 0.0)
    pois = PoiTable([f"P{k:05d}" for k in range(len(cand))], cand, category.astype(np.int64), levels, area)

    lanes_raw = 2 + np.round(1.5 + 1.5 * lane_f(xy))
    roads = RoadTable({
        sid: np.array([1 + np.round(4 * (1 - u)), 5 * np.round((40 + 80 * (1 - u)) / 5),
                       float(rng.random() < 0.6 * u), float(np.clip(l, 1, 6))])
        for sid, u, l in zip(ids, urban, lanes_raw)
    })

    steps_per_day = 1440 // interval_minutes
    n_steps = days * steps_per_day
    hours = (np.arange(n_steps) % steps_per_day) * interval_minutes / 60.0
    base = 65.0 - 15.0 * urban + 3.0 * base_f(xy)
    depth = 5.0 + 25.0 * urban
    shift = 0.5 * shift_f(xy)
    h = hours[:, None] - shift[None, :]
    rush = np.exp(-((h - 8.0) / 1.2) ** 2) + 0.9 * np.exp(-((h - 17.5) / 1.5) ** 2)
    signal = base[None, :] - depth[None, :] * rush

    if noise > 0:
        n_factors = 4
        loadings = np.stack([_SmoothField(rng, length)(xy) for _ in range(n_factors)], axis=1)
        phi = 0.98
        eps = rng.normal(0.0, math.sqrt(1 - phi ** 2), size=(n_steps, n_factors))
        z = np.zeros((n_steps, n_factors))
        z[0] = rng.normal(size=n_factors)
        for t in range(1, n_steps):
            z[t] = phi * z[t - 1] + eps[t]
        signal = signal + noise * (3.0 * z @ loadings.T + 1.5 * rng.normal(size=signal.shape))

    start = np.datetime64("2017-01-01T00:00", "m")
    timestamps = start + np.arange(n_steps) * np.timedelta64(interval_minutes, "m")
    panel = SensorPanel(timestamps, signal[:, :, None], np.ones((n_steps, n_locations), dtype=bool), tuple(ids))
    locations = [Location(i, (float(p[0]), float(p[1])), i) for i, p in zip(ids, xy)]
    return DatasetBundle(locations, panel, pois, roads, origin_lonlat=(-122.0, 37.5), name=f"synthetic-{seed}")
