"""Gridded multi-parameter cells: data model, CSV I/O, geometry, scaling, imputation.

The on-disk format is the 18-column cluster table (one row per grid cell)::

    LEV_M, LATITUDE, LONGITUDE, P_TEMPERATURE, P_SALINITY, P_OXYGEN,
    P_NITRATE, P_SILICATE, P_PHOSPHATE, e0, e1, e2, volume, label,
    uncertainty, color, water, imputed

Empty fields are missing values. Internally DBSCAN noise is ``NOISE`` (-1);
files may encode it as any integer (the released cluster table uses 8).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from typing import IO, Iterable, Optional, Sequence, Union

import numpy as np

from .clustering import NOISE
from .errors import FormatError

EARTH_RADIUS_M = 6_371_000.0

# upper boundaries of the 12 depth intervals; the last interval ends at 5000 m
DEPTH_BOUNDARIES = (0.0, 50.0, 100.0, 200.0, 300.0, 400.0, 500.0,
                    1000.0, 1500.0, 2000.0, 3000.0, 4000.0)
DEPTH_BOTTOM = 5000.0

PARAMETER_COLUMNS = ("P_TEMPERATURE", "P_SALINITY", "P_OXYGEN",
                     "P_NITRATE", "P_SILICATE", "P_PHOSPHATE")
GEOMETRY_COLUMNS = ("LEV_M", "LATITUDE", "LONGITUDE")
COLUMNS = GEOMETRY_COLUMNS + PARAMETER_COLUMNS + (
    "e0", "e1", "e2", "volume", "label", "uncertainty", "color", "water", "imputed")
RAW_COLUMNS = GEOMETRY_COLUMNS + PARAMETER_COLUMNS


def depth_interval(lev_m: float) -> tuple[float, float]:
    """Return (top, bottom) in metres for a canonical upper depth boundary."""
    try:
        i = DEPTH_BOUNDARIES.index(float(lev_m))
    except ValueError:
        raise FormatError(f"unknown depth boundary {lev_m!r}", column="LEV_M") from None
    bottom = DEPTH_BOUNDARIES[i + 1] if i + 1 < len(DEPTH_BOUNDARIES) else DEPTH_BOTTOM
    return DEPTH_BOUNDARIES[i], bottom


@dataclass(frozen=True)
class Bounds:
    latitude: tuple[float, float] = (0.0, 70.0)
    longitude: tuple[float, float] = (-77.0, 30.0)
    depth: tuple[float, float] = (0.0, DEPTH_BOTTOM)

    def contains(self, lev_m, latitude, longitude) -> bool:
        return (self.latitude[0] <= latitude <= self.latitude[1]
                and self.longitude[0] <= longitude <= self.longitude[1]
                and self.depth[0] <= lev_m < self.depth[1])


@dataclass(frozen=True)
class GridCell:
    lev_m: float
    latitude: float
    longitude: float
    params: tuple[Optional[float], ...] = (None,) * 6
    e0: Optional[float] = None
    e1: Optional[float] = None
    e2: Optional[float] = None
    volume: Optional[float] = None
    label: Optional[int] = None
    uncertainty: Optional[float] = None
    color: Optional[str] = None
    water: bool = True
    imputed: Optional[float] = None

    @property
    def key(self) -> tuple[float, float, float]:
        return (self.lev_m, self.latitude, self.longitude)


@dataclass(frozen=True)
class FeatureMatrix:
    values: np.ndarray
    missing_mask: np.ndarray
    column_names: tuple[str, ...]

    @classmethod
    def from_array(cls, values, column_names=None) -> "FeatureMatrix":
        values = np.asarray(values, dtype=float)
        if values.ndim != 2:
            raise ValueError("feature matrix must be 2-D")
        if column_names is None:
            column_names = tuple(f"x{i}" for i in range(values.shape[1]))
        return cls(values, np.isnan(values), tuple(column_names))

    @property
    def shape(self):
        return self.values.shape


@dataclass(frozen=True)
class ScalingParams:
    minimum: np.ndarray
    maximum: np.ndarray

    def transform(self, values: np.ndarray) -> np.ndarray:
        span = self.maximum - self.minimum
        safe = np.where(span > 0, span, 1.0)
        out = (np.asarray(values, dtype=float) - self.minimum) / safe
        return np.where(span > 0, out, np.where(np.isnan(out), np.nan, 0.0))

    def inverse(self, values: np.ndarray) -> np.ndarray:
        span = self.maximum - self.minimum
        return np.asarray(values, dtype=float) * span + self.minimum


@dataclass(frozen=True)
class GridDataset:
    cells: tuple[GridCell, ...]
    parameter_names: tuple[str, ...] = PARAMETER_COLUMNS
    bounds: Bounds = field(default_factory=Bounds)

    def __post_init__(self):
        object.__setattr__(self, "cells", tuple(self.cells))
        seen = set()
        for i, cell in enumerate(self.cells):
            if cell.key in seen:
                raise FormatError(f"duplicate cell {cell.key} at row {i}", row=i)
            seen.add(cell.key)

    def __len__(self):
        return len(self.cells)

    def feature_matrix(self) -> FeatureMatrix:
        values = np.array([[np.nan if v is None else v for v in c.params] for c in self.cells],
                          dtype=float).reshape(len(self.cells), len(self.parameter_names))
        return FeatureMatrix(values, np.isnan(values), tuple(self.parameter_names))

    def embedding(self) -> np.ndarray:
        coords = np.array([[c.e0, c.e1, c.e2] for c in self.cells], dtype=float)
        return coords.reshape(len(self.cells), 3)

    def geometry(self) -> np.ndarray:
        return np.array([c.key for c in self.cells], dtype=float).reshape(len(self.cells), 3)

    def labels(self) -> np.ndarray:
        out = np.empty(len(self.cells), dtype=np.int64)
        for i, c in enumerate(self.cells):
            if c.label is None:
                raise FormatError(f"row {i} has no label", column="label", row=i)
            out[i] = c.label
        return out

    def volumes(self) -> np.ndarray:
        return np.array([np.nan if c.volume is None else c.volume for c in self.cells], dtype=float)

    def with_columns(self, **columns) -> "GridDataset":
        """Return a copy with per-cell fields replaced from equal-length sequences.

        ``params`` takes an (n, 6) array (NaN = missing); ``embedding`` an (n, 3)
        array filling e0..e2; every other key names a GridCell field.
        """
        n = len(self.cells)
        per_cell = [dict() for _ in range(n)]
        for name, values in columns.items():
            if name == "params":
                arr = np.asarray(values, dtype=float)
                for i in range(n):
                    per_cell[i]["params"] = tuple(None if np.isnan(v) else float(v) for v in arr[i])
            elif name == "embedding":
                arr = np.asarray(values, dtype=float)
                for i in range(n):
                    per_cell[i].update(e0=float(arr[i, 0]), e1=float(arr[i, 1]), e2=float(arr[i, 2]))
            else:
                if len(values) != n:
                    raise ValueError(f"column {name} has {len(values)} entries, expected {n}")
                for i in range(n):
                    v = values[i]
                    if isinstance(v, np.generic):
                        v = v.item()
                    per_cell[i][name] = v
        cells = tuple(replace(c, **kw) for c, kw in zip(self.cells, per_cell))
        return GridDataset(cells, self.parameter_names, self.bounds)


# --- CSV -----------------------------------------------------------------

def _as_text(stream) -> IO[str]:
    if isinstance(stream, (bytes, bytearray)):
        return io.StringIO(bytes(stream).decode("utf-8-sig"))
    if isinstance(stream, str):
        return io.StringIO(stream)
    if isinstance(stream, io.TextIOBase):
        return stream
    return io.TextIOWrapper(stream, encoding="utf-8-sig", newline="")


def _real(value: str, column: str, row: int, required=False) -> Optional[float]:
    value = value.strip()
    if value == "" or value.lower() == "nan":
        if required:
            raise FormatError(f"row {row}: missing required value in {column}", column, row)
        return None
    try:
        return float(value)
    except ValueError:
        raise FormatError(f"row {row}: non-numeric value {value!r} in {column}", column, row) from None


def _bool(value: str, row: int) -> bool:
    v = value.strip().lower()
    if v in ("true", "1", "1.0", "t", "yes", ""):
        return True
    if v in ("false", "0", "0.0", "f", "no"):
        return False
    raise FormatError(f"row {row}: cannot parse water flag {value!r}", "water", row)


def parse_cluster_csv(stream, noise_label_in_file: Optional[int] = -1, *,
                      require_all: bool = True, bounds: Optional[Bounds] = None) -> GridDataset:
    """Parse the 18-column cluster table.

    With ``require_all=False`` only the nine geometry and parameter columns are
    mandatory (raw gridded input). Column names match case-insensitively.
    Rows whose label equals ``noise_label_in_file`` get the internal NOISE label.
    """
    bounds = bounds or Bounds()
    reader = csv.reader(_as_text(stream))
    try:
        header = next(reader)
    except StopIteration:
        raise FormatError("empty file: no header row") from None
    canon = {c.lower(): c for c in COLUMNS}
    names = []
    for h in header:
        key = h.strip().lower()
        if key not in canon:
            raise FormatError(f"unknown column {h.strip()!r}", column=h.strip())
        names.append(canon[key])
    required = COLUMNS if require_all else RAW_COLUMNS
    for col in required:
        if col not in names:
            raise FormatError(f"missing column {col!r}", column=col)

    cells = []
    for r, row in enumerate(reader, start=1):
        if not row or all(not f.strip() for f in row):
            continue
        if len(row) != len(names):
            raise FormatError(f"row {r}: expected {len(names)} fields, got {len(row)}", row=r)
        rec = dict(zip(names, row))
        lev = _real(rec["LEV_M"], "LEV_M", r, required=True)
        lat = _real(rec["LATITUDE"], "LATITUDE", r, required=True)
        lon = _real(rec["LONGITUDE"], "LONGITUDE", r, required=True)
        try:
            depth_interval(lev)
        except FormatError:
            raise FormatError(f"row {r}: unknown depth boundary {lev}", "LEV_M", r) from None
        if not bounds.contains(lev, lat, lon):
            raise FormatError(f"row {r}: cell {(lev, lat, lon)} outside bounds", "LATITUDE", r)
        params = tuple(_real(rec[c], c, r) for c in PARAMETER_COLUMNS)
        label = _real(rec.get("label", ""), "label", r)
        if label is not None:
            if label != int(label):
                raise FormatError(f"row {r}: non-integer label {label}", "label", r)
            label = int(label)
            if noise_label_in_file is not None and label == noise_label_in_file:
                label = NOISE
        unc = _real(rec.get("uncertainty", ""), "uncertainty", r)
        if unc is not None and not 0.0 <= unc <= 100.0:
            raise FormatError(f"row {r}: uncertainty {unc} outside [0, 100]", "uncertainty", r)
        imputed = _real(rec.get("imputed", ""), "imputed", r)
        if imputed is not None and not 0.0 <= imputed <= 100.0:
            raise FormatError(f"row {r}: imputed {imputed} outside [0, 100]", "imputed", r)
        color = rec.get("color", "").strip() or None
        cells.append(GridCell(
            lev_m=lev, latitude=lat, longitude=lon, params=params,
            e0=_real(rec.get("e0", ""), "e0", r),
            e1=_real(rec.get("e1", ""), "e1", r),
            e2=_real(rec.get("e2", ""), "e2", r),
            volume=_real(rec.get("volume", ""), "volume", r),
            label=label, uncertainty=unc, color=color,
            water=_bool(rec.get("water", ""), r), imputed=imputed,
        ))
    return GridDataset(tuple(cells), bounds=bounds)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "True" if v else "False"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, float) and math.isnan(v):
        return ""
    return repr(float(v))


def write_cluster_csv(dataset: GridDataset, noise_label_in_file: int = -1) -> bytes:
    """Serialise ``dataset`` to the 18-column table (UTF-8 bytes)."""
    buf = io.StringIO(newline="")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS)
    for i, c in enumerate(dataset.cells):
        label = c.label
        if label == NOISE:
            label = noise_label_in_file
        elif label is not None and label == noise_label_in_file:
            raise ValueError(f"row {i}: cluster label {label} collides with the noise label")
        writer.writerow([
            _fmt(c.lev_m), _fmt(c.latitude), _fmt(c.longitude),
            *(_fmt(p) for p in c.params),
            _fmt(c.e0), _fmt(c.e1), _fmt(c.e2), _fmt(c.volume),
            "" if label is None else str(int(label)),
            _fmt(c.uncertainty), c.color or "", _fmt(bool(c.water)), _fmt(c.imputed),
        ])
    return buf.getvalue().encode("utf-8")


def read_grid(path, noise_label_in_file: Optional[int] = -1, **kw) -> GridDataset:
    with open(path, "rb") as fh:
        return parse_cluster_csv(fh, noise_label_in_file, **kw)


def write_grid(path, dataset: GridDataset, noise_label_in_file: int = -1) -> None:
    data = write_cluster_csv(dataset, noise_label_in_file)
    with open(path, "wb") as fh:
        fh.write(data)


# --- geometry ------------------------------------------------------------

def cell_volume(latitude: float, lat_width: float, lon_width: float,
                depth_top: float, depth_bottom: float) -> float:
    """Volume in m^3 of a lat/lon box centred on ``latitude`` between two depths.

    Spherical Earth of radius 6371 km; the radial extent only enters through
    the layer thickness.
    """
    if not depth_bottom > depth_top >= 0:
        raise ValueError(f"need depth_bottom > depth_top >= 0, got {depth_top}, {depth_bottom}")
    if lat_width <= 0 or lon_width <= 0:
        raise ValueError("cell widths must be positive")
    lo, hi = latitude - lat_width / 2.0, latitude + lat_width / 2.0
    if lo < -90.0 or hi > 90.0:
        raise ValueError(f"cell [{lo}, {hi}] crosses a pole")
    area = EARTH_RADIUS_M ** 2 * math.radians(lon_width) * (
        math.sin(math.radians(hi)) - math.sin(math.radians(lo)))
    return area * (depth_bottom - depth_top)


def assign_volumes(dataset: GridDataset, lat_width: float = 1.0, lon_width: float = 1.0) -> GridDataset:
    """Fill the volume of every water cell from its geometry; land cells keep None."""
    vols = []
    for c in dataset.cells:
        if not c.water:
            vols.append(c.volume)
            continue
        top, bottom = depth_interval(c.lev_m)
        vols.append(cell_volume(c.latitude, lat_width, lon_width, top, bottom))
    return dataset.with_columns(volume=vols)


# --- scaling -------------------------------------------------------------

def min_max_scale(matrix: Union[FeatureMatrix, np.ndarray]) -> tuple[FeatureMatrix, ScalingParams]:
    """Scale each column to [0, 1]; missing entries stay missing, constant columns map to 0."""
    if not isinstance(matrix, FeatureMatrix):
        matrix = FeatureMatrix.from_array(matrix)
    values = matrix.values
    present = ~matrix.missing_mask
    for j, name in enumerate(matrix.column_names):
        if not present[:, j].any():
            raise ValueError(f"column {name} has no non-missing values")
    masked = np.where(present, values, np.nan)
    params = ScalingParams(np.nanmin(masked, axis=0), np.nanmax(masked, axis=0))
    scaled = params.transform(masked)
    return FeatureMatrix(scaled, matrix.missing_mask.copy(), matrix.column_names), params


# --- imputation ----------------------------------------------------------

def _nan_distances(targets: np.ndarray, donors: np.ndarray) -> np.ndarray:
    """Euclidean distances over mutually present features, rescaled by sqrt(d/d_used)."""
    d = targets.shape[1]
    diff = targets[:, None, :] - donors[None, :, :]
    both = ~np.isnan(diff)
    sq = np.where(both, diff, 0.0) ** 2
    used = both.sum(axis=2)
    with np.errstate(divide="ignore", invalid="ignore"):
        dist = np.sqrt(sq.sum(axis=2) * d / used)
    dist[used == 0] = np.inf
    return dist


def inverse_distance_mean(dist: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Row-wise 1/d weighted mean; rows with a zero distance average only those donors."""
    zero = dist == 0
    with np.errstate(divide="ignore"):
        w = np.where(zero.any(axis=1, keepdims=True), zero.astype(float), 1.0 / dist)
    return (w * values).sum(axis=1) / w.sum(axis=1)


def knn_impute(dataset: GridDataset, k: int = 5, chunk_bytes: int = 64 << 20) -> GridDataset:
    """Fill missing parameters by inverse-distance weighting of the k nearest donors.

    Distances use the six min-max scaled parameters plus latitude, longitude and
    depth scaled to [0, 1]. Donors for a column are the cells where that column
    is present. A donor at distance zero is copied exactly.
    """
    fm = dataset.feature_matrix()
    values = fm.values
    n, n_params = values.shape
    if n == 0:
        return dataset
    scaled, _ = min_max_scale(fm)
    geo, _ = min_max_scale(dataset.geometry())
    feats = np.hstack([scaled.values, geo.values])

    out = values.copy()
    for j in range(n_params):
        missing = np.flatnonzero(np.isnan(values[:, j]))
        if missing.size == 0:
            continue
        donors = np.flatnonzero(~np.isnan(values[:, j]))
        if donors.size < k:
            raise ValueError(f"column {fm.column_names[j]}: {donors.size} donors, need {k}")
        donor_feats = feats[donors]
        step = max(1, chunk_bytes // (donors.size * feats.shape[1] * 8))
        for start in range(0, missing.size, step):
            rows = missing[start:start + step]
            dist = _nan_distances(feats[rows], donor_feats)
            order = np.argsort(dist, axis=1, kind="stable")[:, :k]
            nd = np.take_along_axis(dist, order, axis=1)
            nv = values[donors[order], j]
            out[rows, j] = inverse_distance_mean(nd, nv)

    n_missing = np.isnan(values).sum(axis=1)
    imputed = [round(100.0 * m / n_params, 2) if m else (c.imputed if c.imputed is not None else 0.0)
               for m, c in zip(n_missing, dataset.cells)]
    return dataset.with_columns(params=out, imputed=imputed)


# --- statistics ----------------------------------------------------------

@dataclass(frozen=True)
class ParameterStats:
    mean: float
    min: float
    max: float
    missing_fraction: float


def dataset_stats(dataset: GridDataset) -> dict[str, ParameterStats]:
    fm = dataset.feature_matrix()
    stats = {}
    for j, name in enumerate(fm.column_names):
        col = fm.values[:, j]
        present = col[~np.isnan(col)]
        frac = float(np.isnan(col).mean()) if col.size else 0.0
        if present.size:
            stats[name] = ParameterStats(float(present.mean()), float(present.min()),
                                         float(present.max()), frac)
        else:
            stats[name] = ParameterStats(math.nan, math.nan, math.nan, 1.0 if col.size else 0.0)
    return stats


def canonical_grid(n_cells: int, bounds: Optional[Bounds] = None, step: float = 1.0) -> list[tuple[float, float, float]]:
    """First ``n_cells`` (lev_m, lat, lon) cell keys of a regular grid, depth-major."""
    bounds = bounds or Bounds()
    lats = np.arange(bounds.latitude[0] + step / 2, bounds.latitude[1], step)
    lons = np.arange(bounds.longitude[0] + step / 2, bounds.longitude[1], step)
    keys = []
    for lev in DEPTH_BOUNDARIES:
        for lat in lats:
            for lon in lons:
                keys.append((lev, float(lat), float(lon)))
                if len(keys) == n_cells:
                    return keys
    raise ValueError(f"grid holds only {len(keys)} cells")
