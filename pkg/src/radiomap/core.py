"""Geometry, grids, unit-tagged measurement containers and their file formats."""

from __future__ import annotations

import csv
import enum
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Optional, Protocol, Sequence

import numpy as np

from ._accel import pairwise_distances

MEASUREMENT_COLUMNS = ["x", "y", "z", "x2", "y2", "z2", "value", "freq", "time"]


class UnitError(TypeError):
    """Raised when linear and dB quantities are combined without conversion."""


class Unit(str, enum.Enum):
    WATT = "W"
    DB = "dB"


def db_to_linear(v):
    return 10.0 ** (np.asarray(v, dtype=float) / 10.0)


def linear_to_db(v):
    v = np.asarray(v, dtype=float)
    if np.any(v <= 0):
        raise ValueError("linear_to_db requires strictly positive input")
    return 10.0 * np.log10(v)


def as_location(x) -> np.ndarray:
    """Validate a single location and return it as a float vector."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.ndim != 1 or not 1 <= x.shape[0] <= 3:
        raise ValueError(f"location must have 1 to 3 coordinates, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("location coordinates must be finite")
    return x


def as_locations(X, dim: Optional[int] = None) -> np.ndarray:
    """Coerce a list of locations to an (N, d) array.

    A 1-D input is read as N one-dimensional points unless ``dim`` says
    otherwise.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 0:
        X = X.reshape(1, 1)
    elif X.ndim == 1:
        X = X.reshape(1, -1) if dim is not None and dim > 1 else X.reshape(-1, 1)
    if X.ndim != 2 or not 1 <= X.shape[1] <= 3:
        raise ValueError(f"locations must be (N, d) with d in 1..3, got {X.shape}")
    if dim is not None and X.shape[1] != dim:
        raise ValueError(f"expected {dim}-D locations, got {X.shape[1]}-D")
    if not np.all(np.isfinite(X)):
        raise ValueError("location coordinates must be finite")
    return X


@dataclass(frozen=True)
class Region:
    lower: tuple
    upper: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lower))
        hi = tuple(float(v) for v in np.atleast_1d(self.upper))
        if len(lo) != len(hi) or not 1 <= len(lo) <= 3:
            raise ValueError("region bounds must share a dimension in 1..3")
        if any(a > b for a, b in zip(lo, hi)):
            raise ValueError("region lower bound exceeds upper bound")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return len(self.lower)

    def clamp(self, X) -> np.ndarray:
        return np.clip(as_locations(X, self.dim), self.lower, self.upper)


@dataclass(frozen=True)
class Grid:
    region: Region
    counts: tuple

    def __post_init__(self):
        counts = tuple(int(c) for c in np.atleast_1d(self.counts))
        if len(counts) != self.region.dim or any(c < 1 for c in counts):
            raise ValueError("grid needs one positive count per region axis")
        object.__setattr__(self, "counts", counts)

    @classmethod
    def from_bounds(cls, lower, upper, counts) -> "Grid":
        return cls(Region(lower, upper), counts)

    @property
    def dim(self) -> int:
        return self.region.dim

    @property
    def n_points(self) -> int:
        return int(np.prod(self.counts))

    @property
    def cell_size(self) -> np.ndarray:
        lo = np.array(self.region.lower)
        hi = np.array(self.region.upper)
        return (hi - lo) / np.array(self.counts)

    @property
    def cell_diagonal(self) -> float:
        return float(np.linalg.norm(self.cell_size))

    def points(self) -> np.ndarray:
        return grid_points(self)


def grid_points(grid: Grid) -> np.ndarray:
    """Cell-centred grid points in row-major order (last axis fastest)."""
    lo = np.array(grid.region.lower)
    axes = [lo[d] + (np.arange(c) + 0.5) * grid.cell_size[d] for d, c in enumerate(grid.counts)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def nearest_grid_indices(grid: Grid, X) -> np.ndarray:
    """Flat index of the nearest grid point for each row of ``X``.

    Locations are clamped to the region first.  A location equidistant from
    two grid points resolves to the lower index.
    """
    X = grid.region.clamp(X)
    lo = np.array(grid.region.lower)
    cell = grid.cell_size
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(cell > 0, (X - lo) / np.where(cell > 0, cell, 1.0), 0.0)
    idx = np.ceil(rel).astype(np.int64) - 1
    idx = np.clip(idx, 0, np.array(grid.counts) - 1)
    return np.ravel_multi_index(tuple(idx.T), grid.counts)


def nearest_grid_point(grid: Grid, loc) -> int:
    return int(nearest_grid_indices(grid, as_location(loc).reshape(1, -1))[0])


@dataclass(frozen=True)
class GridMap:
    grid: Grid
    values: np.ndarray
    unit: Unit

    def __post_init__(self):
        values = np.array(self.values, dtype=float).ravel()
        if values.shape[0] != self.grid.n_points:
            raise ValueError("GridMap values must match the grid point count")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "unit", Unit(self.unit))

    def as_array(self) -> np.ndarray:
        return self.values.reshape(self.grid.counts)

    def at(self, X) -> np.ndarray:
        """Value of the nearest grid point for each location."""
        return self.values[nearest_grid_indices(self.grid, X)]

    def to_db(self) -> "GridMap":
        if self.unit is Unit.DB:
            return self
        return GridMap(self.grid, linear_to_db(self.values), Unit.DB)

    def to_linear(self) -> "GridMap":
        if self.unit is Unit.WATT:
            return self
        return GridMap(self.grid, db_to_linear(self.values), Unit.WATT)

    def __add__(self, other: "GridMap") -> "GridMap":
        if not isinstance(other, GridMap):
            return NotImplemented
        if other.unit is not self.unit:
            raise UnitError(f"cannot add {self.unit.value} map to {other.unit.value} map")
        if other.grid != self.grid:
            raise ValueError("maps live on different grids")
        return GridMap(self.grid, self.values + other.values, self.unit)


@dataclass(frozen=True)
class Measurement:
    location: np.ndarray
    value: float
    second_location: Optional[np.ndarray] = None
    frequency_index: Optional[int] = None
    time_index: Optional[int] = None


def _frozen(a, dtype=float):
    if a is None:
        return None
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class MeasurementSet:
    """Columnar, immutable collection of scalar measurements.

    ``second_locations`` is set only for propagation-map (link) data.
    """

    locations: np.ndarray
    values: np.ndarray
    unit: Unit = Unit.WATT
    noise_variance: float = 0.0
    second_locations: Optional[np.ndarray] = None
    frequency_index: Optional[np.ndarray] = None
    time_index: Optional[np.ndarray] = None

    def __post_init__(self):
        values = np.atleast_1d(np.asarray(self.values, dtype=float)).ravel()
        n = values.shape[0]
        if n:
            raw = np.asarray(self.locations, dtype=float)
            if raw.ndim == 1 and n == 1:
                locs = as_locations(raw.reshape(1, -1))
            else:
                locs = as_locations(raw)
        else:
            raw = np.asarray(self.locations)
            locs = np.zeros((0, raw.shape[1] if raw.ndim == 2 and raw.shape[1] else 1))
        if locs.shape[0] != n:
            raise ValueError("one location per measurement value is required")
        if not np.all(np.isfinite(values)):
            raise ValueError("measurement values must be finite")
        if self.noise_variance < 0:
            raise ValueError("noise variance must be nonnegative")
        second = self.second_locations
        if second is not None:
            second = as_locations(second, locs.shape[1]) if n else np.zeros_like(locs)
            if second.shape != locs.shape:
                raise ValueError("second_locations must align with locations")
        for name in ("frequency_index", "time_index"):
            arr = getattr(self, name)
            if arr is not None:
                arr = np.asarray(arr, dtype=np.int64).ravel()
                if arr.shape[0] != n:
                    raise ValueError(f"{name} must align with values")
                object.__setattr__(self, name, _frozen(arr, np.int64))
        object.__setattr__(self, "locations", _frozen(locs))
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "second_locations", _frozen(second))
        object.__setattr__(self, "unit", Unit(self.unit))
        object.__setattr__(self, "noise_variance", float(self.noise_variance))

    @classmethod
    def from_measurements(cls, items: Sequence[Measurement], unit=Unit.WATT,
                          noise_variance: float = 0.0) -> "MeasurementSet":
        items = list(items)
        if not items:
            return cls(np.zeros((0, 1)), np.zeros(0), unit, noise_variance)
        locs = np.stack([as_location(m.location) for m in items])
        has_second = [m.second_location is not None for m in items]
        if any(has_second) and not all(has_second):
            raise ValueError("second_location must be set on all or none of the measurements")
        second = np.stack([as_location(m.second_location) for m in items]) if all(has_second) else None

        def _col(attr):
            col = [getattr(m, attr) for m in items]
            if all(c is None for c in col):
                return None
            if any(c is None for c in col):
                raise ValueError(f"{attr} must be set on all or none of the measurements")
            return np.array(col)

        return cls(locs, [m.value for m in items], unit, noise_variance, second,
                   _col("frequency_index"), _col("time_index"))

    def __len__(self) -> int:
        return self.values.shape[0]

    def __iter__(self) -> Iterator[Measurement]:
        for i in range(len(self)):
            yield Measurement(
                self.locations[i],
                float(self.values[i]),
                None if self.second_locations is None else self.second_locations[i],
                None if self.frequency_index is None else int(self.frequency_index[i]),
                None if self.time_index is None else int(self.time_index[i]),
            )

    @property
    def dim(self) -> int:
        return self.locations.shape[1]

    @property
    def is_link_data(self) -> bool:
        return self.second_locations is not None

    def with_values(self, values, unit=None) -> "MeasurementSet":
        return MeasurementSet(self.locations, values, self.unit if unit is None else unit,
                              self.noise_variance, self.second_locations,
                              self.frequency_index, self.time_index)

    def subset(self, index) -> "MeasurementSet":
        index = np.asarray(index)

        def pick(a):
            return None if a is None else a[index]

        return MeasurementSet(self.locations[index], self.values[index], self.unit,
                              self.noise_variance, pick(self.second_locations),
                              pick(self.frequency_index), pick(self.time_index))

    def require_unit(self, unit: Unit) -> None:
        if self.unit is not Unit(unit):
            raise UnitError(f"expected {Unit(unit).value} measurements, got {self.unit.value}")


class FittedEstimator(Protocol):
    """Anything returned by a fitting routine: a deterministic map of location."""

    def evaluate(self, X) -> np.ndarray: ...


def distances(X, Y) -> np.ndarray:
    return pairwise_distances(as_locations(X), as_locations(Y, as_locations(X).shape[1]))


# ---------------------------------------------------------------------------
# file formats
# ---------------------------------------------------------------------------

def _fmt(v) -> str:
    return "" if v is None else repr(float(v))


def write_measurements(path, data: MeasurementSet) -> None:
    """Write the measurement CSV plus a small JSON sidecar with unit and noise."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MEASUREMENT_COLUMNS)
        for m in data:
            loc = [_fmt(v) for v in m.location] + [""] * (3 - data.dim)
            if m.second_location is not None:
                loc2 = [_fmt(v) for v in m.second_location] + [""] * (3 - data.dim)
            else:
                loc2 = ["", "", ""]
            w.writerow(loc + loc2 + [_fmt(m.value),
                                     "" if m.frequency_index is None else str(m.frequency_index),
                                     "" if m.time_index is None else str(m.time_index)])
    meta = {"unit": data.unit.value, "noise_variance": data.noise_variance, "dim": data.dim}
    _sidecar(path).write_text(json.dumps(meta, sort_keys=True) + "\n", encoding="utf-8")


def _sidecar(path: Path) -> Path:
    return path.with_name(path.name + ".meta.json")


def read_measurements(path, unit=None, noise_variance=None) -> MeasurementSet:
    path = Path(path)
    meta = {}
    if _sidecar(path).exists():
        meta = json.loads(_sidecar(path).read_text(encoding="utf-8"))
    unit = unit if unit is not None else meta.get("unit", Unit.WATT)
    noise_variance = noise_variance if noise_variance is not None else meta.get("noise_variance", 0.0)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    dim = meta.get("dim")
    if dim is None:
        dim = max((sum(r[k] != "" for k in "xyz") for r in rows), default=1)
    items = []
    for r in rows:
        loc = [float(r[k]) for k in "xyz"[:dim]]
        second = [float(r[k]) for k in ("x2", "y2", "z2")[:dim]] if r["x2"] != "" else None
        items.append(Measurement(
            np.array(loc), float(r["value"]),
            None if second is None else np.array(second),
            int(r["freq"]) if r["freq"] != "" else None,
            int(r["time"]) if r["time"] != "" else None,
        ))
    if not items:
        return MeasurementSet(np.zeros((0, dim)), np.zeros(0), unit, noise_variance)
    return MeasurementSet.from_measurements(items, unit, noise_variance)


def write_gridmap(path, gmap: GridMap) -> None:
    """``path`` gets the JSON header; the values go to a sibling ``.csv``."""
    path = Path(path)
    csv_path = path.with_suffix(".csv")
    header = {
        "region": {"lower": list(gmap.grid.region.lower), "upper": list(gmap.grid.region.upper)},
        "counts": list(gmap.grid.counts),
        "unit": gmap.unit.value,
        "values_file": csv_path.name,
    }
    path.write_text(json.dumps(header, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    mat = gmap.values.reshape(gmap.grid.counts[0], -1) if gmap.grid.dim > 1 else gmap.values.reshape(1, -1)
    with csv_path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row in mat:
            w.writerow([repr(float(v)) for v in row])


def read_gridmap(path) -> GridMap:
    path = Path(path)
    header = json.loads(path.read_text(encoding="utf-8"))
    grid = Grid(Region(header["region"]["lower"], header["region"]["upper"]), header["counts"])
    with (path.parent / header["values_file"]).open(newline="", encoding="utf-8") as fh:
        values = [float(v) for row in csv.reader(fh) for v in row]
    return GridMap(grid, np.array(values), Unit(header["unit"]))
