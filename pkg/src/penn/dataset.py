"""Table-1 data schema: CSV ingestion, splitting, normalisation, subsampling."""
from __future__ import annotations

import csv
import logging
from collections import namedtuple
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ParameterError, SchemaError, StatsError

log = logging.getLogger(__name__)

INPUT_COLUMNS = (
    # overall
    "atm_static_pressure_pa",
    "atm_static_temperature_k",
    "flight_mach",
    # intake
    "intake_pressure_recovery",
    "intake_mass_flow_kg_s",
    # low-speed channel
    "fan_relative_speed",
    "compressor_relative_speed",
    "lpt_outlet_total_temperature_k",
    "fan_inlet_total_pressure_pa",
    "lpt_outlet_static_pressure_pa",
    "engine_pressure_ratio",
    "turbine_throttle_lever_angle_deg",
    "turbine_outlet_relative_opening",
    # high-speed channel
    "bypass_mixer_area_ratio",
    "combined_throttle_angle_deg",
    "ramjet_fuel_flow_kg_s",
    # exhaust
    "nozzle_throat_area_m2",
    "nozzle_exit_area_m2",
)
TARGET_COLUMNS = ("thrust_n", "specific_impulse_s")
COLUMNS = INPUT_COLUMNS + TARGET_COLUMNS
TARGET_INDEX = {"thrust": 0, "impulse": 1}

_MACH = INPUT_COLUMNS.index("flight_mach")
_RECOVERY = INPUT_COLUMNS.index("intake_pressure_recovery")
_AREAS = [INPUT_COLUMNS.index("nozzle_throat_area_m2"), INPUT_COLUMNS.index("nozzle_exit_area_m2")]

SampleRecord = namedtuple("SampleRecord", COLUMNS)


@dataclass
class Dataset:
    """Inputs ``X`` (n, 18) and targets ``Y`` (n, 2: thrust, impulse)."""

    X: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64).reshape(-1, len(INPUT_COLUMNS))
        self.Y = np.asarray(self.Y, dtype=np.float64).reshape(-1, len(TARGET_COLUMNS))
        if len(self.X) != len(self.Y):
            raise SchemaError(f"{len(self.X)} input rows but {len(self.Y)} target rows")

    def __len__(self) -> int:
        return len(self.X)

    def target(self, name: str) -> np.ndarray:
        try:
            return self.Y[:, TARGET_INDEX[name]]
        except KeyError:
            raise ParameterError(f"unknown target {name!r}; expected one of {tuple(TARGET_INDEX)}") from None

    def subset(self, idx) -> "Dataset":
        return Dataset(self.X[idx], self.Y[idx])

    def records(self) -> list[SampleRecord]:
        return [SampleRecord(*row) for row in np.hstack([self.X, self.Y]).tolist()]

    @classmethod
    def from_records(cls, records: Sequence[SampleRecord]) -> "Dataset":
        if not records:
            return cls(np.empty((0, len(INPUT_COLUMNS))), np.empty((0, 2)))
        arr = np.asarray(records, dtype=np.float64)
        return cls(arr[:, : len(INPUT_COLUMNS)], arr[:, len(INPUT_COLUMNS) :])


def validate(ds: Dataset) -> None:
    """Raise SchemaError for rows that break the physical field invariants."""
    checks = [
        (~np.all(np.isfinite(ds.X), axis=1) | ~np.all(np.isfinite(ds.Y), axis=1), "non-finite value"),
        (ds.X[:, _MACH] < 0, "negative Mach number"),
        ((ds.X[:, _RECOVERY] <= 0) | (ds.X[:, _RECOVERY] > 1), "pressure recovery outside (0, 1]"),
        (np.any(ds.X[:, _AREAS] <= 0, axis=1), "non-positive nozzle area"),
    ]
    for mask, what in checks:
        bad = np.flatnonzero(mask)
        if bad.size:
            raise SchemaError(f"row {int(bad[0])}: {what} ({bad.size} offending row(s))")


def drop_zero_impulse(ds: Dataset) -> Dataset:
    keep = ds.Y[:, 1] != 0.0
    dropped = int(len(ds) - keep.sum())
    if dropped:
        log.info("dropped %d sample(s) with zero specific impulse", dropped)
    return ds.subset(keep)


def load_csv(path, drop_zero: bool = True) -> Dataset:
    """Read a 20-column CSV whose header follows the canonical column order."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: missing header row") from None
        _check_header(header)
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(COLUMNS):
                raise SchemaError(f"{path}:{lineno}: expected {len(COLUMNS)} cells, got {len(row)}")
            values = []
            for col, cell in zip(COLUMNS, row):
                try:
                    values.append(float(cell))
                except ValueError:
                    raise SchemaError(f"{path}:{lineno}: column {col!r}: cannot parse {cell!r}") from None
            rows.append(values)
    arr = np.asarray(rows, dtype=np.float64).reshape(-1, len(COLUMNS))
    ds = Dataset(arr[:, : len(INPUT_COLUMNS)], arr[:, len(INPUT_COLUMNS) :])
    validate(ds)
    return drop_zero_impulse(ds) if drop_zero else ds


def _check_header(header: list[str]) -> None:
    if header == list(COLUMNS):
        return
    missing = [c for c in COLUMNS if c not in header]
    extra = [c for c in header if c not in COLUMNS]
    if missing or extra:
        raise SchemaError(f"header mismatch: missing {missing}, unexpected {extra}")
    raise SchemaError(f"header columns are out of order; expected {list(COLUMNS)}")


def write_csv(ds: Dataset, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(COLUMNS)
        for row in np.hstack([ds.X, ds.Y]):
            writer.writerow([repr(float(v)) for v in row])


@dataclass
class DatasetSplit:
    train: Dataset
    val: Dataset
    test: Dataset
    ratios: tuple[float, float, float]
    seed: int


def split(ds: Dataset, ratios=(0.6, 0.2, 0.2), seed: int = 0) -> DatasetSplit:
    """Seeded shuffle, then train/val/test partition (test takes the remainder)."""
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or min(ratios) < 0 or abs(sum(ratios) - 1.0) > 1e-9:
        raise ParameterError(f"split ratios must be three non-negative numbers summing to 1, got {ratios}")
    n = len(ds)
    perm = np.random.default_rng(seed).permutation(n)
    n_train = int(round(ratios[0] * n))
    n_val = min(int(round(ratios[1] * n)), n - n_train)
    return DatasetSplit(
        train=ds.subset(perm[:n_train]),
        val=ds.subset(perm[n_train : n_train + n_val]),
        test=ds.subset(perm[n_train + n_val :]),
        ratios=ratios,
        seed=seed,
    )


def subsample(train: Dataset, factor: float, seed: int = 0) -> Dataset:
    """Uniform sample without replacement of size floor(n / factor)."""
    if not factor >= 1:
        raise ParameterError(f"subsample factor must be >= 1, got {factor}")
    size = int(len(train) // factor)
    if size < 1:
        raise ParameterError(f"factor {factor} leaves no samples out of {len(train)}")
    if size == len(train):
        return train
    idx = np.sort(np.random.default_rng(seed).choice(len(train), size=size, replace=False))
    return train.subset(idx)


def constant_features(mean, std) -> np.ndarray:
    """Mask of features whose spread is only rounding noise around the mean."""
    return ~(np.asarray(std) > 1e-12 * np.maximum(1.0, np.abs(mean)))


@dataclass
class NormalizationStats:
    x_mean: np.ndarray
    x_std: np.ndarray
    y_mean: np.ndarray
    y_std: np.ndarray

    @classmethod
    def fit(cls, train: Dataset) -> "NormalizationStats":
        if len(train) == 0:
            raise StatsError("cannot compute statistics of an empty training split")
        x_mean, x_std = train.X.mean(axis=0), train.X.std(axis=0)
        for name, s in zip(INPUT_COLUMNS, constant_features(x_mean, x_std)):
            if s:
                raise StatsError(f"feature {name!r} is constant over the training split")
        return cls(x_mean, x_std, train.Y.mean(axis=0), train.Y.std(axis=0))

    def transform(self, X) -> np.ndarray:
        return (np.asarray(X, dtype=np.float64) - self.x_mean) / self.x_std

    def inverse_transform(self, Xn) -> np.ndarray:
        return np.asarray(Xn, dtype=np.float64) * self.x_std + self.x_mean


def normalize(sp: DatasetSplit) -> tuple[DatasetSplit, NormalizationStats]:
    """Z-score inputs with training statistics; targets keep physical units."""
    stats = NormalizationStats.fit(sp.train)
    parts = [Dataset(stats.transform(d.X), d.Y.copy()) for d in (sp.train, sp.val, sp.test)]
    return DatasetSplit(*parts, ratios=sp.ratios, seed=sp.seed), stats


def denormalize(X, stats: NormalizationStats) -> np.ndarray:
    return stats.inverse_transform(X)
