"""Dummy encoding of hourly observations and deterministic splits.

Two codings are supported. reference_cell drops Hour_0 / MO / JAN and adds
an intercept (42 columns with precipitation) and is the statistically sound
default. full_dummy keeps every level with no intercept (44 columns); it is
rank-deficient across the three categories and exists to produce all-levels
coefficient tables, fitted with minimum-norm solves downstream.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Sequence, Union

import numpy as np

from .errors import DataError
from .ingest import HourlyObservation, MONTH_LABELS, WEEKDAY_LABELS

HOUR_LABELS = tuple(f"Hour_{h}" for h in range(24))
PRECIP_LABEL = "Precipitation"
INTERCEPT_LABEL = "Intercept"

REFERENCE_CELL = "reference_cell"
FULL_DUMMY = "full_dummy"

PRECIP_INDICATOR = "indicator"
PRECIP_INCHES = "inches"


@dataclass(frozen=True)
class FeatureSchema:
    coding: str = REFERENCE_CELL
    include_precip: bool = True
    precip_mode: str = PRECIP_INDICATOR
    reference: tuple[int, int, int] = (0, 0, 1)  # (hour, weekday index, month)

    def __post_init__(self) -> None:
        if self.coding not in (REFERENCE_CELL, FULL_DUMMY):
            raise DataError(f"unknown coding {self.coding!r}")
        if self.precip_mode not in (PRECIP_INDICATOR, PRECIP_INCHES):
            raise DataError(f"unknown precip mode {self.precip_mode!r}")
        h, w, m = self.reference
        if not (0 <= h <= 23 and 0 <= w <= 6 and 1 <= m <= 12):
            raise DataError(f"reference levels out of range: {self.reference!r}")

    @property
    def column_names(self) -> tuple[str, ...]:
        ref_h, ref_w, ref_m = self.reference
        names: list[str] = []
        if self.coding == REFERENCE_CELL:
            names.append(INTERCEPT_LABEL)
            names += [HOUR_LABELS[h] for h in range(24) if h != ref_h]
            names += [WEEKDAY_LABELS[w] for w in range(7) if w != ref_w]
            names += [MONTH_LABELS[m - 1] for m in range(1, 13) if m != ref_m]
        else:
            names += list(HOUR_LABELS)
            names += list(WEEKDAY_LABELS)
            names += list(MONTH_LABELS)
        if self.include_precip:
            names.append(PRECIP_LABEL)
        return tuple(names)

    @property
    def width(self) -> int:
        base = 41 if self.coding == REFERENCE_CELL else 43
        return base + (1 if self.include_precip else 0)

    def precip_value(self, obs: HourlyObservation) -> float:
        if self.precip_mode == PRECIP_INDICATOR:
            return float(obs.precip_indicator)
        return float(obs.precip_in)

    def encode_parts(self, hour: int, weekday: int, month: int, precip: float) -> np.ndarray:
        """Encode raw slot parts; shared by observation encoding and ranking."""
        if not 0 <= hour <= 23:
            raise DataError(f"hour {hour} out of range 0..23")
        if not 0 <= weekday <= 6:
            raise DataError(f"weekday index {weekday} out of range 0..6")
        if not 1 <= month <= 12:
            raise DataError(f"month {month} out of range 1..12")
        x = np.zeros(self.width)
        if self.coding == REFERENCE_CELL:
            ref_h, ref_w, ref_m = self.reference
            x[0] = 1.0
            pos = 1
            if hour != ref_h:
                x[pos + hour - (1 if hour > ref_h else 0)] = 1.0
            pos += 23
            if weekday != ref_w:
                x[pos + weekday - (1 if weekday > ref_w else 0)] = 1.0
            pos += 6
            if month != ref_m:
                x[pos + (month - 1) - (1 if month > ref_m else 0)] = 1.0
            pos += 11
        else:
            x[hour] = 1.0
            x[24 + weekday] = 1.0
            x[31 + month - 1] = 1.0
            pos = 43
        if self.include_precip:
            x[pos] = precip
        return x


def encode(obs: HourlyObservation, schema: FeatureSchema) -> np.ndarray:
    return schema.encode_parts(obs.hour, obs.weekday, obs.month, schema.precip_value(obs))


def schema_from_column_names(names: Sequence[str]) -> FeatureSchema:
    """Recover the schema producing exactly these columns (standard layouts)."""
    names = tuple(names)
    for coding in (REFERENCE_CELL, FULL_DUMMY):
        for include_precip in (True, False):
            candidate = FeatureSchema(coding=coding, include_precip=include_precip)
            if candidate.column_names == names:
                return candidate
    raise DataError("column names do not match any standard feature schema")


@dataclass
class DesignMatrix:
    x: np.ndarray
    y: np.ndarray
    column_names: tuple[str, ...]
    schema: FeatureSchema

    @property
    def n(self) -> int:
        return int(self.x.shape[0])

    @property
    def p(self) -> int:
        return int(self.x.shape[1])

    def subset(self, idx: np.ndarray) -> "DesignMatrix":
        return DesignMatrix(self.x[idx], self.y[idx], self.column_names, self.schema)


def build_design(
    observations: Sequence[HourlyObservation], schema: FeatureSchema
) -> DesignMatrix:
    """Encode observations row-wise into a dense design matrix.

    Vectorized; row i equals encode(observations[i], schema) exactly.
    """
    if not observations:
        raise DataError("cannot build a design matrix from zero observations")
    n = len(observations)
    hours = np.fromiter((o.hour for o in observations), dtype=np.intp, count=n)
    weekdays = np.fromiter((o.weekday for o in observations), dtype=np.intp, count=n)
    months = np.fromiter((o.month for o in observations), dtype=np.intp, count=n)
    y = np.fromiter((o.crash_count for o in observations), dtype=np.int64, count=n)
    if (y < 0).any():
        raise DataError("crash counts must be non-negative")
    if schema.precip_mode == PRECIP_INDICATOR:
        precip = np.fromiter((o.precip_indicator for o in observations), dtype=float, count=n)
    else:
        precip = np.fromiter((o.precip_in for o in observations), dtype=float, count=n)

    x = np.zeros((n, schema.width))
    rows = np.arange(n)
    if schema.coding == REFERENCE_CELL:
        ref_h, ref_w, ref_m = schema.reference
        x[:, 0] = 1.0
        hmask = hours != ref_h
        hcol = 1 + hours - (hours > ref_h)
        x[rows[hmask], hcol[hmask]] = 1.0
        wmask = weekdays != ref_w
        wcol = 24 + weekdays - (weekdays > ref_w)
        x[rows[wmask], wcol[wmask]] = 1.0
        mmask = months != ref_m
        mcol = 30 + (months - 1) - (months > ref_m)
        x[rows[mmask], mcol[mmask]] = 1.0
        pos = 41
    else:
        x[rows, hours] = 1.0
        x[rows, 24 + weekdays] = 1.0
        x[rows, 31 + months - 1] = 1.0
        pos = 43
    if schema.include_precip:
        x[:, pos] = precip
    return DesignMatrix(x=x, y=y, column_names=schema.column_names, schema=schema)


SPLIT_RANDOM = "random"
SPLIT_CHRONO = "chrono"


def split_indices(
    n: int,
    test_fraction: float,
    seed: int,
    method: str = SPLIT_RANDOM,
) -> tuple[np.ndarray, np.ndarray]:
    """(train, test) row indices; |test| = round(n * fraction), exact partition."""
    if not 0.0 < test_fraction < 1.0:
        raise DataError(f"test fraction must be in (0, 1), got {test_fraction}")
    if n < 2:
        raise DataError("need at least 2 rows to split")
    k = int(round(n * test_fraction))
    k = min(max(k, 1), n - 1)
    if method == SPLIT_RANDOM:
        perm = np.random.default_rng(seed).permutation(n)
        return perm[k:], perm[:k]
    if method == SPLIT_CHRONO:
        idx = np.arange(n)
        return idx[: n - k], idx[n - k:]
    raise DataError(f"unknown split method {method!r}")


def split(
    matrix: DesignMatrix,
    test_fraction: float,
    seed: int,
    method: str = SPLIT_RANDOM,
) -> tuple[DesignMatrix, DesignMatrix]:
    """Deterministic train/test partition of the design rows."""
    train_idx, test_idx = split_indices(matrix.n, test_fraction, seed, method)
    return matrix.subset(train_idx), matrix.subset(test_idx)


def design_to_csv(matrix: DesignMatrix, sink: Union[str, Path, IO[str]]) -> None:
    """Export with header = column_names + response."""
    out, should_close = (open(sink, "w", encoding="utf-8", newline=""), True) \
        if isinstance(sink, (str, Path)) else (sink, False)
    try:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(list(matrix.column_names) + ["response"])
        for i in range(matrix.n):
            writer.writerow([format(v, "g") for v in matrix.x[i]] + [int(matrix.y[i])])
    finally:
        if should_close:
            out.close()
