"""Synthetic data generators calibrated against the reference table.

The calibrated grid draws NB2 counts from the reference table's per-level
coefficients. Full-dummy coefficient vectors are only identified up to
constant block shifts, so the generator treats the published values as
within-category contrasts and sets the overall scale by targeting a mean
expected count per cell (default 20, of the order of the source data's
grouped cells); the dispersion default keeps the refit test RMSE in the
published 2..6 bracket while leaving overdispersion clearly detectable.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from datetime import datetime, timedelta
from pathlib import Path
from typing import IO, Optional, Union

import numpy as np

from .ingest import (
    DEFAULT_RANGE,
    DateRange,
    HourlyObservation,
)
from .reference import reference_coefficients

DEFAULT_MEAN_COUNT = 20.0
DEFAULT_GEN_ALPHA = 0.008
DEFAULT_PRECIP_PROB = 0.35


@dataclass(frozen=True)
class GridTruth:
    """Generator-side ground truth for a synthetic grid."""

    coefficients: dict[str, float]
    scale_offset: float
    alpha: float
    mu: np.ndarray  # per-cell expected counts, grid order


def _nb2_counts(rng: np.random.Generator, mu: np.ndarray, alpha: float) -> np.ndarray:
    if alpha <= 1e-12:
        return rng.poisson(mu)
    lam = rng.gamma(shape=1.0 / alpha, scale=alpha * mu)
    return rng.poisson(lam)


def generate_calibrated_grid(
    seed: int,
    date_range: DateRange = DEFAULT_RANGE,
    mean_count: float = DEFAULT_MEAN_COUNT,
    alpha: float = DEFAULT_GEN_ALPHA,
    precip_prob: float = DEFAULT_PRECIP_PROB,
    coefficients: Optional[dict[str, float]] = None,
) -> tuple[list[HourlyObservation], GridTruth]:
    """NB2 grid whose linear predictor follows the reference contrasts."""
    coef = dict(coefficients if coefficients is not None else reference_coefficients())
    rng = np.random.default_rng(np.random.SeedSequence((int(seed), 0xCA11B)))
    dates = list(date_range.iter_dates())
    n_days = len(dates)
    wet = rng.random(n_days) < precip_prob
    # wet-day precipitation in inches; only the indicator feeds the default model
    inches = np.where(wet, np.round(rng.gamma(shape=1.2, scale=0.35, size=n_days) + 0.01, 2), 0.0)

    hour_c = np.array([coef[f"Hour_{h}"] for h in range(24)])
    wd_c = np.array([coef[w] for w in ("MO", "TU", "WE", "TH", "FR", "SA", "SU")])
    mo_c = np.array(
        [coef[m] for m in ("JAN", "FEB", "MAR", "APR", "MAY", "JUN",
                           "JUL", "AUG", "SEP", "OCT", "NOV", "DEC")]
    )
    p_c = coef.get("Precipitation", 0.0)

    day_wd = np.array([d.weekday() for d in dates])
    day_mo = np.array([d.month - 1 for d in dates])
    eta = (
        hour_c[None, :]
        + wd_c[day_wd][:, None]
        + mo_c[day_mo][:, None]
        + (p_c * wet.astype(float))[:, None]
    ).ravel()
    offset = math.log(mean_count) - math.log(float(np.exp(eta).mean()))
    mu = np.exp(eta + offset)
    counts = _nb2_counts(rng, mu, alpha)

    grid: list[HourlyObservation] = []
    i = 0
    for di, d in enumerate(dates):
        for hour in range(24):
            grid.append(
                HourlyObservation(
                    date=d,
                    hour=hour,
                    weekday=d.weekday(),
                    month=d.month,
                    crash_count=int(counts[i]),
                    precip_in=float(inches[di]),
                )
            )
            i += 1
    return grid, GridTruth(coefficients=coef, scale_offset=offset, alpha=alpha, mu=mu)


def generate_precip_only_grid(
    seed: int,
    date_range: DateRange = DEFAULT_RANGE,
    base_count: float = 6.0,
    precip_multiplier: float = 2.0,
    alpha: float = 0.01,
    precip_prob: float = 0.35,
) -> tuple[list[HourlyObservation], GridTruth]:
    """Grid where precipitation is the only signal (hour/day/month flat)."""
    coef = {name: 0.0 for name in reference_coefficients()}
    coef["Precipitation"] = math.log(precip_multiplier)
    grid, truth = generate_calibrated_grid(
        seed,
        date_range=date_range,
        mean_count=base_count * (1 + (precip_multiplier - 1) * precip_prob),
        alpha=alpha,
        precip_prob=precip_prob,
        coefficients=coef,
    )
    return grid, truth


def synthetic_crash_csv(
    sink: Union[str, Path, IO[str]],
    n_events: int,
    seed: int,
    date_range: DateRange = DEFAULT_RANGE,
) -> None:
    """Crash CSV with n uniformly scattered events (OBJECTID, REPORTDATE)."""
    rng = np.random.default_rng(np.random.SeedSequence((int(seed), 0xC4A5)))
    start = datetime(date_range.start.year, date_range.start.month, date_range.start.day)
    total_minutes = date_range.days * 24 * 60
    offsets = np.sort(rng.integers(0, total_minutes, size=n_events))
    out, should_close = (open(sink, "w", encoding="utf-8", newline=""), True) \
        if isinstance(sink, (str, Path)) else (sink, False)
    try:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(("OBJECTID", "REPORTDATE"))
        for i, mins in enumerate(offsets):
            ts = start + timedelta(minutes=int(mins))
            writer.writerow((f"C{i + 1:07d}", ts.strftime("%Y/%m/%d %H:%M:%S")))
    finally:
        if should_close:
            out.close()


def synthetic_weather_csv(
    sink: Union[str, Path, IO[str]],
    seed: int,
    date_range: DateRange = DEFAULT_RANGE,
    precip_prob: float = DEFAULT_PRECIP_PROB,
    dst_duplicates: bool = True,
) -> None:
    """Daily weather CSV (Datetime, Precipitation, Conditions).

    With dst_duplicates, early-November Sundays gain a doubled row with a
    smaller precipitation value, mimicking the daylight-saving-end artifact
    the parser must resolve.
    """
    rng = np.random.default_rng(np.random.SeedSequence((int(seed), 0x5EA7)))
    out, should_close = (open(sink, "w", encoding="utf-8", newline=""), True) \
        if isinstance(sink, (str, Path)) else (sink, False)
    try:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(("Datetime", "Precipitation", "Conditions"))
        for d in date_range.iter_dates():
            wet = rng.random() < precip_prob
            precip = round(float(rng.gamma(shape=1.2, scale=0.35)) + 0.01, 2) if wet else 0.0
            conditions = "Rain, Overcast" if precip > 0 else "Clear"
            writer.writerow((d.isoformat(), f"{precip:.2f}", conditions))
            is_dst_end = d.month == 11 and d.weekday() == 6 and d.day <= 7
            if dst_duplicates and is_dst_end:
                writer.writerow((d.isoformat(), "0.00", conditions))
    finally:
        if should_close:
            out.close()
