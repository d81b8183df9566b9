"""Reference coefficient table for the DC hourly crash-count model.

This is the published all-levels (full-dummy) coefficient table for the
2016-2019 Washington, DC study period: per-level log-link coefficients with
their exponentials, implied percent changes, Wald p-scores and observed
crash totals. It drives two things here: arithmetic cross-checks of the
summary-table math, and calibration of the synthetic grids the test suite
and demo scripts train against.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .features import FULL_DUMMY, FeatureSchema


@dataclass(frozen=True)
class ReferenceRow:
    name: str
    category: str
    coefficient: float
    exp_coef: float
    percent_change: float
    p_score: float
    crash_total: Optional[int]
    crash_share_pct: float


def _hour(name, c, e, pct, p, total, share):
    return ReferenceRow(name, "hour", c, e, pct, p, total, share)


def _wd(name, c, e, pct, p, total, share):
    return ReferenceRow(name, "weekday", c, e, pct, p, total, share)


def _mo(name, c, e, pct, p, total, share):
    return ReferenceRow(name, "month", c, e, pct, p, total, share)


REFERENCE_ROWS: tuple[ReferenceRow, ...] = (
    _hour("Hour_0", 0.420, 1.522, 52.24, 0.000, 6222, 5.85),
    _hour("Hour_1", 0.455, 1.575, 57.54, 0.000, 6338, 5.96),
    _hour("Hour_2", 0.492, 1.635, 63.51, 0.000, 6743, 6.34),
    _hour("Hour_3", 0.353, 1.423, 42.29, 0.000, 5681, 5.34),
    _hour("Hour_4", 0.169, 1.184, 18.45, 0.000, 4701, 4.42),
    _hour("Hour_5", -0.024, 0.976, -2.38, 0.000, 3627, 3.41),
    _hour("Hour_6", -0.309, 0.734, -26.57, 0.198, 2733, 2.57),
    _hour("Hour_7", -0.428, 0.652, -34.81, 0.000, 2320, 2.18),
    _hour("Hour_8", -0.443, 0.642, -35.79, 0.000, 2293, 2.15),
    _hour("Hour_9", -0.348, 0.706, -29.40, 0.000, 2446, 2.30),
    _hour("Hour_10", -0.453, 0.636, -36.42, 0.000, 2276, 2.14),
    _hour("Hour_11", -0.465, 0.628, -37.21, 0.000, 2250, 2.11),
    _hour("Hour_12", -0.385, 0.681, -31.93, 0.000, 2504, 2.35),
    _hour("Hour_13", -0.028, 0.973, -2.74, 0.000, 3694, 3.47),
    _hour("Hour_14", 0.246, 1.279, 27.86, 0.122, 5030, 4.73),
    _hour("Hour_15", 0.323, 1.381, 38.14, 0.000, 5469, 5.14),
    _hour("Hour_16", 0.289, 1.334, 33.44, 0.000, 5259, 4.94),
    _hour("Hour_17", 0.296, 1.344, 34.38, 0.000, 5336, 5.01),
    _hour("Hour_18", 0.346, 1.413, 41.30, 0.000, 5651, 5.31),
    _hour("Hour_19", 0.254, 1.289, 28.89, 0.000, 5020, 4.72),
    _hour("Hour_20", 0.055, 1.056, 5.60, 0.000, 4069, 3.82),
    _hour("Hour_21", 0.240, 1.271, 27.07, 0.002, 4950, 4.65),
    _hour("Hour_22", 0.366, 1.441, 44.14, 0.000, 5723, 5.38),
    _hour("Hour_23", 0.400, 1.492, 49.24, 0.000, 6087, 5.72),
    ReferenceRow("Precipitation", "precip", 0.027, 1.027, 2.73, 0.000, None, 0.00),
    _wd("MO", 0.245, 1.277, 27.70, 0.000, 15321, 14.40),
    _wd("TU", 0.259, 1.296, 29.56, 0.000, 16975, 15.95),
    _wd("WE", 0.269, 1.309, 30.89, 0.000, 14707, 13.82),
    _wd("TH", 0.244, 1.277, 27.69, 0.000, 14644, 13.76),
    _wd("FR", 0.283, 1.328, 32.76, 0.000, 20999, 19.73),
    _wd("SA", 0.259, 1.296, 29.60, 0.000, 13683, 12.86),
    _wd("SU", 0.259, 1.295, 29.51, 0.000, 10093, 9.48),
    _mo("JAN", 0.042, 1.043, 4.31, 0.000, 7957, 7.48),
    _mo("FEB", 0.005, 1.005, 0.45, 0.000, 7311, 6.87),
    _mo("MAR", 0.155, 1.167, 16.71, 0.720, 9066, 8.52),
    _mo("APR", 0.192, 1.212, 21.22, 0.000, 9115, 8.56),
    _mo("MAY", 0.167, 1.182, 18.20, 0.000, 9774, 9.18),
    _mo("JUN", 0.229, 1.257, 25.71, 0.000, 9458, 8.89),
    _mo("JUL", 0.163, 1.177, 17.66, 0.000, 9133, 8.58),
    _mo("AUG", 0.149, 1.161, 16.09, 0.000, 8793, 8.26),
    _mo("SEP", 0.215, 1.240, 23.99, 0.000, 9214, 8.66),
    _mo("OCT", 0.245, 1.278, 27.76, 0.000, 9573, 9.00),
    _mo("NOV", 0.157, 1.170, 17.05, 0.000, 8598, 8.08),
    _mo("DEC", 0.099, 1.105, 10.45, 0.000, 8430, 7.92),
)

NON_SIGNIFICANT_NAMES = ("Hour_6", "Hour_14", "MAR")


def reference_coefficients() -> dict[str, float]:
    return {r.name: r.coefficient for r in REFERENCE_ROWS}


def reference_full_dummy_beta() -> np.ndarray:
    """The table's coefficients as a full-dummy (44-column) beta vector."""
    schema = FeatureSchema(coding=FULL_DUMMY, include_precip=True)
    coef = reference_coefficients()
    return np.array([coef[name] for name in schema.column_names])


def rows_by_category(category: str) -> tuple[ReferenceRow, ...]:
    return tuple(r for r in REFERENCE_ROWS if r.category == category)


def top_reference_level(category: str) -> str:
    """The level with the largest published coefficient within a category."""
    rows = rows_by_category(category)
    return max(rows, key=lambda r: r.coefficient).name
