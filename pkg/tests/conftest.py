import sys
from datetime import date
from pathlib import Path

import numpy as np
import pytest

SRC = Path(__file__).resolve().parents[1] / "src"
if str(SRC) not in sys.path:
    sys.path.insert(0, str(SRC))

from crashcount.features import FeatureSchema, build_design  # noqa: E402
from crashcount.ingest import DateRange, HourlyObservation  # noqa: E402
from crashcount.synth import generate_calibrated_grid  # noqa: E402

ONE_YEAR = DateRange(date(2016, 1, 1), date(2016, 12, 31))


def make_obs(hour=0, weekday=0, month=1, crash_count=0, precip_in=0.0, d=None):
    """Observation with arbitrary slot fields (date only used by ingest)."""
    return HourlyObservation(
        date=d or date(2016, 1, 1),
        hour=hour,
        weekday=weekday,
        month=month,
        crash_count=crash_count,
        precip_in=precip_in,
    )


def intercept_design(y):
    """Intercept-only design around integer responses."""
    import crashcount.features as features

    y = np.asarray(y, dtype=np.int64)
    schema = FeatureSchema()
    return features.DesignMatrix(
        x=np.ones((y.size, 1)),
        y=y,
        column_names=("Intercept",),
        schema=schema,
    )


def design_from_xy(x, y):
    import crashcount.features as features

    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    names = tuple(f"x{i}" for i in range(x.shape[1]))
    return features.DesignMatrix(x=x, y=y, column_names=names, schema=FeatureSchema())


@pytest.fixture(scope="session")
def year_grid():
    grid, truth = generate_calibrated_grid(seed=7, date_range=ONE_YEAR)
    return grid, truth


@pytest.fixture(scope="session")
def year_design(year_grid):
    grid, _ = year_grid
    return build_design(grid, FeatureSchema())
