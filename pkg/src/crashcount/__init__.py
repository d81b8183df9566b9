"""Hourly crash-count modeling and commute-slot advisor for Washington, DC."""

from .errors import CrashCountError, DataError, NumericError
from .features import (
    FULL_DUMMY,
    REFERENCE_CELL,
    DesignMatrix,
    FeatureSchema,
    build_design,
    encode,
    split,
)
from .forest import (
    ForestModel,
    ForestParams,
    estimator_sweep,
    evaluate,
    fit_forest,
    fit_tree,
    predict_forest,
)
from .glm import (
    DispersionReport,
    FittedGlm,
    FitOptions,
    dispersion_check,
    fit_negbin,
    fit_poisson,
    nb_log_likelihood,
    percent_change,
    predict_mean,
    rmse,
    wald_inference,
)
from .ingest import (
    CrashRecord,
    DailyWeather,
    DateRange,
    HourlyObservation,
    build_hourly_grid,
    derive_time_parts,
    parse_crash_csv,
    parse_weather_csv,
)
from .advisor import (
    CoefficientRow,
    RankedSlot,
    Slot,
    SlotQuery,
    load_model,
    rank_slots,
    save_model,
    summarize,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
