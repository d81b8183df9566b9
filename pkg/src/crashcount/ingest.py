"""Crash and weather CSV ingestion and the zero-filled hourly grid.

Timestamps are treated as already-local civil time (the DC feed reports
local clock time); no timezone conversion happens anywhere. The grid is
complete by construction: one row per (date, hour) in the study range,
including hours with zero crashes.
"""

from __future__ import annotations

import csv
import io
import re
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta
from pathlib import Path
from typing import IO, Iterable, Iterator, Union

from .errors import DataError

WEEKDAY_LABELS = ("MO", "TU", "WE", "TH", "FR", "SA", "SU")
MONTH_LABELS = (
    "JAN", "FEB", "MAR", "APR", "MAY", "JUN",
    "JUL", "AUG", "SEP", "OCT", "NOV", "DEC",
)

DEFAULT_CRASH_ID_COLUMN = "OBJECTID"
DEFAULT_CRASH_TS_COLUMN = "REPORTDATE"
DEFAULT_WEATHER_DATE_COLUMN = "Datetime"
DEFAULT_WEATHER_PRECIP_COLUMN = "Precipitation"
DEFAULT_WEATHER_CONDITIONS_COLUMN = "Conditions"

Source = Union[str, Path, IO[bytes], IO[str]]


@dataclass(frozen=True)
class DateRange:
    """Inclusive civil date interval."""

    start: date
    end: date

    def __post_init__(self) -> None:
        if self.end < self.start:
            raise DataError(f"date range end {self.end} precedes start {self.start}")

    @property
    def days(self) -> int:
        return (self.end - self.start).days + 1

    def __contains__(self, d: date) -> bool:
        return self.start <= d <= self.end

    def iter_dates(self) -> Iterator[date]:
        d = self.start
        one = timedelta(days=1)
        while d <= self.end:
            yield d
            d += one


DEFAULT_RANGE = DateRange(date(2016, 1, 1), date(2019, 12, 31))


@dataclass(frozen=True)
class CrashRecord:
    id: str
    reported_at: datetime


@dataclass(frozen=True)
class DailyWeather:
    date: date
    precipitation_in: float
    conditions: str = ""

    @property
    def precip_indicator(self) -> int:
        return 1 if self.precipitation_in > 0 else 0


@dataclass(frozen=True)
class HourlyObservation:
    """One (date, hour) grid cell; the regression row before encoding."""

    date: date
    hour: int
    weekday: int  # 0 = Monday .. 6 = Sunday
    month: int  # 1..12
    crash_count: int
    precip_in: float

    @property
    def precip_indicator(self) -> int:
        return 1 if self.precip_in > 0 else 0


@dataclass
class CrashParseResult:
    records: list[CrashRecord] = field(default_factory=list)
    duplicate_ids: int = 0
    unparseable_timestamps: int = 0
    out_of_range: int = 0
    blank_ids: int = 0


@dataclass
class WeatherParseResult:
    records: list[DailyWeather] = field(default_factory=list)
    duplicate_dates_resolved: int = 0
    missing_precipitation: int = 0


def _open_text(source: Source) -> tuple[IO[str], bool]:
    """Return (text stream, should_close)."""
    if isinstance(source, (str, Path)):
        return open(source, "r", encoding="utf-8", newline=""), True
    if isinstance(source, io.TextIOBase):
        return source, False
    # binary stream
    return io.TextIOWrapper(source, encoding="utf-8", newline=""), False


_TZ_OFFSET = re.compile(r"[+-]\d{2}(:?\d{2})?$")


def parse_timestamp(raw: str) -> datetime | None:
    """Parse an ISO-8601-ish or 'YYYY/MM/DD HH:MM:SS' timestamp.

    Any UTC offset in the text is stripped, not applied: the clock fields
    are taken as local civil time. Returns None when unparseable.
    """
    s = raw.strip().replace("/", "-")
    if not s:
        return None
    if s.endswith(("Z", "z")):
        s = s[:-1].strip()
    m = _TZ_OFFSET.search(s)
    # a trailing +HH[:MM] is an offset only after a time; in a bare date the
    # final -DD would false-match
    if m and ":" in s[: m.start()]:
        s = s[: m.start()].strip()
    try:
        dt = datetime.fromisoformat(s)
    except ValueError:
        for fmt in ("%Y-%m-%d %H:%M:%S", "%Y-%m-%d %H:%M", "%Y-%m-%d"):
            try:
                dt = datetime.strptime(s, fmt)
                break
            except ValueError:
                continue
        else:
            return None
    return dt.replace(tzinfo=None)


def derive_time_parts(ts: datetime) -> tuple[date, int, int, int]:
    """(date, hour, weekday, month) of a civil timestamp; weekday 0=Monday."""
    d = ts.date()
    return d, ts.hour, d.weekday(), d.month


def parse_crash_csv(
    source: Source,
    date_range: DateRange = DEFAULT_RANGE,
    id_column: str = DEFAULT_CRASH_ID_COLUMN,
    timestamp_column: str = DEFAULT_CRASH_TS_COLUMN,
) -> CrashParseResult:
    """Stream a crash CSV into deduplicated, range-filtered records.

    Duplicate ids keep the first occurrence; unparseable timestamps and
    out-of-range rows are counted and skipped, never coerced.
    """
    stream, should_close = _open_text(source)
    try:
        reader = csv.DictReader(stream)
        header = reader.fieldnames
        if header is None:
            raise DataError("crash CSV is empty (no header row)")
        for col in (id_column, timestamp_column):
            if col not in header:
                raise DataError(f"crash CSV missing required column {col!r}")
        result = CrashParseResult()
        seen: set[str] = set()
        for row in reader:
            rid = (row.get(id_column) or "").strip()
            if not rid:
                result.blank_ids += 1
                continue
            ts = parse_timestamp(row.get(timestamp_column) or "")
            if ts is None:
                result.unparseable_timestamps += 1
                continue
            if ts.date() not in date_range:
                result.out_of_range += 1
                continue
            if rid in seen:
                result.duplicate_ids += 1
                continue
            seen.add(rid)
            result.records.append(CrashRecord(id=rid, reported_at=ts))
        return result
    finally:
        if should_close:
            stream.close()


def parse_weather_csv(
    source: Source,
    date_range: DateRange = DEFAULT_RANGE,
    date_column: str = DEFAULT_WEATHER_DATE_COLUMN,
    precipitation_column: str = DEFAULT_WEATHER_PRECIP_COLUMN,
    conditions_column: str = DEFAULT_WEATHER_CONDITIONS_COLUMN,
) -> WeatherParseResult:
    """Parse daily weather, resolving DST-end duplicate dates.

    Duplicates keep the record with the larger precipitation (ties: first
    occurrence). Missing precipitation becomes 0 with a counted warning.
    A date gap inside the range is a hard error: the grid needs full cover.
    """
    stream, should_close = _open_text(source)
    try:
        reader = csv.DictReader(stream)
        header = reader.fieldnames
        if header is None:
            raise DataError("weather CSV is empty (no header row)")
        for col in (date_column, precipitation_column):
            if col not in header:
                raise DataError(f"weather CSV missing required column {col!r}")
        has_conditions = conditions_column in header

        result = WeatherParseResult()
        by_date: dict[date, DailyWeather] = {}
        for row in reader:
            raw_date = (row.get(date_column) or "").strip()
            ts = parse_timestamp(raw_date)
            if ts is None:
                raise DataError(f"weather CSV has unparseable date {raw_date!r}")
            d = ts.date()
            if d not in date_range:
                continue
            raw_precip = (row.get(precipitation_column) or "").strip()
            if raw_precip == "":
                precip = 0.0
                result.missing_precipitation += 1
            else:
                try:
                    precip = float(raw_precip)
                except ValueError:
                    raise DataError(
                        f"weather CSV has non-numeric precipitation {raw_precip!r} on {d}"
                    )
                if precip < 0:
                    raise DataError(f"negative precipitation {precip} on {d}")
            conditions = (row.get(conditions_column) or "").strip() if has_conditions else ""
            rec = DailyWeather(date=d, precipitation_in=precip, conditions=conditions)
            prior = by_date.get(d)
            if prior is None:
                by_date[d] = rec
            else:
                result.duplicate_dates_resolved += 1
                if rec.precipitation_in > prior.precipitation_in:
                    by_date[d] = rec

        missing = [d for d in date_range.iter_dates() if d not in by_date]
        if missing:
            shown = ", ".join(str(d) for d in missing[:10])
            more = f" (+{len(missing) - 10} more)" if len(missing) > 10 else ""
            raise DataError(f"weather CSV missing {len(missing)} dates in range: {shown}{more}")

        result.records = [by_date[d] for d in date_range.iter_dates()]
        return result
    finally:
        if should_close:
            stream.close()


def build_hourly_grid(
    crashes: Iterable[CrashRecord],
    weather: Iterable[DailyWeather],
    date_range: DateRange = DEFAULT_RANGE,
) -> list[HourlyObservation]:
    """Fuse records into the complete days x 24 observation grid.

    Crash counts are conserved: the grid's total equals the number of
    input crash records (all of which must fall inside the range).
    """
    precip_by_date = {w.date: w.precipitation_in for w in weather}
    missing = [d for d in date_range.iter_dates() if d not in precip_by_date]
    if missing:
        shown = ", ".join(str(d) for d in missing[:10])
        raise DataError(f"weather does not cover {len(missing)} grid dates: {shown}")

    counts: dict[tuple[date, int], int] = {}
    for rec in crashes:
        d, hour, _, _ = derive_time_parts(rec.reported_at)
        if d not in date_range:
            raise DataError(f"crash {rec.id} dated {d} is outside the grid range")
        key = (d, hour)
        counts[key] = counts.get(key, 0) + 1

    grid: list[HourlyObservation] = []
    for d in date_range.iter_dates():
        weekday = d.weekday()
        month = d.month
        precip = precip_by_date[d]
        for hour in range(24):
            grid.append(
                HourlyObservation(
                    date=d,
                    hour=hour,
                    weekday=weekday,
                    month=month,
                    crash_count=counts.get((d, hour), 0),
                    precip_in=precip,
                )
            )
    return grid


GRID_CSV_HEADER = ("date", "hour", "weekday", "month", "crash_count", "precip")


def grid_to_csv(grid: Iterable[HourlyObservation], sink: Union[str, Path, IO[str]]) -> None:
    """Write the canonical grid CSV (precip column carries inches)."""
    out, should_close = (open(sink, "w", encoding="utf-8", newline=""), True) \
        if isinstance(sink, (str, Path)) else (sink, False)
    try:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(GRID_CSV_HEADER)
        for obs in grid:
            writer.writerow(
                (
                    obs.date.isoformat(),
                    obs.hour,
                    WEEKDAY_LABELS[obs.weekday],
                    obs.month,
                    obs.crash_count,
                    format(obs.precip_in, "g"),
                )
            )
    finally:
        if should_close:
            out.close()


def grid_from_csv(source: Source) -> list[HourlyObservation]:
    """Read a grid CSV produced by grid_to_csv, revalidating invariants."""
    stream, should_close = _open_text(source)
    try:
        reader = csv.DictReader(stream)
        if reader.fieldnames is None or set(GRID_CSV_HEADER) - set(reader.fieldnames):
            raise DataError(f"grid CSV must have columns {','.join(GRID_CSV_HEADER)}")
        grid: list[HourlyObservation] = []
        seen: set[tuple[date, int]] = set()
        for row in reader:
            d = date.fromisoformat(row["date"])
            hour = int(row["hour"])
            weekday = WEEKDAY_LABELS.index(row["weekday"])
            month = int(row["month"])
            if not 0 <= hour <= 23:
                raise DataError(f"grid hour {hour} out of range on {d}")
            if weekday != d.weekday() or month != d.month:
                raise DataError(f"grid weekday/month inconsistent with date {d}")
            key = (d, hour)
            if key in seen:
                raise DataError(f"duplicate grid cell {d} hour {hour}")
            seen.add(key)
            grid.append(
                HourlyObservation(
                    date=d,
                    hour=hour,
                    weekday=weekday,
                    month=month,
                    crash_count=int(row["crash_count"]),
                    precip_in=float(row["precip"]),
                )
            )
        if not grid:
            raise DataError("grid CSV has no rows")
        return grid
    finally:
        if should_close:
            stream.close()
