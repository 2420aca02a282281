"""Time epochs on the UTC and TDB scales, counted in days from J2000.0.

An epoch's ``days`` is read on its own scale: ``Epoch(UTC, 0.0)`` is
2000-01-01T12:00:00 UTC and ``Epoch(TDB, 0.0)`` is 2000-01-01T12:00:00 TDB,
about 64 s apart. Every UTC day is counted as 86400 s; leap seconds only
enter through :func:`convert_epoch`.

Conversion chain: UTC -> TAI (leap-second table) -> TT (TAI + 32.184 s)
-> TDB (TDB - TT = 0.001657 s * sin(6.240060 + 0.017202 * d), d in TT days
from J2000.0). The single-term approximation stays within 50 us of the full
series.
"""
import bisect
import math
import re
from dataclasses import dataclass
from datetime import date, datetime, timedelta, timezone
from enum import Enum
from functools import lru_cache
from pathlib import Path
from typing import List, Tuple, Union

from dateutil.parser import isoparse

from utils.errors import EpochOutOfLeapTable, InvalidCalendarDate, InvalidLeapSecond, InvalidValue

SECONDS_PER_DAY = 86400.0
TT_MINUS_TAI = 32.184
TDB_AMPLITUDE = 0.001657
TDB_PHASE = 6.240060
TDB_RATE = 0.017202
J2000 = datetime(2000, 1, 1, 12, 0, 0)
LEAP_TABLE_PATH = Path(__file__).parent / "data" / "leap_seconds.txt"


class TimeScale(str, Enum):
    UTC = "UTC"
    TDB = "TDB"


@dataclass(frozen=True)
class Epoch:
    scale: TimeScale
    days: float

    def __post_init__(self):
        if not isinstance(self.scale, TimeScale):
            try:
                object.__setattr__(self, "scale", TimeScale(self.scale))
            except ValueError:
                raise InvalidValue(f"unsupported time scale {self.scale!r}; expected UTC or TDB") from None
        if isinstance(self.days, bool) or not isinstance(self.days, (int, float)) or not math.isfinite(self.days):
            raise InvalidValue(f"epoch days must be a finite number, got {self.days!r}")
        object.__setattr__(self, "days", float(self.days))

    def to(self, scale: Union[str, TimeScale]) -> "Epoch":
        return convert_epoch(self, TimeScale(scale))

    def __str__(self) -> str:
        return format_epoch(self)


# ========== leap seconds ==========

@lru_cache(maxsize=1)
def leap_table() -> Tuple[Tuple[float, ...], Tuple[float, ...]]:
    """Return (start days on the UTC scale, TAI-UTC offsets) from the shipped table."""
    starts: List[float] = []
    offsets: List[float] = []
    with open(LEAP_TABLE_PATH, "r", encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            day_text, offset_text = line.split()
            start = datetime.strptime(day_text, "%Y-%m-%d")
            starts.append((start - J2000) / timedelta(days=1))
            offsets.append(float(offset_text))
    return tuple(starts), tuple(offsets)


def tai_minus_utc(utc_days: float) -> float:
    """Cumulative TAI-UTC offset in seconds at a UTC-scale day count."""
    starts, offsets = leap_table()
    index = bisect.bisect_right(starts, utc_days) - 1
    if index < 0:
        first = J2000 + timedelta(days=starts[0])
        raise EpochOutOfLeapTable(
            f"UTC epoch {utc_days!r} predates the leap-second table (first entry {first:%Y-%m-%d})"
        )
    return offsets[index]


def _is_leap_instant(day_start: datetime) -> bool:
    """True when a leap second was inserted at the end of the day before ``day_start``."""
    starts, offsets = leap_table()
    target = (day_start - J2000) / timedelta(days=1)
    for i, start in enumerate(starts[1:], start=1):
        if abs(start - target) < 1e-9:
            return offsets[i] > offsets[i - 1]
    return False


# ========== scale conversion ==========

def _tdb_minus_tt_seconds(tt_days: float) -> float:
    return TDB_AMPLITUDE * math.sin(TDB_PHASE + TDB_RATE * tt_days)


def _utc_to_tt(utc_days: float) -> float:
    return utc_days + (tai_minus_utc(utc_days) + TT_MINUS_TAI) / SECONDS_PER_DAY


def _tt_to_utc(tt_days: float) -> float:
    tai_days = tt_days - TT_MINUS_TAI / SECONDS_PER_DAY
    utc_days = tai_days - tai_minus_utc(tai_days) / SECONDS_PER_DAY
    for _ in range(2):
        utc_days = tai_days - tai_minus_utc(utc_days) / SECONDS_PER_DAY
    return utc_days


def _tt_to_tdb(tt_days: float) -> float:
    return tt_days + _tdb_minus_tt_seconds(tt_days) / SECONDS_PER_DAY


def _tdb_to_tt(tdb_days: float) -> float:
    tt_days = tdb_days
    for _ in range(3):
        tt_days = tdb_days - _tdb_minus_tt_seconds(tt_days) / SECONDS_PER_DAY
    return tt_days


def convert_epoch(e: Epoch, target_scale: TimeScale) -> Epoch:
    """Express ``e`` on ``target_scale``.

    Raises:
        EpochOutOfLeapTable: the UTC side of the conversion predates 1972-01-01.
    """
    target_scale = TimeScale(target_scale)
    if target_scale == e.scale:
        return e
    if e.scale == TimeScale.UTC:
        return Epoch(TimeScale.TDB, _tt_to_tdb(_utc_to_tt(e.days)))
    return Epoch(TimeScale.UTC, _tt_to_utc(_tdb_to_tt(e.days)))


# ========== calendar ==========

def epoch_from_calendar(year: int, month: int, day: int, hour: int = 0, minute: int = 0,
                        second: float = 0.0, scale: TimeScale = TimeScale.UTC) -> Epoch:
    """Build an epoch from proleptic Gregorian calendar fields read on ``scale``.

    ``second`` may be in [60, 61) only for UTC, on the last minute of a day
    that ends with a table-listed leap second.
    """
    scale = TimeScale(scale)
    try:
        start = datetime(int(year), int(month), int(day), int(hour), int(minute))
    except (TypeError, ValueError) as e:
        raise InvalidCalendarDate(f"invalid calendar date {year}-{month}-{day} {hour}:{minute}: {e}") from None
    if not 0 <= second < 61:
        raise InvalidCalendarDate(f"seconds out of range: {second!r}")
    if second >= 60:
        next_day = datetime(start.year, start.month, start.day) + timedelta(days=1)
        if scale != TimeScale.UTC or (hour, minute) != (23, 59) or not _is_leap_instant(next_day):
            raise InvalidLeapSecond(
                f"{start:%Y-%m-%dT%H:%M}:{second} is not a leap second on the {scale.value} scale"
            )
    whole_days = (start.date() - J2000.date()).days
    seconds_of_day = start.hour * 3600 + start.minute * 60 + second
    return Epoch(scale, whole_days + (seconds_of_day - SECONDS_PER_DAY / 2) / SECONDS_PER_DAY)


_LEAP_SECOND_TEXT = re.compile(r"(T\d{2}:\d{2}):60(?=(\.\d+)?(Z|[+-]\d{2}(:?\d{2})?)?$)")


def parse_epoch(text: str, scale: Union[str, TimeScale] = TimeScale.UTC) -> Epoch:
    """Parse ISO-8601 calendar text (``2000-01-01T12:00:00``) on ``scale``."""
    scale = TimeScale(scale)
    raw = text.strip()
    leap = bool(_LEAP_SECOND_TEXT.search(raw))
    if leap:
        raw = _LEAP_SECOND_TEXT.sub(r"\1:59", raw)
    try:
        parsed = isoparse(raw)
    except (ValueError, OverflowError) as e:
        raise InvalidCalendarDate(f"invalid ISO-8601 epoch '{text}': {e}") from None
    if parsed.tzinfo is not None:
        offset = parsed.utcoffset()
        if offset and scale != TimeScale.UTC:
            raise InvalidCalendarDate(f"timezone offsets are only meaningful on UTC: '{text}'")
        parsed = parsed.astimezone(timezone.utc).replace(tzinfo=None)
    second = parsed.second + parsed.microsecond / 1e6 + (1 if leap else 0)
    return epoch_from_calendar(parsed.year, parsed.month, parsed.day, parsed.hour, parsed.minute,
                               second, scale)


def epoch_from_datetime(value: Union[date, datetime], scale: TimeScale = TimeScale.UTC) -> Epoch:
    if isinstance(value, datetime):
        if value.tzinfo is not None:
            value = value.astimezone(timezone.utc).replace(tzinfo=None)
        return epoch_from_calendar(value.year, value.month, value.day, value.hour, value.minute,
                                   value.second + value.microsecond / 1e6, scale)
    return epoch_from_calendar(value.year, value.month, value.day, scale=scale)


def epoch_to_calendar(e: Epoch) -> datetime:
    """Calendar reading of ``e`` on its own scale, rounded to the microsecond."""
    return J2000 + timedelta(microseconds=round(e.days * SECONDS_PER_DAY * 1e6))


def format_epoch(e: Epoch, with_scale: bool = True) -> str:
    milliseconds = round(e.days * SECONDS_PER_DAY * 1000)
    moment = J2000 + timedelta(milliseconds=milliseconds)
    text = f"{moment:%Y-%m-%dT%H:%M:%S}.{moment.microsecond // 1000:03d}"
    return f"{text} {e.scale.value}" if with_scale else text


__all__ = [
    "TimeScale",
    "Epoch",
    "convert_epoch",
    "epoch_from_calendar",
    "epoch_from_datetime",
    "epoch_to_calendar",
    "parse_epoch",
    "format_epoch",
    "tai_minus_utc",
]
