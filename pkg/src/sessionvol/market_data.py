"""Tick data parsing and trading-session calendar slicing.

Tick CSV format: header ``timestamp,price``; timestamps either
``YYYY-MM-DDTHH:MM:SS.mmm`` in local exchange time or integer epoch
milliseconds (auto-detected per file).  Prices are strictly positive
decimals.  Timestamps must be strictly increasing.
"""

from __future__ import annotations

import datetime as dt
import io
import json
from dataclasses import dataclass, field
from typing import IO

import numpy as np
import pandas as pd

from .errors import ConfigError, DataError

DEFAULT_TZ = "Asia/Tokyo"

VALID_LABELS = ("MS", "AS")


class MalformedRow(DataError):
    pass


class NonMonotoneTimestamp(DataError):
    pass


class NonPositivePrice(DataError):
    pass


def _time_to_ms(t: dt.time) -> np.timedelta64:
    ms = ((t.hour * 60 + t.minute) * 60 + t.second) * 1000 + t.microsecond // 1000
    return np.timedelta64(ms, "ms")


@dataclass(frozen=True)
class SessionSpec:
    """One trading session window, e.g. MS 09:00-11:00."""

    label: str
    open_time: dt.time
    close_time: dt.time

    def __post_init__(self):
        if self.label not in VALID_LABELS:
            raise ConfigError(f"unknown session label {self.label!r}")
        if not self.open_time < self.close_time:
            raise ConfigError(f"session {self.label}: open must precede close")

    @property
    def length_minutes(self) -> int:
        o = self.open_time.hour * 60 + self.open_time.minute
        c = self.close_time.hour * 60 + self.close_time.minute
        return c - o

    @property
    def open_offset(self) -> np.timedelta64:
        return _time_to_ms(self.open_time)

    @property
    def close_offset(self) -> np.timedelta64:
        return _time_to_ms(self.close_time)


# Tokyo Stock Exchange sessions: morning 9:00-11:00, afternoon 12:30-15:00.
TSE_SESSIONS = (
    SessionSpec("MS", dt.time(9, 0), dt.time(11, 0)),
    SessionSpec("AS", dt.time(12, 30), dt.time(15, 0)),
)


@dataclass(eq=False)
class SessionCalendar:
    """Constant per-day session windows plus the set of trading days."""

    sessions: tuple[SessionSpec, ...]
    trading_days: np.ndarray  # datetime64[D], strictly increasing
    tz: str = DEFAULT_TZ

    def __post_init__(self):
        self.sessions = tuple(self.sessions)
        if not self.sessions:
            raise ConfigError("calendar needs at least one session")
        labels = [s.label for s in self.sessions]
        if len(set(labels)) != len(labels):
            raise ConfigError("duplicate session labels")
        for a, b in zip(self.sessions, self.sessions[1:]):
            if not a.close_time <= b.open_time:
                raise ConfigError("session windows overlap or are out of order")
        days = np.asarray(self.trading_days, dtype="datetime64[D]")
        if days.size and not np.all(np.diff(days).astype(int) > 0):
            raise ConfigError("trading days must be strictly increasing")
        self.trading_days = days

    def session(self, label: str) -> SessionSpec:
        for s in self.sessions:
            if s.label == label:
                return s
        raise ConfigError(f"no session labelled {label!r}")

    @classmethod
    def from_dict(cls, cfg: dict) -> "SessionCalendar":
        sessions = tuple(
            SessionSpec(
                s["label"],
                dt.time.fromisoformat(s["open"]),
                dt.time.fromisoformat(s["close"]),
            )
            for s in cfg.get("sessions", [])
        ) or TSE_SESSIONS
        days_cfg = cfg.get("days")
        if days_cfg is None:
            raise ConfigError("calendar config needs a 'days' entry")
        if isinstance(days_cfg, dict):
            start = np.datetime64(days_cfg["start"], "D")
            end = np.datetime64(days_cfg["end"], "D")
            days = np.arange(start, end + 1)
            if days_cfg.get("weekends_excluded", True):
                dow = (days.astype("datetime64[D]").view("int64") + 3) % 7  # 1970-01-01 is a Thursday
                days = days[dow < 5]
        else:
            days = np.array(sorted(np.datetime64(d, "D") for d in days_cfg))
        return cls(sessions=sessions, trading_days=days, tz=cfg.get("tz", DEFAULT_TZ))

    @classmethod
    def from_json(cls, path) -> "SessionCalendar":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def weekday_calendar(start: str, n_days: int, sessions=TSE_SESSIONS, tz=DEFAULT_TZ) -> SessionCalendar:
    """First n_days weekdays starting at `start` (inclusive)."""
    days = []
    d = np.datetime64(start, "D")
    while len(days) < n_days:
        if (d.view("int64") + 3) % 7 < 5:
            days.append(d)
        d = d + 1
    return SessionCalendar(sessions=sessions, trading_days=np.array(days), tz=tz)


@dataclass(eq=False)
class TickSeries:
    """Strictly time-ordered trade prices for one instrument."""

    times: np.ndarray  # datetime64[ms]
    prices: np.ndarray  # float64, > 0

    def __len__(self) -> int:
        return len(self.times)

    def equals(self, other: "TickSeries") -> bool:
        return np.array_equal(self.times, other.times) and np.array_equal(
            self.prices, other.prices
        )

    def to_csv(self, stream: IO[str]) -> None:
        stream.write("timestamp,price\n")
        stamps = np.datetime_as_string(self.times, unit="ms")
        for ts, p in zip(stamps, self.prices):
            stream.write(f"{ts},{p:.17g}\n")

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        self.to_csv(buf)
        return buf.getvalue()


def parse_ticks(source: str | IO[str], tz: str = DEFAULT_TZ) -> TickSeries:
    """Parse tick CSV content (string or text stream) into a TickSeries.

    Epoch-millisecond timestamps are converted to local exchange time
    using `tz`; local-time strings are taken as-is.
    """
    if isinstance(source, str):
        source = io.StringIO(source)
    try:
        df = pd.read_csv(source, dtype={"timestamp": str})
    except Exception as exc:
        raise MalformedRow(f"unreadable CSV: {exc}") from exc
    if list(df.columns) != ["timestamp", "price"]:
        raise MalformedRow(f"expected header 'timestamp,price', got {list(df.columns)}")
    if len(df) == 0:
        return TickSeries(
            times=np.empty(0, dtype="datetime64[ms]"), prices=np.empty(0, dtype=float)
        )

    raw_ts = df["timestamp"].astype(str)
    epoch_style = raw_ts.iloc[0].strip().isdigit()
    if epoch_style:
        ms = pd.to_numeric(raw_ts, errors="coerce")
        bad = ms.isna()
        if bad.any():
            i = int(bad.idxmax())
            raise MalformedRow(f"row {i}: bad epoch timestamp {raw_ts.iloc[i]!r}")
        stamped = pd.to_datetime(ms.astype("int64"), unit="ms", utc=True)
        stamped = stamped.dt.tz_convert(tz).dt.tz_localize(None)
    else:
        stamped = pd.to_datetime(raw_ts, format="ISO8601", errors="coerce")
        bad = stamped.isna()
        if bad.any():
            i = int(bad.idxmax())
            raise MalformedRow(f"row {i}: bad timestamp {raw_ts.iloc[i]!r}")
    times = stamped.to_numpy(dtype="datetime64[ms]")

    prices = pd.to_numeric(df["price"], errors="coerce")
    bad = prices.isna()
    if bad.any():
        i = int(bad.idxmax())
        raise MalformedRow(f"row {i}: bad price {df['price'].iloc[i]!r}")
    prices = prices.to_numpy(dtype=float)
    nonpos = ~(prices > 0) | ~np.isfinite(prices)
    if nonpos.any():
        i = int(np.argmax(nonpos))
        raise NonPositivePrice(f"row {i}: price {prices[i]} is not strictly positive")

    if len(times) > 1:
        steps = np.diff(times.view("int64"))
        if not np.all(steps > 0):
            i = int(np.argmax(steps <= 0)) + 1
            raise NonMonotoneTimestamp(
                f"row {i}: timestamp {np.datetime_as_string(times[i], unit='ms')} "
                "does not strictly increase"
            )
    return TickSeries(times=times, prices=prices)


def read_ticks(path, tz: str = DEFAULT_TZ) -> TickSeries:
    with open(path, newline="") as fh:
        return parse_ticks(fh, tz=tz)


@dataclass(eq=False)
class SessionSlice:
    """Ticks of one session on one trading day, window bounds inclusive."""

    date: np.datetime64  # datetime64[D]
    label: str
    times: np.ndarray
    prices: np.ndarray
    window_open: np.datetime64  # datetime64[ms]
    window_close: np.datetime64

    def __len__(self) -> int:
        return len(self.times)

    @property
    def open_price(self) -> float:
        return float(self.prices[0])

    @property
    def close_price(self) -> float:
        return float(self.prices[-1])

    @property
    def length_minutes(self) -> int:
        return int((self.window_close - self.window_open) / np.timedelta64(1, "m"))

    def to_tick_series(self) -> TickSeries:
        return TickSeries(times=self.times.copy(), prices=self.prices.copy())


def split_sessions(
    ticks: TickSeries, cal: SessionCalendar
) -> tuple[list[SessionSlice], list[np.datetime64]]:
    """Assign ticks to per-day session slices.

    Ticks in lunch/overnight gaps are excluded.  Returns the slices ordered
    by (date, session) plus the list of trading days that had no ticks in
    any session (reported, not fatal).
    """
    slices: list[SessionSlice] = []
    empty_days: list[np.datetime64] = []
    t = ticks.times
    for day in cal.trading_days:
        day_ms = day.astype("datetime64[ms]")
        day_slices = []
        for spec in cal.sessions:
            start = day_ms + spec.open_offset
            end = day_ms + spec.close_offset
            lo = int(np.searchsorted(t, start, side="left"))
            hi = int(np.searchsorted(t, end, side="right"))
            if hi > lo:
                day_slices.append(
                    SessionSlice(
                        date=day,
                        label=spec.label,
                        times=t[lo:hi],
                        prices=ticks.prices[lo:hi],
                        window_open=start,
                        window_close=end,
                    )
                )
        if day_slices:
            slices.extend(day_slices)
        else:
            empty_days.append(day)
    return slices, empty_days
