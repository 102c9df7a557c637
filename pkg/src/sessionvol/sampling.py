"""Resampling of session ticks onto a Δ-minute grid and intraday log-returns.

Grid prices use previous-tick (last observation carried forward) sampling,
anchored at the session open.  When Δ does not divide the session length the
session close is appended so the grid returns telescope to the full session
return.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .market_data import SessionSlice


class DeltaTooLarge(DataError):
    pass


class EmptySlice(DataError):
    pass


@dataclass(eq=False)
class GridPrices:
    """Previous-tick prices at open, open+Δ, ..., and the session close."""

    delta_minutes: int
    grid_times: np.ndarray  # datetime64[ms], strictly increasing
    prices: np.ndarray  # float64, > 0
    date: np.datetime64
    label: str

    def __len__(self) -> int:
        return len(self.grid_times)


@dataclass(eq=False)
class ReturnSeries:
    """Log-returns between consecutive grid prices."""

    returns: np.ndarray
    delta_minutes: int
    date: np.datetime64
    label: str

    @property
    def n(self) -> int:
        return len(self.returns)


def grid_offsets(session_minutes: int, delta_minutes: int) -> np.ndarray:
    """Offsets from session open, in ms: iΔ for i=0..⌊T/Δ⌋ plus T if Δ∤T."""
    steps = session_minutes // delta_minutes
    offs = np.arange(steps + 1, dtype="int64") * (delta_minutes * 60_000)
    if session_minutes % delta_minutes != 0:
        offs = np.append(offs, session_minutes * 60_000)
    return offs.astype("timedelta64[ms]")


def n_returns_for(session_minutes: int, delta_minutes: int) -> int:
    """Number of Δ-returns in a session of the given length."""
    if session_minutes % delta_minutes == 0:
        return session_minutes // delta_minutes
    return session_minutes // delta_minutes + 1


def sample_grid_prices(sl: SessionSlice, delta_minutes: int) -> GridPrices:
    if len(sl) == 0:
        raise EmptySlice(f"{sl.date} {sl.label}: no ticks")
    T = sl.length_minutes
    if delta_minutes < 1:
        raise DeltaTooLarge(f"delta must be >= 1 minute, got {delta_minutes}")
    if delta_minutes >= T:
        raise DeltaTooLarge(f"delta {delta_minutes} >= session length {T} minutes")
    grid = sl.window_open + grid_offsets(T, delta_minutes)
    idx = np.searchsorted(sl.times, grid, side="right") - 1
    # Before the first tick there is no previous observation; use the first.
    np.clip(idx, 0, None, out=idx)
    return GridPrices(
        delta_minutes=delta_minutes,
        grid_times=grid,
        prices=sl.prices[idx],
        date=sl.date,
        label=sl.label,
    )


def intraday_returns(grid: GridPrices) -> ReturnSeries:
    returns = np.diff(np.log(grid.prices))
    return ReturnSeries(
        returns=returns,
        delta_minutes=grid.delta_minutes,
        date=grid.date,
        label=grid.label,
    )
