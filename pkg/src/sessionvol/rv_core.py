"""Per-session realized volatility, daily zone returns, and signature curves."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import IO, Iterable, Optional

import numpy as np

from .errors import DataError
from .market_data import SessionSlice
from .sampling import ReturnSeries


class MissingSession(DataError):
    pass


class NoData(DataError):
    pass


@dataclass(eq=False)
class RvRecord:
    date: np.datetime64
    session: str
    delta_minutes: int
    rv: float  # sum of squared log-returns, >= 0
    n_returns: int


def realized_volatility(rs: ReturnSeries) -> RvRecord:
    r = rs.returns
    return RvRecord(
        date=rs.date,
        session=rs.label,
        delta_minutes=rs.delta_minutes,
        rv=float(np.dot(r, r)),
        n_returns=rs.n,
    )


@dataclass(eq=False)
class ZoneReturns:
    """Close-over-open log returns per zone; sign is end-of-zone minus start.

    r_on is the overnight return into this day; None on the first day.
    """

    date: np.datetime64
    r_ms: float
    r_lb: float
    r_as: float
    r_on: Optional[float]


def zone_returns(
    ms: SessionSlice, as_: SessionSlice, prev_as_close: Optional[float] = None
) -> ZoneReturns:
    if ms is None or len(ms) == 0:
        raise MissingSession("morning session slice is empty")
    if as_ is None or len(as_) == 0:
        raise MissingSession("afternoon session slice is empty")
    o_ms, c_ms = np.log(ms.open_price), np.log(ms.close_price)
    o_as, c_as = np.log(as_.open_price), np.log(as_.close_price)
    r_on = None if prev_as_close is None else float(o_ms - np.log(prev_as_close))
    return ZoneReturns(
        date=ms.date,
        r_ms=float(c_ms - o_ms),
        r_lb=float(o_as - c_ms),
        r_as=float(c_as - o_as),
        r_on=r_on,
    )


def zone_return_table(slices: Iterable[SessionSlice]) -> list[ZoneReturns]:
    """Zone returns for every day that has both sessions, in date order.

    Days missing either session are skipped; the overnight return uses the
    most recent available afternoon close.
    """
    by_day: dict[np.datetime64, dict[str, SessionSlice]] = {}
    for sl in slices:
        by_day.setdefault(sl.date, {})[sl.label] = sl
    out: list[ZoneReturns] = []
    prev_close: Optional[float] = None
    for day in sorted(by_day):
        pair = by_day[day]
        if "MS" not in pair or "AS" not in pair:
            continue
        out.append(zone_returns(pair["MS"], pair["AS"], prev_as_close=prev_close))
        prev_close = pair["AS"].close_price
    return out


@dataclass(eq=False)
class SignatureCurve:
    """Mean realized volatility across days, per sampling interval Δ."""

    session: str
    deltas: np.ndarray  # int
    mean_rv: np.ndarray  # float, >= 0
    day_count: np.ndarray  # int


def signature_curve(
    records: Iterable[RvRecord], session: str, deltas: Iterable[int]
) -> SignatureCurve:
    deltas = list(deltas)
    sums = {d: 0.0 for d in deltas}
    counts = {d: 0 for d in deltas}
    # Deterministic reduction order: sort by date before summing.
    for rec in sorted(
        (r for r in records if r.session == session and r.delta_minutes in sums),
        key=lambda r: (r.date, r.delta_minutes),
    ):
        sums[rec.delta_minutes] += rec.rv
        counts[rec.delta_minutes] += 1
    for d in deltas:
        if counts[d] == 0:
            raise NoData(f"no RV records for session {session} at delta={d}")
    return SignatureCurve(
        session=session,
        deltas=np.array(deltas, dtype=int),
        mean_rv=np.array([sums[d] / counts[d] for d in deltas]),
        day_count=np.array([counts[d] for d in deltas], dtype=int),
    )


# --- CSV interfaces -------------------------------------------------------

def _fmt(x: float) -> str:
    return f"{x:.17g}"


def write_rv_table(records: Iterable[RvRecord], stream: IO[str]) -> None:
    stream.write("date,session,delta,rv,n_returns\n")
    for r in sorted(records, key=lambda r: (str(r.date), r.session, r.delta_minutes)):
        stream.write(f"{r.date},{r.session},{r.delta_minutes},{_fmt(r.rv)},{r.n_returns}\n")


def read_rv_table(stream: IO[str]) -> list[RvRecord]:
    reader = csv.DictReader(stream)
    return [
        RvRecord(
            date=np.datetime64(row["date"], "D"),
            session=row["session"],
            delta_minutes=int(row["delta"]),
            rv=float(row["rv"]),
            n_returns=int(row["n_returns"]),
        )
        for row in reader
    ]


def write_signature(curves: Iterable[SignatureCurve], stream: IO[str]) -> None:
    stream.write("session,delta,mean_rv,day_count\n")
    for c in curves:
        for d, m, k in zip(c.deltas, c.mean_rv, c.day_count):
            stream.write(f"{c.session},{d},{_fmt(m)},{k}\n")


def read_signature(stream: IO[str]) -> dict[str, SignatureCurve]:
    rows: dict[str, list[tuple[int, float, int]]] = {}
    for row in csv.DictReader(stream):
        rows.setdefault(row["session"], []).append(
            (int(row["delta"]), float(row["mean_rv"]), int(row["day_count"]))
        )
    return {
        s: SignatureCurve(
            session=s,
            deltas=np.array([r[0] for r in rs], dtype=int),
            mean_rv=np.array([r[1] for r in rs]),
            day_count=np.array([r[2] for r in rs], dtype=int),
        )
        for s, rs in rows.items()
    }


def write_zones(zones: Iterable[ZoneReturns], stream: IO[str]) -> None:
    stream.write("date,r_ms,r_lb,r_as,r_on\n")
    for z in zones:
        on = "" if z.r_on is None else _fmt(z.r_on)
        stream.write(f"{z.date},{_fmt(z.r_ms)},{_fmt(z.r_lb)},{_fmt(z.r_as)},{on}\n")


def read_zones(stream: IO[str]) -> list[ZoneReturns]:
    out = []
    for row in csv.DictReader(stream):
        out.append(
            ZoneReturns(
                date=np.datetime64(row["date"], "D"),
                r_ms=float(row["r_ms"]),
                r_lb=float(row["r_lb"]),
                r_as=float(row["r_as"]),
                r_on=float(row["r_on"]) if row["r_on"] != "" else None,
            )
        )
    return out
