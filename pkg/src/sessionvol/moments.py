"""Standardized session returns and their finite-sample moment law.

With realized volatility built from n intraday returns, the standardized
return R/sqrt(RV) has bounded support [-sqrt(n), sqrt(n)] and density

    f(x) = Gamma(n/2) / (sqrt(pi n) Gamma((n-1)/2)) * (1 - x^2/n)^((n-3)/2)

with raw even moments

    m^{2k} = n^k (2k-1)!! / (n (n+2) ... (n+2k-2)),

so m^2 = 1 for every n and m^4, m^6 converge to the Gaussian 3 and 15 as
n grows.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import IO, Iterable

import numpy as np
from scipy.special import gammaln

from .errors import DataError
from .rv_core import RvRecord

SUPPORT_SLACK = 1e-9


class UnsupportedN(DataError):
    pass


class ZeroVolatilityDay(DataError):
    pass


class InsufficientData(DataError):
    pass


class MismatchedKeys(DataError):
    pass


def finite_sample_moment(n: int, k: int) -> float:
    """Raw even moment m^{2k} of the standardized return for RV built from n returns."""
    if n < 1 or k < 1:
        raise UnsupportedN(f"need n >= 1 and k >= 1, got n={n}, k={k}")
    num = 1.0
    den = 1.0
    for j in range(k):
        num *= n * (2 * j + 1)  # n^k * (2k-1)!!
        den *= n + 2 * j
    return num / den


def finite_sample_density(x, n: int):
    """Density of the standardized return; 0 outside |x| <= sqrt(n).

    Evaluated in log space to stay stable at large n and near the support
    edge.  Accepts scalars or arrays.
    """
    if n < 2:
        raise UnsupportedN(f"density needs n >= 2, got n={n}")
    arr = np.asarray(x, dtype=float)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    log_norm = gammaln(n / 2.0) - gammaln((n - 1) / 2.0) - 0.5 * np.log(np.pi * n)
    u = arr * arr / n
    inside = u < 1.0
    out = np.zeros_like(arr)
    with np.errstate(divide="ignore"):
        # (n-3)/2 * log(1 - x^2/n); log1p keeps the support edge accurate
        out[inside] = np.exp(log_norm + 0.5 * (n - 3) * np.log1p(-u[inside]))
    return float(out[0]) if scalar else out


def standardize(session_return: float, rv: RvRecord) -> float:
    """R / sqrt(RV) for one (day, session)."""
    if rv.rv <= 0.0:
        raise ZeroVolatilityDay(f"{rv.date} {rv.session}: rv={rv.rv}")
    return float(session_return / np.sqrt(rv.rv))


@dataclass(eq=False)
class StandardizedSeries:
    """Standardized returns for one (session, Δ) across days."""

    session: str
    delta_minutes: int
    values: np.ndarray
    n_intraday: np.ndarray  # per-value intraday return count used in that day's RV
    zero_rv_days: int = 0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.n_intraday = np.asarray(self.n_intraday, dtype=int)
        if self.values.shape != self.n_intraday.shape:
            raise MismatchedKeys("values and n_intraday must align")
        if not np.all(np.isfinite(self.values)):
            raise DataError("standardized values must be finite")

    def check_support(self) -> None:
        """Assert |value| <= sqrt(n) + slack (holds for telescoped returns)."""
        bound = np.sqrt(self.n_intraday) + SUPPORT_SLACK
        if np.any(np.abs(self.values) > bound):
            i = int(np.argmax(np.abs(self.values) - bound))
            raise DataError(
                f"standardized value {self.values[i]} outside support "
                f"±sqrt({self.n_intraday[i]})"
            )


@dataclass(eq=False)
class MomentRow:
    delta_minutes: int
    variance: float
    kurtosis: float
    sixth_moment: float  # m6 / m2^3
    count: int
    se_var: float
    se_kurt: float
    se_m6: float
    mean: float = 0.0  # diagnostic; the law is symmetric about zero


def sample_moments(series: StandardizedSeries) -> MomentRow:
    """Raw (uncentered) moment estimates with delta-method standard errors."""
    x = series.values
    N = len(x)
    if N < 2:
        raise InsufficientData(f"need >= 2 values, got {N}")
    u = np.stack([x**2, x**4, x**6])
    m2, m4, m6 = u.mean(axis=1)
    if m2 <= 0.0:
        raise InsufficientData("degenerate sample (all zeros)")
    cov = np.cov(u) / N  # covariance of the three moment estimators
    kurt = m4 / m2**2
    m6n = m6 / m2**3
    g_var = np.array([1.0, 0.0, 0.0])
    g_kurt = np.array([-2.0 * m4 / m2**3, 1.0 / m2**2, 0.0])
    g_m6 = np.array([-3.0 * m6 / m2**4, 0.0, 1.0 / m2**3])

    def se(g):
        return float(np.sqrt(max(g @ cov @ g, 0.0)))

    return MomentRow(
        delta_minutes=series.delta_minutes,
        variance=float(m2),
        kurtosis=float(kurt),
        sixth_moment=float(m6n),
        count=N,
        se_var=se(g_var),
        se_kurt=se(g_kurt),
        se_m6=se(g_m6),
        mean=float(x.mean()),
    )


@dataclass(eq=False)
class MomentProfile:
    session: str
    rows: list[MomentRow] = field(default_factory=list)


def theoretical_profile(n_per_delta: dict[int, int], session: str = "") -> MomentProfile:
    """Exact finite-sample moment curve: (Δ, 1, m4(n), m6(n))."""
    rows = []
    for delta in sorted(n_per_delta):
        n = n_per_delta[delta]
        rows.append(
            MomentRow(
                delta_minutes=delta,
                variance=1.0,
                kurtosis=finite_sample_moment(n, 2),
                sixth_moment=finite_sample_moment(n, 3),
                count=n,
                se_var=0.0,
                se_kurt=0.0,
                se_m6=0.0,
            )
        )
    return MomentProfile(session=session, rows=rows)


# --- CSV interfaces -------------------------------------------------------

def _fmt(x: float) -> str:
    return f"{x:.17g}"


def write_moment_profiles(profiles: Iterable[MomentProfile], stream: IO[str]) -> None:
    stream.write("session,delta,variance,kurtosis,m6,count,se_var,se_kurt,se_m6\n")
    for p in profiles:
        for r in p.rows:
            stream.write(
                f"{p.session},{r.delta_minutes},{_fmt(r.variance)},{_fmt(r.kurtosis)},"
                f"{_fmt(r.sixth_moment)},{r.count},{_fmt(r.se_var)},{_fmt(r.se_kurt)},"
                f"{_fmt(r.se_m6)}\n"
            )


def read_moment_profiles(stream: IO[str]) -> dict[str, MomentProfile]:
    out: dict[str, MomentProfile] = {}
    for row in csv.DictReader(stream):
        p = out.setdefault(row["session"], MomentProfile(session=row["session"]))
        p.rows.append(
            MomentRow(
                delta_minutes=int(row["delta"]),
                variance=float(row["variance"]),
                kurtosis=float(row["kurtosis"]),
                sixth_moment=float(row["m6"]),
                count=int(row["count"]),
                se_var=float(row["se_var"]),
                se_kurt=float(row["se_kurt"]),
                se_m6=float(row["se_m6"]),
            )
        )
    return out
