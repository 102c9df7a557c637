"""Synthetic market generator used as the Monte Carlo oracle for the pipeline.

Per session the log price follows a Brownian path with piecewise-constant
spot volatility, so each session's integrated volatility equals the drawn
session variance exactly.  Session returns therefore follow R = sigma*eps
with eps standard normal.  Observed prices can be contaminated with i.i.d.
Gaussian noise (upward RV bias ~ 2*n*omega^2) or with a trailing moving
average of the true log price, which damps RV at small sampling intervals.

Each day consumes its own counter-based random stream keyed by
(seed, day index), so generation is reproducible regardless of scheduling.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import IO, Optional

import numpy as np

from .errors import ConfigError
from .market_data import SessionCalendar, TSE_SESSIONS, weekday_calendar


class ConfigInvalid(ConfigError):
    pass


@dataclass(frozen=True)
class VolModel:
    """Law of the per-session integrated variance sigma^2."""

    kind: str  # constant | lognormal | inversegamma
    # constant: value=sigma^2; lognormal: mu, s of ln(sigma^2);
    # inversegamma: shape (> 3 so the 6th moment of returns exists), scale.
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        k = self.kind
        p = self.params
        if k == "constant":
            if p.get("value", 0.0) <= 0:
                raise ConfigInvalid("constant variance must be positive")
        elif k == "lognormal":
            if p.get("s", 0.0) <= 0:
                raise ConfigInvalid("lognormal scale must be positive")
            if "mu" not in p:
                raise ConfigInvalid("lognormal needs mu")
        elif k == "inversegamma":
            if p.get("shape", 0.0) <= 3:
                raise ConfigInvalid("inverse-gamma shape must exceed 3")
            if p.get("scale", 0.0) <= 0:
                raise ConfigInvalid("inverse-gamma scale must be positive")
        else:
            raise ConfigInvalid(f"unknown volatility model {k!r}")

    def mean_variance(self) -> float:
        p = self.params
        if self.kind == "constant":
            return p["value"]
        if self.kind == "lognormal":
            return float(np.exp(p["mu"] + 0.5 * p["s"] ** 2))
        return p["scale"] / (p["shape"] - 1.0)


@dataclass(frozen=True)
class NoiseModel:
    kind: str = "none"  # none | iid | smoothing
    omega: float = 0.0  # iid noise std dev, log-price units
    window_ticks: int = 1  # smoothing moving-average width

    def __post_init__(self):
        if self.kind not in ("none", "iid", "smoothing"):
            raise ConfigInvalid(f"unknown noise model {self.kind!r}")
        if self.omega < 0:
            raise ConfigInvalid("omega must be non-negative")
        if self.window_ticks < 1:
            raise ConfigInvalid("window_ticks must be >= 1")


@dataclass(eq=False)
class SimConfig:
    days: int
    vol_model: VolModel
    noise_model: NoiseModel = NoiseModel()
    calendar: Optional[SessionCalendar] = None
    tick_interval_seconds: int = 60
    seed: int = 0
    initial_log_price: float = np.log(10_000.0)
    start_date: str = "2006-05-01"
    # Boundary-jump variances as fractions of the mean session variance;
    # lunch moves are small, overnight moves are larger.
    lunch_jump_frac: float = 0.01
    overnight_jump_frac: float = 0.1

    def __post_init__(self):
        if self.days < 1:
            raise ConfigInvalid(f"days must be >= 1, got {self.days}")
        if self.tick_interval_seconds < 1:
            raise ConfigInvalid("tick interval must be >= 1 second")
        if self.calendar is None:
            self.calendar = weekday_calendar(self.start_date, self.days)
        elif len(self.calendar.trading_days) < self.days:
            raise ConfigInvalid("calendar has fewer trading days than requested")
        for spec in self.calendar.sessions:
            if (spec.length_minutes * 60) % self.tick_interval_seconds != 0:
                raise ConfigInvalid(
                    f"tick interval {self.tick_interval_seconds}s does not divide "
                    f"session {spec.label} length"
                )
        if self.lunch_jump_frac < 0 or self.overnight_jump_frac < 0:
            raise ConfigInvalid("jump fractions must be non-negative")

    @classmethod
    def from_dict(cls, cfg: dict) -> "SimConfig":
        try:
            vol = VolModel(cfg["vol_model"]["kind"], dict(cfg["vol_model"].get("params", {})))
        except KeyError as exc:
            raise ConfigInvalid(f"missing config key: {exc}") from exc
        noise_cfg = cfg.get("noise_model", {})
        noise = NoiseModel(
            kind=noise_cfg.get("kind", "none"),
            omega=noise_cfg.get("omega", 0.0),
            window_ticks=noise_cfg.get("window_ticks", 1),
        )
        cal = None
        if "calendar" in cfg:
            cal = SessionCalendar.from_dict(cfg["calendar"])
        kwargs = {}
        for key in (
            "tick_interval_seconds",
            "seed",
            "initial_log_price",
            "start_date",
            "lunch_jump_frac",
            "overnight_jump_frac",
        ):
            if key in cfg:
                kwargs[key] = cfg[key]
        if "days" not in cfg:
            raise ConfigInvalid("missing config key: 'days'")
        return cls(days=cfg["days"], vol_model=vol, noise_model=noise, calendar=cal, **kwargs)


@dataclass(eq=False)
class SessionTruth:
    sigma2: float
    open_log_price: float
    close_log_price: float


@dataclass(eq=False)
class DayTruth:
    date: np.datetime64
    ms: SessionTruth
    as_: SessionTruth


@dataclass(eq=False)
class SimTruth:
    days: list[DayTruth] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "days": [
                {
                    "date": str(d.date),
                    "ms_sigma2": d.ms.sigma2,
                    "as_sigma2": d.as_.sigma2,
                    "boundary_prices": {
                        "ms_open": float(np.exp(d.ms.open_log_price)),
                        "ms_close": float(np.exp(d.ms.close_log_price)),
                        "as_open": float(np.exp(d.as_.open_log_price)),
                        "as_close": float(np.exp(d.as_.close_log_price)),
                    },
                }
                for d in self.days
            ]
        }

    def to_json(self, stream: IO[str]) -> None:
        json.dump(self.to_dict(), stream, indent=2)
        stream.write("\n")


def day_rng(seed: int, day_index: int) -> np.random.Generator:
    """Counter-based per-day stream; independent of processing order."""
    key = np.array([np.uint64(seed & (2**64 - 1)), np.uint64(day_index)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def draw_session_variance(model: VolModel, rng: np.random.Generator) -> float:
    p = model.params
    if model.kind == "constant":
        return float(p["value"])
    if model.kind == "lognormal":
        return float(np.exp(p["mu"] + p["s"] * rng.standard_normal()))
    # inverse gamma via reciprocal of a gamma draw
    return float(p["scale"] / rng.gamma(shape=p["shape"]))


def simulate_session_path(
    sigma2: float, session_seconds: int, tick_interval: int, rng: np.random.Generator
) -> np.ndarray:
    """Per-tick log-price increments whose integrated variance is exactly sigma2.

    Each increment ~ N(0, sigma2 * dt/T), so the sum of squared 1-tick
    returns has expectation sigma2 at any tick interval.
    """
    if sigma2 < 0:
        raise ConfigInvalid("sigma2 must be non-negative")
    n = session_seconds // tick_interval
    if sigma2 == 0.0:
        return np.zeros(n)
    scale = np.sqrt(sigma2 * tick_interval / session_seconds)
    return scale * rng.standard_normal(n)


def apply_noise(
    log_prices: np.ndarray, model: NoiseModel, rng: np.random.Generator
) -> np.ndarray:
    """Observed log prices for one session of true log prices."""
    if model.kind == "none" or (model.kind == "iid" and model.omega == 0.0):
        return log_prices
    if model.kind == "iid":
        return log_prices + model.omega * rng.standard_normal(len(log_prices))
    w = model.window_ticks
    if w == 1:
        return log_prices
    # Trailing moving average, window truncated at the session start.
    c = np.cumsum(log_prices)
    out = np.empty_like(log_prices)
    head = min(w, len(log_prices))
    out[:head] = c[:head] / np.arange(1, head + 1)
    if len(log_prices) > w:
        out[w:] = (c[w:] - c[:-w]) / w
    return out


def noise_bias_estimate(n: int, omega: float) -> float:
    """Expected upward RV bias from i.i.d. noise: 2*n*omega^2."""
    if n < 1:
        raise ConfigInvalid(f"n must be >= 1, got {n}")
    return 2.0 * n * omega * omega


@dataclass(eq=False)
class SimulatedDay:
    """True and observed per-session log prices for one day (ticks inclusive
    of both session boundaries)."""

    date: np.datetime64
    truth: DayTruth
    observed_log: dict  # label -> np.ndarray
    true_log: dict  # label -> np.ndarray


def simulate_days(cfg: SimConfig):
    """Yield SimulatedDay for each trading day, maintaining price continuity."""
    mean_var = cfg.vol_model.mean_variance()
    lunch_sd = np.sqrt(cfg.lunch_jump_frac * mean_var)
    on_sd = np.sqrt(cfg.overnight_jump_frac * mean_var)
    sessions = cfg.calendar.sessions
    if [s.label for s in sessions] != ["MS", "AS"]:
        raise ConfigInvalid("simulator requires an MS+AS calendar")
    ms_spec, as_spec = sessions
    log_p = cfg.initial_log_price
    for d in range(cfg.days):
        rng = day_rng(cfg.seed, d)
        date = cfg.calendar.trading_days[d]
        # Fixed draw order per day: variances, jumps, paths, noise.
        sigma2_ms = draw_session_variance(cfg.vol_model, rng)
        sigma2_as = draw_session_variance(cfg.vol_model, rng)
        on_jump = on_sd * rng.standard_normal() if d > 0 else 0.0
        lb_jump = lunch_sd * rng.standard_normal()
        inc_ms = simulate_session_path(
            sigma2_ms, ms_spec.length_minutes * 60, cfg.tick_interval_seconds, rng
        )
        inc_as = simulate_session_path(
            sigma2_as, as_spec.length_minutes * 60, cfg.tick_interval_seconds, rng
        )
        log_p += on_jump
        ms_log = log_p + np.concatenate([[0.0], np.cumsum(inc_ms)])
        log_p = ms_log[-1] + lb_jump
        as_log = log_p + np.concatenate([[0.0], np.cumsum(inc_as)])
        log_p = as_log[-1]
        obs_ms = apply_noise(ms_log, cfg.noise_model, rng)
        obs_as = apply_noise(as_log, cfg.noise_model, rng)
        truth = DayTruth(
            date=date,
            ms=SessionTruth(sigma2_ms, ms_log[0], ms_log[-1]),
            as_=SessionTruth(sigma2_as, as_log[0], as_log[-1]),
        )
        yield SimulatedDay(
            date=date,
            truth=truth,
            observed_log={"MS": obs_ms, "AS": obs_as},
            true_log={"MS": ms_log, "AS": as_log},
        )


def _session_time_strings(spec, tick_interval: int) -> list[str]:
    open_s = (spec.open_time.hour * 60 + spec.open_time.minute) * 60
    n = spec.length_minutes * 60 // tick_interval + 1
    out = []
    for i in range(n):
        s = open_s + i * tick_interval
        h, rem = divmod(s, 3600)
        m, sec = divmod(rem, 60)
        out.append(f"T{h:02d}:{m:02d}:{sec:02d}.000")
    return out


def generate_dataset(cfg: SimConfig, out: IO[str]) -> SimTruth:
    """Write the tick CSV for the whole configured period; returns SimTruth.

    Output is deterministic for a given seed (17-significant-digit prices).
    """
    specs = {s.label: s for s in cfg.calendar.sessions}
    tod = {
        label: _session_time_strings(specs[label], cfg.tick_interval_seconds)
        for label in ("MS", "AS")
    }
    truth = SimTruth()
    out.write("timestamp,price\n")
    for day in simulate_days(cfg):
        truth.days.append(day.truth)
        date = str(day.date)
        for label in ("MS", "AS"):
            prices = np.exp(day.observed_log[label])
            rows = [
                f"{date}{t},{p:.17g}\n" for t, p in zip(tod[label], prices)
            ]
            out.writelines(rows)
    return truth
