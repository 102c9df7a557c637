"""Command-line front end: ingest -> RV -> moments -> fit, plus the simulator.

Subcommands: analyze, simulate, density, fit.  Exit codes: 0 success,
2 config error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import fitting, moments, rv_core, sampling, synthsim
from .errors import ConfigError, DataError, NumericalError, ToolkitError
from .market_data import (
    SessionCalendar,
    TickSeries,
    TSE_SESSIONS,
    parse_ticks,
    read_ticks,
    split_sessions,
)

ANALYZE_OUTPUTS = (
    "rv_table.csv",
    "signature.csv",
    "zones.csv",
    "moments.csv",
    "moments_theory.csv",
    "fit_kurtosis.json",
    "fit_m6.json",
    "summary.json",
)


class ConfigInvalid(ConfigError):
    pass


@dataclass(eq=False)
class AnalysisConfig:
    inputs: list[str]
    out_dir: str
    calendar_path: str | None = None
    deltas: list[int] = field(default_factory=lambda: list(range(1, 41)))
    sessions: list[str] = field(default_factory=lambda: ["MS", "AS"])
    std_mode: str = "telescoped"  # telescoped | openclose
    delta_min: int = 1
    weighted: bool = False

    def __post_init__(self):
        if not self.inputs:
            raise ConfigInvalid("at least one input file is required")
        if not self.deltas or any(d < 1 for d in self.deltas):
            raise ConfigInvalid("delta list must be non-empty with all deltas >= 1")
        if self.std_mode not in ("telescoped", "openclose"):
            raise ConfigInvalid(f"unknown std-mode {self.std_mode!r}")
        bad = [s for s in self.sessions if s not in ("MS", "AS")]
        if bad:
            raise ConfigInvalid(f"unknown sessions {bad}")

    def to_dict(self) -> dict:
        return {
            "inputs": list(self.inputs),
            "out_dir": self.out_dir,
            "calendar_path": self.calendar_path,
            "deltas": list(self.deltas),
            "sessions": list(self.sessions),
            "std_mode": self.std_mode,
            "delta_min": self.delta_min,
            "weighted": self.weighted,
        }


def parse_delta_spec(spec: str) -> list[int]:
    """Parse '1..40' or '1,5,10' (mixtures allowed) into a delta list."""
    out: list[int] = []
    for part in spec.split(","):
        part = part.strip()
        if ".." in part:
            lo, hi = part.split("..")
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    return out


def _load_ticks(cfg: AnalysisConfig, tz: str) -> TickSeries:
    pieces = [read_ticks(p, tz=tz) for p in cfg.inputs]
    if len(pieces) == 1:
        return pieces[0]
    times = np.concatenate([p.times for p in pieces])
    prices = np.concatenate([p.prices for p in pieces])
    if np.any(np.diff(times.view("int64")) <= 0):
        raise DataError("concatenated input files are not strictly time-ordered")
    return TickSeries(times=times, prices=prices)


def _calendar_for(cfg: AnalysisConfig, ticks: TickSeries) -> SessionCalendar:
    if cfg.calendar_path:
        return SessionCalendar.from_json(cfg.calendar_path)
    if len(ticks) == 0:
        raise DataError("no ticks and no calendar file")
    days = np.unique(ticks.times.astype("datetime64[D]"))
    return SessionCalendar(sessions=TSE_SESSIONS, trading_days=days)


def run_analysis(cfg: AnalysisConfig) -> dict:
    """Full pipeline; writes the report files and returns the summary dict."""
    cal = SessionCalendar.from_json(cfg.calendar_path) if cfg.calendar_path else None
    ticks = _load_ticks(cfg, tz=cal.tz if cal else "Asia/Tokyo")
    if cal is None:
        cal = _calendar_for(cfg, ticks)
    slices, empty_days = split_sessions(ticks, cal)
    if not slices:
        raise DataError("no ticks fall inside any session window")

    rv_records: list[rv_core.RvRecord] = []
    std_values: dict[tuple[str, int], list[tuple[float, int]]] = {}
    zero_rv: dict[tuple[str, int], int] = {}
    for sl in slices:
        if sl.label not in cfg.sessions:
            continue
        T = sl.length_minutes
        open_close = float(np.log(sl.close_price) - np.log(sl.open_price))
        for delta in cfg.deltas:
            if delta >= T:
                continue
            grid = sampling.sample_grid_prices(sl, delta)
            rs = sampling.intraday_returns(grid)
            rec = rv_core.realized_volatility(rs)
            rv_records.append(rec)
            key = (sl.label, delta)
            if rec.rv <= 0.0:
                zero_rv[key] = zero_rv.get(key, 0) + 1
                continue
            r = float(rs.returns.sum()) if cfg.std_mode == "telescoped" else open_close
            std_values.setdefault(key, []).append(
                (moments.standardize(r, rec), rec.n_returns)
            )

    zones = rv_core.zone_return_table(slices)

    curves = []
    profiles = []
    theory_profiles = []
    fit_kurt: dict[str, dict] = {}
    fit_m6: dict[str, dict] = {}
    warnings: list[str] = []
    for session in cfg.sessions:
        T = cal.session(session).length_minutes
        deltas = [d for d in cfg.deltas if d < T]
        skipped = [d for d in cfg.deltas if d >= T]
        if skipped:
            warnings.append(f"{session}: deltas {skipped} >= session length, skipped")
        if not deltas:
            raise DataError(f"{session}: no usable deltas below session length {T}")
        curves.append(rv_core.signature_curve(rv_records, session, deltas))
        profile = moments.MomentProfile(session=session)
        for delta in deltas:
            vals = std_values.get((session, delta), [])
            if len(vals) < 2:
                raise moments.InsufficientData(
                    f"{session} delta={delta}: only {len(vals)} standardized values"
                )
            series = moments.StandardizedSeries(
                session=session,
                delta_minutes=delta,
                values=np.array([v for v, _ in vals]),
                n_intraday=np.array([n for _, n in vals]),
                zero_rv_days=zero_rv.get((session, delta), 0),
            )
            if cfg.std_mode == "telescoped":
                series.check_support()
            profile.rows.append(moments.sample_moments(series))
        profiles.append(profile)
        theory_profiles.append(
            moments.theoretical_profile(
                {d: sampling.n_returns_for(T, d) for d in deltas}, session=session
            )
        )
        fit_deltas = [r for r in profile.rows if r.delta_minutes >= cfg.delta_min]
        if len(fit_deltas) >= 3:
            kurt_points = [
                fitting.CurvePoint(
                    r.delta_minutes,
                    r.kurtosis,
                    1.0 / r.se_kurt**2 if cfg.weighted and r.se_kurt > 0 else 1.0,
                )
                for r in fit_deltas
            ]
            m6_points = [
                fitting.CurvePoint(
                    r.delta_minutes,
                    r.sixth_moment,
                    1.0 / r.se_m6**2 if cfg.weighted and r.se_m6 > 0 else 1.0,
                )
                for r in fit_deltas
            ]
            fit_kurt[session] = fitting.fit_curve(kurt_points, fitting.Model.KURT4).to_dict()
            fit_m6[session] = fitting.fit_curve(m6_points, fitting.Model.MOM6).to_dict()
        else:
            warnings.append(f"{session}: fewer than 3 deltas after --delta-min, no fit")

    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    def _write(name: str, writer) -> None:
        path = out / name
        written.append(path)
        with open(path, "w", newline="") as fh:
            writer(fh)

    summary = {
        "config": cfg.to_dict(),
        "counts": {
            "ticks": len(ticks),
            "trading_days": int(len(cal.trading_days)),
            "slices": len(slices),
            "empty_days": [str(d) for d in empty_days],
            "zone_days": len(zones),
            "zero_rv_days": {f"{s}:{d}": c for (s, d), c in sorted(zero_rv.items())},
        },
        "warnings": warnings,
    }
    try:
        _write("rv_table.csv", lambda fh: rv_core.write_rv_table(rv_records, fh))
        _write("signature.csv", lambda fh: rv_core.write_signature(curves, fh))
        _write("zones.csv", lambda fh: rv_core.write_zones(zones, fh))
        _write("moments.csv", lambda fh: moments.write_moment_profiles(profiles, fh))
        _write(
            "moments_theory.csv",
            lambda fh: moments.write_moment_profiles(theory_profiles, fh),
        )
        _write("fit_kurtosis.json", lambda fh: json.dump(fit_kurt, fh, indent=2, sort_keys=True))
        _write("fit_m6.json", lambda fh: json.dump(fit_m6, fh, indent=2, sort_keys=True))
        _write("summary.json", lambda fh: json.dump(summary, fh, indent=2, sort_keys=True))
    except Exception:
        for path in written:
            path.unlink(missing_ok=True)
        raise
    return summary


# --- subcommands ----------------------------------------------------------

def cmd_analyze(args) -> int:
    file_cfg = {}
    if args.config:
        with open(args.config) as fh:
            file_cfg = json.load(fh)
    merged = dict(file_cfg)
    if args.input:
        merged["inputs"] = args.input
    if args.calendar:
        merged["calendar_path"] = args.calendar
    if args.deltas:
        merged["deltas"] = parse_delta_spec(args.deltas)
    if args.sessions:
        merged["sessions"] = [s.strip() for s in args.sessions.split(",")]
    if args.out:
        merged["out_dir"] = args.out
    if args.std_mode:
        merged["std_mode"] = args.std_mode
    if args.delta_min is not None:
        merged["delta_min"] = args.delta_min
    if args.weighted:
        merged["weighted"] = True
    merged.setdefault("inputs", [])
    merged.setdefault("out_dir", ".")
    if "deltas" in merged:
        merged["deltas"] = [int(d) for d in merged["deltas"]]
    try:
        cfg = AnalysisConfig(**merged)
    except TypeError as exc:
        raise ConfigInvalid(f"bad analysis config: {exc}") from exc
    if args.emit_config:
        json.dump(cfg.to_dict(), sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")
        return 0
    summary = run_analysis(cfg)
    print(
        f"analyze: {summary['counts']['ticks']} ticks, "
        f"{summary['counts']['slices']} slices -> {cfg.out_dir}"
    )
    return 0


def cmd_simulate(args) -> int:
    cfg_dict = {}
    if args.config:
        with open(args.config) as fh:
            cfg_dict = json.load(fh)
    if args.days is not None:
        cfg_dict["days"] = args.days
    if args.seed is not None:
        cfg_dict["seed"] = args.seed
    if "vol_model" not in cfg_dict:
        cfg_dict["vol_model"] = {"kind": "lognormal", "params": {"mu": -9.2, "s": 0.5}}
    cfg = synthsim.SimConfig.from_dict(cfg_dict)
    if args.emit_config:
        json.dump(cfg_dict, sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")
        return 0
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    ticks_path = out / "ticks.csv"
    truth_path = out / "truth.json"
    try:
        with open(ticks_path, "w", newline="") as fh:
            truth = synthsim.generate_dataset(cfg, fh)
        with open(truth_path, "w") as fh:
            truth.to_json(fh)
    except Exception:
        ticks_path.unlink(missing_ok=True)
        truth_path.unlink(missing_ok=True)
        raise
    ticks_per_day = sum(
        s.length_minutes * 60 // cfg.tick_interval_seconds + 1
        for s in cfg.calendar.sessions
    )
    mean_s2 = float(
        np.mean([d.ms.sigma2 for d in truth.days] + [d.as_.sigma2 for d in truth.days])
    )
    print(
        f"simulate: {cfg.days} days, {cfg.days * ticks_per_day} ticks, "
        f"mean sigma2 {mean_s2:.6g} -> {ticks_path}"
    )
    return 0


def cmd_density(args) -> int:
    n = args.n
    if n < 2:
        raise moments.UnsupportedN(f"density needs n >= 2, got {n}")
    half = float(np.sqrt(n))
    xmin = args.xmin if args.xmin is not None else -half
    xmax = args.xmax if args.xmax is not None else half
    if not xmin < xmax:
        raise ConfigInvalid("xmin must be < xmax")
    xs = np.linspace(xmin, xmax, args.points)
    fs = moments.finite_sample_density(xs, n)
    m2 = moments.finite_sample_moment(n, 1)
    m4 = moments.finite_sample_moment(n, 2)
    m6 = moments.finite_sample_moment(n, 3)
    dest = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        dest.write("kind,x,density,m2,m4,m6\n")
        for x, f in zip(xs, fs):
            dest.write(f"point,{x:.17g},{f:.17g},,,\n")
        dest.write(f"moments,,,{m2:.17g},{m4:.17g},{m6:.17g}\n")
    finally:
        if args.out:
            dest.close()
    return 0


def cmd_fit(args) -> int:
    with open(args.moments) as fh:
        profiles = moments.read_moment_profiles(fh)
    if not profiles:
        raise DataError(f"no moment rows in {args.moments}")
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    fit_kurt = {}
    fit_m6 = {}
    for session, profile in sorted(profiles.items()):
        rows = [r for r in profile.rows if r.delta_minutes >= (args.delta_min or 1)]
        kurt_points = [
            fitting.CurvePoint(
                r.delta_minutes,
                r.kurtosis,
                1.0 / r.se_kurt**2 if args.weighted and r.se_kurt > 0 else 1.0,
            )
            for r in rows
        ]
        m6_points = [
            fitting.CurvePoint(
                r.delta_minutes,
                r.sixth_moment,
                1.0 / r.se_m6**2 if args.weighted and r.se_m6 > 0 else 1.0,
            )
            for r in rows
        ]
        fit_kurt[session] = fitting.fit_curve(kurt_points, fitting.Model.KURT4).to_dict()
        fit_m6[session] = fitting.fit_curve(m6_points, fitting.Model.MOM6).to_dict()
    with open(out / "fit_kurtosis.json", "w") as fh:
        json.dump(fit_kurt, fh, indent=2, sort_keys=True)
    with open(out / "fit_m6.json", "w") as fh:
        json.dump(fit_m6, fh, indent=2, sort_keys=True)
    for session in sorted(fit_kurt):
        params = fit_kurt[session]["params"]
        print(f"fit {session}: K={params['K']:.6g} B4={params['B4']:.6g}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sessionvol")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="run the full RV/moments/fit pipeline")
    a.add_argument("--input", action="append", help="tick CSV (repeatable)")
    a.add_argument("--calendar", help="calendar JSON file")
    a.add_argument("--deltas", help="e.g. '1..40' or '1,5,10'")
    a.add_argument("--sessions", help="comma list, default MS,AS")
    a.add_argument("--out", help="output directory")
    a.add_argument("--config", help="analysis config JSON (flags override)")
    a.add_argument("--std-mode", choices=["telescoped", "openclose"], dest="std_mode")
    a.add_argument("--delta-min", type=int, dest="delta_min")
    a.add_argument("--weighted", action="store_true")
    a.add_argument("--emit-config", action="store_true", dest="emit_config")
    a.set_defaults(func=cmd_analyze)

    s = sub.add_parser("simulate", help="generate synthetic tick data + truth")
    s.add_argument("--config", help="simulator config JSON")
    s.add_argument("--days", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--out", help="output directory")
    s.add_argument("--emit-config", action="store_true", dest="emit_config")
    s.set_defaults(func=cmd_simulate)

    d = sub.add_parser("density", help="tabulate the finite-sample density")
    d.add_argument("--n", type=int, required=True)
    d.add_argument("--points", type=int, default=1001)
    d.add_argument("--xmin", type=float)
    d.add_argument("--xmax", type=float)
    d.add_argument("--out")
    d.set_defaults(func=cmd_density)

    f = sub.add_parser("fit", help="fit decay curves from a moments CSV")
    f.add_argument("--moments", required=True)
    f.add_argument("--out")
    f.add_argument("--delta-min", type=int, dest="delta_min")
    f.add_argument("--weighted", action="store_true")
    f.set_defaults(func=cmd_fit)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        _report_error(exc)
        return 2
    except DataError as exc:
        _report_error(exc)
        return 3
    except NumericalError as exc:
        _report_error(exc)
        return 4
    except OSError as exc:
        _report_error(exc)
        return 3


def _report_error(exc: Exception) -> None:
    json.dump(
        {"error": type(exc).__name__, "message": str(exc)}, sys.stderr
    )
    sys.stderr.write("\n")


if __name__ == "__main__":
    sys.exit(main())
