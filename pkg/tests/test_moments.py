import io

import mpmath
import numpy as np
import pytest

from _oracles import density_moment_quadrature, mdh_standardized_draws
from sessionvol.moments import (
    InsufficientData,
    MomentProfile,
    StandardizedSeries,
    UnsupportedN,
    ZeroVolatilityDay,
    finite_sample_density,
    finite_sample_moment,
    read_moment_profiles,
    sample_moments,
    standardize,
    theoretical_profile,
    write_moment_profiles,
)
from sessionvol.rv_core import RvRecord

DAY = np.datetime64("2006-05-01", "D")


def series(values, n):
    values = np.asarray(values, dtype=float)
    return StandardizedSeries(
        session="MS",
        delta_minutes=1,
        values=values,
        n_intraday=np.full(len(values), n, dtype=int),
    )


# --- finite_sample_moment -------------------------------------------------

@pytest.mark.parametrize("n", [1, 2, 4, 17, 120, 10**6])
def test_second_moment_is_one(n):
    assert finite_sample_moment(n, 1) == pytest.approx(1.0, rel=1e-15)


def test_gaussian_limit():
    assert finite_sample_moment(10**9, 2) == pytest.approx(3.0, abs=1e-6)
    assert finite_sample_moment(10**9, 3) == pytest.approx(15.0, abs=1e-5)


def test_small_n_values():
    assert finite_sample_moment(4, 2) == pytest.approx(2.0, rel=1e-15)
    # 15*n^2/((n+2)(n+4)) at n=4; confirmed by quadrature of the density below
    assert finite_sample_moment(4, 3) == pytest.approx(5.0, rel=1e-15)


@pytest.mark.parametrize("n", [2, 3, 4, 5, 8, 30, 120, 240])
@pytest.mark.parametrize("k", [1, 2, 3])
def test_moment_matches_quadrature_oracle(n, k):
    quad = density_moment_quadrature(finite_sample_density, n, k)
    assert finite_sample_moment(n, k) == pytest.approx(quad, abs=1e-8)


def test_moment_monotone_to_limits():
    ns = np.arange(1, 10_001)
    m4 = np.array([finite_sample_moment(int(n), 2) for n in ns])
    m6 = np.array([finite_sample_moment(int(n), 3) for n in ns])
    assert np.all(np.diff(m4) > 0) and m4[-1] < 3.0
    assert np.all(np.diff(m6) > 0) and m6[-1] < 15.0


def test_moment_rejects_bad_args():
    with pytest.raises(UnsupportedN):
        finite_sample_moment(0, 1)
    with pytest.raises(UnsupportedN):
        finite_sample_moment(4, 0)


# --- finite_sample_density ------------------------------------------------

def test_density_outside_support_zero():
    for n in (2, 5, 120):
        assert finite_sample_density(np.sqrt(n) + 0.001, n) == 0.0
        assert finite_sample_density(-np.sqrt(n) - 0.001, n) == 0.0


def test_density_at_zero_high_precision():
    # oracle: high-precision gamma evaluation
    for n in (3, 7, 120, 240):
        expect = float(
            mpmath.gamma(n / 2)
            / (mpmath.sqrt(mpmath.pi * n) * mpmath.gamma((n - 1) / 2))
        )
        assert finite_sample_density(0.0, n) == pytest.approx(expect, rel=1e-13)
    assert finite_sample_density(0.0, 3) == pytest.approx(1 / (2 * np.sqrt(3)), rel=1e-13)


@pytest.mark.parametrize("n", [2, 3, 5, 30, 120, 240])
def test_density_normalization(n):
    assert density_moment_quadrature(finite_sample_density, n, 0) == pytest.approx(
        1.0, abs=1e-9
    )


def test_density_rejects_small_n():
    with pytest.raises(UnsupportedN):
        finite_sample_density(0.0, 1)


def test_density_no_overflow_at_large_n():
    f = finite_sample_density(np.linspace(-3, 3, 101), 240)
    assert np.all(np.isfinite(f)) and f.max() < 1.0


# --- standardize ----------------------------------------------------------

def rv_record(rv, n=4):
    return RvRecord(DAY, "MS", 30, rv, n)


def test_standardize_single_return():
    r = -0.0123
    assert standardize(r, rv_record(r * r, n=1)) == pytest.approx(-1.0, rel=1e-12)


def test_standardize_support_boundary():
    # four equal returns r: R=4r, RV=4r^2, value = 2 = sqrt(4)
    r = 0.003
    assert standardize(4 * r, rv_record(4 * r * r)) == pytest.approx(2.0, rel=1e-12)


def test_standardize_zero_rv():
    with pytest.raises(ZeroVolatilityDay):
        standardize(0.0, rv_record(0.0))


def test_support_bound_simulated_day():
    # Cauchy-Schwarz: |sum r| <= sqrt(n * sum r^2)
    rng = np.random.default_rng(1)
    vals, ns = [], []
    for _ in range(200):
        r = rng.normal(0, 1e-3, size=120)
        vals.append(r.sum() / np.sqrt((r * r).sum()))
        ns.append(120)
    s = StandardizedSeries("MS", 1, np.array(vals), np.array(ns))
    s.check_support()
    assert np.max(np.abs(s.values)) <= np.sqrt(120)


def test_support_bound_violation_detected():
    s = series([3.1], n=4)
    with pytest.raises(Exception):
        s.check_support()


# --- sample_moments -------------------------------------------------------

def test_sample_moments_two_point_law():
    row = sample_moments(series([1.0, -1.0] * 50, n=4))
    assert row.variance == pytest.approx(1.0, rel=1e-15)
    assert row.kurtosis == pytest.approx(1.0, rel=1e-15)
    assert row.sixth_moment == pytest.approx(1.0, rel=1e-15)
    assert row.mean == 0.0


def test_sample_moments_standard_normal():
    rng = np.random.default_rng(42)
    row = sample_moments(series(rng.standard_normal(10**6), n=10**9))
    assert abs(row.variance - 1.0) < 3 * row.se_var
    assert abs(row.kurtosis - 3.0) < 3 * row.se_kurt
    assert abs(row.sixth_moment - 15.0) < 3 * row.se_m6


def test_sample_moments_finite_sample_law_n4():
    # draws from the n=4 law via the exact R_s = sum/sqrt(sum of squares) sampler
    rng = np.random.default_rng(7)
    vals = mdh_standardized_draws(4, 10**5, rng)
    row = sample_moments(series(vals, n=4))
    assert abs(row.kurtosis - finite_sample_moment(4, 2)) < 3 * row.se_kurt
    assert abs(row.sixth_moment - finite_sample_moment(4, 3)) < 3 * row.se_m6


def test_sample_moments_insufficient():
    with pytest.raises(InsufficientData):
        sample_moments(series([1.0], n=4))


# --- theoretical_profile --------------------------------------------------

def test_theoretical_profile_values():
    prof = theoretical_profile({1: 120, 30: 4}, session="MS")
    by_delta = {r.delta_minutes: r for r in prof.rows}
    assert by_delta[1].kurtosis == pytest.approx(3 * 120 / 122, rel=1e-12)
    assert by_delta[30].kurtosis == pytest.approx(2.0, rel=1e-12)
    assert by_delta[1].variance == 1.0
    prof_as = theoretical_profile({30: 5}, session="AS")
    assert prof_as.rows[0].kurtosis == pytest.approx(3 * 5 / 7, rel=1e-12)


def test_theoretical_profile_matches_quadrature():
    prof = theoretical_profile({1: 120, 30: 4}, session="MS")
    for row in prof.rows:
        n = row.count
        assert row.kurtosis == pytest.approx(
            density_moment_quadrature(finite_sample_density, n, 2), abs=1e-8
        )


# --- CSV round trip -------------------------------------------------------

def test_moment_csv_round_trip():
    prof = MomentProfile(session="MS")
    prof.rows.append(sample_moments(series([1.0, -1.0, 0.5, -0.5], n=4)))
    buf = io.StringIO()
    write_moment_profiles([prof], buf)
    buf.seek(0)
    back = read_moment_profiles(buf)
    r0, r1 = prof.rows[0], back["MS"].rows[0]
    assert (r1.variance, r1.kurtosis, r1.sixth_moment, r1.count) == (
        r0.variance,
        r0.kurtosis,
        r0.sixth_moment,
        r0.count,
    )
