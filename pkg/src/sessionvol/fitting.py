"""Nonlinear least-squares fits of the kurtosis and 6th-moment decay curves.

kurt_model:  K * (1 - 2/(B4/Δ + 2))            -> K as Δ -> 0
m6_model:    M6 * L^2 / ((L+4)(L+2)), L=B6/Δ   -> M6 as Δ -> 0

Fitting is damped Gauss-Newton (Levenberg-Marquardt) on (A, log B) so the
decay-scale parameter stays positive without box constraints.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import DataError, NumericalError

MAX_ITER = 500
RSS_TOL = 1e-12
GRAD_TOL = 1e-10


class SingularJacobian(NumericalError):
    pass


class Model(str, Enum):
    KURT4 = "kurt4"
    MOM6 = "mom6"


@dataclass(frozen=True)
class CurvePoint:
    delta_minutes: float
    y: float
    weight: float = 1.0


@dataclass(eq=False)
class FitResult:
    model: Model
    amplitude: float  # K or M6
    scale: float  # B4 or B6 (minutes)
    rss: float
    iterations: int
    converged: bool
    se_amplitude: float
    se_scale: float

    @property
    def params(self) -> tuple[float, float]:
        return (self.amplitude, self.scale)

    def to_dict(self) -> dict:
        amp_key, scale_key = (
            ("K", "B4") if self.model is Model.KURT4 else ("M6", "B6")
        )

        def num(x):
            # keep the JSON strictly valid: no NaN/Infinity literals
            return float(x) if np.isfinite(x) else None

        return {
            "model": self.model.value,
            "params": {amp_key: num(self.amplitude), scale_key: num(self.scale)},
            "rss": num(self.rss),
            "converged": self.converged,
            "iterations": self.iterations,
            "se": {amp_key: num(self.se_amplitude), scale_key: num(self.se_scale)},
        }


def kurt_model(delta, K, B4):
    """Finite-sample kurtosis curve; equals K*n/(n+2) with n = B4/Δ."""
    delta = np.asarray(delta, dtype=float)
    return K * (1.0 - 2.0 / (B4 / delta + 2.0))


def kurt_model_jacobian(delta, K, B4):
    """d/d(K, B4) of kurt_model, columns (df/dK, df/dB4)."""
    delta = np.asarray(delta, dtype=float)
    q = B4 / delta + 2.0
    dfdK = 1.0 - 2.0 / q
    dfdB = K * 2.0 / (q * q * delta)
    return np.stack([dfdK, dfdB], axis=-1)


def m6_model(delta, M6, B6):
    """Finite-sample 6th-moment curve M6*L^2/((L+4)(L+2)) with L = B6/Δ."""
    delta = np.asarray(delta, dtype=float)
    L = B6 / delta
    return M6 * L * L / ((L + 4.0) * (L + 2.0))


def m6_model_jacobian(delta, M6, B6):
    """d/d(M6, B6) of m6_model, columns (df/dM6, df/dB6)."""
    delta = np.asarray(delta, dtype=float)
    L = B6 / delta
    den = (L + 4.0) * (L + 2.0)
    dfdM = L * L / den
    dfdL = M6 * L * (6.0 * L + 16.0) / (den * den)
    return np.stack([dfdM, dfdL / delta], axis=-1)


_MODEL_FUNCS = {
    Model.KURT4: (kurt_model, kurt_model_jacobian),
    Model.MOM6: (m6_model, m6_model_jacobian),
}


def fit_curve(
    points: Sequence[CurvePoint],
    model: Model | str,
    init: Optional[tuple[float, float]] = None,
) -> FitResult:
    """Weighted least-squares fit; returns best-so-far with converged=False
    when the iteration budget runs out."""
    model = Model(model)
    func, jac = _MODEL_FUNCS[model]
    if len(points) < 3:
        raise DataError(f"need >= 3 points to fit, got {len(points)}")
    deltas = np.array([p.delta_minutes for p in points], dtype=float)
    y = np.array([p.y for p in points], dtype=float)
    w = np.array([p.weight for p in points], dtype=float)
    if not np.all(np.isfinite(y)):
        raise DataError("non-finite y values")
    if np.any(w <= 0):
        raise DataError("weights must be positive")
    if np.unique(deltas).size < 2:
        raise SingularJacobian("all points share the same delta")
    sw = np.sqrt(w)

    if init is None:
        a0 = float(y[np.argmin(deltas)])
        b0 = float(np.max(deltas))
    else:
        a0, b0 = init
        if b0 <= 0:
            raise DataError("initial scale parameter must be positive")
    theta = np.array([a0, np.log(b0)])

    def residuals(th):
        # overflowing trial steps produce non-finite rss and get rejected
        with np.errstate(over="ignore", invalid="ignore"):
            return sw * (y - func(deltas, th[0], np.exp(th[1])))

    def jacobian(th):
        with np.errstate(over="ignore", invalid="ignore"):
            B = np.exp(th[1])
            J = jac(deltas, th[0], B)
            J = J.copy()
            J[:, 1] *= B  # chain rule for log-parameterized scale
            return -sw[:, None] * J

    r = residuals(theta)
    rss = float(r @ r)
    lam = 1e-3
    converged = False
    it = 0
    for it in range(1, MAX_ITER + 1):
        J = jacobian(theta)
        g = J.T @ r
        if np.max(np.abs(g)) < GRAD_TOL:
            converged = True
            break
        JtJ = J.T @ J
        accepted = False
        for _ in range(50):
            A = JtJ + lam * np.diag(np.diag(JtJ))
            try:
                step = np.linalg.solve(A, -g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            trial = theta + step
            r_trial = residuals(trial)
            rss_trial = float(r_trial @ r_trial)
            if np.isfinite(rss_trial) and rss_trial <= rss:
                accepted = True
                break
            lam *= 2.0
        if not accepted:
            break
        rel_drop = (rss - rss_trial) / max(rss, np.finfo(float).tiny)
        theta, r, rss = trial, r_trial, rss_trial
        lam = max(lam / 3.0, 1e-12)
        if rel_drop < RSS_TOL:
            converged = True
            break

    amplitude = float(theta[0])
    scale = float(np.exp(theta[1]))
    se_a = se_b = float("nan")
    dof = len(points) - 2
    if dof > 0 and np.isfinite(scale):
        with np.errstate(over="ignore", invalid="ignore"):
            J_raw = sw[:, None] * jac(deltas, amplitude, scale)
        try:
            cov = (rss / dof) * np.linalg.inv(J_raw.T @ J_raw)
            se_a = float(np.sqrt(max(cov[0, 0], 0.0)))
            se_b = float(np.sqrt(max(cov[1, 1], 0.0)))
        except np.linalg.LinAlgError:
            pass
    return FitResult(
        model=model,
        amplitude=amplitude,
        scale=scale,
        rss=rss,
        iterations=it,
        converged=converged,
        se_amplitude=se_a,
        se_scale=se_b,
    )
