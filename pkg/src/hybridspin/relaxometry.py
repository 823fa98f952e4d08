"""Cross-relaxation T1 relaxometry: Lorentzian rate law, T1 traces and fits.

Units: coupling ``b`` in kHz and dephasing ``gamma_total`` in MHz, both
quoted as cyclic values (b/2pi, Gamma/2pi); transition frequencies in MHz;
rates in 1/ms. The rate law in angular units is

    1/T1 = baseline + k * b^2 Gamma / (Delta^2 + Gamma^2)

with ``Delta = 2 pi (f_nv - f_vb)``. Converting to the cyclic inputs gives
``k * 2 pi * b^2 Gamma / (Delta^2 + Gamma^2) * 1e-3`` ms^-1 (b in kHz,
Gamma and Delta in MHz).

``k`` (``readout_factor``) is the number of population-difference decay
channels seen by the measured signal. A single flip rate W between |0> and
|+1> makes the differential (pi-pulse minus no-pulse) T1 signal decay at 2W,
so the default is 2. Set it to 1 for the bare flip rate.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, replace
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DegenerateData, FitDiverged, NonFiniteInput

log = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi
DIFFERENTIAL_READOUT = 2.0
STRONG_DEPHASING_RATIO = 1e-2
PARAM_NAMES = ("b", "gamma_total", "baseline_rate", "f_center")


@dataclass(frozen=True)
class RelaxModel:
    b: float
    gamma_total: float
    baseline_rate: float
    f_center: float
    readout_factor: float = DIFFERENTIAL_READOUT

    def __post_init__(self):
        if self.b < 0:
            raise ValueError("b must be non-negative")
        if not self.gamma_total > 0:
            raise ValueError("gamma_total must be positive")
        if self.baseline_rate < 0:
            raise ValueError("baseline_rate must be non-negative")

    @property
    def strong_dephasing(self) -> bool:
        """True in the regime b << Gamma where the Lorentzian law holds."""
        return (self.b * 1e-3) / self.gamma_total < STRONG_DEPHASING_RATIO

    @property
    def params(self) -> np.ndarray:
        return np.array([self.b, self.gamma_total, self.baseline_rate, self.f_center])

    @property
    def peak_excess(self) -> float:
        """Rate above baseline at zero detuning (1/ms)."""
        return self.readout_factor * TWO_PI * self.b**2 / self.gamma_total * 1e-3

    def to_json(self) -> dict:
        return {
            "b_khz": self.b,
            "gamma_mhz": self.gamma_total,
            "baseline_per_ms": self.baseline_rate,
            "f_center_mhz": self.f_center,
            "readout_factor": self.readout_factor,
        }


@dataclass(frozen=True)
class RelaxometryPoint:
    f_plus: float
    rate: float
    sigma: float | None = None

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError("rate must be positive")
        if self.sigma is not None and not self.sigma > 0:
            raise ValueError("sigma must be positive when given")


def detuning(f_nv, f_vb):
    """Angular detuning 2 pi (f_nv - f_vb) in rad/ms for inputs in MHz."""
    return TWO_PI * 1e3 * (np.asarray(f_nv, dtype=float) - np.asarray(f_vb, dtype=float))


def rate_at_detuning(model: RelaxModel, delta) -> np.ndarray:
    """Relaxation rate (1/ms) at angular detuning ``delta`` (rad/ms)."""
    delta = np.asarray(delta, dtype=float)
    g = TWO_PI * 1e3 * model.gamma_total
    b = TWO_PI * model.b
    return model.baseline_rate + model.readout_factor * b * b * g / (delta * delta + g * g)


def relaxation_rate(model: RelaxModel, f_plus) -> np.ndarray:
    return rate_at_detuning(model, detuning(f_plus, model.f_center))


def simulate_t1_trace(t1: float, t_grid: Sequence[float]) -> np.ndarray:
    """Normalized differential T1 signal exp(-t/T1)."""
    if not t1 > 0:
        raise ValueError("t1 must be positive")
    return np.exp(-np.asarray(t_grid, dtype=float) / t1)


# -- model in fit parameterization ------------------------------------------------

def _model_and_jacobian(theta: np.ndarray, f: np.ndarray, k: float) -> tuple[np.ndarray, np.ndarray]:
    b, g, base, fc = theta
    d = f - fc
    den = d * d + g * g
    c = k * TWO_PI * 1e-3
    lor = g / den
    y = base + c * b * b * lor
    jac = np.empty((f.size, 4))
    jac[:, 0] = 2.0 * c * b * lor
    jac[:, 1] = c * b * b * (d * d - g * g) / (den * den)
    jac[:, 2] = 1.0
    jac[:, 3] = c * b * b * g * 2.0 * d / (den * den)
    return y, jac


def model_jacobian(model: RelaxModel, f_plus) -> np.ndarray:
    """Analytic d(rate)/d(b, gamma_total, baseline_rate, f_center)."""
    f = np.atleast_1d(np.asarray(f_plus, dtype=float))
    return _model_and_jacobian(model.params, f, model.readout_factor)[1]


class FitResult(NamedTuple):
    model: RelaxModel
    covariance: np.ndarray
    chi2: float


def _unpack(points: Sequence[RelaxometryPoint]):
    f = np.array([p.f_plus for p in points], dtype=float)
    r = np.array([p.rate for p in points], dtype=float)
    have_sigma = all(p.sigma is not None for p in points)
    s = np.array([p.sigma for p in points], dtype=float) if have_sigma else np.ones_like(r)
    if not (np.all(np.isfinite(f)) and np.all(np.isfinite(r)) and np.all(np.isfinite(s))):
        raise NonFiniteInput("relaxometry data contain non-finite values")
    return f, r, s, have_sigma


def initial_guess(points: Sequence[RelaxometryPoint], readout_factor: float = DIFFERENTIAL_READOUT) -> RelaxModel:
    """Data-driven start: peak position, floor, empirical half width, height."""
    f, r, _, _ = _unpack(points)
    order = np.argsort(f)
    f, r = f[order], r[order]
    i = int(np.argmax(r))
    base = float(r.min())
    height = float(r[i] - base)
    span = float(f[-1] - f[0])
    if height <= 0 or span <= 0:
        return RelaxModel(0.0, max(span, 1.0), base, float(f[i]), readout_factor)
    half = base + 0.5 * height
    above = np.flatnonzero(r >= half)
    fwhm = float(f[above[-1]] - f[above[0]])
    if fwhm <= 0:
        fwhm = span / max(len(f) - 1, 1)
    gamma = 0.5 * fwhm
    b = np.sqrt(height * gamma / (readout_factor * TWO_PI * 1e-3))
    return RelaxModel(float(b), gamma, base, float(f[i]), readout_factor)


def _levenberg_marquardt(resid_jac, theta0: np.ndarray, max_iter: int, xtol: float, ftol: float):
    """Damped Gauss-Newton with Marquardt diagonal scaling.

    ``resid_jac(theta)`` returns weighted residuals and their Jacobian.
    Returns (theta, chi2, jacobian, iterations, converged).
    """
    theta = theta0.astype(float).copy()
    res, jac = resid_jac(theta)
    chi2 = float(res @ res)
    lam = 1e-3
    for it in range(1, max_iter + 1):
        jtj = jac.T @ jac
        grad = jac.T @ res
        diag = np.diag(jtj).copy()
        diag[diag <= 0] = 1.0
        while True:
            a = jtj + lam * np.diag(diag)
            try:
                step = -np.linalg.solve(a, grad)
            except np.linalg.LinAlgError:
                step = -np.linalg.lstsq(a, grad, rcond=None)[0]
            trial = theta + step
            trial[1] = abs(trial[1]) if trial[1] != 0 else theta[1]
            res_t, jac_t = resid_jac(trial)
            chi2_t = float(res_t @ res_t)
            if np.isfinite(chi2_t) and chi2_t <= chi2:
                break
            lam *= 10.0
            if lam > 1e16:
                return theta, chi2, jac, it, True
        small_step = np.all(np.abs(step) <= xtol * (np.abs(theta) + xtol))
        small_drop = (chi2 - chi2_t) <= ftol * max(chi2, 1e-300)
        theta, res, jac = trial, res_t, jac_t
        chi2_prev, chi2 = chi2, chi2_t
        lam = max(lam / 10.0, 1e-12)
        if small_step or (small_drop and chi2_prev - chi2 >= 0 and it > 1) or chi2 == 0.0:
            return theta, chi2, jac, it, True
    return theta, chi2, jac, max_iter, False


def fit_relaxometry(
    points: Sequence[RelaxometryPoint],
    init: RelaxModel | None = None,
    *,
    max_iter: int = 500,
    xtol: float = 1e-12,
    ftol: float = 1e-15,
) -> FitResult:
    """Weighted least-squares fit of (b, gamma_total, baseline_rate, f_center).

    Without per-point sigmas the covariance is scaled by the reduced chi2.
    """
    if len(points) < 5:
        raise DegenerateData(f"need at least 5 points, got {len(points)}")
    f, r, s, have_sigma = _unpack(points)
    if np.ptp(f) == 0:
        raise DegenerateData("all points share the same f_plus")
    if init is None:
        init = initial_guess(points)
    k = init.readout_factor

    def resid_jac(theta):
        y, jac = _model_and_jacobian(theta, f, k)
        return (y - r) / s, jac / s[:, None]

    theta0 = init.params
    if theta0[0] == 0.0:
        # zero coupling is a stationary point of the b-gradient
        theta0[0] = 1e-3 * theta0[1]
    theta, chi2, jac, n_iter, ok = _levenberg_marquardt(resid_jac, theta0, max_iter, xtol, ftol)
    if not ok:
        raise FitDiverged(f"no convergence after {n_iter} iterations (chi2={chi2:.4g})")
    log.debug("relaxometry fit converged in %d iterations, chi2=%g", n_iter, chi2)

    # the model depends on b only through b^2
    theta[0] = abs(theta[0])
    if theta[2] < 0:
        theta[2] = 0.0
    cov = np.linalg.pinv(jac.T @ jac)
    if not have_sigma:
        dof = max(len(points) - 4, 1)
        cov = cov * (chi2 / dof)
    cov = 0.5 * (cov + cov.T)
    model = replace(init, b=float(theta[0]), gamma_total=float(theta[1]), baseline_rate=float(theta[2]), f_center=float(theta[3]))
    if not model.strong_dephasing:
        warnings.warn(
            f"b/Gamma = {model.b * 1e-3 / model.gamma_total:.3g} is outside the strong-dephasing regime",
            RuntimeWarning,
            stacklevel=2,
        )
    return FitResult(model, cov, float(chi2))


def linear_regression(x, y, sigma=None) -> tuple[float, float, float]:
    """Weighted straight-line fit. Returns (slope, intercept, slope_sigma).

    With ``sigma`` the slope error comes from the weights alone; without it
    the residual variance is used (NaN when there are only two points).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.size < 2:
        raise DegenerateData("need at least two (x, y) pairs of equal length")
    if np.ptp(x) == 0:
        raise DegenerateData("all x values are equal")
    w = np.ones_like(x) if sigma is None else 1.0 / np.asarray(sigma, dtype=float) ** 2
    sw = w.sum()
    xm = (w * x).sum() / sw
    ym = (w * y).sum() / sw
    sxx = (w * (x - xm) ** 2).sum()
    slope = (w * (x - xm) * (y - ym)).sum() / sxx
    intercept = ym - slope * xm
    if sigma is not None:
        slope_sigma = np.sqrt(1.0 / sxx)
    elif x.size > 2:
        resid = y - (slope * x + intercept)
        slope_sigma = np.sqrt((resid @ resid) / (x.size - 2) / sxx)
    else:
        slope_sigma = float("nan")
    return float(slope), float(intercept), float(slope_sigma)
