"""Time-series extrapolation of cohort and period effects.

The cohort effect is extended one step with an ARIMA(1,1,0)-with-drift model
estimated by conditional sum of squares; the period effect is extended over
the whole lower triangle with a random walk with drift. Both point forecasts
are invariant to the level/trend freedom left open by the GLM identification
constraints, which is what makes them safe to plug into reserve predictions.

Interval half-widths are Gaussian and reported for plotting only; reserves
use the mean path.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from statistics import NormalDist

import numpy as np

from .errors import SeriesTooShort

Z80 = NormalDist().inv_cdf(0.9)
Z95 = NormalDist().inv_cdf(0.975)


@dataclass(frozen=True)
class ArimaDriftParams:
    """AR(1)-on-differences with drift: dg_k = nu0 + phi * dg_{k-1} + xi_k."""

    phi: float
    nu0: float
    sigma: float
    method: str = "css"
    warnings: tuple[str, ...] = field(default_factory=tuple)


@dataclass(frozen=True)
class RwDriftParams:
    """Random walk with drift: c_p = nu1 + c_{p-1} + xi_p."""

    nu1: float
    sigma: float


@dataclass(frozen=True)
class EffectForecast:
    """Extrapolated effect values with the parameters that produced them.

    `period_ext[s-1]` is the forecast for calendar index m + s, s = 1..H.
    Half-width arrays follow the same layout; the cohort extension is a
    single step so its half-widths are scalars.
    """

    cohort_ext: float | None = None
    cohort_params: ArimaDriftParams | None = None
    cohort_halfwidth80: float | None = None
    cohort_halfwidth95: float | None = None
    period_ext: np.ndarray | None = None
    period_params: RwDriftParams | None = None
    period_halfwidth80: np.ndarray | None = None
    period_halfwidth95: np.ndarray | None = None


def fit_arima_110_drift(series) -> ArimaDriftParams:
    """Estimate (phi, nu0, sigma) by conditional sum of squares.

    Needs at least 4 points (two usable difference pairs). A constant lagged
    regressor makes phi indeterminate; the tie-break is phi = 0 with nu0 the
    mean difference, covering exact linear trends.
    """
    x = np.asarray(series, float)
    if x.size < 4:
        raise SeriesTooShort(f"ARIMA(1,1,0) with drift needs >= 4 points, got {x.size}")
    d = np.diff(x)
    y, lag = d[1:], d[:-1]
    n_eff = y.size
    if np.ptp(lag) <= 1e-12 * max(1.0, float(np.max(np.abs(lag)))):
        phi, nu0 = 0.0, float(np.mean(y))
    else:
        coef, *_ = np.linalg.lstsq(np.column_stack([np.ones_like(lag), lag]), y,
                                   rcond=None)
        nu0, phi = float(coef[0]), float(coef[1])
    resid = y - nu0 - phi * lag
    css = float(resid @ resid)
    sigma = 0.0 if n_eff <= 2 else float(np.sqrt(css / (n_eff - 2)))
    warnings = ()
    if abs(phi) >= 1.0:
        warnings = (f"non-stationary AR coefficient phi = {phi:.4f}",)
    return ArimaDriftParams(phi=phi, nu0=nu0, sigma=sigma, method="css",
                            warnings=warnings)


def fit_arima_110_drift_ml(series) -> ArimaDriftParams:
    """Exact Gaussian ML restricted to the stationary region |phi| < 1.

    Unlike conditional least squares, the likelihood includes the stationary
    distribution of the first difference, so estimates stay stable on short,
    oscillating series where CSS can return an explosive coefficient. The
    profile likelihood in phi is minimized by a scan plus golden-section
    refinement; everything is deterministic.
    """
    x = np.asarray(series, float)
    if x.size < 4:
        raise SeriesTooShort(f"ARIMA(1,1,0) with drift needs >= 4 points, got {x.size}")
    d = np.diff(x)
    n = d.size

    def profile(phi: float) -> tuple[float, float, float]:
        # GLS mean given phi, then sigma^2 profiled out of the likelihood
        a = (1.0 - phi ** 2) + (n - 1) * (1.0 - phi) ** 2
        b = (1.0 - phi ** 2) * d[0] + (1.0 - phi) * float(np.sum(d[1:] - phi * d[:-1]))
        mu = b / a
        s = (1.0 - phi ** 2) * (d[0] - mu) ** 2 + float(
            np.sum((d[1:] - mu - phi * (d[:-1] - mu)) ** 2))
        s = max(s, 1e-300)
        return n * np.log(s / n) - np.log(1.0 - phi ** 2), mu, s

    lo, hi = -1.0 + 1e-6, 1.0 - 1e-6
    grid = np.linspace(lo, hi, 2001)
    values = [profile(p)[0] for p in grid]
    i = int(np.argmin(values))
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    c, e = b - invphi * (b - a), a + invphi * (b - a)
    fc, fe = profile(c)[0], profile(e)[0]
    while b - a > 1e-12:
        if fc < fe:
            b, e, fe = e, c, fc
            c = b - invphi * (b - a)
            fc = profile(c)[0]
        else:
            a, c, fc = c, e, fe
            e = a + invphi * (b - a)
            fe = profile(e)[0]
    phi = (a + b) / 2.0
    _, mu, s = profile(phi)
    sigma = float(np.sqrt(s / max(n - 2, 1)))
    return ArimaDriftParams(phi=float(phi), nu0=float(mu * (1.0 - phi)),
                            sigma=sigma, method="ml-stationary")


def forecast_arima(params: ArimaDriftParams, last_two, h: int) -> np.ndarray:
    """Mean-path forecast: g_t = nu0 + g_{t-1} + phi (g_{t-1} - g_{t-2})."""
    if h < 1:
        raise ValueError("h must be >= 1")
    prev2, prev1 = float(last_two[0]), float(last_two[1])
    out = np.empty(h)
    for s in range(h):
        nxt = params.nu0 + prev1 + params.phi * (prev1 - prev2)
        out[s] = nxt
        prev2, prev1 = prev1, nxt
    return out


def arima_halfwidths(params: ArimaDriftParams, h: int, z: float) -> np.ndarray:
    """Gaussian half-widths for the level forecast at horizons 1..h.

    The s-step error is sum_{r=1..s} c_r xi_{t+r} with c_r the partial sums
    of the AR psi-weights, c_r = 1 + phi + ... + phi^(s-r).
    """
    phi = params.phi
    out = np.empty(h)
    for s in range(1, h + 1):
        cs = np.array([np.sum(phi ** np.arange(s - r + 1)) for r in range(1, s + 1)])
        out[s - 1] = z * params.sigma * float(np.sqrt(np.sum(cs ** 2)))
    return out


def fit_rw_drift(series) -> RwDriftParams:
    """Drift = mean of first differences; sigma their sample std (0 if one)."""
    x = np.asarray(series, float)
    if x.size < 2:
        raise SeriesTooShort(f"random walk with drift needs >= 2 points, got {x.size}")
    d = np.diff(x)
    nu1 = float(np.mean(d))
    sigma = 0.0 if d.size < 2 else float(np.std(d, ddof=1))
    return RwDriftParams(nu1=nu1, sigma=sigma)


def forecast_rw(params: RwDriftParams, last: float, h: int) -> np.ndarray:
    """Mean path last + s * nu1 for s = 1..h."""
    if h < 1:
        raise ValueError("h must be >= 1")
    return float(last) + params.nu1 * np.arange(1, h + 1)


def rw_halfwidths(params: RwDriftParams, h: int, z: float) -> np.ndarray:
    """z * sigma * sqrt(s): widens monotonically with the horizon."""
    return z * params.sigma * np.sqrt(np.arange(1, h + 1))


def forecast_effects(fit, horizon: int | None = None) -> EffectForecast:
    """Extend a fitted development model over the lower triangle.

    Cohort effects (if present) gain one step, g_m, from ARIMA(1,1,0) with
    drift fit on the full reported path g_0..g_{m-1}. Period effects gain
    H = horizon (default m) steps from a random walk with drift, covering
    every lower-triangle calendar index m+1..2m.

    Estimation is by conditional sum of squares; if that lands outside the
    stationary region the warning is kept and the parameters are refit by
    stationary exact ML, which is the only defensible way to extrapolate an
    AR step estimated from a handful of points.
    """
    kw: dict = {}
    if fit.g is not None:
        params = fit_arima_110_drift(fit.g)
        if abs(params.phi) >= 1.0:
            refit = fit_arima_110_drift_ml(fit.g)
            params = ArimaDriftParams(
                phi=refit.phi, nu0=refit.nu0, sigma=refit.sigma,
                method=refit.method,
                warnings=params.warnings + (
                    "refit by stationary ML after non-stationary CSS estimate",))
        kw["cohort_params"] = params
        kw["cohort_ext"] = float(forecast_arima(params, fit.g[-2:], 1)[0])
        kw["cohort_halfwidth80"] = float(arima_halfwidths(params, 1, Z80)[0])
        kw["cohort_halfwidth95"] = float(arima_halfwidths(params, 1, Z95)[0])
    if fit.c is not None:
        h = fit.m if horizon is None else horizon
        params = fit_rw_drift(fit.c)
        kw["period_params"] = params
        kw["period_ext"] = forecast_rw(params, fit.c[-1], h)
        kw["period_halfwidth80"] = rw_halfwidths(params, h, Z80)
        kw["period_halfwidth95"] = rw_halfwidths(params, h, Z95)
    return EffectForecast(**kw)
