"""Scaled deviance residuals and dispersion for model criticism.

For observed X, fitted X_hat, K cells and nu parameters:

    dev(k, j) = 2 [X log(X / X_hat) - (X - X_hat)]     (2 X_hat when X = 0)
    r(k, j)   = sign(X - X_hat) sqrt(dev(k, j) (K - nu) / D),  D = sum dev

so that sum r^2 = K - nu and D / (K - nu) estimates the dispersion.
Heat-maps of r over the triangle expose structure the model missed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonPositiveFitted, SaturatedModel
from .hazard_glm import HazardFit, fitted_hazard
from .amount_glm import AmountFit
from .triangle import RunOffTriangle, atomic_write_text


@dataclass(frozen=True)
class ResidualMatrix:
    """Scaled residuals and deviance decomposition over the fitted cells."""

    residuals: np.ndarray  # NaN outside the fitted cells
    dev_cells: np.ndarray
    mask: np.ndarray
    deviance: float
    dispersion: float
    n_obs: int
    n_params: int


def scaled_deviance_residuals(observed: np.ndarray, fitted: np.ndarray,
                              mask: np.ndarray, n_params: int) -> ResidualMatrix:
    """Residual matrix from aligned observed/fitted arrays and a cell mask.

    Raises
    ------
    SaturatedModel
        If the cell count equals the parameter count.
    NonPositiveFitted
        If a fitted value on a masked cell is not strictly positive.
    """
    k_obs = int(mask.sum())
    if k_obs <= n_params:
        raise SaturatedModel(f"K = {k_obs} cells but nu = {n_params} parameters")
    if np.any(fitted[mask] <= 0.0):
        bad = np.argwhere(mask & (fitted <= 0.0))[0]
        raise NonPositiveFitted(f"fitted value <= 0 at cell (k={bad[0]}, j={bad[1]})")

    x = observed
    xh = fitted
    dev = np.zeros_like(xh)
    with np.errstate(divide="ignore", invalid="ignore"):
        term = np.where(x > 0, x * np.log(np.where(x > 0, x, 1.0) / xh), 0.0)
    dev[mask] = 2.0 * (term[mask] - (x[mask] - xh[mask]))
    dev = np.maximum(dev, 0.0)  # guard tiny negative round-off
    total = float(dev[mask].sum())

    res = np.full_like(xh, np.nan)
    if total > 0.0:
        scale = (k_obs - n_params) / total
        res[mask] = np.sign(x[mask] - xh[mask]) * np.sqrt(dev[mask] * scale)
    else:
        res[mask] = 0.0
    dev_out = np.full_like(xh, np.nan)
    dev_out[mask] = dev[mask]
    return ResidualMatrix(residuals=res, dev_cells=dev_out, mask=mask,
                          deviance=total,
                          dispersion=total / (k_obs - n_params),
                          n_obs=k_obs, n_params=n_params)


def residuals_for_hazard_fit(fit: HazardFit, tri: RunOffTriangle) -> ResidualMatrix:
    """Residuals of a development fit: X_hat = E * mu_tilde on j >= 1 cells."""
    exp_tri = tri.exposure(fit.spec.eta)
    mu = fitted_hazard(fit)
    fitted = exp_tri.values * mu.values
    mask = mu.mask.copy()
    for k, j in fit.excluded_cells:
        mask[k, j] = False
    return scaled_deviance_residuals(tri.values, fitted, mask, fit.n_params)


def residuals_for_amount_fit(fit: AmountFit, tri: RunOffTriangle) -> ResidualMatrix:
    """Residuals of an amount fit over the full upper triangle."""
    fitted = fit.fitted_values()
    mask = tri.mask.copy()
    for k, j in fit.excluded_cells:
        mask[k, j] = False
    return scaled_deviance_residuals(tri.values, fitted, mask, fit.n_params)


def residual_export(res: ResidualMatrix, path, format: str = "csv") -> None:
    """Write residuals as `cohort,dev,residual` CSV or as an SVG heat-map."""
    if format == "csv":
        lines = ["cohort,dev,residual"]
        for k, j in np.argwhere(res.mask):
            lines.append(f"{k},{j},{res.residuals[k, j]:.10g}")
        atomic_write_text(path, "\n".join(lines) + "\n")
    elif format == "svg":
        from .plots import residual_heatmap
        residual_heatmap(res, path)
    else:
        raise ValueError(f"format must be 'csv' or 'svg', got {format!r}")
