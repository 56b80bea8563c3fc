"""Development factors, triangle completion, and reserves.

A modeled development rate mu converts to a development factor via

    f = (1 + (1 - eta) * mu) / (1 - eta * mu)

(eta = 1/2 gives (2 + mu) / (2 - mu)), and the lower triangle is completed by
the chain principle: each cohort's last observed cumulative value is rolled
forward by the predicted factors. The classical chain ladder lives here too,
both as a baseline and as the oracle the age-only development model must
replicate for every eta.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateHazard, MissingForecast, ZeroDenominator
from .forecast import EffectForecast, forecast_effects
from .hazard_glm import HazardFit, ModelSpec, fit as fit_hazard
from .triangle import RunOffTriangle, atomic_write_text

log = logging.getLogger(__name__)

HAZARD_CAP_MARGIN = 1e-6


def hazard_to_factor(mu: float, eta: float) -> float:
    """f = (1 + (1-eta) mu) / (1 - eta mu); requires eta * mu < 1."""
    if eta * mu >= 1.0:
        raise DegenerateHazard(mu, eta)
    return (1.0 + (1.0 - eta) * mu) / (1.0 - eta * mu)


def factor_to_hazard(f: float, eta: float) -> float:
    """Inverse transform mu = (f - 1) / (eta f + 1 - eta); needs f > 0."""
    if f <= 0.0:
        raise ValueError(f"development factor must be positive, got {f}")
    return (f - 1.0) / (eta * f + 1.0 - eta)


@dataclass(frozen=True)
class ReserveReport:
    """Per-cohort and total reserves with the completed cumulative triangle.

    `completed[k, j]` holds the observed cumulative value for k + j <= m and
    the predicted one below the diagonal; `factors[k, j]` holds the predicted
    development factors on the lower region (NaN elsewhere).
    """

    model: str
    m: int
    reserves: np.ndarray
    total: float
    completed: np.ndarray
    factors: np.ndarray
    warnings: tuple[str, ...] = field(default_factory=tuple)

    def predicted_increments(self) -> np.ndarray:
        """X_hat[k, j] = completed[k, j] - completed[k, j-1] on the lower region."""
        out = np.full((self.m + 1, self.m + 1), np.nan)
        for k in range(1, self.m + 1):
            for j in range(self.m - k + 1, self.m + 1):
                out[k, j] = self.completed[k, j] - self.completed[k, j - 1]
        return out

    def to_json_dict(self) -> dict:
        return {
            "model": self.model,
            "m": self.m,
            "reserves": [float(r) for r in self.reserves],
            "total": float(self.total),
            "warnings": list(self.warnings),
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_json_dict(), **kwargs)

    def write_completed_csv(self, path) -> None:
        """Completed cumulative triangle, 6-decimal cells, one row per cohort."""
        header = [f"dev_{j}" for j in range(self.m + 1)]
        lines = [",".join(header)]
        for k in range(self.m + 1):
            lines.append(",".join(f"{self.completed[k, j]:.6f}"
                                  for j in range(self.m + 1)))
        atomic_write_text(path, "\n".join(lines) + "\n")


def predicted_factors(fit: HazardFit, fc: EffectForecast | None = None,
                      cap_hazard: bool = False) -> np.ndarray:
    """Development factors for every lower-region cell (k + j > m, j <= m).

    The rate at (k, j) is exp(a_j [+ c_{k+j}] [+ g_k]) with the period effect
    taken from the forecast (the lower region is entirely in future calendar
    time) and the cohort effect from the forecast for k = m.

    Raises
    ------
    MissingForecast
        If the structure needs an effect the forecast does not cover.
    DegenerateHazard
        If eta * mu >= 1 at some cell and `cap_hazard` is off; capping clamps
        the rate just below the pole and logs a warning instead.
    """
    m, eta = fit.m, fit.spec.eta
    if fit.c is not None:
        if fc is None or fc.period_ext is None:
            raise MissingForecast("structure with a period effect needs period_ext")
        if len(fc.period_ext) < m:
            raise MissingForecast(
                f"period forecast covers {len(fc.period_ext)} steps; need {m}")
    if fit.g is not None and (fc is None or fc.cohort_ext is None):
        raise MissingForecast("structure with a cohort effect needs cohort_ext")

    factors = np.full((m + 1, m + 1), np.nan)
    for k in range(1, m + 1):
        for j in range(m - k + 1, m + 1):
            mu = np.exp(fit.log_rate(
                k, j,
                cohort_ext=fc.cohort_ext if fc is not None else None,
                period_ext=fc.period_ext if fc is not None else None))
            if eta * mu >= 1.0:
                if not cap_hazard:
                    raise DegenerateHazard(mu, eta, cell=(k, j))
                capped = (1.0 / eta) * (1.0 - HAZARD_CAP_MARGIN)
                log.warning("capping development rate %.6g at %.6g for cell "
                            "(k=%d, j=%d)", mu, capped, k, j)
                mu = capped
            factors[k, j] = hazard_to_factor(mu, eta)
    return factors


def complete(tri: RunOffTriangle, factors: np.ndarray,
             model: str = "custom",
             warnings: tuple[str, ...] = ()) -> ReserveReport:
    """Roll the latest diagonal forward through `factors` and take reserves.

    The first predicted cumulative value in each cohort starts from the
    observed diagonal; fitted values never overwrite observations.
    """
    m = tri.m
    completed = np.cumsum(tri.values, axis=1)
    completed[~tri.mask] = 0.0
    reserves = np.zeros(m + 1)
    for k in range(1, m + 1):
        c = completed[k, m - k]
        for j in range(m - k + 1, m + 1):
            c = c * factors[k, j]
            completed[k, j] = c
        reserves[k] = completed[k, m] - completed[k, m - k]
    total = float(reserves.sum())
    return ReserveReport(model=model, m=m, reserves=reserves, total=total,
                         completed=completed, factors=factors,
                         warnings=warnings)


def chain_ladder_factors(tri: RunOffTriangle) -> np.ndarray:
    """Pooled factors f_j = sum_{k<=m-j} C[k,j] / sum_{k<=m-j} C[k,j-1]."""
    m = tri.m
    cum = np.cumsum(tri.values, axis=1)
    out = np.empty(m)
    for j in range(1, m + 1):
        rows = slice(0, m - j + 1)
        den = float(np.sum(cum[rows, j - 1]))
        if den == 0.0:
            raise ZeroDenominator(f"pooled cumulative sum is zero at j={j}")
        out[j - 1] = float(np.sum(cum[rows, j])) / den
    return out


def chain_ladder_reserve(tri: RunOffTriangle) -> ReserveReport:
    """Classical chain ladder: complete with cohort-constant pooled factors."""
    m = tri.m
    f = chain_ladder_factors(tri)
    factors = np.full((m + 1, m + 1), np.nan)
    for k in range(1, m + 1):
        for j in range(m - k + 1, m + 1):
            factors[k, j] = f[j - 1]
    return complete(tri, factors, model="cl")


def hazard_reserve(tri: RunOffTriangle, structure: str = "a", eta: float = 0.5,
                   cap_hazard: bool = False) -> tuple[ReserveReport, HazardFit, EffectForecast]:
    """Full development-model pipeline: fit, extrapolate effects, complete."""
    hf = fit_hazard(ModelSpec(structure=structure, eta=eta), tri)
    fc = forecast_effects(hf)
    factors = predicted_factors(hf, fc, cap_hazard=cap_hazard)
    warnings = ()
    if fc.cohort_params is not None:
        warnings += fc.cohort_params.warnings
    report = complete(tri, factors, model=f"dev-{structure}", warnings=warnings)
    return report, hf, fc
