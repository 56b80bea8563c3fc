"""Claim-amount GLM baselines on incremental triangles.

These model the incremental amounts themselves, E[X_kj] = exp(alpha_k +
beta_j [+ gamma_{k+j}]), over the full upper triangle including development 0.
The cross-classified age-cohort form replicates chain ladder; the
age-period-cohort form adds a calendar effect that must be extrapolated for
prediction. Note the contrast with the development models: amounts need a
parameter per cohort *and* per age, roughly twice as many.

Identification: beta_0 = 0; the APC form adds sum gamma = 0 and
sum p * gamma_p = 0 over the observed calendar indices p = 0..m.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ._glm import nullspace_basis, poisson_irls
from .errors import MissingForecast
from .forecast import fit_rw_drift, forecast_rw
from .reserving import ReserveReport
from .triangle import RunOffTriangle

STRUCTURES = ("amount-ac", "amount-apc")


@dataclass(frozen=True)
class AmountFit:
    """Log-scale effects: alpha[k] cohort, beta[j] age, gamma[p] period."""

    structure: str
    m: int
    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray | None
    deviance: float
    n_obs: int
    n_params: int
    converged: bool
    iterations: int
    excluded_cells: tuple[tuple[int, int], ...] = field(default_factory=tuple)

    def log_mean(self, k: int, j: int, period_ext: np.ndarray | None = None) -> float:
        val = float(self.alpha[k]) + float(self.beta[j])
        if self.gamma is not None:
            p = k + j
            if p <= self.m:
                val += float(self.gamma[p])
            else:
                val += float(period_ext[p - self.m - 1])
        return val

    def fitted_values(self) -> np.ndarray:
        """exp(linear predictor) on the upper triangle, 0 outside."""
        out = np.zeros((self.m + 1, self.m + 1))
        for k in range(self.m + 1):
            for j in range(self.m - k + 1):
                out[k, j] = np.exp(self.log_mean(k, j))
        return out

    def to_json_dict(self) -> dict:
        eff = {
            "cohort": {"index": list(range(self.m + 1)),
                       "value": [float(v) for v in self.alpha]},
            "age": {"index": list(range(self.m + 1)),
                    "value": [float(v) for v in self.beta]},
        }
        if self.gamma is not None:
            eff["period"] = {"index": list(range(self.m + 1)),
                             "value": [float(v) for v in self.gamma]}
        return {
            "model": "amount",
            "structure": self.structure,
            "effects": eff,
            "deviance": self.deviance,
            "n_obs": self.n_obs,
            "n_params": self.n_params,
            "converged": self.converged,
            "iterations": self.iterations,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_json_dict(), **kwargs)


def fit_amount(structure: str, tri: RunOffTriangle) -> AmountFit:
    """Poisson log-link MLE on incremental amounts over the full triangle."""
    structure = structure.lower()
    if structure not in STRUCTURES:
        raise ValueError(f"structure must be one of {STRUCTURES}, got {structure!r}")
    m = tri.m
    if structure == "amount-apc" and m < 2:
        raise ValueError(f"structure {structure!r} needs m >= 2, got m = {m}")

    cells = [(k, j) for k in range(m + 1) for j in range(m - k + 1)]
    x = np.array([tri.values[k, j] for k, j in cells])
    w = np.ones(len(cells))
    excluded = []
    for i, (k, j) in enumerate(cells):
        if x[i] < 0.0:
            w[i] = 0.0
            excluded.append((k, j))

    n = len(cells)
    blocks = [np.zeros((n, m + 1)), np.zeros((n, m))]
    for i, (k, j) in enumerate(cells):
        blocks[0][i, k] = 1.0
        if j >= 1:
            blocks[1][i, j - 1] = 1.0  # beta_0 = 0 reference
    period_basis = None
    if structure == "amount-apc":
        ps = np.arange(m + 1, dtype=float)
        period_basis = nullspace_basis(np.vstack([np.ones(m + 1), ps]))
        per = np.zeros((n, period_basis.shape[1]))
        for i, (k, j) in enumerate(cells):
            per[i] = period_basis[k + j]
        blocks.append(per)
    design = np.hstack(blocks)

    beta0 = np.zeros(design.shape[1])
    for k in range(m + 1):
        idx = [i for i, (kk, j) in enumerate(cells) if kk == k and w[i] > 0]
        mean = float(np.mean([x[i] for i in idx])) if idx else 1.0
        beta0[k] = np.log(max(mean, 1e-10))

    coefs, deviance, iters, converged = poisson_irls(
        x, design, np.zeros(n), w, beta0)

    alpha = coefs[:m + 1].copy()
    beta = np.concatenate([[0.0], coefs[m + 1:2 * m + 1]])
    gamma = period_basis @ coefs[2 * m + 1:] if period_basis is not None else None
    return AmountFit(structure=structure, m=m, alpha=alpha, beta=beta,
                     gamma=gamma, deviance=deviance, n_obs=int(w.sum()),
                     n_params=design.shape[1], converged=converged,
                     iterations=iters, excluded_cells=tuple(excluded))


def predict_amount_lower(fit: AmountFit,
                         period_ext: np.ndarray | None = None) -> np.ndarray:
    """Predicted increments exp(alpha_k + beta_j [+ gamma_{k+j}]) for k+j > m.

    APC fits need `period_ext` covering calendar indices m+1..2m.
    """
    m = fit.m
    if fit.gamma is not None:
        if period_ext is None or len(period_ext) < m:
            raise MissingForecast("amount-apc prediction needs a period forecast "
                                  f"of length {m}")
    out = np.full((m + 1, m + 1), np.nan)
    for k in range(1, m + 1):
        for j in range(m - k + 1, m + 1):
            out[k, j] = np.exp(fit.log_mean(k, j, period_ext=period_ext))
    return out


def amount_reserve(tri: RunOffTriangle, structure: str = "amount-ac"
                   ) -> tuple[ReserveReport, AmountFit]:
    """Fit, extrapolate the period effect if present, and build the report."""
    fit = fit_amount(structure, tri)
    period_ext = None
    if fit.gamma is not None:
        params = fit_rw_drift(fit.gamma)
        period_ext = forecast_rw(params, fit.gamma[-1], fit.m)
    increments = predict_amount_lower(fit, period_ext)

    m = tri.m
    completed = np.cumsum(tri.values, axis=1)
    completed[~tri.mask] = 0.0
    factors = np.full((m + 1, m + 1), np.nan)
    reserves = np.zeros(m + 1)
    for k in range(1, m + 1):
        c = completed[k, m - k]
        for j in range(m - k + 1, m + 1):
            prev = c
            c = c + increments[k, j]
            completed[k, j] = c
            factors[k, j] = c / prev if prev != 0.0 else np.nan
        reserves[k] = completed[k, m] - completed[k, m - k]
    report = ReserveReport(model=structure, m=m, reserves=reserves,
                           total=float(reserves.sum()), completed=completed,
                           factors=factors)
    return report, fit
