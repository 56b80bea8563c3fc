"""Claim-development (averaged reversed-time hazard) GLMs on run-off triangles.

Four additive structures are supported for the log development rate on the
observed cells with j >= 1:

    a    log mu[k, j] = a_j                     (replicates chain ladder)
    ac   log mu[k, j] = a_j + g_k
    ap   log mu[k, j] = a_j + c_{k+j}
    apc  log mu[k, j] = a_j + c_{k+j} + g_k

All are fit by Poisson IRLS with the log of the exposure as offset. Cohort m
contributes no j >= 1 cell, so cohort effects cover k = 0..m-1 only; period
effects cover the observed calendar indices p = 1..m.

Identification: `ac` pins g_0 = 0, `ap` pins c_1 = 0, and `apc` imposes
sum_k g_k = 0, sum_k k*g_k = 0 together with c_1 = 0. Fitted development
rates, and therefore reserves, do not depend on this choice.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ._glm import nullspace_basis, poisson_irls
from .errors import EmptyColumn, ZeroExposure
from .triangle import ExposureTriangle, HazardTriangle, RunOffTriangle, triangle_mask

STRUCTURES = ("a", "ac", "ap", "apc")

_MIN_M = {"a": 1, "ac": 2, "ap": 2, "apc": 3}


@dataclass(frozen=True)
class ModelSpec:
    """Which additive structure to fit, and the exposure convention."""

    structure: str = "a"
    eta: float = 0.5

    def __post_init__(self):
        s = self.structure.lower()
        if s not in STRUCTURES:
            raise ValueError(f"structure must be one of {STRUCTURES}, got {self.structure!r}")
        object.__setattr__(self, "structure", s)
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"eta must lie in [0, 1], got {self.eta}")

    @property
    def has_period(self) -> bool:
        return "p" in self.structure and self.structure != "a"

    @property
    def has_cohort(self) -> bool:
        return self.structure in ("ac", "apc")


@dataclass(frozen=True)
class HazardFit:
    """Fitted effect vectors (log scale) plus fit metadata.

    `a[j-1]` is the age effect for development j = 1..m, `c[p-1]` the period
    effect for calendar index p = 1..m, `g[k]` the cohort effect for
    k = 0..m-1.
    """

    spec: ModelSpec
    m: int
    a: np.ndarray
    c: np.ndarray | None
    g: np.ndarray | None
    deviance: float
    n_obs: int
    n_params: int
    converged: bool
    iterations: int
    excluded_cells: tuple[tuple[int, int], ...] = field(default_factory=tuple)

    def log_rate(self, k: int, j: int, cohort_ext: float | None = None,
                 period_ext: np.ndarray | None = None) -> float:
        """Linear predictor at (k, j); forecast effects cover k = m / p > m."""
        val = float(self.a[j - 1])
        p = k + j
        if self.c is not None:
            if p <= self.m:
                val += float(self.c[p - 1])
            else:
                val += float(period_ext[p - self.m - 1])
        if self.g is not None:
            if k < self.m:
                val += float(self.g[k])
            else:
                val += float(cohort_ext)
        return val

    def to_json_dict(self) -> dict:
        eff = {"age": {"index": list(range(1, self.m + 1)),
                       "value": [float(v) for v in self.a]}}
        if self.c is not None:
            eff["period"] = {"index": list(range(1, self.m + 1)),
                             "value": [float(v) for v in self.c]}
        if self.g is not None:
            eff["cohort"] = {"index": list(range(self.m)),
                             "value": [float(v) for v in self.g]}
        return {
            "model": "development",
            "structure": self.spec.structure,
            "eta": self.spec.eta,
            "effects": eff,
            "deviance": self.deviance,
            "n_obs": self.n_obs,
            "n_params": self.n_params,
            "converged": self.converged,
            "iterations": self.iterations,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_json_dict(), **kwargs)


def fit_age_closed_form(haz: HazardTriangle, exp: ExposureTriangle) -> np.ndarray:
    """Age-only estimates on the linear scale: a_j = sum_k X[k,j] / sum_k E[k,j].

    Raises EmptyColumn if a development column has no usable cell.
    """
    m = haz.m
    excluded = set(haz.excluded_cells)
    out = np.empty(m)
    for j in range(1, m + 1):
        num = den = 0.0
        for k in range(m - j + 1):
            if (k, j) in excluded:
                continue
            num += haz.values[k, j] * exp.values[k, j]
            den += exp.values[k, j]
        if den <= 0.0:
            raise EmptyColumn(j)
        out[j - 1] = num / den
    return out


def fit(spec: ModelSpec, tri: RunOffTriangle) -> HazardFit:
    """Fit the requested development structure by Poisson IRLS.

    For structure `a`, exp() of the returned log-scale age effects equals the
    closed-form ratio of sums.

    Raises
    ------
    ValueError
        If the triangle is too small to identify the structure.
    ZeroExposure
        If a strict triangle has an observed j >= 1 cell with E <= 0.
    NotIdentifiable, NoConvergence
        Propagated from the IRLS core.
    """
    m = tri.m
    if m < _MIN_M[spec.structure]:
        raise ValueError(
            f"structure {spec.structure!r} needs a triangle with m >= "
            f"{_MIN_M[spec.structure]}, got m = {m}")

    exp_tri = tri.exposure(spec.eta)
    if tri.strict and exp_tri.degenerate_cells:
        raise ZeroExposure(*exp_tri.degenerate_cells[0])

    cells = [(k, j) for k in range(m) for j in range(1, m - k + 1)]
    x = np.array([tri.values[k, j] for k, j in cells])
    e = np.array([exp_tri.values[k, j] for k, j in cells])

    # lenient mode: zero-exposure or negative cells get zero weight
    w = np.ones(len(cells))
    excluded = []
    for i, (k, j) in enumerate(cells):
        if e[i] <= 0.0 or x[i] < 0.0:
            w[i] = 0.0
            e[i] = 1.0  # keeps the offset finite; the cell is inert
            excluded.append((k, j))

    design, cohort_basis = _build_design(spec, m, cells)
    beta0 = _initial_beta(spec, m, design.shape[1], x, e, w, cells)
    beta, deviance, iters, converged = poisson_irls(
        x, design, np.log(e), w, beta0)

    a, c, g = _unpack_effects(spec, m, beta, cohort_basis)
    _check_constraints(spec, c, g)
    return HazardFit(spec=spec, m=m, a=a, c=c, g=g, deviance=deviance,
                     n_obs=int(w.sum()), n_params=design.shape[1],
                     converged=converged, iterations=iters,
                     excluded_cells=tuple(excluded))


def fitted_hazard(fit: HazardFit) -> HazardTriangle:
    """Fitted development rates exp(a_j [+ c_{k+j}] [+ g_k]) on the upper cells."""
    m = fit.m
    mask = triangle_mask(m)
    mask[:, 0] = False
    mu = np.zeros((m + 1, m + 1))
    for k in range(m):
        for j in range(1, m - k + 1):
            mu[k, j] = np.exp(fit.log_rate(k, j))
    return HazardTriangle(m=m, eta=fit.spec.eta, values=mu, mask=mask,
                          excluded_cells=fit.excluded_cells)


# -- internals ---------------------------------------------------------------

def _build_design(spec: ModelSpec, m: int, cells) -> tuple[np.ndarray, np.ndarray | None]:
    n = len(cells)
    blocks = [np.zeros((n, m))]
    for i, (k, j) in enumerate(cells):
        blocks[0][i, j - 1] = 1.0
    if spec.has_period:
        per = np.zeros((n, m - 1))  # free columns p = 2..m (c_1 = 0)
        for i, (k, j) in enumerate(cells):
            p = k + j
            if p >= 2:
                per[i, p - 2] = 1.0
        blocks.append(per)
    cohort_basis = None
    if spec.has_cohort:
        if spec.structure == "ac":
            coh = np.zeros((n, m - 1))  # free columns k = 1..m-1 (g_0 = 0)
            for i, (k, j) in enumerate(cells):
                if k >= 1:
                    coh[i, k - 1] = 1.0
        else:
            # apc: substitute g = B theta with B spanning the null space of
            # sum_k g_k = 0 and sum_k k g_k = 0 over k = 0..m-1
            ks = np.arange(m, dtype=float)
            cohort_basis = nullspace_basis(np.vstack([np.ones(m), ks]))
            coh = np.zeros((n, cohort_basis.shape[1]))
            for i, (k, j) in enumerate(cells):
                coh[i] = cohort_basis[k]
        blocks.append(coh)
    return np.hstack(blocks), cohort_basis


def _initial_beta(spec: ModelSpec, m: int, n_cols: int, x, e, w, cells) -> np.ndarray:
    beta0 = np.zeros(n_cols)
    for j in range(1, m + 1):
        idx = [i for i, (k, jj) in enumerate(cells) if jj == j and w[i] > 0]
        num = sum(x[i] for i in idx)
        den = sum(e[i] for i in idx)
        ratio = num / den if den > 0 else 1.0
        beta0[j - 1] = np.log(max(ratio, 1e-10))
    return beta0


def _unpack_effects(spec: ModelSpec, m: int, beta: np.ndarray,
                    cohort_basis: np.ndarray | None):
    a = beta[:m].copy()
    c = g = None
    pos = m
    if spec.has_period:
        c = np.concatenate([[0.0], beta[pos:pos + m - 1]])
        pos += m - 1
    if spec.has_cohort:
        if spec.structure == "ac":
            g = np.concatenate([[0.0], beta[pos:pos + m - 1]])
        else:
            g = cohort_basis @ beta[pos:]
    return a, c, g


def _check_constraints(spec: ModelSpec, c, g, tol: float = 1e-10) -> None:
    if c is not None:
        assert abs(c[0]) <= tol
    if g is not None:
        if spec.structure == "ac":
            assert abs(g[0]) <= tol
        else:
            scale = max(1.0, float(np.max(np.abs(g))))
            ks = np.arange(len(g), dtype=float)
            assert abs(float(np.sum(g))) <= tol * scale * len(g)
            assert abs(float(ks @ g)) <= tol * scale * len(g) ** 2
