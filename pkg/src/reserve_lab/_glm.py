"""Poisson log-link IRLS core shared by the development and amount GLMs.

Real-valued responses are allowed: everything here is a quasi-likelihood in
which the Poisson deviance plays the role of the objective. Point estimates
coincide with the integer-Poisson MLE.
"""

from __future__ import annotations

import numpy as np

from .errors import NoConvergence, NotIdentifiable

MAX_ITER = 200
REL_TOL = 1e-10
_LIN_CLIP = 700.0  # keeps exp() finite while parameters are still moving


def poisson_deviance(y: np.ndarray, mu: np.ndarray,
                     weights: np.ndarray | None = None) -> float:
    """2 * sum w * [y log(y/mu) - (y - mu)]; the y = 0 limit is 2 w mu."""
    with np.errstate(divide="ignore", invalid="ignore"):
        ylog = np.where(y > 0, y * np.log(np.where(y > 0, y, 1.0) / mu), 0.0)
    dev = 2.0 * (ylog - (y - mu))
    if weights is not None:
        dev = weights * dev
    return float(np.sum(dev))


def poisson_irls(y: np.ndarray, design: np.ndarray, offset: np.ndarray,
                 weights: np.ndarray, beta0: np.ndarray,
                 max_iter: int = MAX_ITER, rel_tol: float = REL_TOL,
                 trace: list | None = None):
    """Fisher scoring for a Poisson GLM with log link and additive offset.

    Step-halving keeps the deviance non-increasing; convergence is declared
    when |delta deviance| < rel_tol * (deviance + 1).

    Returns
    -------
    (beta, deviance, iterations, converged)

    Raises
    ------
    NotIdentifiable
        If the weighted design is rank-deficient.
    NoConvergence
        If the iteration cap is reached first.
    """
    y = np.asarray(y, float)
    w = np.asarray(weights, float)
    sw = np.sqrt(w)
    wz_design = design * sw[:, None]
    if np.linalg.matrix_rank(wz_design) < design.shape[1]:
        raise NotIdentifiable(
            f"design has {design.shape[1]} columns but weighted rank "
            f"{np.linalg.matrix_rank(wz_design)}")

    def dev_at(beta):
        mu = np.exp(np.clip(offset + design @ beta, -_LIN_CLIP, _LIN_CLIP))
        return poisson_deviance(y, mu, w), mu

    beta = beta0.copy()
    dev, mu = dev_at(beta)
    if trace is not None:
        trace.append(dev)
    for it in range(1, max_iter + 1):
        irls_w = w * mu
        eta = np.clip(offset + design @ beta, -_LIN_CLIP, _LIN_CLIP)
        z = (eta - offset) + (y - mu) / mu
        sq = np.sqrt(irls_w)
        beta_new, *_ = np.linalg.lstsq(design * sq[:, None], z * sq, rcond=None)

        # step-halve back toward the current point if the full step overshoots
        step = beta_new - beta
        dev_new, mu_new = dev_at(beta + step)
        halvings = 0
        while dev_new > dev + 1e-12 * (abs(dev) + 1.0) and halvings < 30:
            step *= 0.5
            dev_new, mu_new = dev_at(beta + step)
            halvings += 1
        if halvings == 30 and dev_new > dev:
            # cannot improve: already at the optimum to working precision
            return beta, dev, it, True

        beta = beta + step
        improved = dev - dev_new
        dev, mu = dev_new, mu_new
        if trace is not None:
            trace.append(dev)
        if abs(improved) < rel_tol * (dev + 1.0):
            return beta, dev, it, True

    raise NoConvergence(f"IRLS did not converge in {max_iter} iterations "
                        f"(last deviance {dev:.6g})")


def nullspace_basis(constraints: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the null space of a constraint matrix (rows)."""
    u, s, vt = np.linalg.svd(constraints)
    tol = s.max() * max(constraints.shape) * np.finfo(float).eps
    rank = int((s > tol).sum())
    return vt[rank:].T
