"""Matplotlib figure rendering (SVG) for residual heat-maps and effect paths.

All figures are written as self-contained SVG with deterministic output:
glyphs are rendered as paths, element ids are salted with a fixed string and
no timestamp metadata is embedded, so identical inputs give identical bytes.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from matplotlib.colors import Normalize
from matplotlib.cm import ScalarMappable

matplotlib.rcParams["svg.fonttype"] = "path"
matplotlib.rcParams["svg.hashsalt"] = "reserve-lab"

_SAVE_KW = {"format": "svg", "metadata": {"Date": None}, "bbox_inches": "tight"}


def _save(fig, path) -> None:
    """Render to a temp file and rename, so errors never leave partial SVGs."""
    path = os.fspath(path)
    tmp = path + ".tmp"
    fig.savefig(tmp, **_SAVE_KW)
    plt.close(fig)
    os.replace(tmp, path)


def residual_heatmap(res, path, title: str | None = None) -> None:
    """Diverging heat-map of scaled residuals: cohort rows, development columns.

    The color scale is symmetric around zero with bounds at max |r|; every
    fitted cell is drawn as its own rectangle (gid `cell-<k>-<j>`).
    """
    r = res.residuals
    mask = res.mask
    n = r.shape[0]
    bound = float(np.nanmax(np.abs(r[mask]))) if mask.any() else 1.0
    if bound == 0.0:
        bound = 1.0
    norm = Normalize(vmin=-bound, vmax=bound)
    cmap = plt.get_cmap("RdBu_r")

    fig, ax = plt.subplots(figsize=(6.4, 5.2))
    for k, j in np.argwhere(mask):
        rect = plt.Rectangle((j, k), 1.0, 1.0, facecolor=cmap(norm(r[k, j])),
                             edgecolor="white", linewidth=0.6)
        rect.set_gid(f"cell-{k}-{j}")
        ax.add_patch(rect)
    ax.set_xlim(0, n)
    ax.set_ylim(n, 0)
    ax.set_xticks(np.arange(n) + 0.5, [str(j) for j in range(n)])
    ax.set_yticks(np.arange(n) + 0.5, [str(k) for k in range(n)])
    ax.set_xlabel("development period")
    ax.set_ylabel("cohort")
    if title:
        ax.set_title(title)
    cbar = fig.colorbar(ScalarMappable(norm=norm, cmap=cmap), ax=ax)
    cbar.set_ticks([-bound, -bound / 2, 0.0, bound / 2, bound])
    cbar.set_ticklabels([f"{v:.2f}" for v in (-bound, -bound / 2, 0.0, bound / 2, bound)])
    _save(fig, path)


def effect_paths_figure(fit, fc, path) -> None:
    """One panel per effect of a development fit, extrapolations included."""
    panels = [("age", np.arange(1, fit.m + 1), fit.a, None, None)]
    if fit.c is not None:
        idx_f = np.arange(fit.m + 1, fit.m + 1 + len(fc.period_ext))
        panels.append(("period", np.arange(1, fit.m + 1), fit.c,
                       (idx_f, fc.period_ext),
                       (fc.period_halfwidth80, fc.period_halfwidth95)))
    if fit.g is not None:
        panels.append(("cohort", np.arange(len(fit.g)), fit.g,
                       (np.array([fit.m]), np.array([fc.cohort_ext])),
                       (np.array([fc.cohort_halfwidth80]),
                        np.array([fc.cohort_halfwidth95]))))

    fig, axes = plt.subplots(1, len(panels), figsize=(4.6 * len(panels), 3.6),
                             squeeze=False)
    for ax, (name, idx, values, extra, widths) in zip(axes[0], panels):
        ax.plot(idx, values, "o-", color="black")
        if extra is not None:
            idx_f, vals_f = extra
            hw80, hw95 = widths
            ax.fill_between(idx_f, vals_f - hw95, vals_f + hw95,
                            color="firebrick", alpha=0.15, linewidth=0)
            ax.fill_between(idx_f, vals_f - hw80, vals_f + hw80,
                            color="firebrick", alpha=0.25, linewidth=0)
            ax.plot(idx_f, vals_f, "o--", color="firebrick")
            ax.axvline((idx[-1] + idx_f[0]) / 2.0, color="gray",
                       linestyle=":", linewidth=1)
        ax.set_title(name)
        ax.set_xlabel("index")
    axes[0][0].set_ylabel("log-scale effect")
    _save(fig, path)
