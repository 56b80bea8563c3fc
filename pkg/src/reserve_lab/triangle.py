"""Run-off triangle data model.

A run-off triangle holds incremental claim amounts ``X[k, j]`` for cohort
(accident period) ``k`` and development period ``j``, with exactly the cells
``k + j <= m`` observed. From it we derive cumulative amounts, the exposure
``E[k, j] = sum_{l<j} X[k, l] + eta * X[k, j]`` and the empirical claim
development ``mu[k, j] = X[k, j] / E[k, j]`` for ``j >= 1``.

Cells are real-valued payments; the Poisson machinery downstream treats them
as a quasi-likelihood response. Absent cells are tracked with an explicit
boolean mask, never with NaN arithmetic.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import NonMonotone, RaggedInput, ZeroExposure, DegenerateHazard

__all__ = [
    "RunOffTriangle",
    "ExposureTriangle",
    "HazardTriangle",
    "read_triangle_csv",
    "write_triangle_csv",
    "occurrence_to_incremental",
]


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def triangle_mask(m: int) -> np.ndarray:
    """Boolean (m+1, m+1) mask of observed cells: True where k + j <= m."""
    k, j = np.indices((m + 1, m + 1))
    return k + j <= m


@dataclass(frozen=True)
class RunOffTriangle:
    """Immutable incremental run-off triangle.

    Attributes
    ----------
    m : int
        Maximum index; the triangle has m+1 cohorts and development
        periods 0..m.
    values : np.ndarray
        (m+1, m+1) incremental amounts; entries outside the mask are 0
        and must be ignored.
    strict : bool
        Strict triangles reject negative increments at construction.
        Lenient ones record them in `warnings`; downstream fits give the
        offending cells zero weight.
    origin_label : str | None
        Optional label of the first accident period.
    warnings : tuple[str, ...]
        Data-quality notes collected in lenient mode.
    """

    m: int
    values: np.ndarray
    strict: bool = True
    origin_label: str | None = None
    warnings: tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self):
        _freeze(self.values)

    # -- construction ------------------------------------------------------

    @classmethod
    def from_incremental(cls, matrix, strict: bool = True,
                         origin_label: str | None = None) -> "RunOffTriangle":
        """Build from incremental amounts with absent lower-right cells.

        `matrix` may be a rectangular array with NaN/None in unobserved
        positions, or a ragged list of rows (row k holding m+1-k values).

        Raises
        ------
        RaggedInput
            If the present cells do not form an upper-left triangle.
        NonMonotone
            If an increment is negative and `strict` is True.
        """
        values, m = _coerce_triangle(matrix)
        warnings = _check_increments(values, m, strict)
        return cls(m=m, values=values, strict=strict,
                   origin_label=origin_label, warnings=warnings)

    @classmethod
    def from_cumulative(cls, matrix, strict: bool = True,
                        origin_label: str | None = None) -> "RunOffTriangle":
        """Build from cumulative amounts: stores X[k, j] = C[k, j] - C[k, j-1]."""
        cum, m = _coerce_triangle(matrix)
        values = cum.copy()
        values[:, 1:] = cum[:, 1:] - cum[:, :-1]
        values[~triangle_mask(m)] = 0.0
        warnings = _check_increments(values, m, strict)
        return cls(m=m, values=values, strict=strict,
                   origin_label=origin_label, warnings=warnings)

    # -- views -------------------------------------------------------------

    @property
    def mask(self) -> np.ndarray:
        """Observed-cell mask: True where k + j <= m."""
        return triangle_mask(self.m)

    @property
    def n_cells(self) -> int:
        return int(self.mask.sum())

    def incremental(self) -> np.ndarray:
        """Incremental amounts with NaN in unobserved cells (a copy, for display/IO)."""
        out = self.values.astype(float).copy()
        out[~self.mask] = np.nan
        return out

    def cumulative(self) -> np.ndarray:
        """Cumulative amounts C[k, j] = sum_{l<=j} X[k, l], NaN in unobserved cells."""
        out = np.cumsum(self.values, axis=1)
        out[~self.mask] = np.nan
        return out

    def latest_diagonal(self) -> np.ndarray:
        """Vector of C[k, m-k] for k = 0..m (the last observed calendar period)."""
        cum = np.cumsum(self.values, axis=1)
        return np.array([cum[k, self.m - k] for k in range(self.m + 1)])

    def occurrence_view(self) -> np.ndarray:
        """Re-index to (age row, period column); cohorts run along diagonals.

        `occ[j, p] = X[p - j, j]` for j <= p <= m, NaN elsewhere. The inverse
        is `occurrence_to_incremental`.
        """
        occ = np.full((self.m + 1, self.m + 1), np.nan)
        for j in range(self.m + 1):
            for p in range(j, self.m + 1):
                occ[j, p] = self.values[p - j, j]
        return occ

    def scaled(self, c: float) -> "RunOffTriangle":
        """Triangle with every cell multiplied by c > 0."""
        if c <= 0:
            raise ValueError("scale factor must be positive")
        return RunOffTriangle(m=self.m, values=self.values * c, strict=self.strict,
                              origin_label=self.origin_label, warnings=self.warnings)

    # -- derived quantities --------------------------------------------------

    def exposure(self, eta: float = 0.5) -> "ExposureTriangle":
        """Exposure E[k, j] = sum_{l<j} X[k, l] + eta * X[k, j] for j >= 1.

        Development period 0 carries no exposure information and is excluded.
        Cells with E <= 0 are flagged degenerate, not raised.
        """
        if not 0.0 <= eta <= 1.0:
            raise ValueError(f"eta must lie in [0, 1], got {eta}")
        cum = np.cumsum(self.values, axis=1)
        e = np.zeros_like(self.values)
        e[:, 1:] = cum[:, :-1] + eta * self.values[:, 1:]
        mask = self.mask.copy()
        mask[:, 0] = False
        e[~mask] = 0.0
        degenerate = tuple((int(k), int(j)) for k, j in np.argwhere(mask & (e <= 0.0)))
        return ExposureTriangle(m=self.m, eta=eta, values=e, mask=mask,
                                degenerate_cells=degenerate)

    def empirical_hazard(self, eta: float = 0.5) -> "HazardTriangle":
        """Empirical claim development mu[k, j] = X[k, j] / E[k, j], j >= 1.

        Raises
        ------
        ZeroExposure
            In strict mode, if any observed j >= 1 cell has E <= 0.
        DegenerateHazard
            In strict mode, if eta * mu >= 1 anywhere (no positive
            development factor exists for such a cell).
        """
        exp = self.exposure(eta)
        if self.strict and exp.degenerate_cells:
            k, j = exp.degenerate_cells[0]
            raise ZeroExposure(k, j)
        mu = np.zeros_like(self.values)
        ok = exp.mask & (exp.values > 0.0)
        mu[ok] = self.values[ok] / exp.values[ok]
        if self.strict and eta > 0:
            bad = exp.mask & (eta * mu >= 1.0)
            if bad.any():
                k, j = map(int, np.argwhere(bad)[0])
                raise DegenerateHazard(float(mu[k, j]), eta, cell=(k, j))
        return HazardTriangle(m=self.m, eta=eta, values=mu, mask=exp.mask,
                              excluded_cells=exp.degenerate_cells)


@dataclass(frozen=True)
class ExposureTriangle:
    """E[k, j] values for j >= 1 cells, with the eta that produced them."""

    m: int
    eta: float
    values: np.ndarray
    mask: np.ndarray  # True on cells where exposure is defined (j >= 1, k+j <= m)
    degenerate_cells: tuple[tuple[int, int], ...] = field(default_factory=tuple)

    def __post_init__(self):
        _freeze(self.values)
        _freeze(self.mask)


@dataclass(frozen=True)
class HazardTriangle:
    """Empirical claim development mu[k, j] on the observed j >= 1 cells."""

    m: int
    eta: float
    values: np.ndarray
    mask: np.ndarray
    excluded_cells: tuple[tuple[int, int], ...] = field(default_factory=tuple)

    def __post_init__(self):
        _freeze(self.values)
        _freeze(self.mask)


# -- shared helpers ----------------------------------------------------------

def _coerce_triangle(matrix) -> tuple[np.ndarray, int]:
    """Normalize rectangular-with-gaps or ragged input to ((m+1, m+1), m).

    Absent cells may be NaN or None; rows may simply stop early. The present
    cells must be exactly {(k, j): k + j <= m}.
    """
    if isinstance(matrix, np.ndarray):
        rows: list[list] = [list(r) for r in matrix.tolist()]
    else:
        rows = [list(r) if isinstance(r, Iterable) else [r] for r in matrix]
    n = len(rows)
    if n == 0:
        raise RaggedInput("empty input")
    m = n - 1
    width = max(len(r) for r in rows)
    if width != n:
        raise RaggedInput(f"{n} rows but widest row has {width} cells; "
                          f"expected a square (m+1) x (m+1) layout")
    full = np.full((n, n), np.nan)
    for k, row in enumerate(rows):
        for j, v in enumerate(row):
            if v is None or v == "":
                continue
            full[k, j] = float(v)
    present = ~np.isnan(full)
    if not np.array_equal(present, triangle_mask(m)):
        raise RaggedInput("present cells do not form an upper-left triangle")
    out = np.where(present, full, 0.0)
    return out, m


def _check_increments(values: np.ndarray, m: int, strict: bool) -> tuple[str, ...]:
    neg = triangle_mask(m) & (values < 0.0)
    if not neg.any():
        return ()
    cells = [(int(k), int(j)) for k, j in np.argwhere(neg)]
    msg = "negative increments (cumulative decreases) at " + ", ".join(
        f"(k={k}, j={j})" for k, j in cells)
    if strict:
        raise NonMonotone(msg)
    return (msg,)


def occurrence_to_incremental(occ: np.ndarray) -> np.ndarray:
    """Invert `occurrence_view`: restore X[k, j] (NaN outside the triangle)."""
    n = occ.shape[0]
    out = np.full((n, n), np.nan)
    for j in range(n):
        for p in range(j, n):
            out[p - j, j] = occ[j, p]
    return out


# -- CSV interchange ---------------------------------------------------------
#
# Format: optional header row `dev_0,...,dev_m`; one row per cohort in
# ascending order; empty fields for unobserved cells. The writer is
# deterministic with fixed 6-decimal output.

def read_triangle_csv(path, kind: str = "cumulative",
                      strict: bool = True) -> RunOffTriangle:
    """Read a triangle CSV; `kind` selects cumulative or incremental values."""
    if kind not in ("cumulative", "incremental"):
        raise ValueError(f"kind must be 'cumulative' or 'incremental', got {kind!r}")
    with open(path, newline="") as fh:
        raw = [row for row in csv.reader(fh) if any(cell.strip() for cell in row)]
    if raw and _looks_like_header(raw[0]):
        raw = raw[1:]
    rows = [[cell.strip() or None for cell in row] for row in raw]
    if kind == "cumulative":
        return RunOffTriangle.from_cumulative(rows, strict=strict)
    return RunOffTriangle.from_incremental(rows, strict=strict)


def write_triangle_csv(tri: RunOffTriangle, path,
                       kind: str = "cumulative") -> None:
    """Write a triangle CSV (header + 6-decimal cells, empty where unobserved)."""
    if kind == "cumulative":
        data = tri.cumulative()
    elif kind == "incremental":
        data = tri.incremental()
    else:
        raise ValueError(f"kind must be 'cumulative' or 'incremental', got {kind!r}")
    header = [f"dev_{j}" for j in range(tri.m + 1)]
    lines = [",".join(header)]
    for k in range(tri.m + 1):
        cells = ["" if np.isnan(v) else f"{v:.6f}" for v in data[k]]
        lines.append(",".join(cells))
    atomic_write_text(path, "\n".join(lines) + "\n")


def _looks_like_header(row: Sequence[str]) -> bool:
    for cell in row:
        cell = cell.strip()
        if not cell:
            continue
        try:
            float(cell)
            return False
        except ValueError:
            return True
    return False


def atomic_write_text(path, text: str) -> None:
    """Write via a temp file + rename so failures never leave partial output."""
    path = os.fspath(path)
    tmp = path + ".tmp"
    with open(tmp, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)
