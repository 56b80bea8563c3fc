"""Diagonal-holdout backtesting: error incidence, model ranking, bake-offs.

The most recent calendar diagonals are held out, models are fit on the
remaining sub-triangle, and their one-period-ahead predictions are scored by
error incidence: the absolute value of the summed prediction error on the
held diagonal divided by the total observed payments in the training data.
EI is scale-free, so it compares across triangles of different sizes.

A model fit on a sub-triangle with max index mt can predict the cells of a
future diagonal p whose cohort was seen and whose development age stays
within mt, i.e. k = p-mt..mt; the two corner cells of a held diagonal (new
cohort's first payment, oldest cohort's unseen age) are outside every model
considered here and are excluded from scoring for all of them alike.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .amount_glm import amount_reserve
from .errors import ReserveLabError, TooFewDiagonals, ZeroDenominator
from .reserving import ReserveReport, chain_ladder_reserve, hazard_reserve
from .triangle import RunOffTriangle, read_triangle_csv, atomic_write_text

HAZARD_MODELS = ("a", "ac", "ap", "apc")
AMOUNT_MODELS = ("amount-ac", "amount-apc")
DEFAULT_MODELS = HAZARD_MODELS + AMOUNT_MODELS
DEFAULT_FAMILIES = {
    "development": list(HAZARD_MODELS),
    "amount": list(AMOUNT_MODELS),
    "all": list(DEFAULT_MODELS),
}


def reserve_for_model(model: str, tri: RunOffTriangle, eta: float = 0.5,
                      cap_hazard: bool = False) -> ReserveReport:
    """Run the reserving pipeline named by a model descriptor."""
    if model == "cl":
        return chain_ladder_reserve(tri)
    if model in HAZARD_MODELS:
        return hazard_reserve(tri, model, eta=eta, cap_hazard=cap_hazard)[0]
    if model in AMOUNT_MODELS:
        return amount_reserve(tri, model)[0]
    raise ValueError(f"unknown model {model!r}; expected cl, "
                     f"{', '.join(HAZARD_MODELS + AMOUNT_MODELS)}")


@dataclass(frozen=True)
class HoldoutSplit:
    """Training sub-triangle plus the removed cells grouped by diagonal."""

    train: RunOffTriangle
    held: tuple[tuple[int, tuple[tuple[int, int, float], ...]], ...]
    n_diagonals: int
    original_m: int

    def reassemble(self) -> RunOffTriangle:
        """Union of train and held cells; must reproduce the original."""
        m = self.original_m
        values = np.zeros((m + 1, m + 1))
        tm = self.train.m
        values[:tm + 1, :tm + 1] = self.train.values
        for _, cells in self.held:
            for k, j, x in cells:
                values[k, j] = x
        rows = [[values[k, j] if k + j <= m else None for j in range(m + 1)]
                for k in range(m + 1)]
        return RunOffTriangle.from_incremental(rows, strict=self.train.strict)


def split(tri: RunOffTriangle, n_diagonals: int) -> HoldoutSplit:
    """Remove the last `n_diagonals` calendar diagonals (cells k+j > m-d).

    Raises TooFewDiagonals unless 1 <= n_diagonals <= m - 2, so the training
    triangle can still support a fit.
    """
    m = tri.m
    if n_diagonals < 1 or n_diagonals > m - 2:
        raise TooFewDiagonals(
            f"need 1 <= n_diagonals <= m - 2 = {m - 2}, got {n_diagonals}")
    mt = m - n_diagonals
    rows = [[tri.values[k, j] if k + j <= mt else None for j in range(mt + 1)]
            for k in range(mt + 1)]
    train = RunOffTriangle.from_incremental(rows, strict=tri.strict)
    held = []
    for p in range(mt + 1, m + 1):
        cells = tuple((k, p - k, float(tri.values[k, p - k]))
                      for k in range(p + 1))
        held.append((p, cells))
    return HoldoutSplit(train=train, held=tuple(held),
                        n_diagonals=n_diagonals, original_m=m)


def error_incidence(predicted, actual, train: RunOffTriangle) -> float:
    """|sum(predicted - actual)| / total observed payments in `train`."""
    pred = np.asarray(predicted, float)
    act = np.asarray(actual, float)
    den = float(tri_total(train))
    if den == 0.0:
        raise ZeroDenominator("training triangle has zero total payments")
    return abs(float(np.sum(pred - act))) / den


def tri_total(tri: RunOffTriangle) -> float:
    return float(tri.values[tri.mask].sum())


def scorable_cells(p: int, train_m: int) -> list[tuple[int, int]]:
    """Cells of diagonal p predictable from a fit with max index train_m."""
    return [(k, p - k) for k in range(p - train_m, train_m + 1)]


def diagonal_ei(report: ReserveReport, original: RunOffTriangle, p: int,
                train: RunOffTriangle, basis: str = "cumulative") -> float:
    """EI of a completed report against diagonal p of the original triangle.

    `basis` picks cumulative (default) or incremental operands; for a
    one-step-ahead diagonal the two coincide because the prior cumulative
    value is observed.
    """
    cells = scorable_cells(p, report.m)
    if basis == "cumulative":
        cum = np.cumsum(original.values, axis=1)
        pred = [report.completed[k, j] for k, j in cells]
        act = [cum[k, j] for k, j in cells]
    elif basis == "incremental":
        inc = report.predicted_increments()
        pred = [inc[k, j] for k, j in cells]
        act = [original.values[k, j] for k, j in cells]
    else:
        raise ValueError(f"basis must be 'cumulative' or 'incremental', got {basis!r}")
    return error_incidence(pred, act, train)


@dataclass(frozen=True)
class ModelScore:
    model: str
    diagonal: int
    ei: float  # math.inf when the pipeline failed
    rank: int
    failure: str | None = None

    def to_json_dict(self) -> dict:
        return {"model": self.model, "diagonal": self.diagonal,
                "ei": None if math.isinf(self.ei) else self.ei,
                "rank": self.rank, "failure": self.failure}


@dataclass(frozen=True)
class FamilyResult:
    family: str
    selected: str | None
    validation_ei: float | None
    test_ei: float | None
    member_scores: tuple[ModelScore, ...] = field(default_factory=tuple)

    def to_json_dict(self) -> dict:
        return {"family": self.family, "selected": self.selected,
                "validation_ei": self.validation_ei, "test_ei": self.test_ei,
                "members": [s.to_json_dict() for s in self.member_scores]}


@dataclass(frozen=True)
class EvalReport:
    dataset: str
    scores: tuple[ModelScore, ...] = field(default_factory=tuple)
    families: tuple[FamilyResult, ...] = field(default_factory=tuple)

    def to_json_dict(self) -> dict:
        out: dict = {"dataset": self.dataset}
        if self.scores:
            out["ranking"] = [s.to_json_dict() for s in self.scores]
        if self.families:
            out["families"] = [f.to_json_dict() for f in self.families]
        return out

    def rows(self) -> list[tuple]:
        """Flat (dataset, model, diagonal, ei, rank) rows for CSV export."""
        return [(self.dataset, s.model, s.diagonal,
                 "" if math.isinf(s.ei) else f"{s.ei:.10g}", s.rank)
                for s in self.scores]


def _score_models(models, train, original, p, eta, basis):
    raw = []
    for model in models:
        try:
            report = reserve_for_model(model, train, eta=eta)
            ei = diagonal_ei(report, original, p, train, basis=basis)
            raw.append((model, ei, None))
        except (ReserveLabError, ValueError, FloatingPointError) as exc:
            raw.append((model, math.inf, f"{type(exc).__name__}: {exc}"))
    return raw


def _ranked(raw, diagonal) -> tuple[ModelScore, ...]:
    order = sorted(range(len(raw)), key=lambda i: (raw[i][1], i))
    ranks = {idx: pos + 1 for pos, idx in enumerate(order)}
    return tuple(ModelScore(model=m, diagonal=diagonal, ei=ei, rank=ranks[i],
                            failure=fail)
                 for i, (m, ei, fail) in enumerate(raw))


def rank_models(tri: RunOffTriangle, models=DEFAULT_MODELS, eta: float = 0.5,
                dataset: str = "triangle", basis: str = "cumulative") -> EvalReport:
    """Hold out the last diagonal, fit every model on the rest, rank by EI.

    Pipeline failures are recorded, not raised; failed models rank last in
    input order.
    """
    sp = split(tri, 1)
    raw = _score_models(models, sp.train, tri, tri.m, eta, basis)
    return EvalReport(dataset=dataset, scores=_ranked(raw, tri.m))


def family_bakeoff(tri: RunOffTriangle, families=None, eta: float = 0.5,
                   dataset: str = "triangle", basis: str = "cumulative",
                   refit: bool = True) -> EvalReport:
    """Select per family on a validation diagonal, then score the test diagonal.

    The last two diagonals are held out; each family's best model on the
    validation diagonal (fit on the remaining triangle) is refit on
    train+validation and scored on the test diagonal. `refit=False` scores
    the original fit two steps ahead instead. Families whose members all fail
    report no selection.
    """
    if families is None:
        families = DEFAULT_FAMILIES
    sp2 = split(tri, 2)
    valid_p, test_p = tri.m - 1, tri.m
    sp1 = split(tri, 1)

    results = []
    for name, members in families.items():
        raw = _score_models(members, sp2.train, tri, valid_p, eta, basis)
        scores = _ranked(raw, valid_p)
        best = min(raw, key=lambda t: (t[1], members.index(t[0])))
        if math.isinf(best[1]):
            results.append(FamilyResult(family=name, selected=None,
                                        validation_ei=None, test_ei=None,
                                        member_scores=scores))
            continue
        selected = best[0]
        try:
            if refit:
                report = reserve_for_model(selected, sp1.train, eta=eta)
                test_ei = diagonal_ei(report, tri, test_p, sp1.train, basis=basis)
            else:
                report = reserve_for_model(selected, sp2.train, eta=eta)
                test_ei = diagonal_ei(report, tri, test_p, sp2.train, basis=basis)
        except (ReserveLabError, ValueError):
            results.append(FamilyResult(family=name, selected=selected,
                                        validation_ei=best[1], test_ei=None,
                                        member_scores=scores))
            continue
        results.append(FamilyResult(family=name, selected=selected,
                                    validation_ei=best[1], test_ei=test_ei,
                                    member_scores=scores))
    return EvalReport(dataset=dataset, families=tuple(results))


# -- corpus runner -----------------------------------------------------------

@dataclass(frozen=True)
class CorpusResult:
    reports: tuple[EvalReport, ...]
    failures: tuple[tuple[str, str], ...]  # (dataset, reason)

    def mean_ranks(self) -> dict[str, float]:
        """Mean rank per model across all datasets that produced a ranking."""
        totals: dict[str, list[int]] = {}
        for rep in self.reports:
            for s in rep.scores:
                totals.setdefault(s.model, []).append(s.rank)
        return {m: float(np.mean(r)) for m, r in sorted(totals.items())}

    def to_json_dict(self) -> dict:
        return {
            "datasets": [rep.to_json_dict() for rep in self.reports],
            "failures": [{"dataset": d, "reason": r} for d, r in self.failures],
            "mean_ranks": self.mean_ranks(),
        }

    def write_csv(self, path) -> None:
        lines = ["dataset,model,diagonal,ei,rank"]
        for rep in self.reports:
            for row in rep.rows():
                lines.append(",".join(str(v) for v in row))
        atomic_write_text(path, "\n".join(lines) + "\n")

    def write_json(self, path) -> None:
        atomic_write_text(path, json.dumps(self.to_json_dict(), indent=2) + "\n")


def run_corpus(directory, models=DEFAULT_MODELS, eta: float = 0.5,
               kind: str = "cumulative", strict: bool = True,
               basis: str = "cumulative", mode: str = "rank") -> CorpusResult:
    """Rank models (or run the family bake-off) on every CSV in a directory.

    Datasets that cannot be read or split are recorded as failures and the
    run continues.
    """
    paths = sorted(Path(directory).glob("*.csv"))
    if not paths:
        raise FileNotFoundError(f"no .csv triangles found in {directory}")
    reports, failures = [], []
    for p in paths:
        name = p.stem
        try:
            tri = read_triangle_csv(p, kind=kind, strict=strict)
            if mode == "rank":
                reports.append(rank_models(tri, models, eta=eta, dataset=name,
                                           basis=basis))
            else:
                reports.append(family_bakeoff(tri, eta=eta, dataset=name,
                                              basis=basis))
        except (ReserveLabError, ValueError) as exc:
            failures.append((name, f"{type(exc).__name__}: {exc}"))
    return CorpusResult(reports=tuple(reports), failures=tuple(failures))
