"""Command-line front-end.

Commands
--------
reserve    fit a model and write the reserve report + completed triangle
residuals  scaled deviance residual CSV and heat-map for a fitted model
effects    fitted + extrapolated effect paths (CSV per effect, one figure)
rank       hold out the last diagonal of every triangle in a corpus and
           rank the models by error incidence
bakeoff    train/validation/test comparison of model families on a corpus

All computation is deterministic: identical inputs and flags give
byte-identical outputs. The environment variable RESERVE_LAB_SEED is
reserved but currently unused.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import datasets
from .amount_glm import fit_amount
from .diagnostics import residual_export, residuals_for_amount_fit, residuals_for_hazard_fit
from .errors import ReserveLabError
from .evaluation import (
    DEFAULT_MODELS,
    HAZARD_MODELS,
    AMOUNT_MODELS,
    family_bakeoff,
    rank_models,
    reserve_for_model,
    run_corpus,
    CorpusResult,
)
from .forecast import forecast_effects
from .hazard_glm import ModelSpec, fit as fit_hazard
from .triangle import atomic_write_text, read_triangle_csv

MODEL_CHOICES = ("a", "ac", "ap", "apc", "amount-ac", "amount-apc", "cl")
FORMATS = ("json", "csv", "svg")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="reserve-lab",
        description="Claims reserving on run-off triangles: chain ladder, "
                    "claim-development GLMs, and diagonal-holdout backtesting.")
    sub = parser.add_subparsers(dest="command", required=True)

    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--input", required=True,
                        help="triangle CSV (a directory of CSVs for rank/bakeoff); "
                             "bundled dataset names work too: "
                             + ", ".join(datasets.names()))
    shared.add_argument("--kind", choices=("cumulative", "incremental"),
                        default="cumulative", help="how to read the CSV cells")
    shared.add_argument("--model", choices=MODEL_CHOICES, default="a")
    shared.add_argument("--eta", type=float, default=0.5,
                        help="share of the current increment counted as exposure")
    shared.add_argument("--cap-hazard", dest="cap_hazard", action="store_true",
                        help="clamp degenerate development rates instead of failing")
    shared.add_argument("--no-cap", dest="cap_hazard", action="store_false")
    shared.add_argument("--strict", dest="strict", action="store_true", default=True,
                        help="reject negative increments and zero exposures (default)")
    shared.add_argument("--lenient", dest="strict", action="store_false",
                        help="downgrade data problems to warnings; offending "
                             "cells get zero weight")
    shared.add_argument("--out-dir", default=".", help="directory for output files")
    shared.add_argument("--format", choices=FORMATS, action="append", default=None,
                        help="restrict output formats (repeatable; default: all "
                             "that apply to the command)")
    shared.set_defaults(cap_hazard=False)

    sub.add_parser("reserve", parents=[shared],
                   help="reserve report for one model on one triangle")
    sub.add_parser("residuals", parents=[shared],
                   help="scaled deviance residuals of a fitted model")
    sub.add_parser("effects", parents=[shared],
                   help="fitted and extrapolated effect paths")
    p_rank = sub.add_parser("rank", parents=[shared],
                            help="rank all models by held-out error incidence")
    p_rank.add_argument("--ei-basis", choices=("cumulative", "incremental"),
                        default="cumulative",
                        help="score held diagonals on cumulative (default) or "
                             "incremental values")
    p_bake = sub.add_parser("bakeoff", parents=[shared],
                            help="family comparison with validation + test diagonals")
    p_bake.add_argument("--ei-basis", choices=("cumulative", "incremental"),
                        default="cumulative")
    p_bake.add_argument("--no-refit", dest="refit", action="store_false",
                        default=True,
                        help="score the test diagonal without refitting on "
                             "train+validation")
    return parser


def _validate(parser, args) -> None:
    if not 0.0 <= args.eta <= 1.0:
        parser.error(f"--eta must lie in [0, 1], got {args.eta}")
    if args.command in ("residuals", "effects") and args.model == "cl":
        parser.error(f"--model cl has no GLM fit; pick one of "
                     f"{', '.join(HAZARD_MODELS + AMOUNT_MODELS)}")
    if args.command == "effects" and args.model in AMOUNT_MODELS:
        parser.error("effects paths are for development models; pick one of "
                     + ", ".join(HAZARD_MODELS))


def _resolve_input(parser, args) -> Path:
    path = Path(args.input)
    if path.exists():
        return path
    if args.input in datasets.names():
        return Path(str(datasets.path(args.input)))
    parser.error(f"--input {args.input!r} is neither a path nor a bundled "
                 f"dataset ({', '.join(datasets.names())})")


def _formats(args, applicable: tuple[str, ...]) -> set[str]:
    chosen = set(args.format) if args.format else set(applicable)
    return chosen & set(applicable)


def _read_triangle(path: Path, args):
    return read_triangle_csv(path, kind=args.kind, strict=args.strict)


def _out(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_reserve(args, path: Path) -> int:
    tri = _read_triangle(path, args)
    report = reserve_for_model(args.model, tri, eta=args.eta,
                               cap_hazard=args.cap_hazard)
    out = _out(args)
    formats = _formats(args, ("json", "csv"))
    if "json" in formats:
        atomic_write_text(out / f"reserve_{args.model}.json",
                          report.to_json(indent=2) + "\n")
    if "csv" in formats:
        report.write_completed_csv(out / f"completed_{args.model}.csv")
    print(f"model: {args.model}")
    print("cohort  reserve")
    for k, r in enumerate(report.reserves):
        print(f"{k:6d}  {r:12.2f}")
    print(f" total  {report.total:12.2f}")
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return 0


def _fit_for(args, tri):
    if args.model in AMOUNT_MODELS:
        fit = fit_amount(args.model, tri)
        return fit, residuals_for_amount_fit(fit, tri)
    fit = fit_hazard(ModelSpec(args.model, args.eta), tri)
    return fit, residuals_for_hazard_fit(fit, tri)


def cmd_residuals(args, path: Path) -> int:
    tri = _read_triangle(path, args)
    fit, res = _fit_for(args, tri)
    out = _out(args)
    formats = _formats(args, ("csv", "svg"))
    if "csv" in formats:
        residual_export(res, out / f"residuals_{args.model}.csv", format="csv")
    if "svg" in formats:
        residual_export(res, out / f"residuals_{args.model}.svg", format="svg")
    print(f"model: {args.model}  cells: {res.n_obs}  deviance: {res.deviance:.6f}  "
          f"dispersion: {res.dispersion:.6f}")
    return 0


def _effect_csv(out_path, index, values, fc_index=(), fc_values=(),
                hw80=(), hw95=()) -> None:
    lines = ["index,value,lo80,hi80,lo95,hi95"]
    for i, v in zip(index, values):
        lines.append(f"{i},{v:.6f},,,,")
    for i, v, w80, w95 in zip(fc_index, fc_values, hw80, hw95):
        lines.append(f"{i},{v:.6f},{v - w80:.6f},{v + w80:.6f},"
                     f"{v - w95:.6f},{v + w95:.6f}")
    atomic_write_text(out_path, "\n".join(lines) + "\n")


def cmd_effects(args, path: Path) -> int:
    tri = _read_triangle(path, args)
    fit = fit_hazard(ModelSpec(args.model, args.eta), tri)
    fc = forecast_effects(fit)
    out = _out(args)
    formats = _formats(args, ("csv", "svg"))
    m = fit.m
    if "csv" in formats:
        _effect_csv(out / f"effects_{args.model}_age.csv",
                    range(1, m + 1), fit.a)
        if fit.c is not None:
            _effect_csv(out / f"effects_{args.model}_period.csv",
                        range(1, m + 1), fit.c,
                        range(m + 1, m + 1 + len(fc.period_ext)), fc.period_ext,
                        fc.period_halfwidth80, fc.period_halfwidth95)
        if fit.g is not None:
            _effect_csv(out / f"effects_{args.model}_cohort.csv",
                        range(m), fit.g,
                        [m], [fc.cohort_ext],
                        [fc.cohort_halfwidth80], [fc.cohort_halfwidth95])
    if "svg" in formats:
        from .plots import effect_paths_figure
        effect_paths_figure(fit, fc, out / f"effects_{args.model}.svg")
    parts = [f"age[{m}]"]
    if fit.c is not None:
        parts.append(f"period[{m}+{len(fc.period_ext)}]")
    if fit.g is not None:
        parts.append(f"cohort[{m}+1]")
    print(f"model: {args.model}  effects: {', '.join(parts)}")
    return 0


def _corpus_result(args, path: Path, mode: str) -> CorpusResult:
    if path.is_dir():
        return run_corpus(path, eta=args.eta, kind=args.kind,
                          strict=args.strict, basis=args.ei_basis, mode=mode)
    tri = _read_triangle(path, args)
    if mode == "rank":
        rep = rank_models(tri, DEFAULT_MODELS, eta=args.eta,
                          dataset=path.stem, basis=args.ei_basis)
    else:
        rep = family_bakeoff(tri, eta=args.eta, dataset=path.stem,
                             basis=args.ei_basis, refit=args.refit)
    return CorpusResult(reports=(rep,), failures=())


def cmd_rank(args, path: Path) -> int:
    result = _corpus_result(args, path, "rank")
    out = _out(args)
    formats = _formats(args, ("json", "csv"))
    if "json" in formats:
        result.write_json(out / "rank.json")
    if "csv" in formats:
        result.write_csv(out / "rank.csv")
        mean = result.mean_ranks()
        lines = ["model,mean_rank"] + [f"{m},{v:.4f}" for m, v in mean.items()]
        atomic_write_text(out / "mean_ranks.csv", "\n".join(lines) + "\n")
    for rep in result.reports:
        print(f"dataset: {rep.dataset}")
        for s in rep.scores:
            ei = "failed" if math.isinf(s.ei) else f"{s.ei:.6f}"
            extra = f"  ({s.failure})" if s.failure else ""
            print(f"  rank {s.rank}: {s.model:11s} EI {ei}{extra}")
    if result.mean_ranks():
        print("mean ranks:")
        for mname, v in result.mean_ranks().items():
            print(f"  {mname:11s} {v:.2f}")
    for name, reason in result.failures:
        print(f"dataset {name} failed: {reason}", file=sys.stderr)
    return 0


def cmd_bakeoff(args, path: Path) -> int:
    result = _corpus_result(args, path, "bakeoff")
    out = _out(args)
    formats = _formats(args, ("json", "csv"))
    if "json" in formats:
        result.write_json(out / "bakeoff.json")
    if "csv" in formats:
        lines = ["dataset,family,selected,validation_ei,test_ei"]
        for rep in result.reports:
            for fam in rep.families:
                ve = "" if fam.validation_ei is None else f"{fam.validation_ei:.10g}"
                te = "" if fam.test_ei is None else f"{fam.test_ei:.10g}"
                lines.append(f"{rep.dataset},{fam.family},{fam.selected or ''},{ve},{te}")
        atomic_write_text(out / "bakeoff.csv", "\n".join(lines) + "\n")
    for rep in result.reports:
        print(f"dataset: {rep.dataset}")
        for fam in rep.families:
            if fam.selected is None:
                print(f"  {fam.family:12s} no model fit successfully")
            else:
                print(f"  {fam.family:12s} selected {fam.selected:11s} "
                      f"validation EI {fam.validation_ei:.6f} "
                      f"test EI {fam.test_ei:.6f}")
    for name, reason in result.failures:
        print(f"dataset {name} failed: {reason}", file=sys.stderr)
    return 0


_COMMANDS = {
    "reserve": cmd_reserve,
    "residuals": cmd_residuals,
    "effects": cmd_effects,
    "rank": cmd_rank,
    "bakeoff": cmd_bakeoff,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _validate(parser, args)
    path = _resolve_input(parser, args)
    if args.command in ("rank", "bakeoff") and path.is_dir() \
            and not any(path.glob("*.csv")):
        parser.error(f"no .csv triangles found in {path}")
    try:
        return _COMMANDS[args.command](args, path)
    except (ReserveLabError, FileNotFoundError, ValueError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
