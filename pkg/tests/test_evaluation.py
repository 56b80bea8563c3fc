"""Holdout splitting, error incidence, model ranking, and the family bake-off."""

import math

import numpy as np
import pytest

from reserve_lab.errors import TooFewDiagonals, ZeroDenominator
from reserve_lab.evaluation import (
    DEFAULT_MODELS,
    diagonal_ei,
    error_incidence,
    family_bakeoff,
    rank_models,
    reserve_for_model,
    run_corpus,
    scorable_cells,
    split,
    tri_total,
)
from reserve_lab.triangle import RunOffTriangle, write_triangle_csv
from tests.conftest import make_random_triangle
from tests.test_hazard_glm import synthetic_from_effects


class TestSplit:
    def test_autobi_one_diagonal(self, autobi):
        sp = split(autobi, 1)
        assert sp.train.m == 6
        assert sp.train.n_cells == 28
        held = sp.held
        assert len(held) == 1
        p, cells = held[0]
        assert p == 7
        assert len(cells) == 8  # the full removed diagonal, corners included
        assert sp.train.n_cells + len(cells) == autobi.n_cells

    def test_bad_counts_rejected(self, autobi):
        with pytest.raises(TooFewDiagonals):
            split(autobi, 0)
        with pytest.raises(TooFewDiagonals):
            split(autobi, autobi.m - 1)

    def test_reassembly_identity(self, autobi, rng):
        for tri, d in [(autobi, 1), (autobi, 2),
                       (make_random_triangle(rng, 9), 3)]:
            back = split(tri, d).reassemble()
            assert back.m == tri.m
            assert np.array_equal(back.values, tri.values)


class TestErrorIncidence:
    def test_perfect_prediction_zero(self, autobi):
        sp = split(autobi, 1)
        actual = [10.0, 20.0, 30.0]
        assert error_incidence(actual, actual, sp.train) == 0.0

    def test_unit_construction(self, autobi):
        sp = split(autobi, 1)
        total = tri_total(sp.train)
        assert error_incidence([5.0 + total], [5.0], sp.train) == pytest.approx(1.0)

    def test_scale_invariance(self, rng):
        tri = make_random_triangle(rng, 7)
        for c in (0.1, 10.0):
            scaled = tri.scaled(c)
            base = _model_ei(tri, "a")
            assert _model_ei(scaled, "a") == pytest.approx(base, rel=1e-9)

    def test_zero_denominator(self):
        z = RunOffTriangle.from_incremental(
            [[0.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0], [0.0]])
        with pytest.raises(ZeroDenominator):
            error_incidence([1.0], [0.0], z)

    def test_cumulative_equals_incremental_one_step_ahead(self, autobi):
        sp = split(autobi, 1)
        rep = reserve_for_model("a", sp.train)
        ei_c = diagonal_ei(rep, autobi, autobi.m, sp.train, basis="cumulative")
        ei_i = diagonal_ei(rep, autobi, autobi.m, sp.train, basis="incremental")
        assert ei_c == pytest.approx(ei_i, rel=1e-12)

    def test_scorable_cells_exclude_corners(self):
        assert scorable_cells(7, 6) == [(1, 6), (2, 5), (3, 4), (4, 3),
                                        (5, 2), (6, 1)]


def _model_ei(tri, model):
    sp = split(tri, 1)
    rep = reserve_for_model(model, sp.train)
    return diagonal_ei(rep, tri, tri.m, sp.train)


class TestRanking:
    def test_ranks_are_permutation(self, autobi):
        report = rank_models(autobi)
        ranks = sorted(s.rank for s in report.scores)
        assert ranks == list(range(1, len(DEFAULT_MODELS) + 1))

    def test_deterministic(self, autobi):
        r1 = rank_models(autobi)
        r2 = rank_models(autobi)
        assert r1 == r2

    def test_identical_models_tie_stably(self, autobi):
        report = rank_models(autobi, models=("a", "a"))
        assert report.scores[0].ei == report.scores[1].ei
        assert report.scores[0].rank == 1 and report.scores[1].rank == 2

    def test_age_and_amount_ac_equal_ei(self, autobi, rng):
        triangles = [autobi] + [make_random_triangle(rng, int(rng.integers(4, 9)))
                                for _ in range(5)]
        for tri in triangles:
            assert _model_ei(tri, "a") == pytest.approx(
                _model_ei(tri, "amount-ac"), rel=1e-9, abs=1e-12)

    def test_pure_age_triangle_ranks_a_first(self):
        a_log = np.log(np.array([0.9, 0.5, 0.25, 0.12, 0.05, 0.02, 0.01]))
        tri = synthetic_from_effects(7, a_log)
        report = rank_models(tri)
        by_rank = sorted(report.scores, key=lambda s: s.rank)
        assert by_rank[0].model == "a"
        assert by_rank[0].ei < 1e-10

    def test_failures_rank_last_with_reason(self, autobi):
        report = rank_models(autobi, models=("a", "apc", "amount-xyz"))
        failed = [s for s in report.scores if s.failure is not None]
        assert len(failed) == 1
        assert failed[0].model == "amount-xyz"
        assert failed[0].rank == 3
        assert math.isinf(failed[0].ei)

    def test_rows_for_csv(self, autobi):
        report = rank_models(autobi, dataset="autobi")
        rows = report.rows()
        assert len(rows) == len(DEFAULT_MODELS)
        assert rows[0][0] == "autobi"
        assert rows[0][2] == autobi.m


class TestBakeoff:
    def test_single_model_families(self, autobi):
        rep = family_bakeoff(autobi, families={"only-a": ["a"]})
        fam = rep.families[0]
        assert fam.selected == "a"
        assert fam.validation_ei is not None and fam.test_ei is not None

    def test_union_validation_ei_is_min_of_components(self, autobi):
        fams = {"dev": ["a", "ac", "ap", "apc"],
                "amt": ["amount-ac", "amount-apc"],
                "all": ["a", "ac", "ap", "apc", "amount-ac", "amount-apc"]}
        rep = family_bakeoff(autobi, families=fams)
        by_name = {f.family: f for f in rep.families}
        assert by_name["all"].validation_ei == pytest.approx(
            min(by_name["dev"].validation_ei, by_name["amt"].validation_ei),
            rel=1e-12)

    def test_deterministic(self, autobi):
        assert family_bakeoff(autobi) == family_bakeoff(autobi)

    def test_no_refit_variant_runs(self, autobi):
        rep = family_bakeoff(autobi, refit=False)
        for fam in rep.families:
            assert fam.test_ei is not None

    def test_all_members_failing_reports_absent(self, autobi):
        rep = family_bakeoff(autobi, families={"broken": ["nope"]})
        fam = rep.families[0]
        assert fam.selected is None
        assert fam.validation_ei is None and fam.test_ei is None


class TestCorpus:
    @pytest.fixture
    def corpus_dir(self, tmp_path, autobi, rng):
        d = tmp_path / "corpus"
        d.mkdir()
        write_triangle_csv(autobi, d / "autobi.csv")
        for i in range(2):
            write_triangle_csv(make_random_triangle(rng, 7 + i), d / f"t{i}.csv")
        bad = d / "bad.csv"
        bad.write_text("dev_0,dev_1,dev_2\n10,8,9\n5,6,\n4,,\n")  # decreasing
        return d

    def test_runs_and_records_failures(self, corpus_dir):
        result = run_corpus(corpus_dir)
        assert len(result.reports) == 3
        assert len(result.failures) == 1
        assert result.failures[0][0] == "bad"
        assert "NonMonotone" in result.failures[0][1]

    def test_mean_ranks_cover_all_models(self, corpus_dir):
        result = run_corpus(corpus_dir)
        mean = result.mean_ranks()
        assert set(mean) == set(DEFAULT_MODELS)
        assert all(1.0 <= v <= len(DEFAULT_MODELS) for v in mean.values())

    def test_csv_and_json_outputs(self, corpus_dir, tmp_path):
        result = run_corpus(corpus_dir)
        result.write_csv(tmp_path / "rank.csv")
        lines = (tmp_path / "rank.csv").read_text().splitlines()
        assert lines[0] == "dataset,model,diagonal,ei,rank"
        assert len(lines) == 1 + 3 * len(DEFAULT_MODELS)
        result.write_json(tmp_path / "rank.json")
        import json
        doc = json.loads((tmp_path / "rank.json").read_text())
        assert len(doc["datasets"]) == 3 and len(doc["failures"]) == 1

    def test_empty_dir_raises(self, tmp_path):
        empty = tmp_path / "empty"
        empty.mkdir()
        with pytest.raises(FileNotFoundError):
            run_corpus(empty)

    def test_too_small_triangle_recorded_as_failure(self, tmp_path):
        d = tmp_path / "small"
        d.mkdir()
        (d / "tiny.csv").write_text("10,14,16\n8,11,\n7,,\n")  # m=2: cannot split
        result = run_corpus(d)
        assert not result.reports
        assert result.failures[0][0] == "tiny"
        assert "TooFewDiagonals" in result.failures[0][1]

    def test_bakeoff_mode(self, corpus_dir):
        result = run_corpus(corpus_dir, mode="bakeoff")
        assert len(result.reports) == 3
        assert all(rep.families for rep in result.reports)
