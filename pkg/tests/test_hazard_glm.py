"""Development-model fitting: closed form, IRLS, constraints, nesting."""

import json

import numpy as np
import pytest

from reserve_lab.errors import NotIdentifiable, ZeroExposure
from reserve_lab.hazard_glm import (
    ModelSpec,
    fit,
    fit_age_closed_form,
    fitted_hazard,
)
from reserve_lab.reserving import hazard_to_factor
from reserve_lab.triangle import RunOffTriangle
from tests.conftest import make_random_triangle


def synthetic_from_effects(m, a_log, g=None, c=None, first_column=None, eta=0.5):
    """Triangle whose empirical development rate is exactly exp(a+g+c).

    Inverting mu = X / (C_prev + eta X) gives X = C_prev (f - 1) with f the
    factor transform of mu, so the data are built cohort by cohort.
    """
    first_column = np.asarray(first_column if first_column is not None
                              else np.linspace(1000.0, 2000.0, m + 1))
    vals = np.zeros((m + 1, m + 1))
    vals[:, 0] = first_column
    for k in range(m + 1):
        cum = vals[k, 0]
        for j in range(1, m - k + 1):
            lp = a_log[j - 1]
            if g is not None:
                lp += g[k]
            if c is not None:
                lp += c[k + j - 1]
            f = hazard_to_factor(np.exp(lp), eta)
            vals[k, j] = cum * (f - 1.0)
            cum += vals[k, j]
    rows = [[vals[k, j] if k + j <= m else None for j in range(m + 1)]
            for k in range(m + 1)]
    return RunOffTriangle.from_incremental(rows)


class TestClosedForm:
    def test_autobi_first_column(self, autobi):
        a = fit_age_closed_form(autobi.empirical_hazard(0.5), autobi.exposure(0.5))
        # pooled sums over the observed cumulative triangle: f_1 = 52932 / 17085
        assert a[0] == pytest.approx(1.02395, abs=1e-5)
        f1 = (1 + 0.5 * a[0]) / (1 - 0.5 * a[0])
        assert f1 == pytest.approx(52932 / 17085, rel=1e-12)

    def test_constant_columns(self):
        tri = synthetic_from_effects(3, np.log([0.8, 0.3, 0.1]))
        haz = tri.empirical_hazard(0.5)
        a = fit_age_closed_form(haz, tri.exposure(0.5))
        assert np.allclose(a, [0.8, 0.3, 0.1], rtol=1e-12)

    def test_single_cohort_equals_observed_rates(self):
        tri = RunOffTriangle.from_incremental([[100.0, 40.0, 10.0], [80.0, 30.0], [60.0]])
        haz = tri.empirical_hazard(0.5)
        a = fit_age_closed_form(haz, tri.exposure(0.5))
        # column 2 has a single observation
        assert a[1] == pytest.approx(haz.values[0, 2], rel=1e-14)


class TestFit:
    def test_structure_a_matches_closed_form(self, autobi, rng):
        triangles = [autobi] + [make_random_triangle(rng, int(rng.integers(3, 10)))
                                for _ in range(5)]
        for tri in triangles:
            hf = fit(ModelSpec("a", 0.5), tri)
            cf = fit_age_closed_form(tri.empirical_hazard(0.5), tri.exposure(0.5))
            assert np.allclose(np.exp(hf.a), cf, rtol=1e-8)
            assert hf.converged

    def test_autobi_counts(self, autobi):
        assert fit(ModelSpec("a"), autobi).n_obs == 28
        for s, nu in [("a", 7), ("ac", 13), ("ap", 13), ("apc", 18)]:
            assert fit(ModelSpec(s), autobi).n_params == nu

    def test_synthetic_ac_recovery(self):
        m = 6
        a_log = np.log(np.array([0.9, 0.5, 0.25, 0.12, 0.05, 0.02]))
        g = np.array([0.0, 0.05, -0.04, 0.08, 0.02, -0.06, 0.0])
        tri = synthetic_from_effects(m, a_log, g=g)
        hf = fit(ModelSpec("ac", 0.5), tri)
        assert hf.deviance < 1e-8
        # recovery up to the g_0 = 0 normalization
        assert np.allclose(hf.g, g[:m] - g[0], atol=1e-6)
        assert np.allclose(hf.a, a_log + g[0], atol=1e-6)

    def test_synthetic_apc_recovery(self):
        # recovery is up to the level/trend freedom; compare fitted rates
        m = 6
        a_log = np.log(np.array([0.9, 0.5, 0.25, 0.12, 0.05, 0.02]))
        g = np.array([0.01, 0.05, -0.04, 0.06, 0.02, -0.05, 0.0])
        c = np.array([0.0, 0.02, -0.01, 0.03, -0.02, 0.01])
        tri = synthetic_from_effects(m, a_log, g=g, c=c)
        hf = fit(ModelSpec("apc", 0.5), tri)
        assert hf.deviance < 1e-8
        from reserve_lab.hazard_glm import fitted_hazard
        mu_fit = fitted_hazard(hf)
        mu_emp = tri.empirical_hazard(0.5)
        assert np.allclose(mu_fit.values[mu_emp.mask], mu_emp.values[mu_emp.mask],
                           rtol=1e-6)

    def test_deviance_nesting(self, autobi, rng):
        triangles = [autobi] + [make_random_triangle(rng, int(rng.integers(3, 10)))
                                for _ in range(8)]
        for tri in triangles:
            dev = {s: fit(ModelSpec(s), tri).deviance for s in ("a", "ac", "ap", "apc")}
            assert dev["ac"] <= dev["a"] + 1e-9
            assert dev["ap"] <= dev["a"] + 1e-9
            assert dev["apc"] <= dev["ac"] + 1e-9
            assert dev["apc"] <= dev["ap"] + 1e-9

    def test_constraint_residuals(self, autobi):
        ac = fit(ModelSpec("ac"), autobi)
        assert abs(ac.g[0]) <= 1e-10
        ap = fit(ModelSpec("ap"), autobi)
        assert abs(ap.c[0]) <= 1e-10
        apc = fit(ModelSpec("apc"), autobi)
        assert abs(apc.c[0]) <= 1e-10
        assert abs(np.sum(apc.g)) <= 1e-10
        assert abs(np.arange(len(apc.g)) @ apc.g) <= 1e-10

    def test_scale_equivariance_of_effects(self, autobi):
        scaled = autobi.scaled(3.25)
        for s in ("a", "ac", "ap", "apc"):
            f1, f2 = fit(ModelSpec(s), autobi), fit(ModelSpec(s), scaled)
            assert np.allclose(f1.a, f2.a, atol=1e-8)
            if f1.c is not None:
                assert np.allclose(f1.c, f2.c, atol=1e-8)
            if f1.g is not None:
                assert np.allclose(f1.g, f2.g, atol=1e-8)

    def test_arity_errors(self):
        tri1 = RunOffTriangle.from_incremental([[10.0, 4.0], [8.0]])
        fit(ModelSpec("a"), tri1)  # m = 1 is enough for the age model
        with pytest.raises(ValueError, match="m >= 2"):
            fit(ModelSpec("ac"), tri1)
        tri2 = RunOffTriangle.from_incremental([[10.0, 4.0, 1.0], [8.0, 3.0], [7.0]])
        with pytest.raises(ValueError, match="m >= 3"):
            fit(ModelSpec("apc"), tri2)

    def test_zero_exposure_propagates(self):
        tri = RunOffTriangle.from_incremental([[0.0, 0.0, 2.0], [4.0, 1.0], [3.0]])
        with pytest.raises(ZeroExposure):
            fit(ModelSpec("a"), tri)

    def test_lenient_exclusion_can_empty_a_column(self):
        # the only j=2 cell is excluded, so its age effect is unidentifiable
        rows = [[10.0, 4.0, -1.0], [8.0, 3.0], [7.0]]
        tri = RunOffTriangle.from_incremental(rows, strict=False)
        with pytest.raises(NotIdentifiable):
            fit(ModelSpec("a"), tri)

    def test_lenient_exclusion_drops_cell_from_count(self):
        rows = [[10.0, 4.0, 1.0, 0.5], [8.0, -3.0, 1.0], [7.0, 2.0], [6.0]]
        tri = RunOffTriangle.from_incremental(rows, strict=False)
        hf = fit(ModelSpec("a"), tri)
        assert hf.n_obs == 5
        assert (1, 1) in hf.excluded_cells

    def test_invalid_structure(self):
        with pytest.raises(ValueError):
            ModelSpec("abc")

    def test_zero_cell_is_a_valid_observation(self):
        rows = [[10.0, 0.0, 2.0, 1.0], [8.0, 3.0, 1.0], [7.0, 2.0], [6.0]]
        tri = RunOffTriangle.from_incremental(rows)
        hf = fit(ModelSpec("a"), tri)
        assert hf.n_obs == 6  # zero increments stay in the likelihood
        assert np.isfinite(hf.deviance)

    def test_deviance_non_increasing_across_iterations(self, autobi):
        from reserve_lab._glm import poisson_irls
        m = autobi.m
        exp_tri = autobi.exposure(0.5)
        cells = [(k, j) for k in range(m) for j in range(1, m - k + 1)]
        x = np.array([autobi.values[k, j] for k, j in cells])
        e = np.array([exp_tri.values[k, j] for k, j in cells])
        design = np.zeros((len(cells), m))
        for i, (k, j) in enumerate(cells):
            design[i, j - 1] = 1.0
        trace: list = []
        poisson_irls(x, design, np.log(e), np.ones(len(cells)),
                     np.zeros(m), trace=trace)  # cold start, several steps
        assert len(trace) >= 2
        assert all(b <= a + 1e-12 * (abs(a) + 1) for a, b in zip(trace, trace[1:]))


class TestFittedHazard:
    def test_structure_a_constant_across_cohorts(self, autobi):
        hf = fit(ModelSpec("a"), autobi)
        mu = fitted_hazard(hf)
        for j in range(1, autobi.m + 1):
            col = [mu.values[k, j] for k in range(autobi.m - j + 1)]
            assert np.allclose(col, col[0], rtol=1e-14)
        assert mu.values[0, 1] == pytest.approx(np.exp(hf.a[0]), rel=1e-14)

    def test_saturated_synthetic_reproduces_empirical(self):
        m = 5
        a_log = np.log(np.array([0.9, 0.5, 0.25, 0.12, 0.05]))
        g = np.array([0.0, 0.06, -0.03, 0.05, 0.01, 0.0])
        tri = synthetic_from_effects(m, a_log, g=g)
        mu_fit = fitted_hazard(fit(ModelSpec("ac"), tri))
        mu_emp = tri.empirical_hazard(0.5)
        assert np.allclose(mu_fit.values[mu_emp.mask], mu_emp.values[mu_emp.mask],
                           rtol=1e-7)

    def test_positive_everywhere(self, autobi):
        for s in ("a", "ac", "ap", "apc"):
            mu = fitted_hazard(fit(ModelSpec(s), autobi))
            assert np.all(mu.values[mu.mask] > 0.0)


class TestSerialization:
    def test_json_round_trip_fields(self, autobi):
        hf = fit(ModelSpec("apc", 0.5), autobi)
        doc = json.loads(hf.to_json())
        assert doc["structure"] == "apc"
        assert doc["eta"] == 0.5
        assert doc["effects"]["age"]["index"] == list(range(1, 8))
        assert len(doc["effects"]["period"]["value"]) == 7
        assert len(doc["effects"]["cohort"]["value"]) == 7
        assert doc["n_obs"] == 28 and doc["n_params"] == 18
        assert doc["converged"] is True
        assert doc["deviance"] == pytest.approx(hf.deviance)
