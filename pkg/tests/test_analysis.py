import math

import numpy as np
import pytest

from lpoa.analysis import (DeviationPair, RateFit, build_pairs, fit_rate,
                           monotone_envelope, packing_census,
                           verify_hyperplane_lemma, verify_separation,
                           verify_trace)
from lpoa.driver import RunConfig, hausdorff_series, run
from lpoa.lp_geometry import LemmaConstants, NormExponent, lp_norm


@pytest.fixture(scope="module")
def trace():
    return run(RunConfig(problem_key="example1-q2", p=2.0, epsilon=1e-3))


class TestEnvelope:
    def test_running_minimum(self):
        assert monotone_envelope([3.0, 5.0, 2.0, 2.5, 1.0]) == [
            3.0, 3.0, 2.0, 2.0, 1.0]

    def test_idempotent(self):
        s = [4.0, 1.0, 2.0, 0.5]
        e = monotone_envelope(s)
        assert monotone_envelope(e) == e

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            monotone_envelope([])


class TestFitRate:
    @pytest.mark.parametrize("q,c", [(2, 1.0), (2, 2.0), (3, 2.0),
                                     (3, 3.0), (4, 1.5)])
    def test_exact_power_law(self, q, c):
        # delta_k = lam * k^(-c/(q-1)) recovers c and lam exactly
        lam = 0.7
        k = np.arange(1, 101, dtype=float)
        series = lam * k ** (-c / (q - 1))
        fit = fit_rate(series, q=q, epsilon=series[-1] / 10.0)
        assert fit.reliable
        assert fit.c_hat == pytest.approx(c, abs=1e-9)
        assert fit.lambda_hat == pytest.approx(lam, rel=1e-9)
        assert fit.r_squared == pytest.approx(1.0, abs=1e-12)

    def test_window_drops_transient_and_plateau(self):
        # 50 points: skip = max(3, ceil(4)) = 4; plateau delta <= 2 eps cut
        k = np.arange(1, 51, dtype=float)
        series = k ** -1.0
        eps = 0.05  # 2 eps = 0.1 removes k >= 10
        fit = fit_rate(series, q=2, epsilon=eps)
        assert fit.window[0] == 5
        assert fit.window[1] == 9
        assert fit.points_used == 5

    def test_widened_cutoff(self):
        # too few points above 2 eps but enough above 1.2 eps
        k = np.arange(1, 13, dtype=float)
        series = k ** -1.0
        fit = fit_rate(series, q=2, epsilon=1.0 / 12.0)
        assert fit.reliable
        assert fit.points_used >= 5

    def test_unreliable_flag(self):
        fit = fit_rate([1.0, 0.5, 0.25, 0.2, 0.19], q=2, epsilon=1e-6)
        assert not fit.reliable

    def test_degenerate_returns_nan(self):
        fit = fit_rate([1.0, 0.5], q=2, epsilon=10.0)
        assert math.isnan(fit.c_hat)
        assert not fit.reliable

    def test_q_validation(self):
        with pytest.raises(ValueError):
            fit_rate([1.0, 0.5], q=1, epsilon=1e-3)
        with pytest.raises(ValueError):
            fit_rate([], q=2, epsilon=1e-3)

    def test_to_dict(self):
        fit = fit_rate(np.arange(1.0, 40.0) ** -1.0, q=2, epsilon=1e-3)
        d = fit.to_dict()
        assert set(d) == {"c_hat", "lambda_hat", "r_squared", "points_used",
                          "window", "reliable"}


class TestBuildPairs:
    def test_count_and_fields(self, trace):
        pairs = build_pairs(trace, eta=0.1)
        n = len([r for r in trace.iterations if r.cut_normal is not None])
        assert len(pairs) == n * (n - 1) // 2
        series = hausdorff_series(trace)
        ne = NormExponent(trace.config.p)
        for pr in pairs[:50]:
            assert pr.i < pr.j
            assert np.allclose(pr.alpha_i, pr.y_i - 0.1 * pr.w_i)
            assert pr.d_ij == pytest.approx(
                float(pr.w_j @ (pr.y_i - pr.y_j)), abs=1e-12)
            assert pr.dist_p == pytest.approx(
                lp_norm(pr.alpha_i - pr.alpha_j, ne), abs=1e-12)
            assert pr.h == series[max(pr.i, pr.j) - 1]

    def test_cap_subsamples_deterministically(self, trace):
        p1 = build_pairs(trace, eta=0.1, cap=20, seed=3)
        p2 = build_pairs(trace, eta=0.1, cap=20, seed=3)
        assert len(p1) == 20
        assert [(a.i, a.j) for a in p1] == [(b.i, b.j) for b in p2]

    def test_eta_validation(self, trace):
        with pytest.raises(ValueError):
            build_pairs(trace, eta=0.0)


class TestVerifiers:
    def test_trace_clean(self, trace):
        report = verify_trace(trace, eta=0.1)
        assert report["total_violations"] == 0
        assert report["pairs"] > 100
        assert report["hyperplane"]["violations"] == []
        assert report["separation"]["violations"] == []
        assert report["dual_norm_violations"] == []
        assert 0.0 < report["hyperplane"]["max_slack_ratio"] <= 1.0

    def test_separation_parts_exercised(self, trace):
        lc = LemmaConstants.for_exponent(NormExponent(2.0), 2, eta=0.1)
        pairs = build_pairs(trace, eta=0.1)
        rep = verify_separation(pairs, lc)
        assert rep["checked_part_i"] > 0
        # frontier normals on this problem all lie in one orthant, so the
        # non-acute branch is vacuous here (exercised synthetically below)
        assert rep["checked_part_ii"] == 0

    def test_detects_corrupted_normal(self, trace):
        # flipping a cut normal breaks the support condition d >= 0
        pairs = build_pairs(trace, eta=0.1)
        bad = []
        for pr in pairs[:200]:
            bad.append(DeviationPair(
                i=pr.i, j=pr.j, y_i=pr.y_i, y_j=pr.y_j,
                w_i=pr.w_i, w_j=-pr.w_j, alpha_i=pr.alpha_i,
                alpha_j=pr.alpha_j, d_ij=-pr.d_ij, d_ji=pr.d_ji,
                dist_p=pr.dist_p, w_dot=-pr.w_dot, h=pr.h))
        lc = LemmaConstants.for_exponent(NormExponent(2.0), 2, eta=0.1)
        rep = verify_hyperplane_lemma(bad, lc)
        assert len(rep["violations"]) > 0

    def test_synthetic_hyperplane_violation(self):
        # two far-apart hyperplane distances with tiny deviation distance
        lc = LemmaConstants.for_exponent(NormExponent(2.0), 2, eta=0.1)
        pr = DeviationPair(i=1, j=2, y_i=np.zeros(2), y_j=np.zeros(2),
                           w_i=np.array([1.0, 0.0]), w_j=np.array([0.0, 1.0]),
                           alpha_i=np.zeros(2), alpha_j=np.zeros(2),
                           d_ij=1.0, d_ji=0.0, dist_p=1e-4, w_dot=0.0, h=2.0)
        rep = verify_hyperplane_lemma([pr], lc)
        assert any(v["kind"] == "hyperplane" for v in rep["violations"])
        rep2 = verify_separation([pr], lc)
        assert any(v["kind"] == "part_ii" for v in rep2["violations"])


class TestPackingCensus:
    def test_greedy_count(self):
        pts = np.array([[0.0, 0.0], [0.05, 0.0], [1.0, 0.0], [0.0, 1.0]])
        assert packing_census(pts, NormExponent(2.0), 0.5) == 3
        assert packing_census(pts, NormExponent(2.0), 2.0) == 1

    def test_validation(self):
        with pytest.raises(ValueError):
            packing_census(np.zeros((2, 2)), NormExponent(2.0), 0.0)

    def test_trace_packing_bounded(self, trace):
        # count of eps-separated deviation vectors at error level eps stays
        # within a constant factor of the 2^(q-1) halving bound
        ne = NormExponent(trace.config.p)
        series = hausdorff_series(trace)
        recs = [r for r in trace.iterations if r.cut_normal is not None]
        alphas = np.array([r.support_point - 0.1 * r.cut_normal
                           for r in recs])
        prev = None
        for eps in (0.4, 0.2, 0.1, 0.05):
            lvl = [a for a, s in zip(alphas, series) if s >= eps]
            cnt = packing_census(np.array(lvl), ne, math.sqrt(0.1 * eps))
            if prev is not None:
                assert cnt <= prev * 2 ** (trace.q - 1) * 1.5 + 2
            prev = cnt
