"""Acceptance suite: one test per criterion, executed on the full
(problem, p) experiment matrix.  The matrix fixture runs each problem's six
p values in parallel worker processes and records the sweep wall time."""

import concurrent.futures
import math
import time

import numpy as np
import pytest

from lpoa.analysis import (build_pairs, fit_rate, monotone_envelope,
                           verify_hyperplane_lemma, verify_separation,
                           verify_trace)
from lpoa.cli import _sweep_one
from lpoa.driver import RunConfig
from lpoa.lp_geometry import LemmaConstants, NormExponent, lp_norm
from lpoa.problems import by_key, oracle_distance
from lpoa.scalarization import solve_subproblem

from test_polytope import (assert_vertex_sets_equal, box,
                           brute_force_vertices)
from lpoa.polytope import Halfspace, InfeasibleError, from_halfspaces

P_LIST = (1.25, 1.5, 2.0, 3.0, 4.0, 8.0)

MATRIX_EPS = {
    "example1-q3": 0.01,
    "example1-q2": 1e-4,
    "ellipse": 1e-3,
    "example2": 0.05,
}

REFERENCE_C_HAT = {
    "example1-q3": (2.46, 2.38, 2.40, 2.40, 2.45, 2.51),
    "example2": (2.74, 2.69, 2.66, 2.75, 2.72, 2.72),
}

REFERENCE_ITERATIONS = {
    "example1-q3": (89, 82, 74, 59, 57, 50),
    "example1-q2": (38, 45, 53, 49, 43, 51),
    "ellipse": (42, 40, 45, 44, 35, 44),
    "example2": (72, 61, 56, 49, 45, 41),
}


@pytest.fixture(scope="session")
def matrix():
    out = {}
    for key, eps in MATRIX_EPS.items():
        configs = [RunConfig(problem_key=key, p=p, epsilon=eps).to_dict()
                   for p in P_LIST]
        t0 = time.perf_counter()
        with concurrent.futures.ProcessPoolExecutor(max_workers=3) as ex:
            results = list(ex.map(_sweep_one, [(c,) for c in configs]))
        wall = time.perf_counter() - t0
        out[key] = {"wall": wall,
                    "traces": {p: tr for p, tr, _ in results}}
    return out


def _fits(entry, key):
    q = by_key(key).q
    eps = MATRIX_EPS[key]
    fits = {}
    for p, trace in entry["traces"].items():
        env = monotone_envelope([r.residual_norm for r in trace.iterations])
        fits[p] = fit_rate(env, q, eps)
    return fits


def _check_rates(entry, key, c_lo, c_hi, spread_max, r2_min, wall_max,
                 reference=None):
    problems = []
    for p, trace in entry["traces"].items():
        if trace.termination != "converged":
            problems.append(f"p={p:g}: termination={trace.termination}")
    fits = _fits(entry, key)
    c_hats = []
    for i, p in enumerate(P_LIST):
        fit = fits[p]
        c_hats.append(fit.c_hat)
        lo, hi = ((reference[i] - 0.5, reference[i] + 0.5)
                  if reference is not None else (c_lo, c_hi))
        if not lo <= fit.c_hat <= hi:
            problems.append(
                f"p={p:g}: c_hat={fit.c_hat:.3f} outside [{lo:.2f}, {hi:.2f}]")
        if fit.r_squared < r2_min:
            problems.append(
                f"p={p:g}: r2={fit.r_squared:.4f} < {r2_min}")
    spread = max(c_hats) - min(c_hats)
    if spread > spread_max:
        problems.append(f"spread={spread:.3f} > {spread_max}")
    if entry["wall"] > wall_max:
        problems.append(f"wall={entry['wall']:.1f}s > {wall_max}s")
    detail = (f"{key}: c_hat=" + "/".join(f"{c:.2f}" for c in c_hats)
              + f", spread={spread:.2f}, wall={entry['wall']:.0f}s")
    assert not problems, detail + "; " + "; ".join(problems)


def test_criterion_01_rates_example1_q3(matrix):
    _check_rates(matrix["example1-q3"], "example1-q3", None, None,
                 spread_max=0.5, r2_min=0.85, wall_max=300.0,
                 reference=REFERENCE_C_HAT["example1-q3"])


def test_criterion_02_rates_example1_q2(matrix):
    _check_rates(matrix["example1-q2"], "example1-q2", 1.2, 2.2,
                 spread_max=0.5, r2_min=0.90, wall_max=180.0)


def test_criterion_03_rates_ellipse(matrix):
    _check_rates(matrix["ellipse"], "ellipse", 1.2, 2.2,
                 spread_max=0.6, r2_min=0.90, wall_max=180.0)


def test_criterion_04_rates_example2(matrix):
    _check_rates(matrix["example2"], "example2", None, None,
                 spread_max=0.4, r2_min=0.88, wall_max=300.0,
                 reference=REFERENCE_C_HAT["example2"])


def test_criterion_05_iteration_counts(matrix):
    problems = []
    for key, ref in REFERENCE_ITERATIONS.items():
        counts = [len(matrix[key]["traces"][p].iterations) for p in P_LIST]
        for p, got, want in zip(P_LIST, counts, ref):
            if not 0.6 * want <= got <= 1.4 * want:
                problems.append(f"{key} p={p:g}: {got} outside "
                                f"+/-40% of {want}")
        if key in ("example1-q3", "example2"):
            if any(b > a for a, b in zip(counts, counts[1:])):
                problems.append(f"{key}: counts {counts} not decreasing in p")
    assert not problems, "; ".join(problems)


def test_criterion_06_lemma_suite(matrix):
    problems = []
    for key, entry in matrix.items():
        q = by_key(key).q
        for p, trace in entry["traces"].items():
            if trace.termination != "converged":
                continue
            lc = LemmaConstants.for_exponent(NormExponent(p), q, eta=0.1)
            pairs = build_pairs(trace, eta=0.1)
            hyper = verify_hyperplane_lemma(pairs, lc, tol=1e-6)
            sep = verify_separation(pairs, lc, tol=1e-6)
            support = [pr for pr in pairs
                       if pr.d_ij < -1e-6 or pr.d_ji < -1e-6]
            n = (len(hyper["violations"]) + len(sep["violations"])
                 + len(support))
            if n:
                problems.append(f"{key} p={p:g}: {n} violations")
    assert not problems, "; ".join(problems)


def test_criterion_07_dual_norm_identity(matrix):
    problems = []
    for key, entry in matrix.items():
        for p, trace in entry["traces"].items():
            dual = NormExponent(NormExponent(p).p_star)
            worst = max((abs(lp_norm(r.cut_normal, dual) - 1.0)
                         for r in trace.iterations
                         if r.cut_normal is not None), default=0.0)
            if worst > 1e-6:
                problems.append(f"{key} p={p:g}: max |dual norm - 1| = "
                                f"{worst:.2e}")
    assert not problems, "; ".join(problems)


def test_criterion_08_oracle_equivalence():
    problems = []
    for key in ("example1-q2", "ellipse"):
        prob = by_key(key)
        rng = np.random.default_rng(2024)
        points = []
        while len(points) < 50:
            v = np.array([rng.uniform(-0.8, 0.6), rng.uniform(-0.8, 0.6)])
            if key == "ellipse":
                v = v * 2.0 + np.array([-1.0, -2.0])
            if not prob.in_A(v):
                points.append(v)
        for p in P_LIST:
            ne = NormExponent(p)
            worst = 0.0
            for v in points:
                res = solve_subproblem(prob, v, ne)
                d = oracle_distance(prob, v, ne, samples=8000)
                worst = max(worst, abs(res.residual_norm - d))
            if worst > 1e-3:
                problems.append(f"{key} p={p:g}: max deviation {worst:.2e}")
    assert not problems, "; ".join(problems)


def test_criterion_09_polytope_fuzz():
    for q in (2, 3):
        rng = np.random.default_rng(500 + q)
        built = 0
        trials = 0
        while built < 250 and trials < 4000:
            trials += 1
            m = int(rng.integers(q + 1, q + 7))
            normals = rng.normal(size=(m, q))
            normals /= np.linalg.norm(normals, axis=1, keepdims=True)
            offsets = rng.uniform(0.2, 2.0, size=m)
            hs = [Halfspace(n, o) for n, o in zip(normals, offsets)]
            hs += box(q, lo=-3.0, hi=3.0)
            try:
                P = from_halfspaces(hs)
            except InfeasibleError:
                continue
            built += 1
            assert_vertex_sets_equal(P.vertices(), brute_force_vertices(hs))
        assert built == 250


def test_criterion_10_fit_exactness():
    for q, c, lam in ((2, 1.0, 0.3), (2, 2.0, 1.0), (3, 2.0, 0.7),
                      (3, 3.0, 2.0), (4, 2.5, 0.5)):
        k = np.arange(1, 121, dtype=float)
        series = lam * k ** (-c / (q - 1))
        fit = fit_rate(series, q=q, epsilon=series[-1] / 10.0)
        assert abs(fit.c_hat - c) <= 1e-9 * max(1.0, c)
        assert abs(fit.lambda_hat - lam) <= 1e-9 * lam
        assert fit.r_squared == pytest.approx(1.0, abs=1e-12)


def test_criterion_11_cut_accounting(matrix):
    problems = []
    for key, entry in matrix.items():
        for p, trace in entry["traces"].items():
            cuts = [r for r in trace.iterations if r.cut_normal is not None]
            expected = trace.initial_halfspace_count + len(cuts)
            if len(trace.final_polytope.halfspaces) != expected:
                problems.append(f"{key} p={p:g}: halfspace count "
                                f"{len(trace.final_polytope.halfspaces)} != "
                                f"{expected}")
            W = np.array([r.cut_normal for r in cuts])
            for i in range(len(W)):
                for j in range(i + 1, len(W)):
                    if np.max(np.abs(W[i] - W[j])) <= 1e-8:
                        problems.append(f"{key} p={p:g}: cuts {i},{j} "
                                        "coincide")
            for r in cuts:
                margin = float(r.cut_normal
                               @ (r.farthest_vertex - r.support_point))
                if margin >= 0.0:
                    problems.append(f"{key} p={p:g} k={r.k}: cut does not "
                                    "remove farthest vertex")
    assert not problems, "; ".join(problems)
