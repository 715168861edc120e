"""Rate fitting and empirical lemma verification on recorded run traces.

The rate fitter performs ordinary least squares in log-log coordinates on
the monotone envelope of the Hausdorff error series, reporting the exponent
c_hat with the dimension factor q - 1 absorbed.  The verifiers re-check the
geometric inequalities behind the convergence proof (hyperplane distance
bound, deviation-vector separation, packing growth) on every recorded
support point / cut normal pair of a run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .driver import RunTrace, hausdorff_series
from .lp_geometry import LemmaConstants, NormExponent, lp_norm

__all__ = [
    "RateFit",
    "DeviationPair",
    "monotone_envelope",
    "fit_rate",
    "build_pairs",
    "verify_hyperplane_lemma",
    "verify_separation",
    "verify_trace",
    "packing_census",
]

VERIFY_TOL = 1e-6
PAIR_CAP = 200_000


def monotone_envelope(series) -> list[float]:
    """Running minimum of the series (element k = min of the prefix)."""
    series = list(series)
    if not series:
        raise ValueError("series must be nonempty")
    return np.minimum.accumulate(np.asarray(series, dtype=float)).tolist()


@dataclass(frozen=True)
class RateFit:
    """Power-law fit delta_k ~ lambda * k^(-c/(q-1)) on a log-log window."""

    c_hat: float
    lambda_hat: float
    r_squared: float
    points_used: int
    window: tuple[int, int]
    reliable: bool

    def to_dict(self) -> dict:
        return {
            "c_hat": self.c_hat,
            "lambda_hat": self.lambda_hat,
            "r_squared": self.r_squared,
            "points_used": self.points_used,
            "window": list(self.window),
            "reliable": self.reliable,
        }


def fit_rate(series, q: int, epsilon: float) -> RateFit:
    """OLS of log delta against log k over the stable window of the envelope.

    Element i of the series is iteration k = i + 1.  The window drops the
    first max(3, ceil(0.08 K)) iterations (initial transient) and all points
    with delta <= 2 epsilon (terminal plateau); if fewer than 5 points remain
    the plateau cutoff is widened to 1.2 epsilon, and if that still leaves
    fewer than 5 the fit is flagged unreliable.
    """
    if q < 2:
        raise ValueError("q must be >= 2")
    delta = np.asarray(list(series), dtype=float)
    K = len(delta)
    if K == 0:
        raise ValueError("series must be nonempty")
    k = np.arange(1, K + 1, dtype=float)

    skip = max(3, math.ceil(0.08 * K))
    base = (np.arange(K) >= skip) & (delta > 0.0)
    mask = base & (delta > 2.0 * epsilon)
    if np.count_nonzero(mask) < 5:
        mask = base & (delta > 1.2 * epsilon)
    reliable = np.count_nonzero(mask) >= 5
    if np.count_nonzero(mask) < 2:
        return RateFit(c_hat=float("nan"), lambda_hat=float("nan"),
                       r_squared=float("nan"),
                       points_used=int(np.count_nonzero(mask)),
                       window=(0, 0), reliable=False)

    x = np.log(k[mask])
    y = np.log(delta[mask])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_res = float(resid @ resid)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    idx = np.nonzero(mask)[0]
    return RateFit(
        c_hat=float(-slope * (q - 1)),
        lambda_hat=float(np.exp(intercept)),
        r_squared=float(r2),
        points_used=int(len(idx)),
        window=(int(idx[0] + 1), int(idx[-1] + 1)),
        reliable=reliable,
    )


# ---------------------------------------------------------------------------
# deviation-vector pair construction and lemma verifiers


@dataclass(frozen=True)
class DeviationPair:
    """One ordered pair of recorded cuts with its deviation-vector geometry.

    alpha = y - eta * w is the support point pushed inward along its normal;
    d_ij = <w_j, y_i - y_j> is the distance of y_i above the j-th supporting
    hyperplane (nonnegative by the support conditions).
    """

    i: int
    j: int
    y_i: np.ndarray
    y_j: np.ndarray
    w_i: np.ndarray
    w_j: np.ndarray
    alpha_i: np.ndarray
    alpha_j: np.ndarray
    d_ij: float
    d_ji: float
    dist_p: float       # ||alpha_i - alpha_j||_p
    w_dot: float        # <w_i, w_j>
    h: float            # error level of the later cut (series[max(i,j) - 1])


def build_pairs(trace: RunTrace, eta: float = 0.1, cap: int = PAIR_CAP,
                seed: int = 0) -> list[DeviationPair]:
    """All unordered index pairs of recorded cuts as DeviationPair objects.

    Pairs beyond the cap are subsampled deterministically with the given
    seed.  Iterations without a cut normal (zero-residual terminal step)
    are excluded.
    """
    if eta <= 0.0:
        raise ValueError("eta must be positive")
    recs = [r for r in trace.iterations if r.cut_normal is not None]
    if len(recs) < 2:
        return []
    ne = NormExponent(trace.config.p)
    series = hausdorff_series(trace)
    Y = np.array([r.support_point for r in recs])
    W = np.array([r.cut_normal for r in recs])
    ks = [r.k for r in recs]
    A = Y - eta * W
    # d[i, j] = <w_j, y_i - y_j>
    D = Y @ W.T - np.sum(Y * W, axis=1)[None, :]
    G = W @ W.T

    n = len(recs)
    idx_pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    if len(idx_pairs) > cap:
        rng = np.random.default_rng(seed)
        chosen = rng.choice(len(idx_pairs), size=cap, replace=False)
        idx_pairs = [idx_pairs[c] for c in sorted(chosen)]

    pairs = []
    for i, j in idx_pairs:
        later = max(ks[i], ks[j])
        pairs.append(DeviationPair(
            i=ks[i], j=ks[j], y_i=Y[i], y_j=Y[j], w_i=W[i], w_j=W[j],
            alpha_i=A[i], alpha_j=A[j],
            d_ij=float(D[i, j]), d_ji=float(D[j, i]),
            dist_p=lp_norm(A[i] - A[j], ne),
            w_dot=float(G[i, j]),
            h=series[later - 1] if later >= 1 else series[0],
        ))
    return pairs


def verify_hyperplane_lemma(pairs, lc: LemmaConstants,
                            tol: float = VERIFY_TOL) -> dict:
    """Check d <= C_pq ||alpha_i - alpha_j||_p^2 / eta for every ordered pair,
    plus the support conditions d_ij, d_ji >= -tol."""
    violations = []
    max_ratio = 0.0
    for pr in pairs:
        bound = lc.C_pq * pr.dist_p ** 2 / lc.eta
        for label, d in (("d_ij", pr.d_ij), ("d_ji", pr.d_ji)):
            if d < -tol:
                violations.append({"pair": [pr.i, pr.j], "kind": "support",
                                   "which": label, "d": d})
            if d > bound + tol:
                violations.append({"pair": [pr.i, pr.j], "kind": "hyperplane",
                                   "which": label, "d": d, "bound": bound})
            if bound > 0.0:
                max_ratio = max(max_ratio, d / bound)
    return {
        "checked": 2 * len(pairs),
        "violations": violations,
        "max_slack_ratio": max_ratio,
    }


def verify_separation(pairs, lc: LemmaConstants,
                      tol: float = VERIFY_TOL) -> dict:
    """Check the two separation lower bounds on ||alpha_i - alpha_j||_p.

    Part (i): pairs whose hyperplane distance reaches the error level h of
    the later cut must be C3 sqrt(eta h) apart.  Part (ii): pairs with
    non-acute normals must be C2 eta apart.
    """
    violations = []
    checked_i = checked_ii = 0
    for pr in pairs:
        if max(pr.d_ij, pr.d_ji) >= pr.h:
            checked_i += 1
            bound = lc.C3 * math.sqrt(lc.eta * pr.h)
            if pr.dist_p < bound - tol:
                violations.append({"pair": [pr.i, pr.j], "kind": "part_i",
                                   "dist": pr.dist_p, "bound": bound})
        if pr.w_dot <= 0.0:
            checked_ii += 1
            bound = lc.C2 * lc.eta
            if pr.dist_p < bound - tol:
                violations.append({"pair": [pr.i, pr.j], "kind": "part_ii",
                                   "dist": pr.dist_p, "bound": bound})
    return {
        "checked_part_i": checked_i,
        "checked_part_ii": checked_ii,
        "violations": violations,
    }


def packing_census(alphas, ne: NormExponent, eps_sep: float) -> int:
    """Greedy count of an eps_sep-separated subset of the deviation vectors
    in the lp norm (first-fit in the given order)."""
    if eps_sep <= 0.0:
        raise ValueError("eps_sep must be positive")
    chosen: list[np.ndarray] = []
    for a in np.asarray(alphas, dtype=float):
        if all(lp_norm(a - c, ne) >= eps_sep for c in chosen):
            chosen.append(a)
    return len(chosen)


def verify_trace(trace: RunTrace, eta: float = 0.1) -> dict:
    """Full lemma verification report for one trace (used by the CLI)."""
    ne = NormExponent(trace.config.p)
    ne_dual = NormExponent(ne.p_star)
    lc = LemmaConstants.for_exponent(ne, trace.q, eta=eta)
    pairs = build_pairs(trace, eta=eta)

    hyper = verify_hyperplane_lemma(pairs, lc)
    sep = verify_separation(pairs, lc)
    dual_violations = []
    for rec in trace.iterations:
        if rec.cut_normal is None:
            continue
        dn = lp_norm(rec.cut_normal, ne_dual)
        if abs(dn - 1.0) > VERIFY_TOL:
            dual_violations.append({"k": rec.k, "dual_norm": dn})

    n_viol = (len(hyper["violations"]) + len(sep["violations"])
              + len(dual_violations))
    return {
        "problem": trace.config.problem_key,
        "p": trace.config.p,
        "eta": eta,
        "pairs": len(pairs),
        "hyperplane": hyper,
        "separation": sep,
        "dual_norm_violations": dual_violations,
        "total_violations": n_viol,
    }
