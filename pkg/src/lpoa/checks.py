"""Sampled property suites for the lp norm geometry layer.

Each suite draws seeded random vectors and checks a closed-form inequality
(moduli bounds, Hanner's inequality, gradient/dual-norm identities, norm
equivalence, strict convexity).  These are the self-contained checks the
CLI exposes as `verify --self-test`.
"""

from __future__ import annotations

import numpy as np

from .lp_geometry import (NormExponent, lp_gradient, lp_norm,
                          moduli_constants, norm_equivalence_constant)

__all__ = ["run_self_test", "DEFAULT_P_VALUES", "DEFAULT_Q_VALUES"]

DEFAULT_P_VALUES = (1.25, 1.5, 2.0, 3.0, 4.0, 8.0)
DEFAULT_Q_VALUES = (2, 3)
SAMPLES = 1000
TOL = 1e-9


def _unit(rng, q, ne):
    x = rng.normal(size=q)
    while lp_norm(x, ne) < 1e-12:
        x = rng.normal(size=q)
    return x / lp_norm(x, ne)


def _check_smoothness(rng, ne, q):
    """rho_p(tau) <= S_p tau^{s_p} on sampled unit vectors and tau."""
    s_p_const, _ = moduli_constants(ne)
    worst = 0.0
    violations = 0
    for _ in range(SAMPLES):
        x = _unit(rng, q, ne)
        y = _unit(rng, q, ne)
        tau = 10.0 ** rng.uniform(-3, 0.5)
        rho = 0.5 * (lp_norm(x + tau * y, ne) + lp_norm(x - tau * y, ne)) - 1.0
        excess = rho - s_p_const * tau ** ne.s_p
        worst = max(worst, excess)
        if excess > TOL:
            violations += 1
    return violations, worst


def _check_convexity(rng, ne, q):
    """1 - ||x + y||_p / 2 >= K_p eps^{r_p} for unit x, y at distance eps."""
    _, k_p = moduli_constants(ne)
    worst = 0.0
    violations = 0
    for _ in range(SAMPLES):
        x = _unit(rng, q, ne)
        y = _unit(rng, q, ne)
        eps = lp_norm(x - y, ne)
        if eps < 1e-9 or eps > 2.0:
            continue
        margin = k_p * eps ** ne.r_p - (1.0 - 0.5 * lp_norm(x + y, ne))
        worst = max(worst, margin)
        if margin > TOL:
            violations += 1
    return violations, worst


def _check_hanner(rng, ne, q):
    """Hanner's inequality (direction flips at p = 2)."""
    worst = 0.0
    violations = 0
    for _ in range(SAMPLES):
        x = rng.normal(size=q) * 10.0 ** rng.uniform(-1, 1)
        y = rng.normal(size=q) * 10.0 ** rng.uniform(-1, 1)
        nx, ny = lp_norm(x, ne), lp_norm(y, ne)
        lhs = lp_norm(x + y, ne) ** ne.p + lp_norm(x - y, ne) ** ne.p
        rhs = (nx + ny) ** ne.p + abs(nx - ny) ** ne.p
        scale = max(1.0, abs(rhs))
        # p <= 2: lhs >= rhs; p >= 2: lhs <= rhs
        diff = (rhs - lhs) if ne.p <= 2.0 else (lhs - rhs)
        worst = max(worst, diff / scale)
        if diff > TOL * scale:
            violations += 1
    return violations, worst


def _check_gradient(rng, ne, q):
    """Dual norm of the gradient is 1 and <grad, z> recovers the norm."""
    ne_dual = NormExponent(ne.p_star)
    worst = 0.0
    violations = 0
    for _ in range(SAMPLES):
        z = rng.normal(size=q) * 10.0 ** rng.uniform(-3, 3)
        g = lp_gradient(z, ne)
        err = max(abs(lp_norm(g, ne_dual) - 1.0),
                  abs(float(g @ z) - lp_norm(z, ne)) / max(1.0, lp_norm(z, ne)))
        worst = max(worst, err)
        if err > 1e-8:
            violations += 1
    return violations, worst


def _check_norm_equivalence(rng, ne, q):
    """||x||_2 <= N_{2,p} ||x||_p, with equality attained by extremal vectors."""
    n2p = norm_equivalence_constant(ne, q)
    worst = 0.0
    violations = 0
    for _ in range(SAMPLES):
        x = rng.normal(size=q) * 10.0 ** rng.uniform(-2, 2)
        excess = float(np.linalg.norm(x)) - n2p * lp_norm(x, ne)
        scale = max(1.0, lp_norm(x, ne))
        worst = max(worst, excess / scale)
        if excess > TOL * scale:
            violations += 1
    # tightness witnesses: uniform vector (p >= 2), coordinate vector (p <= 2)
    for x in (np.ones(q), np.eye(q)[0]):
        gap = n2p * lp_norm(x, ne) - float(np.linalg.norm(x))
        if ne.p >= 2.0 and np.all(x == 1.0) and gap > 1e-12:
            violations += 1
        if ne.p <= 2.0 and x[0] == 1.0 and x.sum() == 1.0 and gap > 1e-12:
            violations += 1
    return violations, worst


def _check_strict_convexity(rng, ne, q):
    """Triangle inequality is strict for non-parallel vectors."""
    worst = 0.0
    violations = 0
    for _ in range(SAMPLES):
        x = _unit(rng, q, ne)
        y = _unit(rng, q, ne)
        if lp_norm(x - y, ne) < 1e-6:
            continue
        slack = 2.0 - lp_norm(x + y, ne)
        worst = max(worst, -slack)
        if slack <= 0.0:
            violations += 1
    return violations, worst


_SUITES = (
    ("smoothness_modulus", _check_smoothness),
    ("convexity_modulus", _check_convexity),
    ("hanner", _check_hanner),
    ("gradient_dual_norm", _check_gradient),
    ("norm_equivalence", _check_norm_equivalence),
    ("strict_convexity", _check_strict_convexity),
)


def run_self_test(p_values=DEFAULT_P_VALUES, q_values=DEFAULT_Q_VALUES,
                  seed: int = 42) -> dict:
    """Run every suite for each (p, q) combination; returns a report dict."""
    checks = []
    total = 0
    for p in p_values:
        ne = NormExponent(p)
        for q in q_values:
            for name, fn in _SUITES:
                rng = np.random.default_rng(seed)
                violations, worst = fn(rng, ne, q)
                total += violations
                checks.append({
                    "name": name, "p": p, "q": q, "samples": SAMPLES,
                    "violations": violations, "worst_excess": float(worst),
                })
    return {"checks": checks, "total_violations": total}
