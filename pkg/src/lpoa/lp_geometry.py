"""lp norm arithmetic: norms, gradients, dual exponents and geometric constants.

Everything here is a pure function of its inputs.  All vectors are 1-D numpy
arrays (or things convertible to them).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "NormExponent",
    "LemmaConstants",
    "lp_norm",
    "lp_gradient",
    "dual_ball_min_euclidean",
    "moduli_constants",
    "norm_equivalence_constant",
]

# Residuals below this are treated as zero; the gradient is undefined there.
ZERO_NORM_TOL = 1e-14


@dataclass(frozen=True)
class NormExponent:
    """A norm exponent p in (1, inf) with its derived quantities.

    p_star is the conjugate exponent (1/p + 1/p* = 1), s_p = min(p, 2) is the
    smoothness power type and r_p = max(p, 2) the convexity power type.
    """

    p: float
    p_star: float
    s_p: float
    r_p: float

    def __init__(self, p: float):
        p = float(p)
        if not math.isfinite(p) or p <= 1.0:
            raise ValueError(f"norm exponent must be finite and > 1, got {p!r}")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "p_star", p / (p - 1.0))
        object.__setattr__(self, "s_p", min(p, 2.0))
        object.__setattr__(self, "r_p", max(p, 2.0))


def _as_vector(z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if z.ndim != 1 or z.size < 1:
        raise ValueError("expected a 1-D vector with at least one entry")
    if not np.all(np.isfinite(z)):
        raise ValueError("vector has non-finite entries")
    return z


def lp_norm(z, ne: NormExponent) -> float:
    """(sum_i |z_i|^p)^(1/p) for a finite vector z."""
    z = _as_vector(z)
    a = np.abs(z)
    m = a.max()
    if m == 0.0:
        return 0.0
    # scale by the max entry so intermediate powers stay well-conditioned
    return float(m * np.sum((a / m) ** ne.p) ** (1.0 / ne.p))


def _signed_powers(z: np.ndarray, expo: float) -> np.ndarray:
    """|z_i|^expo * sgn(z_i), with the z_i == 0 branch handled explicitly."""
    out = np.zeros_like(z)
    nz = z != 0.0
    # exp(expo*log|z|) form avoids NaN from 0**negative for expo < 1
    out[nz] = np.sign(z[nz]) * np.exp(expo * np.log(np.abs(z[nz])))
    return out


def lp_gradient(z, ne: NormExponent) -> np.ndarray:
    """Gradient of the lp norm at a nonzero point.

    Component i is |z_i|^(p-1) sgn(z_i) / ||z||_p^(p-1); the result lies on
    the dual unit sphere (its l_{p*} norm is exactly 1 up to rounding).
    Raises ValueError at (numerically) zero points, where the norm is not
    differentiable in a unique direction.
    """
    z = _as_vector(z)
    nrm = lp_norm(z, ne)
    if nrm <= ZERO_NORM_TOL:
        raise ValueError("lp gradient undefined at the origin")
    return _signed_powers(z / nrm, ne.p - 1.0)


def norm_equivalence_constant(ne: NormExponent, q: int) -> float:
    """N_{2,p}: smallest constant with ||x||_2 <= N_{2,p} ||x||_p on R^q."""
    if q < 1:
        raise ValueError("dimension must be >= 1")
    if ne.p >= 2.0:
        return float(q) ** (0.5 - 1.0 / ne.p)
    return 1.0


def dual_ball_min_euclidean(ne: NormExponent, q: int) -> float:
    """Minimum Euclidean norm over the unit sphere of the dual norm l_{p*}.

    Attained at a coordinate vector when p* >= 2 (value 1) and at the uniform
    vector when p* <= 2 (value q^(1/2 - 1/p*)).
    """
    if q < 2:
        raise ValueError("dimension must be >= 2")
    return min(1.0, float(q) ** (0.5 - 1.0 / ne.p_star))


def moduli_constants(ne: NormExponent) -> tuple[float, float]:
    """Constants (S_p, K_p) in the sharp moduli bounds.

    The modulus of smoothness satisfies rho_p(tau) <= S_p tau^{s_p} and the
    modulus of convexity delta_p(eps) >= K_p eps^{r_p}.
    """
    p = ne.p
    if p <= 2.0:
        return 1.0 / p, (p - 1.0) / 8.0
    return (p - 1.0) / 2.0, 1.0 / (p * 2.0**p)


@dataclass(frozen=True)
class LemmaConstants:
    """Closed-form constants used by the trace verifiers in a given dimension.

    eta is the deviation-vector offset parameter; the verified inequalities
    hold for any eta > 0, so it is a free configuration knob here.
    """

    q: int
    N2p: float
    C_pq: float
    c_pq: float
    C2: float
    C3: float
    eta: float

    @classmethod
    def for_exponent(cls, ne: NormExponent, q: int, eta: float = 0.1) -> "LemmaConstants":
        if q < 2:
            raise ValueError("dimension must be >= 2")
        if eta <= 0.0:
            raise ValueError("eta must be positive")
        n2p = norm_equivalence_constant(ne, q)
        c_pq = dual_ball_min_euclidean(ne, q)
        return cls(
            q=q,
            N2p=n2p,
            C_pq=n2p**2 / 2.0,
            c_pq=c_pq,
            C2=math.sqrt(2.0) * c_pq / n2p,
            C3=math.sqrt(2.0) / n2p,
            eta=eta,
        )
