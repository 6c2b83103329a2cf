"""Closed-form radial solution of the spherical-cap obstacle problem on B_2.

Obstacle ``1 - r^2``, zero boundary data on ``|x| = 2``.  For finite ``p`` the
solution is the cap on ``r <= h`` and the radial p-harmonic profile
``a + b r^{1 - alpha}`` on ``h < r <= 2`` with ``alpha = (d - 1)/(p - 1)``; at
``p = inf`` the profile is the cone ``4h - 2h r`` with ``h = 2 - sqrt(3)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

H_INF = 2.0 - math.sqrt(3.0)
OUTER_RADIUS = 2.0


class RadialDomainError(ValueError):
    pass


def alpha(p: float, d: int = 2) -> float:
    """Exponent ``(d - 1)/(p - 1)``; ``0`` at ``p = inf``."""
    if d < 2:
        raise RadialDomainError("dimension must be >= 2")
    if math.isinf(p):
        return 0.0
    if not p > 1:
        raise RadialDomainError("p must exceed 1")
    return (d - 1) / (p - 1)


def _check_branch(p: float, d: int) -> None:
    if not math.isinf(p) and p == d:
        raise RadialDomainError("p = d is the logarithmic branch, not supported")


def h_equation(h, a: float):
    """Left side of the free-boundary equation for exponent ``a``."""
    return (2.0 / (1.0 - a) - 1.0) * h ** 2 - 4.0 * (2.0 ** -a / (1.0 - a)) * h ** (1.0 + a) + 1.0


def solve_h(p: float, d: int = 2, xtol: float = 1e-12) -> float:
    """Free-boundary radius ``h(p, d)`` in (0, 1).

    Bracketing on a fine scan of (0, 1) followed by Brent's method; exactly
    one sign change is required.
    """
    if math.isinf(p):
        return H_INF
    _check_branch(p, d)
    a = alpha(p, d)
    hs = np.linspace(1e-9, 1.0 - 1e-12, 4001)
    with np.errstate(all="ignore"):
        vals = h_equation(hs, a)
    sgn = np.sign(vals)
    flips = np.nonzero(sgn[:-1] * sgn[1:] < 0)[0]
    if len(flips) != 1:
        raise RadialDomainError(
            f"expected one sign change of the free-boundary equation in (0,1) for p={p}, d={d}; "
            f"found {len(flips)}")
    k = flips[0]
    h = brentq(h_equation, hs[k], hs[k + 1], args=(a,), xtol=1e-15, rtol=4 * np.finfo(float).eps,
               maxiter=500)
    # one Newton polish step
    eps = 1e-7 * h
    df = (h_equation(h + eps, a) - h_equation(h - eps, a)) / (2 * eps)
    if df != 0:
        h_new = h - h_equation(h, a) / df
        if abs(h_new - h) < xtol * 10 and abs(h_equation(h_new, a)) <= abs(h_equation(h, a)):
            h = h_new
    return float(h)


@dataclass(frozen=True)
class RadialSolution:
    p: float
    d: int
    alpha: float
    h: float
    a: float
    b: float

    def residuals(self) -> tuple[float, float, float]:
        """Continuity, C^1 matching and boundary relations (all zero ideally)."""
        e = 1.0 - self.alpha
        return (self.a + self.b * self.h ** e - (1.0 - self.h ** 2),
                self.b * e * self.h ** -self.alpha + 2.0 * self.h,
                self.a + self.b * OUTER_RADIUS ** e)


def radial_profile(p: float, d: int = 2) -> RadialSolution:
    if math.isinf(p):
        h = H_INF
        return RadialSolution(math.inf, d, 0.0, h, 4.0 * h, -2.0 * h)
    h = solve_h(p, d)
    a_ = alpha(p, d)
    e = 1.0 - a_
    b = -2.0 * h ** (1.0 + a_) / e
    a = -b * OUTER_RADIUS ** e
    return RadialSolution(float(p), d, a_, h, a, b)


def eval_radial(sol: RadialSolution, r):
    r = np.asarray(r, dtype=float)
    if np.any((r < 0) | (r > OUTER_RADIUS * (1 + 1e-12))):
        raise RadialDomainError("r must lie in [0, 2]")
    e = 1.0 - sol.alpha
    with np.errstate(divide="ignore", invalid="ignore"):
        outer = sol.a + sol.b * np.abs(r) ** e
    out = np.where(r <= sol.h, 1.0 - r ** 2, outer)
    return float(out) if out.ndim == 0 else out


def eval_radial_derivative(sol: RadialSolution, r):
    r = np.asarray(r, dtype=float)
    e = 1.0 - sol.alpha
    with np.errstate(divide="ignore", invalid="ignore"):
        outer = sol.b * e * np.abs(r) ** -sol.alpha
    out = np.where(r <= sol.h, -2.0 * r, outer)
    return float(out) if out.ndim == 0 else out


def radial_gap(r):
    """``f_inf(r) - (1 - r^2)``, which equals ``(r - h_inf)^2`` on ``[h_inf, 2]``."""
    r = np.asarray(r, dtype=float)
    if np.any((r < H_INF * (1 - 1e-12)) | (r > OUTER_RADIUS * (1 + 1e-12))):
        raise RadialDomainError("r must lie in [h_inf, 2]")
    out = (r - H_INF) ** 2
    return float(out) if out.ndim == 0 else out


def radial_field_function(sol: RadialSolution):
    """Callable of planar points evaluating the profile at ``|x|``."""
    def f(pts):
        pts = np.asarray(pts, float)
        r = np.minimum(np.hypot(pts[..., 0], pts[..., 1]), OUTER_RADIUS)
        return eval_radial(sol, r)
    return f
