"""Free-boundary diagnostics: growth exponents, barrier checks, density,
Hausdorff distances between coincidence masks, and measured regularity
constants."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import binary_erosion, distance_transform_edt

from .geometry import (INTERIOR, ScalarField, active_neighbors, barrier_profile,
                       centered_gradient, inf_laplacian)
from .solver_p import Mask, coincidence_set, default_eps_c

CONTACT_TOL = 1e-12


class EmptyFreeBoundaryWarning(UserWarning):
    pass


def contact_mask(u: ScalarField, psi: ScalarField, tol: float = CONTACT_TOL) -> Mask:
    """Nodes where the solution sits on the obstacle up to round-off."""
    return coincidence_set(u, psi, tol)


def free_boundary_cells(A: Mask) -> np.ndarray:
    """Nodes of ``A`` with a 4-neighbour that is active and outside ``A``.

    Returns an ``(n, 2)`` array of lattice indices.
    """
    g = A.grid
    a = A.values
    outside = g.active & ~a
    if not a.any() or not outside.any():
        warnings.warn("mask is empty or full; no free boundary", EmptyFreeBoundaryWarning,
                      stacklevel=2)
        return np.zeros((0, 2), dtype=int)
    touch = np.zeros_like(a)
    for s in active_neighbors(outside):
        touch |= s
    return np.argwhere(a & touch)


# --------------------------------------------------------------------------
# Growth
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ExponentFit:
    slope: float
    intercept: float
    r_range: tuple[float, float]
    rms: float
    n: int
    radii: np.ndarray = field(repr=False, default=None)
    sups: np.ndarray = field(repr=False, default=None)


def log_radii(r_min: float, r_max: float, n_radii: int | None = None) -> np.ndarray:
    """Log-spaced radii, 8 per decade unless ``n_radii`` is given (at least 5)."""
    if not 0 < r_min < r_max:
        raise ValueError("need 0 < r_min < r_max")
    if n_radii is None:
        n_radii = max(5, int(math.ceil(8 * math.log10(r_max / r_min))) + 1)
    return np.geomspace(r_min, r_max, n_radii)


def _point(grid, x0) -> np.ndarray:
    x0 = np.asarray(x0)
    if x0.dtype.kind in "iu":
        return grid.points[tuple(x0)]
    return x0.astype(float)


def ball_sup(u: ScalarField, psi: ScalarField, x0, radii) -> np.ndarray:
    """``max |u - psi|`` over active nodes in each closed ball ``B_r(x0)``."""
    g = u.grid
    c = _point(g, x0)
    act = g.active
    pts = g.points[act]
    d = np.abs(u.values[act] - psi.values[act])
    rr = np.hypot(pts[:, 0] - c[0], pts[:, 1] - c[1])
    order = np.argsort(rr)
    rr, run = rr[order], np.maximum.accumulate(d[order])
    k = np.searchsorted(rr, np.asarray(radii) * (1 + 1e-12), side="right") - 1
    return np.where(k >= 0, run[np.maximum(k, 0)], 0.0)


def growth_exponent(u: ScalarField, psi: ScalarField, x0, r_min: float, r_max: float,
                    n_radii: int | None = None, check_radii: bool = True) -> ExponentFit:
    """Least-squares slope of ``log sup_{B_r(x0)} |u - psi|`` against ``log r``.

    ``x0`` is a lattice index pair or a point.  Radii where the sup vanishes
    are dropped; fewer than five remaining radii is an error.
    """
    g = u.grid
    c = _point(g, x0)
    if check_radii:
        if r_min < 3 * g.spacing * (1 - 1e-9):
            raise ValueError("r_min must be at least 3 * spacing")
        dist = float(g.domain.distance_to_boundary(c[None, :])[0])
        if r_max > dist / 2 * (1 + 1e-9):
            raise ValueError(f"r_max {r_max:g} exceeds half the distance to the boundary {dist:g}")
    radii = log_radii(r_min, r_max, n_radii)
    sups = ball_sup(u, psi, c, radii)
    ok = sups > 0
    if ok.sum() < 5:
        raise ValueError(f"only {int(ok.sum())} radii with a nonzero sup; need 5")
    x, y = np.log(radii[ok]), np.log(sups[ok])
    (slope, icpt), res = np.polyfit(x, y, 1, full=True)[:2]
    rms = math.sqrt(float(res[0]) / ok.sum()) if len(res) else 0.0
    return ExponentFit(float(slope), float(icpt), (float(radii[ok][0]), float(radii[ok][-1])),
                       rms, int(ok.sum()), radii[ok], sups[ok])


# --------------------------------------------------------------------------
# Barrier and lower bound
# --------------------------------------------------------------------------


def barrier_value(nu: float, x, x0=(0.0, 0.0)):
    """``(3/4) (3 nu)^{1/3} |x - x0|^{4/3}``."""
    if not nu > 0:
        raise ValueError("nu must be positive")
    x = np.asarray(x, float)
    r = np.hypot(x[..., 0] - x0[0], x[..., 1] - x0[1])
    out = barrier_profile(nu, r)
    return float(out) if np.ndim(out) == 0 else out


@dataclass
class LowerBoundReport:
    hypothesis_met: bool
    message: str
    radii: np.ndarray
    passed: np.ndarray      # per radius
    margins: np.ndarray     # best (u - psi) - barrier on the ring, per radius

    @property
    def all_passed(self) -> bool:
        return bool(self.hypothesis_met and self.passed.all())


def lower_bound_check(u: ScalarField, psi: ScalarField, y0, nu: float, radii,
                      ring_width: float | None = None, tol: float = 1e-12) -> LowerBoundReport:
    """For each ``r``, is there a detached node on the ring ``|x - y0| ~ r``
    with ``u - psi >= barrier(nu, x - y0)``?

    The ring is the set of nodes within half a spacing of the circle.
    """
    radii = np.atleast_1d(np.asarray(radii, float))
    if not nu > 0:
        return LowerBoundReport(False, "non-degeneracy fails: nu <= 0, lower-bound hypothesis unmet",
                                radii, np.zeros(len(radii), bool), np.full(len(radii), np.nan))
    g = u.grid
    c = _point(g, y0)
    w = 0.5 * g.spacing if ring_width is None else ring_width
    act = g.active
    pts = g.points[act]
    gap = u.values[act] - psi.values[act]
    rr = np.hypot(pts[:, 0] - c[0], pts[:, 1] - c[1])
    bar = barrier_profile(nu, rr)
    det = gap > 0
    passed = np.zeros(len(radii), bool)
    margins = np.full(len(radii), -np.inf)
    for k, r in enumerate(radii):
        ring = det & (np.abs(rr - r) <= w)
        if ring.any():
            m = float(np.max(gap[ring] - bar[ring]))
            margins[k] = m
            passed[k] = m >= -tol
    return LowerBoundReport(True, "ok", radii, passed, margins)


# --------------------------------------------------------------------------
# Density
# --------------------------------------------------------------------------


def positive_density(detached: Mask, x0, rho: float) -> float:
    """Fraction of active nodes of the closed ball ``B_rho(x0)`` lying in
    ``detached``.

    ``x0`` must be a free-boundary node of the complementary mask and the ball
    must lie inside the domain.
    """
    g = detached.grid
    ij = tuple(np.asarray(x0, int))
    contact = g.active & ~detached.values
    if not contact[ij]:
        raise ValueError(f"{ij} is not in the contact set")
    if not any(s[ij] for s in active_neighbors(detached.values)):
        raise ValueError(f"{ij} is not a free-boundary node")
    c = g.points[ij]
    if float(g.domain.distance_to_boundary(c[None, :])[0]) < rho:
        raise ValueError("ball leaves the domain")
    m = int(math.ceil(rho / g.spacing))
    i0, j0 = ij
    sl = (slice(max(i0 - m, 0), i0 + m + 1), slice(max(j0 - m, 0), j0 + m + 1))
    p = g.points[sl]
    inball = np.hypot(p[..., 0] - c[0], p[..., 1] - c[1]) <= rho * (1 + 1e-12)
    inball &= g.active[sl]
    return float(detached.values[sl][inball].sum() / inball.sum())


def circle_intersection_area(r1: float, r2: float, d: float) -> float:
    """Area of the intersection of disks of radii ``r1``, ``r2`` with centres
    ``d`` apart."""
    if d >= r1 + r2:
        return 0.0
    if d <= abs(r1 - r2):
        return math.pi * min(r1, r2) ** 2
    a1 = r1 * r1 * math.acos((d * d + r1 * r1 - r2 * r2) / (2 * d * r1))
    a2 = r2 * r2 * math.acos((d * d + r2 * r2 - r1 * r1) / (2 * d * r2))
    k = 0.5 * math.sqrt((-d + r1 + r2) * (d + r1 - r2) * (d - r1 + r2) * (d + r1 + r2))
    return a1 + a2 - k


def disk_exterior_fraction(R: float, d: float, rho: float) -> float:
    """Fraction of ``B_rho(x0)`` outside a disk of radius ``R`` whose centre
    is ``d`` from ``x0``."""
    return 1.0 - circle_intersection_area(R, rho, d) / (math.pi * rho * rho)


# --------------------------------------------------------------------------
# Mask distances
# --------------------------------------------------------------------------


def hausdorff_one_sided(A: Mask, B: Mask) -> float:
    """``max_{a in A} min_{b in B} |a - b|`` over lattice positions.

    Zero when ``A`` is empty; infinite when ``A`` is not and ``B`` is.
    """
    if A.grid is not B.grid:
        raise ValueError("masks live on different grids")
    a, b = A.values, B.values
    if not a.any():
        return 0.0
    if not b.any():
        return math.inf
    d = distance_transform_edt(~b, sampling=A.grid.spacing)
    return float(d[a].max())


def discrete_interior(A: Mask) -> Mask:
    """Nodes of ``A`` whose 8-neighbourhood lies in ``A``."""
    core = binary_erosion(A.values, structure=np.ones((3, 3), bool), border_value=0)
    return Mask(A.grid, core)


# --------------------------------------------------------------------------
# Measured regularity constants
# --------------------------------------------------------------------------


@dataclass
class RegularityAssumptions:
    M: float                 # max |Delta_inf (u - psi)| over full-stencil nodes
    nu: float | None         # min Delta_inf (u - psi) over the detached set; None if empty
    lipschitz_ok: bool
    bounded_ok: bool
    nondegenerate: bool
    n_detached: int
    notes: str = ""


def regularity_assumptions(u: ScalarField, psi: ScalarField, eps_c: float | None = None,
                           stencil_radius: float | None = None, boundary=None,
                           nu_floor: float | None = None) -> RegularityAssumptions:
    """Discrete proxies for the bounded-operator and non-degeneracy
    hypotheses on ``v = u - psi``.

    Only interior nodes with untruncated stencils are used.  ``nondegenerate``
    requires ``nu`` above ``nu_floor`` (default ``spacing^{2/3}``, the
    consistency order of the operator).
    """
    g = u.grid
    eps = default_eps_c(g) if eps_c is None else eps_c
    v = u - psi
    lap = inf_laplacian(v, stencil_radius, None)
    val = lap.value
    ok = lap.full & np.isfinite(val)
    M = float(np.max(np.abs(val[ok]), initial=0.0))
    det = (v.values.ravel()[lap.nodes] > eps) & ok
    nu = float(val[det].min()) if det.any() else None
    floor = g.spacing ** (2.0 / 3.0) if nu_floor is None else nu_floor
    lip = float(np.nanmax(np.abs(centered_gradient(u))[ok], initial=0.0))
    notes = "" if nu is not None else "detached set empty; nu undefined"
    return RegularityAssumptions(M, nu, bool(np.isfinite(lip)), bool(np.isfinite(M)),
                                 nu is not None and nu > floor, int(det.sum()), notes)


@dataclass
class GradientMatch:
    du: np.ndarray
    dpsi: np.ndarray
    mismatch: float
    defect: float        # max |u(x) - u(x0) - Dpsi(x0).(x - x0)| / |x - x0|^{4/3}
    radius: float


def gradient_match(u: ScalarField, psi: ScalarField, x0, radius: float | None = None) -> GradientMatch:
    """Compare centered-difference gradients at a free-boundary node and
    measure the ``C^{1,1/3}`` defect on ``B_radius(x0)`` (default 5 spacings)."""
    g = u.grid
    ij = tuple(np.asarray(x0, int))
    nx, ny = g.shape
    i, j = ij
    nbrs = [(i + 1, j), (i - 1, j), (i, j + 1), (i, j - 1)]
    if g.kind[ij] != INTERIOR or any(not (0 <= a < nx and 0 <= b < ny) or g.kind[a, b] != INTERIOR
                                     for a, b in nbrs):
        raise ValueError(f"centered stencil at {ij} is truncated")
    ii, jj = np.array([i]), np.array([j])
    du = centered_gradient(u, ii, jj)[0]
    dp = centered_gradient(psi, ii, jj)[0]
    rad = 5 * g.spacing if radius is None else radius
    c = g.points[ij]
    act = g.active
    pts = g.points[act]
    d = np.hypot(pts[:, 0] - c[0], pts[:, 1] - c[1])
    sel = (d > 0) & (d <= rad * (1 + 1e-12))
    lin = u.values[ij] + (pts[sel] - c) @ dp
    defect = float(np.max(np.abs(u.values[act][sel] - lin) / d[sel] ** (4.0 / 3.0), initial=0.0))
    return GradientMatch(du, dp, float(np.linalg.norm(du - dp)), defect, rad)
