"""Envelope of admissible cones with vertex on the boundary.

For a vertex ``y`` every constraint point ``z`` becomes a pair
``(r, g) = (|z - y|, required value)``.  A cone ``b1 r + b2`` with ``b1 >= 0``
is admissible iff the line lies above every pair; its minimum at ``r_x`` is
the upper concave hull of the pairs, held flat to the right of the highest
point (a nondecreasing line above a point stays above it for larger ``r``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from . import _kernels
from .geometry import AnalyticSpec, Grid, ScalarField, inf_laplacian


@dataclass(frozen=True)
class ConeParams:
    vertex: tuple[float, float]
    b1: float
    b2: float

    def __call__(self, pts) -> np.ndarray:
        pts = np.asarray(pts, float)
        return self.b1 * np.hypot(pts[..., 0] - self.vertex[0], pts[..., 1] - self.vertex[1]) + self.b2


@dataclass(frozen=True)
class ConstraintCloud:
    r: np.ndarray
    g: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.r, float).ravel()
        g = np.asarray(self.g, float).ravel()
        if r.shape != g.shape or r.size == 0:
            raise ValueError("cloud needs matching, nonempty r and g")
        if np.any(r < 0) or not np.all(np.isfinite(g)):
            raise ValueError("cloud needs r >= 0 and finite g")
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "g", g)

    @classmethod
    def for_vertex(cls, y, pts, values) -> "ConstraintCloud":
        pts = np.asarray(pts, float)
        return cls(np.hypot(pts[:, 0] - y[0], pts[:, 1] - y[1]), values)


@dataclass(frozen=True)
class MinCone:
    b1: float
    b2: float
    value: float


class _Majorant:
    """Flat-topped upper hull of a cloud, queryable at many radii."""

    def __init__(self, cloud: ConstraintCloud):
        order = np.lexsort((cloud.g, cloud.r))
        r, g = cloud.r[order], cloud.g[order]
        hull = _kernels.upper_hull(r, g)
        hr, hg = r[hull], g[hull]
        top = int(np.argmax(hg))   # first maximizer
        self.hr, self.hg = hr[:top + 1], hg[:top + 1]
        self.r_min = float(r[0])

    def query(self, rx):
        rx = np.asarray(rx, float)
        if np.any(rx < self.r_min):
            raise ValueError("query radius below every constraint radius: cone LP is unbounded")
        hr, hg = self.hr, self.hg
        k = np.searchsorted(hr, rx, side="right") - 1
        last = len(hr) - 1
        seg = np.minimum(k, last - 1) if last > 0 else np.zeros_like(k)
        flat = k >= last
        if last > 0:
            i, j = seg, seg + 1
            b1 = (hg[j] - hg[i]) / (hr[j] - hr[i])
            b2 = hg[i] - b1 * hr[i]
        else:
            b1 = np.zeros(rx.shape)
            b2 = np.zeros(rx.shape)
        b1 = np.where(flat, 0.0, b1)
        b2 = np.where(flat, hg[last], b2)
        return b1, b2, b1 * rx + b2


def admissible_min_cone(cloud: ConstraintCloud, r_x: float) -> MinCone:
    """Minimize ``b1 r_x + b2`` over ``b1 >= 0`` and ``b1 r_z + b2 >= g_z``.

    Ties go to the smallest ``b1``.
    """
    b1, b2, v = _Majorant(cloud).query(np.array([r_x], float))
    return MinCone(float(b1[0]), float(b2[0]), float(v[0]))


def brute_force_min_cone(cloud: ConstraintCloud, r_x: float, tol: float = 1e-12) -> MinCone:
    """Same program solved by enumerating candidate vertices: every pair of
    tight constraints, plus ``b1 = 0`` with one tight constraint."""
    r, g = cloud.r, cloud.g
    n = len(r)
    ii, jj = np.triu_indices(n, 1)
    swap = r[ii] > r[jj]
    ii, jj = np.where(swap, jj, ii), np.where(swap, ii, jj)
    ok = r[jj] != r[ii]
    ii, jj = ii[ok], jj[ok]
    b1 = (g[jj] - g[ii]) / (r[jj] - r[ii])
    b2 = g[ii] - b1 * r[ii]
    b1 = np.concatenate([b1, np.zeros(n)])
    b2 = np.concatenate([b2, g])
    keep = b1 >= 0
    b1, b2 = b1[keep], b2[keep]
    scale = max(1.0, float(np.abs(g).max()))
    feas = np.all(b1[:, None] * r[None, :] + b2[:, None] >= g[None, :] - tol * scale, axis=1)
    b1, b2 = b1[feas], b2[feas]
    val = b1 * r_x + b2
    best = val.min()
    cand = np.flatnonzero(val <= best + tol * scale)
    k = cand[np.argmin(b1[cand])]
    return MinCone(float(b1[k]), float(b2[k]), float(val[k]))


@dataclass
class EnvelopeResult:
    field: ScalarField
    vertex: np.ndarray   # (nx, ny, 2) optimal vertex per node
    b1: np.ndarray
    b2: np.ndarray
    max_slope: float


def cone_envelope_detailed(grid: Grid, psi: ScalarField, boundary: AnalyticSpec) -> EnvelopeResult:
    """Pointwise minimum over boundary vertices of the admissible minimal cone.

    Vertices are boundary points: the projections of the boundary nodes and
    the crossings of lattice edges with the boundary.  Constraints are the
    boundary data at the vertices and the obstacle at interior nodes.
    """
    verts = boundary_vertices(grid)
    imask = grid.interior
    act = grid.active
    cpts = np.concatenate([verts, grid.sample_points[imask]])
    cvals = np.concatenate([boundary(verts), psi.values[imask]])
    qpts = grid.sample_points[act]
    K = np.full(len(qpts), np.inf)
    best_v = np.zeros(len(qpts), dtype=np.int64)
    best_b1 = np.zeros(len(qpts))
    best_b2 = np.zeros(len(qpts))
    fv = cvals[:len(verts)]
    # a constraint no higher than the vertex's own value (at radius 0) never
    # touches the flat-topped hull
    live = cvals > fv.min()
    for k, y in enumerate(verts):
        keep = live & (cvals > fv[k])
        keep[k] = True
        cloud = ConstraintCloud.for_vertex(y, cpts[keep], cvals[keep])
        maj = _Majorant(cloud)
        rx = np.hypot(qpts[:, 0] - y[0], qpts[:, 1] - y[1])
        b1, b2, v = maj.query(rx)
        better = v < K
        K[better] = v[better]
        best_v[better] = k
        best_b1[better] = b1[better]
        best_b2[better] = b2[better]
    vals = np.full(grid.shape, np.nan)
    vals[act] = K
    vx = np.full(grid.shape + (2,), np.nan)
    vx[act] = verts[best_v]
    B1 = np.full(grid.shape, np.nan)
    B2 = np.full(grid.shape, np.nan)
    B1[act] = best_b1
    B2[act] = best_b2
    return EnvelopeResult(ScalarField(grid, vals), vx, B1, B2, float(best_b1.max(initial=0.0)))


def boundary_vertices(grid: Grid, band: float | None = None) -> np.ndarray:
    """Boundary points used as cone vertices.

    The projections of the boundary nodes, the crossings of lattice edges with
    the boundary, and for every interior node within ``band`` (default four
    spacings) of the boundary a nearest point of a dense boundary sample.
    The last family keeps the discretization error of the envelope small right
    next to the boundary, where the nearest vertex dominates.
    """
    h = grid.spacing
    band = 4.0 * h if band is None else band
    st = grid.stencil(h)
    cuts = st.cut[st.nb < 0]
    inner = grid.sample_points[grid.interior]
    near = inner[grid.domain.distance_to_boundary(inner) <= band]
    samples = grid.domain.boundary_samples(max(4000, int(40 * grid.shape[0])))
    _, k = cKDTree(samples).query(near) if len(near) else (None, np.zeros(0, int))
    pts = np.concatenate([grid.sample_points[grid.boundary], cuts, samples[k]])
    key = np.round(pts / (1e-9 * h)).astype(np.int64)
    _, first = np.unique(key, axis=0, return_index=True)
    return pts[np.sort(first)]


def cone_envelope(grid: Grid, psi: ScalarField, boundary: AnalyticSpec) -> ScalarField:
    return cone_envelope_detailed(grid, psi, boundary).field


@dataclass
class EnvelopeComparison:
    max_violation: float   # max(u - K), positive means u exceeds K
    max_gap: float         # max(K - u)
    equality: bool         # |K - u| <= tol everywhere
    ok: bool               # u <= K + tol everywhere
    min_gap_region: float | None = None


def compare_envelope(u: ScalarField, K: ScalarField, tol: float, region=None) -> EnvelopeComparison:
    """Check ``u <= K + tol`` and classify equality; optionally report the
    minimal gap ``K - u`` over a boolean ``region``."""
    if u.grid is not K.grid:
        raise ValueError("fields live on different grids")
    act = u.grid.active
    d = K.values[act] - u.values[act]
    viol = float(max(0.0, -d.min(initial=0.0)))
    gap = float(d.max(initial=0.0))
    mg = None
    if region is not None:
        r = np.asarray(region, bool) & act
        mg = float((K.values[r] - u.values[r]).min()) if r.any() else None
    return EnvelopeComparison(viol, gap, bool(np.all(np.abs(d) <= tol)), viol <= tol, mg)


def superharmonic_defect(K: ScalarField, boundary=None, stencil_radius: float | None = None) -> float:
    """Min over interior nodes of ``-Delta_inf K`` (negative means a defect)."""
    lap = inf_laplacian(K, stencil_radius, boundary)
    v = lap.value
    return float(np.min(-v[np.isfinite(v)], initial=np.inf))
