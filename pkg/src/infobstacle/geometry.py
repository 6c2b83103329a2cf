"""Lattice discretization of planar domains, nodal fields and the wide-stencil
infinity Laplacian shared by the solvers and the diagnostics.

Nodes live on the lattice ``origin + spacing * (i, j)``.  Every node is
classified as interior (strictly inside the open domain), boundary (not
interior, but 4-adjacent to an interior node or lying on the closed domain) or
exterior.  Boundary nodes remember their nearest point on the true boundary so
Dirichlet data is sampled on the boundary itself rather than on the lattice.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np
from scipy.spatial import cKDTree

EXTERIOR, INTERIOR, BOUNDARY = 0, 1, 2

MIN_NODES_ACROSS = 8


class ResolutionError(ValueError):
    """Raised when the lattice cannot resolve the smallest domain feature."""


class ReducedStencilWarning(UserWarning):
    """The stencil at a node was truncated by the domain boundary."""


# --------------------------------------------------------------------------
# Domains
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class DomainSpec:
    """Disk, axis-aligned box, or two disjoint disks joined by a straight tube.

    Use the constructors :meth:`disk`, :meth:`box` and :meth:`dumbbell`.
    The dumbbell balls are centred at ``(-separation/2, 0)`` and
    ``(separation/2, 0)`` and the tube is ``|y| < tube_halfwidth`` between the
    two centres.
    """

    shape: str
    params: tuple[tuple[str, Any], ...]
    _boundary_tree: dict = field(default_factory=dict, compare=False, repr=False)

    @classmethod
    def disk(cls, center=(0.0, 0.0), radius: float = 1.0) -> "DomainSpec":
        if radius <= 0:
            raise ValueError("disk radius must be positive")
        return cls("disk", (("center", tuple(map(float, center))), ("radius", float(radius))))

    @classmethod
    def box(cls, lo=(0.0, 0.0), hi=(1.0, 1.0)) -> "DomainSpec":
        lo = tuple(map(float, lo))
        hi = tuple(map(float, hi))
        if not (lo[0] < hi[0] and lo[1] < hi[1]):
            raise ValueError("box requires lo < hi componentwise")
        return cls("box", (("lo", lo), ("hi", hi)))

    @classmethod
    def dumbbell(cls, ball_radius: float = 1.0, tube_halfwidth: float = 0.1,
                 separation: float = 3.0) -> "DomainSpec":
        if ball_radius <= 0:
            raise ValueError("ball_radius must be positive")
        if not 0 < tube_halfwidth < ball_radius:
            raise ValueError("need 0 < tube_halfwidth < ball_radius")
        if separation <= 2 * ball_radius:
            raise ValueError("balls must be disjoint: separation > 2 * ball_radius")
        return cls("dumbbell", (("ball_radius", float(ball_radius)),
                                ("tube_halfwidth", float(tube_halfwidth)),
                                ("separation", float(separation))))

    @property
    def p(self) -> dict[str, Any]:
        return dict(self.params)

    # -- serialization ----------------------------------------------------
    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"shape": self.shape}
        for k, v in self.params:
            out[k] = list(v) if isinstance(v, tuple) else v
        return out

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "DomainSpec":
        d = dict(d)
        shape = d.pop("shape")
        if shape not in ("disk", "box", "dumbbell"):
            raise ValueError(f"unknown domain shape {shape!r}")
        return getattr(cls, shape)(**d)

    # -- geometry ---------------------------------------------------------
    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        p = self.p
        if self.shape == "disk":
            c = np.asarray(p["center"])
            return c - p["radius"], c + p["radius"]
        if self.shape == "box":
            return np.asarray(p["lo"]), np.asarray(p["hi"])
        r, s = p["ball_radius"], p["separation"]
        return np.array([-s / 2 - r, -r]), np.array([s / 2 + r, r])

    def smallest_feature(self) -> float:
        p = self.p
        if self.shape == "disk":
            return 2 * p["radius"]
        if self.shape == "box":
            return float(min(np.asarray(p["hi"]) - np.asarray(p["lo"])))
        return 2 * p["tube_halfwidth"]

    def _pieces(self):
        # convex pieces whose union is the domain
        p = self.p
        if self.shape == "disk":
            return [("ball", np.asarray(p["center"]), p["radius"])]
        if self.shape == "box":
            return [("rect", np.asarray(p["lo"]), np.asarray(p["hi"]))]
        r, w, s = p["ball_radius"], p["tube_halfwidth"], p["separation"]
        return [("ball", np.array([-s / 2, 0.0]), r),
                ("ball", np.array([s / 2, 0.0]), r),
                ("rect", np.array([-s / 2, -w]), np.array([s / 2, w]))]

    def contains(self, pts) -> np.ndarray:
        """Membership in the *open* domain."""
        pts = np.asarray(pts, dtype=float)
        inside = np.zeros(pts.shape[:-1], dtype=bool)
        for kind, a, b in self._pieces():
            if kind == "ball":
                inside |= np.sum((pts - a) ** 2, axis=-1) < b * b
            else:
                inside |= np.all((pts > a) & (pts < b), axis=-1)
        return inside

    def project(self, pts) -> np.ndarray:
        """Nearest point of the closed domain, for points not in the open domain.

        For such points this is the nearest point of the boundary.
        """
        pts = np.asarray(pts, dtype=float)
        best = np.full(pts.shape, np.nan)
        best_d = np.full(pts.shape[:-1], np.inf)
        for kind, a, b in self._pieces():
            if kind == "ball":
                v = pts - a
                n = np.linalg.norm(v, axis=-1, keepdims=True)
                safe = np.where(n > 0, n, 1.0)
                q = np.where(n > b, a + v * (b / safe), pts)
            else:
                q = np.clip(pts, a, b)
            d = np.linalg.norm(q - pts, axis=-1)
            take = d < best_d
            best[take] = q[take]
            best_d[take] = d[take]
        return best

    def distance_to_boundary(self, pts) -> np.ndarray:
        """Distance from points of the closed domain to the boundary, measured
        against a dense boundary sample (error below the sample gap)."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if "tree" not in self._boundary_tree:
            self._boundary_tree["tree"] = cKDTree(self.boundary_samples(20000))
        d, _ = self._boundary_tree["tree"].query(pts)
        return np.where(self.contains(pts), d, 0.0)

    def boundary_samples(self, n: int) -> np.ndarray:
        """Roughly ``n`` points on the boundary, used by distance queries."""
        pieces = self._pieces()
        out = []
        for kind, a, b in pieces:
            if kind == "ball":
                t = np.linspace(0, 2 * np.pi, n, endpoint=False)
                q = a + b * np.stack([np.cos(t), np.sin(t)], axis=-1)
            else:
                s = np.linspace(0, 1, n // 4, endpoint=False)
                lo, hi = a, b
                q = np.concatenate([
                    np.stack([lo[0] + s * (hi[0] - lo[0]), np.full_like(s, lo[1])], -1),
                    np.stack([np.full_like(s, hi[0]), lo[1] + s * (hi[1] - lo[1])], -1),
                    np.stack([hi[0] - s * (hi[0] - lo[0]), np.full_like(s, hi[1])], -1),
                    np.stack([np.full_like(s, lo[0]), hi[1] - s * (hi[1] - lo[1])], -1),
                ])
            # keep only points not strictly inside another piece
            keep = ~self.contains(q)
            out.append(q[keep])
        return np.concatenate(out)

    def first_exit(self, x: np.ndarray, v: np.ndarray, n_samples: int = 32,
                   n_bisect: int = 60) -> np.ndarray:
        """Fraction ``t`` in (0, 1] at which the segment ``x + t v`` first leaves
        the open domain; ``inf`` where it never does.

        ``x`` must lie in the open domain.  Vectorized over leading axes.
        """
        x = np.asarray(x, float)
        v = np.asarray(v, float)
        ts = np.linspace(0.0, 1.0, n_samples + 1)[1:]
        outside = ~self.contains(x[..., None, :] + ts[:, None] * v[..., None, :])
        any_out = outside.any(axis=-1)
        k = np.argmax(outside, axis=-1)
        hi = ts[k]
        lo = np.where(k > 0, ts[np.maximum(k - 1, 0)], 0.0)
        for _ in range(n_bisect):
            mid = 0.5 * (lo + hi)
            out_mid = ~self.contains(x + mid[..., None] * v)
            hi = np.where(out_mid, mid, hi)
            lo = np.where(out_mid, lo, mid)
        t = np.where(any_out, hi, np.inf)
        return np.where(t > 1 - 1e-12, np.where(any_out, 1.0, np.inf), t)


# --------------------------------------------------------------------------
# Analytic functions
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class AnalyticSpec:
    """A closed-form (or tabulated) function of the plane.

    Variants: ``spherical_cap`` (``height - curvature |x - c|^2``, the default
    being ``1 - |x|^2``), ``aronsson`` (``|x1|^{4/3} - |x2|^{4/3}``),
    ``constant``, ``affine``, ``barrier`` (``(3/4)(3 nu)^{1/3} |x - c|^{4/3}``)
    and ``custom_table`` (bilinear on a regular table, or piecewise linear in
    ``x`` alone when no ``ys`` are given).
    """

    kind: str
    params: tuple[tuple[str, Any], ...] = ()

    @classmethod
    def spherical_cap(cls, center=(0.0, 0.0), height: float = 1.0,
                      curvature: float = 1.0) -> "AnalyticSpec":
        return cls("spherical_cap", (("center", tuple(map(float, center))),
                                     ("height", float(height)),
                                     ("curvature", float(curvature))))

    @classmethod
    def aronsson(cls, center=(0.0, 0.0)) -> "AnalyticSpec":
        return cls("aronsson", (("center", tuple(map(float, center))),))

    @classmethod
    def constant(cls, value: float = 0.0) -> "AnalyticSpec":
        return cls("constant", (("value", float(value)),))

    @classmethod
    def affine(cls, slope=(0.0, 0.0), offset: float = 0.0) -> "AnalyticSpec":
        return cls("affine", (("slope", tuple(map(float, slope))), ("offset", float(offset))))

    @classmethod
    def barrier(cls, nu: float, center=(0.0, 0.0)) -> "AnalyticSpec":
        if nu <= 0:
            raise ValueError("barrier requires nu > 0")
        return cls("barrier", (("nu", float(nu)), ("center", tuple(map(float, center)))))

    @classmethod
    def custom_table(cls, xs, values, ys=None) -> "AnalyticSpec":
        xs = tuple(map(float, xs))
        if ys is None:
            vals = tuple(map(float, values))
            if len(vals) != len(xs):
                raise ValueError("table length mismatch")
            return cls("custom_table", (("xs", xs), ("ys", None), ("values", vals)))
        ys = tuple(map(float, ys))
        arr = np.asarray(values, float)
        if arr.shape != (len(xs), len(ys)):
            raise ValueError("table must have shape (len(xs), len(ys))")
        vals = tuple(tuple(row) for row in arr.tolist())
        return cls("custom_table", (("xs", xs), ("ys", ys), ("values", vals)))

    @property
    def p(self) -> dict[str, Any]:
        return dict(self.params)

    def __call__(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        x, y = pts[..., 0], pts[..., 1]
        p = self.p
        k = self.kind
        if k == "spherical_cap":
            c = p["center"]
            return p["height"] - p["curvature"] * ((x - c[0]) ** 2 + (y - c[1]) ** 2)
        if k == "aronsson":
            c = p["center"]
            return np.abs(x - c[0]) ** (4 / 3) - np.abs(y - c[1]) ** (4 / 3)
        if k == "constant":
            return np.full(x.shape, p["value"])
        if k == "affine":
            s = p["slope"]
            return s[0] * x + s[1] * y + p["offset"]
        if k == "barrier":
            c = p["center"]
            return barrier_profile(p["nu"], np.hypot(x - c[0], y - c[1]))
        if k == "custom_table":
            xs = np.asarray(p["xs"])
            if p["ys"] is None:
                return np.interp(x, xs, np.asarray(p["values"]))
            from scipy.interpolate import RegularGridInterpolator
            f = RegularGridInterpolator((xs, np.asarray(p["ys"])), np.asarray(p["values"]),
                                        bounds_error=False, fill_value=None)
            return f(np.stack([x, y], axis=-1))
        raise ValueError(f"unknown analytic kind {k!r}")

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"kind": self.kind}
        for k, v in self.params:
            out[k] = _listify(v)
        return out

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "AnalyticSpec":
        d = dict(d)
        kind = d.pop("kind")
        ctor = getattr(cls, kind, None)
        if ctor is None or kind in ("p", "to_dict", "from_dict"):
            raise ValueError(f"unknown analytic kind {kind!r}")
        return ctor(**d)


def _listify(v):
    if isinstance(v, tuple):
        return [_listify(x) for x in v]
    return v


def barrier_profile(nu: float, r):
    """``(3/4) (3 nu)^{1/3} r^{4/3}``, whose infinity Laplacian is ``nu``."""
    return 0.75 * np.cbrt(3.0 * nu) * np.abs(r) ** (4.0 / 3.0)


# --------------------------------------------------------------------------
# Grid
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Grid:
    domain: DomainSpec
    spacing: float
    origin: np.ndarray
    kind: np.ndarray          # (nx, ny) int8
    points: np.ndarray        # (nx, ny, 2) lattice coordinates
    sample_points: np.ndarray  # lattice point, or boundary projection
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def shape(self) -> tuple[int, int]:
        return self.kind.shape

    @property
    def interior(self) -> np.ndarray:
        return self.kind == INTERIOR

    @property
    def boundary(self) -> np.ndarray:
        return self.kind == BOUNDARY

    @property
    def active(self) -> np.ndarray:
        return self.kind != EXTERIOR

    def index_of(self, x) -> tuple[int, int]:
        """Nearest lattice index to a point."""
        ij = np.rint((np.asarray(x, float) - self.origin) / self.spacing).astype(int)
        return int(ij[0]), int(ij[1])

    def stencil(self, radius: float | None = None) -> "Stencil":
        r = 3.0 * self.spacing if radius is None else float(radius)
        key = round(r / self.spacing, 9)
        if key not in self._cache:
            self._cache[key] = build_stencil(self, r)
        return self._cache[key]

    def metadata(self) -> dict[str, Any]:
        return {
            "spacing": self.spacing,
            "shape": list(self.shape),
            "origin": self.origin.tolist(),
            "extent": (self.origin + self.spacing * (np.array(self.shape) - 1)).tolist(),
            "domain": self.domain.to_dict(),
            "counts": {"interior": int(self.interior.sum()),
                       "boundary": int(self.boundary.sum()),
                       "exterior": int((self.kind == EXTERIOR).sum())},
        }


def build_grid(spec: DomainSpec, spacing: float) -> Grid:
    """Classify the lattice covering ``spec``'s bounding box.

    Raises :class:`ResolutionError` when fewer than ``MIN_NODES_ACROSS``
    lattice steps span the smallest feature (disk diameter, box side, tube
    width).
    """
    if not spacing > 0:
        raise ValueError("spacing must be positive")
    feature = spec.smallest_feature()
    if feature < MIN_NODES_ACROSS * spacing * (1 - 1e-9):
        what = "tube" if spec.shape == "dumbbell" else "domain"
        raise ResolutionError(
            f"{what} unresolved: feature size {feature:g} needs spacing <= "
            f"{feature / MIN_NODES_ACROSS:g}, got {spacing:g}")
    lo, hi = spec.bounding_box()
    n = np.ceil((hi - lo) / spacing - 1e-9).astype(int) + 1
    ii, jj = np.meshgrid(np.arange(n[0]), np.arange(n[1]), indexing="ij")
    pts = lo + spacing * np.stack([ii, jj], axis=-1).astype(float)
    inside = spec.contains(pts)

    near = np.zeros_like(inside)
    near[1:, :] |= inside[:-1, :]
    near[:-1, :] |= inside[1:, :]
    near[:, 1:] |= inside[:, :-1]
    near[:, :-1] |= inside[:, 1:]
    proj = spec.project(pts)
    on_closure = np.linalg.norm(proj - pts, axis=-1) <= 1e-12 * max(1.0, float(np.abs(hi).max()))
    bnd = ~inside & (near | on_closure)

    kind = np.zeros(inside.shape, dtype=np.int8)
    kind[inside] = INTERIOR
    kind[bnd] = BOUNDARY
    sample = pts.copy()
    sample[bnd] = proj[bnd]
    sample[kind == EXTERIOR] = np.nan
    return Grid(spec, float(spacing), lo.astype(float), kind, pts, sample)


# --------------------------------------------------------------------------
# Fields
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: Grid
    values: np.ndarray  # (nx, ny); NaN at exterior nodes

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise ValueError(f"field shape {v.shape} != grid shape {self.grid.shape}")
        if not np.all(np.isfinite(v[self.grid.active])):
            raise ValueError("field has non-finite values at active nodes")
        v = np.where(self.grid.active, v, np.nan)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __getitem__(self, ij) -> float:
        return float(self.values[ij])

    def _binary(self, other, op):
        if isinstance(other, ScalarField):
            if other.grid is not self.grid:
                raise ValueError("fields live on different grids")
            other = other.values
        return ScalarField(self.grid, op(self.values, other))

    def __add__(self, other):
        return self._binary(other, np.add)

    __radd__ = __add__

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __mul__(self, other):
        return self._binary(other, np.multiply)

    __rmul__ = __mul__

    def __neg__(self):
        return ScalarField(self.grid, -self.values)

    def maximum(self, other) -> "ScalarField":
        return self._binary(other, np.maximum)

    def max_abs_diff(self, other: "ScalarField", where=None) -> float:
        mask = self.grid.active if where is None else where & self.grid.active
        return float(np.max(np.abs(self.values[mask] - other.values[mask]), initial=0.0))


def sample_field(grid: Grid, f: AnalyticSpec | Callable) -> ScalarField:
    """Evaluate ``f`` at every active node (boundary nodes at their projection)."""
    vals = np.full(grid.shape, np.nan)
    act = grid.active
    vals[act] = f(grid.sample_points[act])
    return ScalarField(grid, vals)


def constant_field(grid: Grid, c: float) -> ScalarField:
    return ScalarField(grid, np.full(grid.shape, float(c)))


# --------------------------------------------------------------------------
# Wide stencil
# --------------------------------------------------------------------------


def refinement_radius(spacing: float, ref_spacing: float = 0.025, ref_cells: float = 3.0) -> float:
    """Stencil radius ``c * spacing^{2/3}``, equal to ``ref_cells`` spacings at
    ``ref_spacing``.

    Shrinking the radius slower than the spacing makes the angular resolution
    improve under refinement; the angular and truncation errors of the
    infinity Laplacian then both decay like ``spacing^{2/3}``.
    """
    return ref_cells * ref_spacing * (spacing / ref_spacing) ** (2.0 / 3.0)


def stencil_directions(radius_cells: float) -> np.ndarray:
    """Farthest lattice vector in each primitive direction within the radius."""
    m = int(math.floor(radius_cells + 1e-9))
    dirs = []
    for a in range(-m, m + 1):
        for b in range(-m, m + 1):
            if (a, b) == (0, 0) or math.gcd(abs(a), abs(b)) != 1:
                continue
            n = math.hypot(a, b)
            if n > radius_cells + 1e-9:
                continue
            k = int(math.floor(radius_cells / n + 1e-9))
            dirs.append((k * a, k * b))
    dirs.sort(key=lambda v: math.atan2(v[1], v[0]))
    return np.array(dirs, dtype=int).reshape(-1, 2)


@dataclass(frozen=True, eq=False)
class Stencil:
    """Per-interior-node neighbour table.

    For each interior node and each direction, the neighbour is either the
    lattice node ``nb`` (flat index) at distance ``dist``, or, when the segment
    leaves the domain first, the boundary crossing ``cut`` at distance
    ``dist`` (``nb == -1``).
    """

    radius: float
    offsets: np.ndarray   # (K, 2)
    nodes: np.ndarray     # (N,) flat indices of interior nodes
    nb: np.ndarray        # (N, K)
    dist: np.ndarray      # (N, K)
    cut: np.ndarray       # (N, K, 2) crossing points, NaN if not cut

    @property
    def full(self) -> np.ndarray:
        return np.all(self.nb >= 0, axis=1)

    def cut_values(self, boundary: AnalyticSpec | Callable | None) -> np.ndarray:
        """Boundary data at the crossings; NaN where not cut or data missing."""
        out = np.full(self.nb.shape, np.nan)
        if boundary is None:
            return out
        m = self.nb < 0
        if m.any():
            out[m] = boundary(self.cut[m])
        return out

    def gather(self, flat_values: np.ndarray, cutvals: np.ndarray) -> np.ndarray:
        vals = flat_values[np.where(self.nb >= 0, self.nb, 0)]
        return np.where(self.nb >= 0, vals, cutvals)


def build_stencil(grid: Grid, radius: float) -> Stencil:
    h = grid.spacing
    if radius < 1.0 * h - 1e-12:
        raise ValueError("stencil radius must be at least one lattice spacing")
    offs = stencil_directions(radius / h)
    nx, ny = grid.shape
    ii, jj = np.nonzero(grid.interior)
    nodes = np.ravel_multi_index((ii, jj), grid.shape)
    x = grid.points[ii, jj]                          # (N, 2)
    v = offs[None, :, :] * h                         # (1, K, 2)
    vv = np.broadcast_to(v, (len(nodes),) + v.shape[1:])
    # only nodes within reach of the boundary can have cut arms
    t = np.full(vv.shape[:2], np.inf)
    near = np.flatnonzero(grid.domain.distance_to_boundary(x) <= radius * (1 + 1e-9))
    for c in range(0, len(near), 4096):
        rows = near[c:c + 4096]
        t[rows] = grid.domain.first_exit(np.broadcast_to(x[rows, None, :], vv[rows].shape), vv[rows])
    ti, tj = ii[:, None] + offs[None, :, 0], jj[:, None] + offs[None, :, 1]
    inb = (ti >= 0) & (ti < nx) & (tj >= 0) & (tj < ny)
    lens = np.linalg.norm(offs, axis=1) * h
    cutmask = np.isfinite(t) | ~inb
    t = np.where(np.isfinite(t), t, 1.0)
    nb = np.where(cutmask, -1, np.ravel_multi_index((np.clip(ti, 0, nx - 1),
                                                       np.clip(tj, 0, ny - 1)), grid.shape))
    dist = np.where(cutmask, t * lens[None, :], lens[None, :])
    cut = np.where(cutmask[..., None], x[:, None, :] + t[..., None] * vv, np.nan)
    return Stencil(float(radius), offs, nodes, nb.astype(np.int64), dist, cut)


# --------------------------------------------------------------------------
# Discrete infinity Laplacian
# --------------------------------------------------------------------------


def centered_gradient(u: ScalarField, ii=None, jj=None) -> np.ndarray:
    """Centered differences at interior nodes (``(N, 2)``).

    Boundary neighbours enter with their true distance, so the formula is the
    three-point nonuniform one.  Returns NaN for nodes with an exterior
    4-neighbour.
    """
    g = u.grid
    if ii is None:
        ii, jj = np.nonzero(g.interior)
    ii = np.atleast_1d(ii)
    jj = np.atleast_1d(jj)
    out = np.empty((len(ii), 2))
    x0 = g.points[ii, jj]
    f0 = u.values[ii, jj]
    nx, ny = g.shape
    for ax, (di, dj) in enumerate(((1, 0), (0, 1))):
        ip, jp, im, jm = ii + di, jj + dj, ii - di, jj - dj
        okp = (ip < nx) & (jp < ny)
        okm = (im >= 0) & (jm >= 0)
        ipc, jpc = np.clip(ip, 0, nx - 1), np.clip(jp, 0, ny - 1)
        imc, jmc = np.clip(im, 0, nx - 1), np.clip(jm, 0, ny - 1)
        fp = np.where(okp, u.values[ipc, jpc], np.nan)
        fm = np.where(okm, u.values[imc, jmc], np.nan)
        dp = np.abs(g.sample_points[ipc, jpc, ax] - x0[:, ax])
        dm = np.abs(x0[:, ax] - g.sample_points[imc, jmc, ax])
        dp = np.where(dp > 0, dp, g.spacing)
        dm = np.where(dm > 0, dm, g.spacing)
        out[:, ax] = (dm ** 2 * (fp - f0) + dp ** 2 * (f0 - fm)) / (dp * dm * (dp + dm))
    return out


def opposite_index(offsets: np.ndarray) -> np.ndarray:
    """Index of ``-v`` for every stencil offset ``v``."""
    key = {tuple(v): k for k, v in enumerate(offsets.tolist())}
    return np.array([key[(-a, -b)] for a, b in offsets.tolist()], dtype=np.int64)


def _steepest_pair(f0, vals, dist, opp):
    """Second difference along the opposite pair with the largest
    through-slope ``|v_+ - v_-| / (d_+ + d_-)``.

    Returns ``2 (s_+ + s_-) / (d_+ + d_-)`` with ``s_+-`` the one-sided slopes,
    the three-point second difference for unequal arms.
    """
    through = np.abs(vals - vals[:, opp]) / (dist + dist[:, opp])
    through = np.where(np.isnan(through), -np.inf, through)
    k = np.argmax(through, axis=1)
    rows = np.arange(len(f0))
    kp, km = k, opp[k]
    sp = (vals[rows, kp] - f0) / dist[rows, kp]
    sm = (vals[rows, km] - f0) / dist[rows, km]
    return 2.0 * (sp + sm) / (dist[rows, kp] + dist[rows, km])


@dataclass(frozen=True)
class InfLaplacian:
    """Field-level wide-stencil infinity Laplacian at the interior nodes."""

    nodes: np.ndarray       # (N,) flat indices
    normalized: np.ndarray  # second derivative along the steepest direction
    grad_norm: np.ndarray   # centered-difference |Du|
    full: np.ndarray        # stencil entirely inside the domain

    @property
    def value(self) -> np.ndarray:
        return self.grad_norm ** 2 * self.normalized


def inf_laplacian(u: ScalarField, stencil_radius: float | None = None,
                  boundary: AnalyticSpec | Callable | None = None) -> InfLaplacian:
    """Wide-stencil infinity Laplacian at every interior node.

    Among opposite stencil pairs ``(+v, -v)`` the one with the largest
    through-slope approximates the gradient direction; the normalized value
    is the second difference along it.  Arms leaving the domain end at the
    boundary crossing and use ``boundary`` data there; without boundary data
    they are dropped (``full`` is False for such nodes).
    """
    g = u.grid
    st = g.stencil(stencil_radius)
    flat = u.values.ravel()
    vals = st.gather(flat, st.cut_values(boundary))
    f0 = flat[st.nodes]
    lap_n = _steepest_pair(f0, vals, st.dist, opposite_index(st.offsets))
    ii, jj = np.unravel_index(st.nodes, g.shape)
    grad = np.linalg.norm(centered_gradient(u, ii, jj), axis=1)
    return InfLaplacian(st.nodes, lap_n, grad, st.full)


def discrete_inf_laplacian(u: ScalarField, node: tuple[int, int],
                           stencil_radius: float | None = None,
                           boundary: AnalyticSpec | Callable | None = None) -> float:
    """Unnormalized ``|Du|^2 * (second derivative along the gradient)`` at ``node``.

    Warns with :class:`ReducedStencilWarning` when the stencil is truncated
    by the boundary.
    """
    g = u.grid
    if g.kind[node] != INTERIOR:
        raise ValueError(f"node {node} is not interior")
    st = g.stencil(stencil_radius)
    flat_idx = np.ravel_multi_index(node, g.shape)
    row = int(np.searchsorted(st.nodes, flat_idx))
    nb, dist = st.nb[row:row + 1], st.dist[row:row + 1]
    cutv = np.full(nb.shape, np.nan)
    if (nb < 0).any():
        warnings.warn(f"stencil at {node} truncated by the boundary; reduced accuracy",
                      ReducedStencilWarning, stacklevel=2)
        if boundary is not None:
            m = nb < 0
            cutv[m] = boundary(st.cut[row:row + 1][m])
    flat = u.values.ravel()
    vals = np.where(nb >= 0, flat[np.where(nb >= 0, nb, 0)], cutv)
    opp = opposite_index(st.offsets)
    if not np.any(np.isfinite(vals) & np.isfinite(vals[:, opp])):
        raise ValueError("stencil has no usable opposite pair")
    lap_n = _steepest_pair(np.array([flat[flat_idx]]), vals, dist, opp)
    grad = centered_gradient(u, np.array([node[0]]), np.array([node[1]]))
    return float(np.sum(grad ** 2) * lap_n[0])


def active_neighbors(mask: np.ndarray) -> Sequence[np.ndarray]:
    """4-neighbour shifted copies of a boolean lattice array (False padded)."""
    out = []
    for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        s = np.zeros_like(mask)
        src = mask[max(di, 0):mask.shape[0] + min(di, 0), max(dj, 0):mask.shape[1] + min(dj, 0)]
        s[max(-di, 0):mask.shape[0] + min(-di, 0), max(-dj, 0):mask.shape[1] + min(-dj, 0)] = src
        out.append(s)
    return out
