"""Discrete p-obstacle problem: minimize the p-energy over nodal fields that
equal the boundary data on boundary nodes and stay above the obstacle.

Each lattice cell with four active corners is split into two triangles; the
gradient on a triangle is the exact gradient of the linear interpolant of its
three corner values (boundary corners sit at their boundary projection).  The
energy is the area-weighted sum of ``|gradient|^p``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import minimize

from .geometry import AnalyticSpec, Grid, ScalarField, sample_field

P_MAX = 120.0


@dataclass
class PSolveOptions:
    p: float = 10.0
    max_iters: int = 20000
    grad_tol: float = 1e-4
    armijo_c: float = 1e-4
    armijo_shrink: float = 0.5
    eps_c: float | None = None   # coincidence tolerance; default 2 * spacing^2
    method: str = "lbfgsb"       # or "pgd": projected gradient + Armijo
    p_max: float = P_MAX
    restarts: int = 5            # L-BFGS-B restarts after a stalled line search

    def __post_init__(self):
        if not self.p > 1:
            raise ValueError("p must exceed 1")
        if self.p > self.p_max:
            raise ValueError(f"p={self.p} exceeds p_max={self.p_max}; use the infinity solver")
        if not self.grad_tol > 0:
            raise ValueError("grad_tol must be positive")
        if self.method not in ("lbfgsb", "pgd"):
            raise ValueError(f"unknown method {self.method!r}")


@dataclass
class SolveResult:
    solution: ScalarField
    iterations: int
    final_residual: float
    energy: float
    converged: bool
    history: list = field(default_factory=list)


@dataclass(frozen=True, eq=False)
class Mask:
    grid: Grid
    values: np.ndarray  # bool (nx, ny); False at exterior nodes

    def __post_init__(self):
        v = np.asarray(self.values, dtype=bool) & self.grid.active
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __invert__(self) -> "Mask":
        return Mask(self.grid, ~self.values)

    def __and__(self, other: "Mask") -> "Mask":
        return Mask(self.grid, self.values & other.values)

    @property
    def count(self) -> int:
        return int(self.values.sum())


def default_eps_c(grid: Grid) -> float:
    return 2.0 * grid.spacing ** 2


def coincidence_set(u: ScalarField, psi: ScalarField, eps_c: float | None = None) -> Mask:
    """Nodes where ``u - psi <= eps_c``."""
    if u.grid is not psi.grid:
        raise ValueError("fields live on different grids")
    eps = default_eps_c(u.grid) if eps_c is None else eps_c
    if eps < 0:
        raise ValueError("eps_c must be non-negative")
    act = u.grid.active
    m = np.zeros(u.grid.shape, dtype=bool)
    m[act] = (u.values[act] - psi.values[act]) <= eps
    return Mask(u.grid, m)


# --------------------------------------------------------------------------
# Energy
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TriangleOperator:
    """Sparse maps from nodal values to per-triangle gradient components."""

    gx: sp.csr_matrix
    gy: sp.csr_matrix
    area: np.ndarray
    total_area: float


def triangle_operator(grid: Grid) -> TriangleOperator:
    key = "triangles"
    if key in grid._cache:
        return grid._cache[key]
    act = grid.active
    nx, ny = grid.shape
    ii, jj = np.nonzero(act[:-1, :-1] & act[1:, :-1] & act[:-1, 1:] & act[1:, 1:])
    c00 = np.ravel_multi_index((ii, jj), grid.shape)
    c10 = np.ravel_multi_index((ii + 1, jj), grid.shape)
    c01 = np.ravel_multi_index((ii, jj + 1), grid.shape)
    c11 = np.ravel_multi_index((ii + 1, jj + 1), grid.shape)
    tris = np.concatenate([np.stack([c00, c10, c01], 1), np.stack([c11, c01, c10], 1)])
    pts = grid.sample_points.reshape(-1, 2)
    P = pts[tris]  # (T, 3, 2)
    e1 = P[:, 1] - P[:, 0]
    e2 = P[:, 2] - P[:, 0]
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    # lattice triangles are positively oriented; drop flipped/degenerate ones
    good = det > 0.05 * grid.spacing ** 2
    tris, e1, e2, det = tris[good], e1[good], e2[good], det[good]
    # grad = inv([e1; e2]) @ [v1 - v0, v2 - v0]
    inv = np.stack([np.stack([e2[:, 1], -e1[:, 1]], 1),
                    np.stack([-e2[:, 0], e1[:, 0]], 1)], 1) / det[:, None, None]
    # coefficients of v1 - v0 and v2 - v0 for gx (row 0) and gy (row 1)
    T = len(tris)
    rows = np.repeat(np.arange(T), 3)
    n = grid.kind.size

    def build(k):
        a, b = inv[:, k, 0], inv[:, k, 1]
        data = np.stack([-(a + b), a, b], 1).ravel()
        return sp.csr_matrix((data, (rows, tris.ravel())), shape=(T, n))

    area = 0.5 * det
    op = TriangleOperator(build(0), build(1), area, float(area.sum()))
    grid._cache[key] = op
    return op


@dataclass(frozen=True)
class Energy:
    total: float        # sum of area * |grad|^p
    normalized: float   # (total / area)^(1/p)


def _normalized_energy(s: np.ndarray, area: np.ndarray, total_area: float, p: float):
    smax = float(s.max(initial=0.0))
    if smax == 0.0:
        return 0.0, smax
    w = area / total_area
    return smax * float(np.sum(w * (s / smax) ** p)) ** (1.0 / p), smax


def energy_p(v: ScalarField, p: float) -> Energy:
    """Discrete ``int |Dv|^p``; the normalized form is overflow safe."""
    if not p > 1:
        raise ValueError("p must exceed 1")
    op = triangle_operator(v.grid)
    flat = np.nan_to_num(v.values.ravel())
    s = np.hypot(op.gx @ flat, op.gy @ flat)
    J, _ = _normalized_energy(s, op.area, op.total_area, p)
    with np.errstate(over="ignore"):
        total = op.total_area * J ** p if J > 0 else 0.0
    if not math.isfinite(total):
        raise OverflowError(f"p-energy overflows double precision at p={p}")
    return Energy(float(total), float(J))


def _objective(op: TriangleOperator, p: float, free: np.ndarray, base: np.ndarray, ref: float):
    """``sum w (s / ref)^p`` and its gradient in the free nodal values.

    Minimizing the p-th power (rather than its p-th root) keeps ``p`` times
    more relative resolution near the optimum; ``ref`` keeps it near one.
    """
    gxf = op.gx[:, free]
    gyf = op.gy[:, free]
    cx = op.gx @ base
    cy = op.gy @ base
    w = op.area / op.total_area

    def fun(x):
        gx = gxf @ x + cx
        gy = gyf @ x + cy
        s = np.hypot(gx, gy) / ref
        with np.errstate(over="raise"):
            sp2 = s ** (p - 2)
            E = float(np.sum(w * sp2 * s * s))
        q = p * w * sp2 / ref ** 2
        return E, gxf.T @ (q * gx) + gyf.T @ (q * gy)

    return fun


def _projected_gradient(x, g, lb):
    pg = g.copy()
    at = x <= lb
    pg[at] = np.minimum(g[at], 0.0)
    return pg


def solve_obstacle_p(grid: Grid, psi: ScalarField, boundary: AnalyticSpec,
                     opts: PSolveOptions, init: ScalarField | None = None,
                     callback=None) -> SolveResult:
    """Bound-constrained descent on the p-energy.

    Converged means the projected gradient of ``log J`` (``J`` the normalized
    energy), scaled by ``total_area / spacing^2`` so that it is a per-cell
    quantity, is at most ``grad_tol``.  ``callback(field)`` is called on
    every accepted iterate.
    """
    F = sample_field(grid, boundary)
    bvals = F.values[grid.boundary]
    if bvals.size and np.max(psi.values[grid.boundary]) >= np.min(bvals):
        raise ValueError("need sup of obstacle < inf of boundary data on the boundary")
    op = triangle_operator(grid)
    flat_free = np.flatnonzero(grid.interior.ravel())
    base = np.zeros(grid.kind.size)
    base[grid.boundary.ravel()] = bvals
    lb = psi.values.ravel()[flat_free]
    if init is None:
        x0 = np.maximum(lb, np.max(bvals) if bvals.size else 0.0)
    else:
        x0 = np.maximum(init.values.ravel()[flat_free], lb)
    base0 = base.copy()
    base0[flat_free] = x0
    ref = max(_normalized_energy(np.hypot(op.gx @ base0, op.gy @ base0), op.area,
                                 op.total_area, opts.p)[0], 1e-300)
    fun = _objective(op, opts.p, flat_free, base, ref)
    scale = op.total_area / grid.spacing ** 2

    def resid(x, E, g):
        # projected gradient of log J, per unit cell
        pg = _projected_gradient(x, g, lb)
        return float(np.abs(pg).max(initial=0.0)) * scale / (opts.p * E) if E > 0 else 0.0

    hist: list[dict] = []

    def record(x, E, g):
        hist.append({"energy": ref * E ** (1.0 / opts.p), "pgrad": resid(x, E, g)})
        if callback is not None:
            callback(to_field(x))
        return hist[-1]["pgrad"]

    def to_field(x):
        vals = base.copy()
        vals[flat_free] = x
        return ScalarField(grid, vals.reshape(grid.shape))

    if opts.method == "lbfgsb":
        def cb(xk):
            if record(xk, *fun(xk)) <= opts.grad_tol:
                raise StopIteration

        # restarts with fresh curvature memory once the line search stalls
        # at round-off
        x, iters = x0, 0
        for _ in range(opts.restarts + 1):
            res = minimize(fun, x, jac=True, method="L-BFGS-B",
                           bounds=list(zip(lb, [None] * len(lb))), callback=cb,
                           options={"maxiter": opts.max_iters - iters, "maxfun": 4 * opts.max_iters,
                                    "gtol": 0.0, "ftol": 0.0, "maxcor": 20})
            x = np.maximum(res.x, lb)
            iters += int(res.nit)
            if (hist and hist[-1]["pgrad"] <= opts.grad_tol) or iters >= opts.max_iters \
                    or res.nit == 0:
                break
    else:
        x, iters = _pgd(fun, x0, lb, opts, record)
    E, g = fun(x)
    r = resid(x, E, g)
    sol = to_field(x)
    en = energy_p(sol, opts.p)
    return SolveResult(sol, iters, r, en.total, r <= opts.grad_tol, hist)


def _pgd(fun, x, lb, opts, record):
    """Projected gradient with Armijo backtracking along the projection arc."""
    E, g = fun(x)
    step = 1.0
    for it in range(1, opts.max_iters + 1):
        step = min(step * 4.0, 1e12)
        while True:
            xn = np.maximum(x - step * g, lb)
            En, gn = fun(xn)
            if En <= E - opts.armijo_c / step * np.sum((x - xn) ** 2) or step < 1e-300:
                break
            step *= opts.armijo_shrink
        x, E, g = xn, En, gn
        if record(x, E, g) <= opts.grad_tol:
            return x, it
    return x, opts.max_iters
