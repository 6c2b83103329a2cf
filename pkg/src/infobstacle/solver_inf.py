"""Discrete infinity-obstacle problem as the fixed point of an
obstacle-clamped min/max relaxation.

At an interior node with stencil values ``v_k`` at distances ``d_k`` (arms
that leave the domain stop at the boundary and carry the boundary data), the
local value ``t`` balances the steepest ascent and descent slopes,
``max_k (v_k - t)/d_k = max_k (t - v_k)/d_k``; with equal arms this is
``(max v + min v)/2``.  The update is ``max(psi, t)``.  The map is monotone
and commutes with constants, so starting above the solution the iterates
decrease to the smallest discrete supersolution above the obstacle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.optimize import brentq

from . import _kernels
from .geometry import AnalyticSpec, Grid, ScalarField, inf_laplacian, sample_field
from .solver_p import SolveResult


@dataclass
class InfSolveOptions:
    stencil_radius: float | None = None   # default 3 * spacing
    sweep_tol: float | None = None        # default spacing^3
    max_sweeps: int = 50000
    init: str = "upper_constant"          # upper_constant | cone_envelope | custom
    init_field: ScalarField | None = None
    method: str = "jacobi"                # jacobi | gauss_seidel
    polish: bool = True
    polish_rounds: int = 3
    record_history: bool = False

    def resolve(self, grid: Grid) -> "InfSolveOptions":
        h = grid.spacing
        r = 3.0 * h if self.stencil_radius is None else float(self.stencil_radius)
        tol = h ** 3 if self.sweep_tol is None else float(self.sweep_tol)
        if r < 2.0 * h - 1e-12:
            raise ValueError("stencil_radius must be at least 2 * spacing")
        if not tol > 0:
            raise ValueError("sweep_tol must be positive")
        if self.init not in ("upper_constant", "cone_envelope", "custom"):
            raise ValueError(f"unknown init {self.init!r}")
        if self.init == "custom" and self.init_field is None:
            raise ValueError("init='custom' needs init_field")
        if self.method not in ("jacobi", "gauss_seidel"):
            raise ValueError(f"unknown method {self.method!r}")
        return replace(self, stencil_radius=r, sweep_tol=tol)


class _Problem:
    """Stencil data flattened for the kernels."""

    def __init__(self, grid: Grid, psi: ScalarField, boundary, radius: float):
        self.grid = grid
        self.st = grid.stencil(radius)
        self.cutval = np.ascontiguousarray(np.nan_to_num(self.st.cut_values(boundary)))
        self.psi_nodes = np.ascontiguousarray(psi.values.ravel()[self.st.nodes])
        self.F = sample_field(grid, boundary)

    def kernel_args(self):
        st = self.st
        return st.nodes, st.nb, st.dist, self.cutval, self.psi_nodes


def _feasible_start(prob: _Problem, values: np.ndarray) -> np.ndarray:
    u = np.array(values, dtype=float).ravel()
    g = prob.grid
    b = g.boundary.ravel()
    u[b] = prob.F.values.ravel()[b]
    n = prob.st.nodes
    u[n] = np.maximum(u[n], prob.psi_nodes)
    u[~g.active.ravel()] = 0.0
    return u


def relax_step(u: ScalarField, psi: ScalarField, boundary: AnalyticSpec,
               opts: InfSolveOptions | None = None) -> tuple[ScalarField, float]:
    """One simultaneous (Jacobi) sweep of ``u <- max(psi, t(u))``."""
    grid = u.grid
    o = (opts or InfSolveOptions()).resolve(grid)
    prob = _Problem(grid, psi, boundary, o.stencil_radius)
    cur = _feasible_start(prob, np.nan_to_num(u.values))
    out = cur.copy()
    dmax = _kernels.relax_sweep(cur, *prob.kernel_args(), o.method == "gauss_seidel", out)
    return _to_field(grid, out), float(dmax)


def _to_field(grid: Grid, flat: np.ndarray) -> ScalarField:
    return ScalarField(grid, flat.reshape(grid.shape).copy())


def _polish(prob: _Problem, u: np.ndarray, max_rounds: int = 30):
    """Policy iteration: freeze the active pair (or the clamp) at every node,
    solve the resulting linear system exactly, repeat until the policy is
    stable.

    Returns ``(field, sweep_change)`` for the iterate with the smallest
    one-sweep change seen, or None if every linear solve failed.  The
    iteration is not guaranteed to settle (the local rule is a max over
    pairs of a min), hence the bookkeeping.
    """
    st = prob.st
    args = prob.kernel_args()
    N = len(st.nodes)
    pos = -np.ones(prob.grid.kind.size, dtype=np.int64)
    pos[st.nodes] = np.arange(N)
    rows_n = np.arange(N)
    last = None
    best = None
    for _ in range(max_rounds):
        pi, pj = _kernels.policy(u, *args)
        key = (pi.tobytes(), pj.tobytes())
        if key == last:
            break
        last = key
        clamp = pi < 0
        i_ = np.where(clamp, 0, pi)
        j_ = np.where(clamp, 0, pj)
        di = st.dist[rows_n, i_]
        dj = st.dist[rows_n, j_]
        wi = dj / (di + dj)
        wj = di / (di + dj)
        rhs = np.where(clamp, prob.psi_nodes, 0.0)
        rows, cols, data = [rows_n], [rows_n], [np.ones(N)]
        for k_, w in ((i_, wi), (j_, wj)):
            nbk = st.nb[rows_n, k_]
            free = ~clamp
            inner = free & (nbk >= 0) & (pos[np.maximum(nbk, 0)] >= 0)
            fixed = free & ~inner
            rows.append(rows_n[inner])
            cols.append(pos[nbk[inner]])
            data.append(-w[inner])
            # neighbour is a cut point (boundary data) or a boundary node
            fv = np.where(nbk >= 0, u[np.maximum(nbk, 0)], prob.cutval[rows_n, k_])
            rhs = rhs + np.where(fixed, w * fv, 0.0)
        A = sp.csr_matrix((np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(N, N))
        try:
            x = spla.spsolve(A.tocsc(), rhs)
        except Exception:  # singular policy
            break
        if not np.all(np.isfinite(x)):
            break
        u = u.copy()
        u[st.nodes] = x
        check = u.copy()
        c = float(_kernels.relax_sweep(u, *args, False, check))
        if best is None or c < best[1]:
            best = (u, c)
    return best


def solve_obstacle_inf(grid: Grid, psi: ScalarField, boundary: AnalyticSpec,
                       opts: InfSolveOptions | None = None) -> SolveResult:
    """Relax from the chosen initial field until the max nodal update is at
    most ``sweep_tol``; then (optionally) snap to the exact discrete fixed
    point by policy iteration, keeping the snapped field only if a further
    sweep leaves it unchanged to round-off.
    """
    o = (opts or InfSolveOptions()).resolve(grid)
    prob = _Problem(grid, psi, boundary, o.stencil_radius)
    Fb = prob.F.values[grid.boundary]
    if Fb.size and np.max(psi.values[grid.boundary]) >= np.min(Fb):
        raise ValueError("need sup of obstacle < inf of boundary data on the boundary")
    if o.init == "upper_constant":
        top = max(np.max(Fb, initial=-np.inf), np.max(prob.cutval[prob.st.nb < 0], initial=-np.inf),
                  np.max(prob.psi_nodes, initial=-np.inf))
        start = np.full(grid.kind.size, top)
    elif o.init == "cone_envelope":
        from .cones import cone_envelope
        start = cone_envelope(grid, psi, boundary).values
    else:
        start = o.init_field.values
    u = _feasible_start(prob, np.nan_to_num(start))
    gs = o.method == "gauss_seidel"
    args = prob.kernel_args()
    hist: list[float] = []
    monotone = True
    nxt = u.copy()
    converged = False
    sweeps = 0
    change = math.inf
    for sweeps in range(1, o.max_sweeps + 1):
        if gs:
            prev = u.copy() if o.record_history else None
            change = _kernels.relax_sweep(u, *args, True, u)
            if prev is not None and np.any(u > prev + 1e-15):
                monotone = False
        else:
            change = _kernels.relax_sweep(u, *args, False, nxt)
            if o.record_history and np.any(nxt > u + 1e-15):
                monotone = False
            u, nxt = nxt, u
        if o.record_history:
            hist.append(float(change))
        if change <= o.sweep_tol:
            converged = True
            break
    polished = False
    if converged and o.polish:
        exact = max(1e-12, 1e-3 * o.sweep_tol)
        for _ in range(o.polish_rounds):
            best = _polish(prob, u)
            if best is None or best[1] >= change:
                break
            u, change = best
            if change <= exact:
                polished = True
                break
            # resume relaxation from the improved iterate
            nxt = u.copy()
            for _ in range(o.max_sweeps):
                change = _kernels.relax_sweep(u, *args, gs, u if gs else nxt)
                if not gs:
                    u, nxt = nxt, u
                sweeps += 1
                if change <= o.sweep_tol:
                    break
    sol = _to_field(grid, np.where(grid.active.ravel(), u, np.nan))
    res = SolveResult(sol, sweeps, float(change), lipschitz_estimate(sol, o.stencil_radius, boundary),
                      converged, hist)
    res.polished = polished
    res.monotone = monotone
    res.options = o
    return res


def lipschitz_estimate(u: ScalarField, stencil_radius: float | None = None,
                       boundary=None) -> float:
    """Largest stencil slope magnitude over interior nodes."""
    st = u.grid.stencil(stencil_radius)
    flat = u.values.ravel()
    vals = st.gather(flat, st.cut_values(boundary))
    s = np.abs(vals - flat[st.nodes][:, None]) / st.dist
    return float(np.nanmax(s)) if s.size else 0.0


@dataclass
class ResidualReport:
    max_harmonic_residual: float      # max |Delta_inf u| off the coincidence set
    min_superharmonic: float          # min of -Delta_inf u over interior nodes
    worst: list = field(default_factory=list)   # [(i, j, residual)], off-contact
    normalized_max_harmonic: float = 0.0


def residuals(u: ScalarField, psi: ScalarField, boundary=None, eps_c: float | None = None,
              stencil_radius: float | None = None, n_worst: int = 10) -> ResidualReport:
    """Residuals of the obstacle system at the discrete level.

    Uses the same stencil (and boundary data at cut arms) as the solver.
    """
    from .solver_p import default_eps_c
    g = u.grid
    lap = inf_laplacian(u, stencil_radius, boundary)
    eps = default_eps_c(g) if eps_c is None else eps_c
    flat_u = u.values.ravel()[lap.nodes]
    flat_psi = psi.values.ravel()[lap.nodes]
    off = (flat_u - flat_psi) > eps
    val = lap.value
    ok = np.isfinite(val)
    harm = np.abs(np.where(off & ok, val, 0.0))
    order = np.argsort(-harm)[:n_worst]
    ii, jj = np.unravel_index(lap.nodes[order], g.shape)
    worst = [(int(a), int(b), float(c)) for a, b, c in zip(ii, jj, harm[order]) if c > 0]
    return ResidualReport(
        float(harm.max(initial=0.0)),
        float(np.min(-val[ok], initial=np.inf)),
        worst,
        float(np.max(np.abs(np.where(off & ok, lap.normalized, 0.0)), initial=0.0)),
    )


# --------------------------------------------------------------------------
# 1-D oracle
# --------------------------------------------------------------------------


def solve_1d_oracle(xs, psi_values, f_left: float, f_right: float) -> np.ndarray:
    """Least concave majorant of the obstacle samples with the end values
    replaced by the boundary data, evaluated at ``xs``."""
    xs = np.asarray(xs, dtype=float)
    g = np.array(psi_values, dtype=float)
    if xs.ndim != 1 or len(xs) < 3 or len(g) != len(xs):
        raise ValueError("need at least three matching sample points")
    if np.any(np.diff(xs) <= 0):
        raise ValueError("xs must be strictly increasing")
    g[0], g[-1] = f_left, f_right
    hull = _kernels.upper_hull(xs, g)
    return np.interp(xs, xs[hull], g[hull])


def tangency_point(psi, dpsi, x_end: float, f_end: float, bracket: tuple[float, float]) -> float:
    """Point ``t`` where the line from ``(x_end, f_end)`` is tangent to ``psi``:
    ``psi(t) + psi'(t) (x_end - t) = f_end``."""
    def eq(t):
        return psi(t) + dpsi(t) * (x_end - t) - f_end
    return float(brentq(eq, *bracket, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500))
