"""Named, configuration-driven experiments with persisted artifacts.

Every experiment writes CSV/JSON files into the output directory and returns
a list of gated checks; :func:`run_experiment` adds a manifest with content
hashes, versions, the config hash and the wall time.
"""

from __future__ import annotations

import hashlib
import json
import math
import platform
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__
from . import fb_analysis as fba
from . import io
from .cones import (ConstraintCloud, admissible_min_cone, brute_force_min_cone,
                    compare_envelope, cone_envelope_detailed, superharmonic_defect)
from .geometry import (AnalyticSpec, DomainSpec, Grid, ScalarField, build_grid, inf_laplacian,
                       refinement_radius, sample_field)
from .radial import (H_INF, OUTER_RADIUS, eval_radial, radial_field_function, radial_gap,
                     radial_profile)
from .solver_inf import InfSolveOptions, residuals, solve_obstacle_inf, tangency_point
from .solver_p import PSolveOptions, coincidence_set, default_eps_c, solve_obstacle_p

EXPERIMENTS = ("radial_profile", "radial_solve", "refinement", "uniqueness", "p_sweep",
               "cones_radial", "cones_dumbbell", "growth_suite", "density_suite", "full_report")

PROFILE_P = (5.0, 10.0, 20.0, 40.0, 80.0, 1e6, math.inf)


@dataclass
class ExperimentConfig:
    experiment: str = "radial_solve"
    domain: dict = field(default_factory=lambda: DomainSpec.disk((0.0, 0.0), 2.0).to_dict())
    obstacle: dict = field(default_factory=lambda: AnalyticSpec.spherical_cap().to_dict())
    boundary: dict = field(default_factory=lambda: AnalyticSpec.constant(0.0).to_dict())
    spacing: float = 0.025
    stencil_radius: float | None = None     # in domain units; default 3 * spacing
    sweep_tol: float | None = None          # default spacing^3
    max_sweeps: int = 50000
    init: str = "upper_constant"
    p_values: list = field(default_factory=lambda: [5.0, 10.0, 20.0, 40.0, 80.0])
    grad_tol: float = 1e-4
    max_iters: int = 20000
    # dumbbell experiment
    tube_halfwidth: float = 0.05
    dumbbell_spacing: float = 0.0125
    # analysis
    growth_radii: tuple = (0.2, 0.8)
    refinement_spacings: list = field(default_factory=lambda: [0.05, 0.025, 0.0125])
    density_rho: list = field(default_factory=lambda: [0.1, 0.15, 0.2, 0.25, 0.3])
    barrier_nu: list = field(default_factory=lambda: [1.0, 3.0, 9.0])
    barrier_spacings: list = field(default_factory=lambda: [0.05, 0.025, 0.0125, 0.00625])
    n_clouds: int = 1000
    seed: int = 0
    out: str = "runs"

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}; choose from {EXPERIMENTS}")
        if not self.spacing > 0 or not self.dumbbell_spacing > 0:
            raise ValueError("spacing must be positive")
        DomainSpec.from_dict(self.domain)
        AnalyticSpec.from_dict(self.obstacle)
        AnalyticSpec.from_dict(self.boundary)
        self.growth_radii = tuple(self.growth_radii)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        data = json.loads(Path(path).read_text())
        return cls.from_dict(data)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        extra = set(data) - known
        if extra:
            raise ValueError(f"unknown config keys: {sorted(extra)}")
        return cls(**data)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["growth_radii"] = list(self.growth_radii)
        return d

    def hash(self) -> str:
        d = self.to_dict()
        d.pop("out")
        blob = json.dumps(d, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()

    # -- derived objects -------------------------------------------------
    def domain_spec(self) -> DomainSpec:
        return DomainSpec.from_dict(self.domain)

    def obstacle_spec(self) -> AnalyticSpec:
        return AnalyticSpec.from_dict(self.obstacle)

    def boundary_spec(self) -> AnalyticSpec:
        return AnalyticSpec.from_dict(self.boundary)

    def inf_options(self, **kw) -> InfSolveOptions:
        base = dict(stencil_radius=self.stencil_radius, sweep_tol=self.sweep_tol,
                    max_sweeps=self.max_sweeps, init=self.init)
        base.update(kw)
        return InfSolveOptions(**base)


@dataclass
class Check:
    name: str
    value: float
    threshold: float
    passed: bool
    detail: str = ""

    @classmethod
    def le(cls, name, value, threshold, detail=""):
        return cls(name, float(value), float(threshold), bool(value <= threshold), detail)

    @classmethod
    def ge(cls, name, value, threshold, detail=""):
        return cls(name, float(value), float(threshold), bool(value >= threshold), detail)


class Run:
    """Output directory, file list and checks of one experiment run."""

    def __init__(self, out: Path):
        self.out = Path(out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.files: list[Path] = []
        self.checks: list[Check] = []
        self.notes: dict[str, Any] = {}
        self.cache: dict[str, Any] = {}

    def path(self, name: str) -> Path:
        return self.out / name

    def add(self, *paths):
        for p in paths:
            if isinstance(p, (list, tuple)):
                self.add(*p)
            else:
                self.files.append(Path(p))

    def check(self, c: Check):
        self.checks.append(c)
        return c


# --------------------------------------------------------------------------
# Shared set-ups
# --------------------------------------------------------------------------


def radial_problem(spacing: float):
    """Ball of radius 2, unit cap obstacle, zero boundary data."""
    g = build_grid(DomainSpec.disk((0.0, 0.0), OUTER_RADIUS), spacing)
    return g, sample_field(g, AnalyticSpec.spherical_cap()), AnalyticSpec.constant(0.0)


def dumbbell_problem(spacing: float, tube_halfwidth: float):
    """Unit balls centred at (-1.5, 0) and (1.5, 0) joined by a tube; a cap
    of height 1/2 in the left ball, zero boundary data."""
    g = build_grid(DomainSpec.dumbbell(1.0, tube_halfwidth, 3.0), spacing)
    psi = sample_field(g, AnalyticSpec.spherical_cap((-1.5, 0.0), 0.5, 1.0))
    return g, psi, AnalyticSpec.constant(0.0)


def far_ball(grid: Grid, radius: float = 1.0) -> np.ndarray:
    """Active nodes of the obstacle-free ball within ``radius`` of its centre."""
    p = grid.points
    return grid.active & (np.hypot(p[..., 0] - 1.5, p[..., 1]) < radius)


def radial_exact(grid: Grid, p: float = math.inf) -> ScalarField:
    return sample_field(grid, radial_field_function(radial_profile(p)))


def _radial_inf(run: Run, cfg: ExperimentConfig, spacing: float | None = None, **kw):
    h = cfg.spacing if spacing is None else spacing
    opts = cfg.inf_options(**kw)
    r = 3.0 * h if opts.stencil_radius is None else opts.stencil_radius
    key = ("radial_inf", h, round(r / h, 9), opts.sweep_tol, opts.init, opts.method)
    if key not in run.cache:
        g, psi, F = radial_problem(h)
        res = solve_obstacle_inf(g, psi, F, opts)
        run.cache[key] = (g, psi, F, res)
    return run.cache[key]


def _solve_report(res) -> dict:
    return {"iterations": res.iterations, "final_residual": res.final_residual,
            "converged": res.converged, "energy": res.energy,
            "polished": getattr(res, "polished", None)}


# --------------------------------------------------------------------------
# Experiments
# --------------------------------------------------------------------------


def exp_radial_profile(cfg: ExperimentConfig, run: Run):
    rows = []
    worst = 0.0
    for p in PROFILE_P:
        s = radial_profile(p)
        if not math.isinf(p):
            worst = max(worst, max(abs(x) for x in s.residuals()))
        rows.append([("inf" if math.isinf(p) else repr(float(p))), s.alpha, s.h, s.a, s.b])
    run.add(io.write_table(run.path("radial_profile.csv"), ["p", "alpha", "h", "a", "b"], rows))
    r = np.linspace(0.0, OUTER_RADIUS, 401)
    sinf = radial_profile(math.inf)
    cols = {p: eval_radial(radial_profile(p), r) for p in (5.0, 10.0, 20.0, 40.0, 80.0)}
    uinf = eval_radial(sinf, r)
    gap = np.where(r >= H_INF, radial_gap(np.maximum(r, H_INF)), 0.0)
    header = ["r"] + [f"u_p{int(p)}" for p in cols] + ["u_inf", "gap"]
    prow = [[r[k]] + [cols[p][k] for p in cols] + [uinf[k], gap[k]] for k in range(len(r))]
    run.add(io.write_table(run.path("radial_curves.csv"), header, prow))
    run.check(Check.le("h_inf exact", abs(sinf.h - (2 - math.sqrt(3))), 1e-12))
    run.check(Check.le("a_inf, b_inf exact", max(abs(sinf.a - 4 * sinf.h), abs(sinf.b + 2 * sinf.h)),
                       1e-12))
    run.check(Check.le("finite-p relations", worst, 1e-10))
    run.check(Check.le("h(1e6) - h_inf", abs(radial_profile(1e6).h - H_INF), 1e-4))
    # 1-D: tangent lines from (+-2, 0) to 1 - x^2
    right = tangency_point(lambda t: 1 - t * t, lambda t: -2 * t, OUTER_RADIUS, 0.0, (0.0, 1.0))
    left = tangency_point(lambda t: 1 - t * t, lambda t: -2 * t, -OUTER_RADIUS, 0.0, (-1.0, 0.0))
    run.notes["tangency_points"] = [left, right]
    run.check(Check.le("1-D tangency points vs +-(2 - sqrt 3)",
                       max(abs(right - H_INF), abs(left + H_INF)), 1e-10))
    run.check(Check.le("h^2 - 4h + 1 at the tangency point", abs(right ** 2 - 4 * right + 1), 1e-10))


def exp_radial_solve(cfg: ExperimentConfig, run: Run):
    g, psi, F, res = _radial_inf(run, cfg)
    u = res.solution
    err = u.max_abs_diff(radial_exact(g))
    eps = default_eps_c(g)
    A = coincidence_set(u, psi, eps)
    fb = fba.free_boundary_cells(A)
    rad = float(np.mean(np.hypot(*g.points[tuple(fb.T)].T))) if len(fb) else math.nan
    rep = residuals(u, psi, F, eps, res.options.stencil_radius)
    run.add(io.write_field(run.path("u_inf.csv"), u), io.write_field(run.path("contact_mask.csv"), A))
    run.add(io.write_json(run.path("solve_report.json"), {
        "solve": _solve_report(res), "linf_error": err, "contact_radius": rad,
        "expected_contact_radius": H_INF + math.sqrt(eps),
        "residuals": {"max_harmonic": rep.max_harmonic_residual,
                      "min_superharmonic": rep.min_superharmonic, "worst": rep.worst}}))
    run.notes["radial_solve_linf"] = err
    run.check(Check.ge("solver converged", float(res.converged), 1.0))
    run.check(Check.le("Linf vs radial oracle", err, 0.02))
    run.check(Check.le("contact radius offset / spacing", abs(rad - H_INF - math.sqrt(eps)) / g.spacing,
                       2.0))


def exp_refinement(cfg: ExperimentConfig, run: Run):
    """L-infinity error against the radial oracle under refinement, with the
    stencil radius shrinking like spacing^{2/3}."""
    rows = []
    for h in sorted(cfg.refinement_spacings, reverse=True):
        g, psi, F, res = _radial_inf(run, cfg, h, stencil_radius=refinement_radius(h))
        err = res.solution.max_abs_diff(radial_exact(g))
        rows.append([h, res.options.stencil_radius, res.iterations, int(res.converged), err])
    run.add(io.write_table(run.path("refinement.csv"),
                           ["spacing", "stencil_radius", "sweeps", "converged", "linf_error"], rows))
    errs = [r[4] for r in rows]
    run.notes["refinement_errors"] = errs
    run.check(Check.ge("all refinement runs converged", float(all(r[3] for r in rows)), 1.0))
    run.check(Check.ge("L-inf error decreases under each halving",
                       float(all(b < a for a, b in zip(errs, errs[1:]))), 1.0))
    run.check(Check.le("finest L-inf error", errs[-1], 0.02))


def exp_uniqueness(cfg: ExperimentConfig, run: Run):
    """Fixed points from the two initializations, and comparison with the
    cone envelope as a superharmonic majorant."""
    g, psi, F, top = _radial_inf(run, cfg, init="upper_constant")
    _, _, _, cone = _radial_inf(run, cfg, init="cone_envelope")
    tol = top.options.sweep_tol
    diff = top.solution.max_abs_diff(cone.solution)
    K = cone_envelope_detailed(g, psi, F).field
    cmp_ = compare_envelope(top.solution, K, 10 * tol)
    run.add(io.write_json(run.path("uniqueness_report.json"), {
        "upper_constant": _solve_report(top), "cone_envelope": _solve_report(cone),
        "max_abs_diff": diff, "sweep_tol": tol, "majorant_violation": cmp_.max_violation}))
    run.check(Check.le("fixed points from both initializations / sweep_tol", diff / tol, 10.0))
    run.check(Check.le("u - K over cone majorant / sweep_tol", cmp_.max_violation / tol, 10.0))


def exp_p_sweep(cfg: ExperimentConfig, run: Run):
    g, psi, F, res_inf = _radial_inf(run, cfg)
    h = g.spacing
    A_inf = coincidence_set(res_inf.solution, psi)
    core = fba.discrete_interior(A_inf)
    # the cap is strictly infinity-concave except at its apex
    core = fba.Mask(g, core.values & (np.hypot(g.points[..., 0], g.points[..., 1]) > h / 2))
    rows = []
    prev = None
    for p in sorted(cfg.p_values):
        opts = PSolveOptions(p=p, grad_tol=cfg.grad_tol, max_iters=cfg.max_iters)
        r = solve_obstacle_p(g, psi, F, opts, init=prev)
        prev = r.solution
        A = coincidence_set(r.solution, psi)
        d_out = fba.hausdorff_one_sided(A, A_inf)
        d_in = fba.hausdorff_one_sided(core, A)
        err = r.solution.max_abs_diff(radial_exact(g, p))
        fb = fba.free_boundary_cells(fba.contact_mask(r.solution, psi, 1e-9))
        rc = float(np.max(np.hypot(*g.points[tuple(fb.T)].T))) if len(fb) else math.nan
        rows.append([p, r.iterations, r.final_residual, int(r.converged), r.energy, err,
                     radial_profile(p).h, rc, d_out, d_in, A.count])
        run.add(io.write_field(run.path(f"u_p{int(p)}.csv"), r.solution, sidecar=False))
        if p >= 40:
            run.check(Check.le(f"dist(A_p -> A_inf) p={int(p)} / spacing", d_out / h, 3.0))
            run.check(Check.le(f"dist(int A_inf -> A_p) p={int(p)} / spacing", d_in / h, 3.0))
        if p == 10:
            run.check(Check.le("p=10 Linf vs radial oracle", err, 0.02))
            run.check(Check.le("p=10 contact radius offset / spacing",
                               abs(rc - radial_profile(p).h) / h, 2.0))
    run.add(io.write_table(run.path("p_sweep.csv"),
                           ["p", "iterations", "residual", "converged", "energy", "linf_error",
                            "h_oracle", "contact_radius", "dist_Ap_to_Ainf", "dist_intAinf_to_Ap",
                            "contact_nodes"], rows))
    run.add(io.write_field(run.path("psi.csv"), psi))


def exp_cones_radial(cfg: ExperimentConfig, run: Run):
    g, psi, F, res = _radial_inf(run, cfg)
    env = cone_envelope_detailed(g, psi, F)
    K = env.field
    u = res.solution
    tol = 10 * res.options.sweep_tol
    cmp_ = compare_envelope(u, K, tol)
    defect = superharmonic_defect(K, F, res.options.stencil_radius)
    kb = float(np.max(np.abs(K.values[g.boundary] - sample_field(g, F).values[g.boundary])))
    rng = np.random.default_rng(cfg.seed)
    mism = 0
    for _ in range(cfg.n_clouds):
        cloud = ConstraintCloud(rng.uniform(0, 3, 50), rng.normal(0, 1, 50))
        rx = float(rng.uniform(cloud.r.min(), 4.0))
        a, b = admissible_min_cone(cloud, rx), brute_force_min_cone(cloud, rx)
        mism += int((a.b1, a.b2, a.value) != (b.b1, b.b2, b.value))
    run.add(io.write_field(run.path("K.csv"), K))
    act = np.nonzero(g.active)
    run.add(io.write_table(run.path("cone_params.csv"), ["i", "j", "vertex_x", "vertex_y", "b1", "b2"],
                           [[i, j, env.vertex[i, j, 0], env.vertex[i, j, 1], env.b1[i, j], env.b2[i, j]]
                            for i, j in zip(*act)]))
    run.add(io.write_json(run.path("envelope_report.json"), {
        "comparison": asdict(cmp_), "superharmonic_defect": defect, "max_slope": env.max_slope,
        "K_minus_F_on_boundary": kb, "lp_oracle_mismatches": mism, "clouds": cfg.n_clouds}))
    run.check(Check.le("||K - u_inf||", max(cmp_.max_gap, cmp_.max_violation), 0.03))
    run.check(Check.le("u_inf <= K + 10 sweep_tol (violation)", cmp_.max_violation, tol))
    run.check(Check.le("K = F on boundary nodes", kb, 1e-12))
    run.check(Check.ge("superharmonic defect of K", defect, -0.05))
    run.check(Check.le("hull vs pair-enumeration mismatches", mism, 0))


def exp_cones_dumbbell(cfg: ExperimentConfig, run: Run):
    g, psi, F = dumbbell_problem(cfg.dumbbell_spacing, cfg.tube_halfwidth)
    res = solve_obstacle_inf(g, psi, F, cfg.inf_options(stencil_radius=None, sweep_tol=None))
    K = cone_envelope_detailed(g, psi, F).field
    u = res.solution
    ball = far_ball(g)
    inner = far_ball(g, 0.5)
    cmp_ = compare_envelope(u, K, 10 * res.options.sweep_tol, inner)
    umax = float(np.max(u.values[ball]))
    fb = radial_fb_cells(u, psi)
    lows = [fba.growth_exponent(u, psi, c, 5 * g.spacing, 0.25).slope for c in fb]
    run.notes["dumbbell_fb_slopes"] = [float(np.min(lows)), float(np.max(lows))] if lows else None
    run.add(io.write_field(run.path("u_dumbbell.csv"), u), io.write_field(run.path("K_dumbbell.csv"), K))
    run.add(io.write_json(run.path("dumbbell_report.json"), {
        "solve": _solve_report(res), "comparison": asdict(cmp_), "u_max_far_ball": umax,
        "K_min_inner_far_ball": float(np.min(K.values[inner])), "sweep_tol": res.options.sweep_tol}))
    run.check(Check.ge("solver converged", float(res.converged), 1.0))
    run.check(Check.le("u_inf max over obstacle-free ball", umax, 0.1))
    if res.converged:
        run.check(Check.ge("dumbbell min slope over [5h, 0.25]", min(lows), 4 / 3 - 0.05))
    run.check(Check.ge("min gap K - u over inner far ball / sweep_tol",
                       cmp_.min_gap_region / res.options.sweep_tol, 5.0))


def radial_fb_cells(u: ScalarField, psi: ScalarField) -> np.ndarray:
    return fba.free_boundary_cells(fba.contact_mask(u, psi))


def exp_growth_suite(cfg: ExperimentConfig, run: Run):
    g, psi, F, res = _radial_inf(run, cfg)
    u = res.solution
    fb = radial_fb_cells(u, psi)
    r0, r1 = cfg.growth_radii
    rows, lo_rows, slopes, lows, mism = [], [], [], [], []
    for c in fb:
        f = fba.growth_exponent(u, psi, c, r0, r1)
        fl = fba.growth_exponent(u, psi, c, 5 * g.spacing, 0.25)
        m = fba.gradient_match(u, psi, c)
        slopes.append(f.slope)
        lows.append(fl.slope)
        mism.append(m.mismatch)
        x = g.points[tuple(c)]
        rows.append([int(c[0]), int(c[1]), x[0], x[1], f.slope, f.intercept, f.rms, f.n, fl.slope,
                     m.mismatch, float(np.linalg.norm(m.du)), m.defect])
        lo_rows.extend([[int(c[0]), int(c[1]), rr, ss] for rr, ss in zip(f.radii, f.sups)])
    run.add(io.write_table(run.path("growth_cells.csv"),
                           ["i", "j", "x", "y", "slope", "intercept", "rms", "n", "slope_small_r",
                            "grad_mismatch", "grad_norm", "c13_defect"], rows))
    run.add(io.write_table(run.path("growth_loglog.dat"), ["i", "j", "r", "sup_gap"], lo_rows))
    run.check(Check.le("radial slope max |slope - 2|", float(np.max(np.abs(np.subtract(slopes, 2)))), 0.15))
    run.check(Check.ge("min slope over [5h, 0.25]", float(np.min(lows)), 4 / 3 - 0.05))
    gnorm = np.array([r[10] for r in rows])
    run.check(Check.le("max | |Du| - 2 h_inf |", float(np.max(np.abs(gnorm - 2 * H_INF))), 0.05))
    C = float(np.max(mism)) / g.spacing ** (1 / 3)
    run.notes["gradient_match_C"] = C
    run.check(Check.le("gradient mismatch / spacing^(1/3)", C, 1.0))
    # synthetic barrier fields
    brow = []
    for nu in cfg.barrier_nu:
        errs = []
        for h in cfg.barrier_spacings:
            gb = build_grid(DomainSpec.box((-1.75, -1.75), (1.75, 1.75)), h)
            B = sample_field(gb, AnalyticSpec.barrier(nu))
            lap = inf_laplacian(B, refinement_radius(h), AnalyticSpec.barrier(nu))
            ii, jj = np.unravel_index(lap.nodes, gb.shape)
            rr = np.hypot(*gb.points[ii, jj].T)
            ann = (rr >= 0.5) & (rr <= 1.5)
            errs.append(float(np.max(np.abs(lap.value[ann] - nu))))
            zero = sample_field(gb, AnalyticSpec.constant(0.0))
            fit = fba.growth_exponent(B, zero, (0.0, 0.0), 5 * h, 0.8)
            brow.append([nu, h, errs[-1], errs[-1] / (nu * h ** (2 / 3)), fit.slope])
            run.check(Check.le(f"barrier slope nu={nu:g} h={h:g} |slope - 4/3|",
                               abs(fit.slope - 4 / 3), 0.02))
        run.check(Check.ge(f"barrier residual decreasing nu={nu:g}",
                           float(np.all(np.diff(errs) < 0)), 1.0))
        run.check(Check.le(f"barrier residual / (nu h^(2/3)) nu={nu:g}",
                           max(r[3] for r in brow if r[0] == nu), 2.0))
    run.add(io.write_table(run.path("barrier_identity.csv"),
                           ["nu", "spacing", "max_abs_error", "scaled_error", "growth_slope"], brow))
    reg = fba.regularity_assumptions(u, psi, boundary=F)
    run.add(io.write_json(run.path("assumptions.json"), asdict(reg)))
    run.check(Check.le("radial run is degenerate (nu below floor)", float(reg.nondegenerate), 0.0))


def exp_density_suite(cfg: ExperimentConfig, run: Run):
    g, psi, F, res = _radial_inf(run, cfg)
    u = res.solution
    A = fba.contact_mask(u, psi)
    det = ~A
    fb = fba.free_boundary_cells(A)
    rows = []
    for c in fb:
        for rho in cfg.density_rho:
            rows.append([int(c[0]), int(c[1]), rho, fba.positive_density(det, c, rho)])
    run.add(io.write_table(run.path("density.csv"), ["i", "j", "rho", "density"], rows))
    run.check(Check.ge("min density at radial free-boundary cells", min(r[3] for r in rows), 0.25))
    # lattice counting against the exact circle-intersection area
    disk = fba.Mask(g, np.hypot(g.points[..., 0], g.points[..., 1]) <= H_INF)
    worst = 0.0
    for c in fba.free_boundary_cells(disk):
        d = float(np.hypot(*g.points[tuple(c)]))
        for rho in cfg.density_rho:
            worst = max(worst, abs(fba.positive_density(~disk, c, rho)
                                   - fba.disk_exterior_fraction(H_INF, d, rho)))
    run.check(Check.le("lattice density vs circle-intersection formula", worst, 0.03))


EXPERIMENT_FUNCS: dict[str, Callable[[ExperimentConfig, Run], None]] = {
    "radial_profile": exp_radial_profile,
    "radial_solve": exp_radial_solve,
    "refinement": exp_refinement,
    "uniqueness": exp_uniqueness,
    "p_sweep": exp_p_sweep,
    "cones_radial": exp_cones_radial,
    "cones_dumbbell": exp_cones_dumbbell,
    "growth_suite": exp_growth_suite,
    "density_suite": exp_density_suite,
}


def _versions() -> dict:
    import numba
    import scipy
    return {"infobstacle": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__, "numba": numba.__version__}


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def run_experiment(cfg: ExperimentConfig, run: Run | None = None) -> dict:
    """Run the named pipeline and write ``manifest.json``; the returned
    manifest has ``status`` "pass" iff every gated check passed."""
    out = Path(cfg.out)
    run = Run(out) if run is None else run
    t0 = time.perf_counter()
    names = list(EXPERIMENT_FUNCS) if cfg.experiment == "full_report" else [cfg.experiment]
    errors = {}
    for name in names:
        try:
            EXPERIMENT_FUNCS[name](cfg, run)
        except Exception as exc:  # keep partial artifacts
            errors[name] = f"{type(exc).__name__}: {exc}"
            run.check(Check(f"{name} completed", 0.0, 1.0, False, errors[name]))
    wall = time.perf_counter() - t0
    files = sorted({p.resolve() for p in run.files})
    manifest = {
        "experiment": cfg.experiment,
        "config": cfg.to_dict(),
        "config_hash": cfg.hash(),
        "versions": _versions(),
        "wall_time_s": wall,
        "files": [{"path": str(p.relative_to(out.resolve())), "sha256": _sha256(p)} for p in files],
        "checks": [asdict(c) for c in run.checks],
        "notes": run.notes,
        "errors": errors,
        "status": "pass" if all(c.passed for c in run.checks) else "fail",
    }
    io.write_json(out / "manifest.json", manifest)
    return manifest
