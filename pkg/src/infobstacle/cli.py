"""Command line entry point: ``infobstacle <subcommand> [options]``."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import fb_analysis as fba
from . import io
from .cones import compare_envelope, cone_envelope_detailed
from .experiments import EXPERIMENTS, ExperimentConfig, run_experiment
from .geometry import build_grid, sample_field
from .solver_inf import residuals, solve_obstacle_inf
from .solver_p import PSolveOptions, coincidence_set, solve_obstacle_p


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", type=Path, help="JSON experiment config; flags override it")
    p.add_argument("--out", type=Path, help="output directory")
    p.add_argument("--spacing", type=float)
    p.add_argument("--seed", type=int)


def _problem_flags(p: argparse.ArgumentParser):
    p.add_argument("--domain", type=json.loads, help='e.g. \'{"shape": "disk", "radius": 2}\'')
    p.add_argument("--obstacle", type=json.loads, help='e.g. \'{"kind": "spherical_cap"}\'')
    p.add_argument("--boundary", type=json.loads, help='e.g. \'{"kind": "constant", "value": 0}\'')


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="infobstacle", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("radial", help="closed-form radial table and profiles")
    _common(p)

    p = sub.add_parser("solve-p", help="discrete p-obstacle problem")
    _common(p)
    _problem_flags(p)
    p.add_argument("--p", type=float, default=10.0)
    p.add_argument("--grad-tol", type=float)
    p.add_argument("--max-iters", type=int)
    p.add_argument("--method", choices=("lbfgsb", "pgd"), default="lbfgsb")
    p.add_argument("--eps-c", type=float)

    p = sub.add_parser("solve-inf", help="discrete infinity-obstacle problem")
    _common(p)
    _problem_flags(p)
    p.add_argument("--init", choices=("upper_constant", "cone_envelope"))
    p.add_argument("--sweep-tol", type=float)
    p.add_argument("--stencil-radius", type=float, help="in domain units")
    p.add_argument("--max-sweeps", type=int)
    p.add_argument("--method", choices=("jacobi", "gauss_seidel"), default="jacobi")
    p.add_argument("--eps-c", type=float)

    p = sub.add_parser("p-sweep", help="p-solutions against the limit problem")
    _common(p)
    p.add_argument("--p-values", type=float, nargs="+")

    p = sub.add_parser("cones", help="cone envelope, optionally compared with a solution")
    _common(p)
    _problem_flags(p)
    p.add_argument("--solution", type=Path, help="solution CSV (with grid sidecar)")
    p.add_argument("--tol", type=float, help="comparison tolerance (default 10 spacing^3)")

    p = sub.add_parser("analyze", help="free-boundary diagnostics of a solution")
    _common(p)
    p.add_argument("--solution", type=Path, required=True)
    p.add_argument("--psi", type=Path, required=True, help="obstacle CSV on the same grid")
    p.add_argument("--r-min", type=float)
    p.add_argument("--r-max", type=float)
    p.add_argument("--rho", type=float, nargs="+")
    p.add_argument("--eps-c", type=float)

    p = sub.add_parser("report", help="run a named experiment (default: full_report)")
    _common(p)
    p.add_argument("--experiment", choices=EXPERIMENTS)
    return ap


def load_config(args, experiment: str) -> ExperimentConfig:
    data = {}
    if args.config is not None:
        data = json.loads(args.config.read_text())
    if args.command == "report":
        experiment = args.experiment or data.get("experiment", experiment)
    data["experiment"] = experiment
    overrides = {"out": args.out, "spacing": args.spacing, "seed": args.seed,
                 "domain": getattr(args, "domain", None), "obstacle": getattr(args, "obstacle", None),
                 "boundary": getattr(args, "boundary", None),
                 "p_values": getattr(args, "p_values", None),
                 "grad_tol": getattr(args, "grad_tol", None),
                 "max_iters": getattr(args, "max_iters", None),
                 "sweep_tol": getattr(args, "sweep_tol", None),
                 "stencil_radius": getattr(args, "stencil_radius", None),
                 "max_sweeps": getattr(args, "max_sweeps", None),
                 "init": getattr(args, "init", None)}
    data.update({k: v for k, v in overrides.items() if v is not None})
    if "out" in data:
        data["out"] = str(data["out"])
    else:
        data["out"] = str(Path("runs") / experiment)
    return ExperimentConfig.from_dict(data)


def _problem(cfg: ExperimentConfig):
    g = build_grid(cfg.domain_spec(), cfg.spacing)
    return g, sample_field(g, cfg.obstacle_spec()), cfg.boundary_spec()


def cmd_radial(args) -> int:
    cfg = load_config(args, "radial_profile")
    m = run_experiment(cfg)
    return _report(m)


def cmd_solve_p(args) -> int:
    cfg = load_config(args, "radial_solve")
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    g, psi, F = _problem(cfg)
    opts = PSolveOptions(p=args.p, grad_tol=cfg.grad_tol, max_iters=cfg.max_iters,
                         method=args.method, eps_c=args.eps_c)
    res = solve_obstacle_p(g, psi, F, opts)
    A = coincidence_set(res.solution, psi, opts.eps_c)
    io.write_field(out / "solution.csv", res.solution)
    io.write_field(out / "mask.csv", A)
    io.write_field(out / "psi.csv", psi)
    io.write_json(out / "report.json", {"p": args.p, "iterations": res.iterations,
                                        "energy": res.energy, "residual": res.final_residual,
                                        "converged": res.converged, "contact_nodes": A.count,
                                        "config": cfg.to_dict()})
    print(f"p={args.p:g} iterations={res.iterations} residual={res.final_residual:.3e} "
          f"converged={res.converged}")
    return 0 if res.converged else 1


def cmd_solve_inf(args) -> int:
    cfg = load_config(args, "radial_solve")
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    g, psi, F = _problem(cfg)
    opts = cfg.inf_options(method=args.method)
    res = solve_obstacle_inf(g, psi, F, opts)
    rep = residuals(res.solution, psi, F, args.eps_c, res.options.stencil_radius)
    io.write_field(out / "solution.csv", res.solution)
    io.write_field(out / "psi.csv", psi)
    io.write_json(out / "residuals.json", {"sweeps": res.iterations, "converged": res.converged,
                                           "polished": res.polished,
                                           "final_change": res.final_residual,
                                           "energy": res.energy, **asdict(rep),
                                           "config": cfg.to_dict()})
    print(f"sweeps={res.iterations} converged={res.converged} polished={res.polished} "
          f"harmonic_residual={rep.max_harmonic_residual:.3e}")
    return 0 if res.converged else 1


def cmd_p_sweep(args) -> int:
    cfg = load_config(args, "p_sweep")
    return _report(run_experiment(cfg))


def cmd_cones(args) -> int:
    cfg = load_config(args, "cones_radial")
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.solution is not None:
        u = io.read_field(args.solution)
        g = u.grid
        psi = sample_field(g, cfg.obstacle_spec())
        F = cfg.boundary_spec()
    else:
        g, psi, F = _problem(cfg)
        u = None
    env = cone_envelope_detailed(g, psi, F)
    io.write_field(out / "K.csv", env.field)
    ii, jj = np.nonzero(g.active)
    io.write_table(out / "cone_params.csv", ["i", "j", "vertex_x", "vertex_y", "b1", "b2"],
                   [[i, j, env.vertex[i, j, 0], env.vertex[i, j, 1], env.b1[i, j], env.b2[i, j]]
                    for i, j in zip(ii, jj)])
    status = 0
    if u is not None:
        tol = 10 * g.spacing ** 3 if args.tol is None else args.tol
        c = compare_envelope(u, env.field, tol)
        io.write_json(out / "comparison.json", {**asdict(c), "tol": tol})
        print(f"max violation {c.max_violation:.3e}  max gap {c.max_gap:.3e}  equality {c.equality}")
        status = 0 if c.ok else 1
    return status


def cmd_analyze(args) -> int:
    cfg = load_config(args, "growth_suite")
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    u = io.read_field(args.solution)
    psi = io.read_field(args.psi, u.grid)
    g = u.grid
    A = fba.contact_mask(u, psi)
    cells = fba.free_boundary_cells(A)
    r0 = args.r_min if args.r_min is not None else cfg.growth_radii[0]
    r1 = args.r_max if args.r_max is not None else cfg.growth_radii[1]
    rhos = args.rho or cfg.density_rho
    fits, dens, loglog = [], [], []
    for c in cells:
        x = g.points[tuple(c)]
        try:
            f = fba.growth_exponent(u, psi, c, r0, r1)
            fits.append([int(c[0]), int(c[1]), x[0], x[1], f.slope, f.intercept, f.rms, f.n])
            loglog.extend([[int(c[0]), int(c[1]), float(np.log(r)), float(np.log(s))]
                           for r, s in zip(f.radii, f.sups)])
        except ValueError as exc:
            fits.append([int(c[0]), int(c[1]), x[0], x[1], "", "", "", str(exc)])
        for rho in rhos:
            try:
                dens.append([int(c[0]), int(c[1]), rho, fba.positive_density(~A, c, rho)])
            except ValueError:
                pass
    io.write_table(out / "growth_fits.csv", ["i", "j", "x", "y", "slope", "intercept", "rms", "n"],
                   fits)
    io.write_table(out / "density.csv", ["i", "j", "rho", "density"], dens)
    with (out / "growth_loglog.dat").open("w") as fh:
        fh.write("# i j log_r log_sup\n")
        for row in loglog:
            fh.write(" ".join(format(v, ".17g") if isinstance(v, float) else str(v) for v in row) + "\n")
    reg = fba.regularity_assumptions(u, psi, args.eps_c)
    io.write_json(out / "assumptions.json", asdict(reg))
    print(f"{len(cells)} free-boundary cells; M={reg.M:.4g} nu={reg.nu} "
          f"nondegenerate={reg.nondegenerate}")
    return 0


def cmd_report(args) -> int:
    cfg = load_config(args, "full_report")
    return _report(run_experiment(cfg))


def _report(manifest: dict) -> int:
    for c in manifest["checks"]:
        print(f"{'PASS' if c['passed'] else 'FAIL'}  {c['name']}: {c['value']:.6g} "
              f"(threshold {c['threshold']:.6g})")
    print(f"{manifest['experiment']}: {manifest['status']} in {manifest['wall_time_s']:.1f}s")
    return 0 if manifest["status"] == "pass" else 1


COMMANDS = {"radial": cmd_radial, "solve-p": cmd_solve_p, "solve-inf": cmd_solve_inf,
            "p-sweep": cmd_p_sweep, "cones": cmd_cones, "analyze": cmd_analyze,
            "report": cmd_report}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
