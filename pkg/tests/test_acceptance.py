"""The eleven acceptance criteria at their stated tolerances.

Each criterion is a group of gated checks produced by the experiment
pipelines; solves shared between pipelines are computed once.  Run under
pytest (a PASS/FAIL line per criterion is added to the terminal summary) or
directly with ``python3 tests/test_acceptance.py``.
"""

import os
import sys
import tempfile
from pathlib import Path

import pytest

from infobstacle.experiments import ExperimentConfig, Run, run_experiment

OUT = Path(os.environ.get("ACCEPTANCE_OUT") or tempfile.mkdtemp(prefix="acceptance-"))
RESULTS: dict[int, str] = {}
_SHARED: dict = {}
_MANIFESTS: dict[str, dict] = {}


def _checks(experiment: str) -> list[dict]:
    if experiment not in _MANIFESTS:
        cfg = ExperimentConfig(experiment=experiment, out=str(OUT / experiment))
        run = Run(cfg.out)
        run.cache = _SHARED
        _MANIFESTS[experiment] = run_experiment(cfg, run)
    return _MANIFESTS[experiment]["checks"]


def _select(experiment, *prefixes):
    cs = _checks(experiment)
    if not prefixes:
        return cs
    return [c for c in cs if c["name"].startswith(prefixes) or c["name"].endswith("completed")]


CRITERIA = {
    1: ("radial limit exactness",
        lambda: _select("radial_profile", "h_inf", "a_inf", "finite-p", "h(1e6)")),
    2: ("infinity solver vs radial oracle, refinement trend",
        lambda: _select("radial_solve") + _select("refinement")),
    3: ("p-solver consistency at p = 10", lambda: _select("p_sweep", "p=10")),
    4: ("coincidence sets converge as p grows", lambda: _select("p_sweep", "dist(")),
    5: ("cone envelope equality case and LP oracle", lambda: _select("cones_radial")),
    6: ("strict envelope inequality on the dumbbell",
        lambda: _select("cones_dumbbell", "solver converged", "u_inf max", "min gap")),
    7: ("growth laws",
        lambda: _select("growth_suite", "radial slope", "min slope", "barrier")
        + _select("cones_dumbbell", "dumbbell min slope")),
    8: ("gradient matching", lambda: _select("growth_suite", "gradient mismatch", "max | |Du|")),
    9: ("positive density", lambda: _select("density_suite")),
    10: ("uniqueness and minimality", lambda: _select("uniqueness")),
    11: ("1-D oracle cross-check", lambda: _select("radial_profile", "1-D tangency", "h^2 - 4h")),
}


def evaluate(k: int) -> tuple[bool, str]:
    title, get = CRITERIA[k]
    cs = get()
    failed = [c for c in cs if not c["passed"]]
    ok = bool(cs) and not failed
    detail = "; ".join(f"{c['name']} = {c['value']:.4g} (limit {c['threshold']:.4g})"
                       for c in failed) or f"{len(cs)} checks"
    line = f"{'PASS' if ok else 'FAIL'}  criterion {k:2d}: {title} [{detail}]"
    RESULTS[k] = line
    print(line)
    return ok, line


@pytest.mark.parametrize("k", sorted(CRITERIA))
def test_criterion(k):
    ok, line = evaluate(k)
    assert ok, line


if __name__ == "__main__":
    status = [evaluate(k)[0] for k in sorted(CRITERIA)]
    print(f"artifacts in {OUT}")
    sys.exit(0 if all(status) else 1)
