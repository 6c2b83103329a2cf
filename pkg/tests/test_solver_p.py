import numpy as np
import pytest
from hypothesis import given, strategies as st

from infobstacle.experiments import radial_exact, radial_problem
from infobstacle.geometry import AnalyticSpec, DomainSpec, build_grid, sample_field
from infobstacle.solver_p import (Mask, PSolveOptions, coincidence_set, default_eps_c, energy_p,
                                  solve_obstacle_p, triangle_operator)

# 2 pi * int_0^2 r |f_10'(r)|^10 dr for the closed-form p = 10 profile,
# by 40-digit quadrature with h(10, 2) from the frozen bisection.
ENERGY_P10 = 0.021203117590990783048


@pytest.fixture(scope="module")
def coarse():
    g, psi, F = radial_problem(0.1)
    res = solve_obstacle_p(g, psi, F, PSolveOptions(p=10))
    return g, psi, F, res


def test_options_validation():
    with pytest.raises(ValueError):
        PSolveOptions(p=1.0)
    with pytest.raises(ValueError):
        PSolveOptions(p=500.0)
    with pytest.raises(ValueError):
        PSolveOptions(grad_tol=0.0)
    with pytest.raises(ValueError):
        PSolveOptions(method="newton")


def test_obstacle_must_sit_below_boundary_data():
    g = build_grid(DomainSpec.disk((0, 0), 0.5), 0.05)
    psi = sample_field(g, AnalyticSpec.spherical_cap())
    with pytest.raises(ValueError):
        solve_obstacle_p(g, psi, AnalyticSpec.constant(0.0), PSolveOptions())


def test_affine_energy():
    g = build_grid(DomainSpec.box((0, 0), (1, 1)), 0.1)
    v = sample_field(g, AnalyticSpec.affine((3.0, 4.0), 1.0))
    e = energy_p(v, 4.0)
    assert e.normalized == pytest.approx(5.0, rel=1e-12)
    assert e.total == pytest.approx(5.0 ** 4 * triangle_operator(g).total_area, rel=1e-12)


def test_interpolated_profile_energy_matches_quadrature():
    g, _, _ = radial_problem(0.025)
    e = energy_p(radial_exact(g, 10.0), 10.0)
    assert e.total == pytest.approx(ENERGY_P10, rel=2e-3)


def test_energy_overflow_is_reported():
    g = build_grid(DomainSpec.box((0, 0), (1, 1)), 0.1)
    v = sample_field(g, AnalyticSpec.affine((1e3, 0.0), 0.0))
    with pytest.raises(OverflowError):
        energy_p(v, 200.0)


def test_solution_is_feasible_and_minimal(coarse):
    g, psi, F, res = coarse
    assert res.converged
    u = res.solution
    assert np.all(u.values[g.interior] >= psi.values[g.interior])
    np.testing.assert_array_equal(u.values[g.boundary], 0.0)
    # the interpolated closed form is feasible, so it cannot beat the minimizer
    assert energy_p(u, 10.0).total <= energy_p(radial_exact(g, 10.0), 10.0).total
    assert u.max_abs_diff(radial_exact(g, 10.0)) <= 0.02


def test_unique_minimizer_proxy(coarse):
    g, psi, F, res = coarse
    other = solve_obstacle_p(g, psi, F, PSolveOptions(p=10), init=radial_exact(g, 10.0) * 0.5)
    assert other.converged
    assert other.solution.max_abs_diff(res.solution) <= 1e-5


def test_projected_gradient_route_agrees(coarse):
    g, psi, F, res = coarse
    pgd = solve_obstacle_p(g, psi, F, PSolveOptions(p=10, method="pgd"))
    assert pgd.converged
    assert pgd.solution.max_abs_diff(res.solution) <= 1e-5
    energies = [h["energy"] for h in pgd.history]
    assert all(b <= a * (1 + 1e-12) for a, b in zip(energies, energies[1:]))


def test_history_and_callback(coarse):
    g, psi, F, _ = coarse
    seen = []
    res = solve_obstacle_p(g, psi, F, PSolveOptions(p=5), callback=seen.append)
    assert len(seen) == len(res.history) > 0
    assert res.history[-1]["pgrad"] == pytest.approx(res.final_residual)


def test_coincidence_set_tolerance(coarse):
    g, psi, _, res = coarse
    assert default_eps_c(g) == pytest.approx(2 * 0.1 ** 2)
    tight = coincidence_set(res.solution, psi, 0.0)
    loose = coincidence_set(res.solution, psi)
    assert np.all(loose.values[tight.values])
    with pytest.raises(ValueError):
        coincidence_set(res.solution, psi, -1.0)


@given(bits=st.lists(st.booleans(), min_size=81, max_size=81))
def test_mask_algebra(bits):
    g = build_grid(DomainSpec.box((0, 0), (1, 1)), 0.125)
    vals = np.array(bits, bool).reshape(g.shape)
    A = Mask(g, vals)
    assert np.array_equal((~~A).values, A.values)
    assert (A & ~A).count == 0
    assert A.count + (~A).count == int(g.active.sum())
    assert not np.any(A.values[~g.active])
