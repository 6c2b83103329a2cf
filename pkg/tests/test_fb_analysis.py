import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from infobstacle import fb_analysis as fba
from infobstacle.geometry import AnalyticSpec, DomainSpec, build_grid, constant_field, sample_field
from infobstacle.radial import H_INF
from infobstacle.solver_p import Mask


@pytest.fixture(scope="module")
def box():
    return build_grid(DomainSpec.box((-2, -2), (2, 2)), 0.05)


def _disk_mask(g, R, c=(0.0, 0.0)):
    return Mask(g, np.hypot(g.points[..., 0] - c[0], g.points[..., 1] - c[1]) <= R)


def test_free_boundary_cells_of_disk(box):
    A = _disk_mask(box, 0.5)
    cells = fba.free_boundary_cells(A)
    r = np.hypot(*box.points[tuple(cells.T)].T)
    assert np.all(r <= 0.5) and np.all(r > 0.5 - 2 * box.spacing)
    with pytest.warns(fba.EmptyFreeBoundaryWarning):
        assert len(fba.free_boundary_cells(Mask(box, np.zeros(box.shape, bool)))) == 0


@given(c=st.floats(0.01, 100), gamma=st.floats(1.0, 3.0))
def test_growth_exponent_is_scale_covariant(box, c, gamma):
    zero = constant_field(box, 0.0)
    r = np.hypot(box.points[..., 0], box.points[..., 1])
    f1 = zero + r ** gamma
    fc = zero + c * r ** gamma
    a = fba.growth_exponent(f1, zero, (0.0, 0.0), 0.15, 0.9)
    b = fba.growth_exponent(fc, zero, (0.0, 0.0), 0.15, 0.9)
    assert a.slope == pytest.approx(b.slope, abs=1e-9)
    assert b.intercept == pytest.approx(a.intercept + math.log(c), abs=1e-9)
    assert a.slope == pytest.approx(gamma, abs=0.05)


def test_growth_exponent_guards(box):
    zero = constant_field(box, 0.0)
    f = zero + np.hypot(box.points[..., 0], box.points[..., 1]) ** 2
    with pytest.raises(ValueError):
        fba.growth_exponent(f, zero, (0.0, 0.0), 0.05, 0.5)     # below 3 spacings
    with pytest.raises(ValueError):
        fba.growth_exponent(f, zero, (0.0, 0.0), 0.2, 1.5)      # beyond half the distance
    with pytest.raises(ValueError):
        fba.growth_exponent(zero, zero, (0.0, 0.0), 0.2, 0.9)   # all sups vanish
    assert len(fba.log_radii(0.1, 0.2)) == 5


def test_barrier_growth_and_lower_bound(box):
    nu = 3.0
    zero = constant_field(box, 0.0)
    B = sample_field(box, AnalyticSpec.barrier(nu))
    fit = fba.growth_exponent(B, zero, (0.0, 0.0), 0.25, 0.8)
    assert abs(fit.slope - 4 / 3) <= 0.02
    assert fba.barrier_value(nu, (1.0, 0.0)) == pytest.approx(0.75 * 9 ** (1 / 3))
    rep = fba.lower_bound_check(B, zero, (0.0, 0.0), nu, [0.2, 0.5, 1.0])
    assert rep.all_passed
    rep = fba.lower_bound_check(B * 0.5, zero, (0.0, 0.0), nu, [0.2, 0.5, 1.0])
    assert not rep.all_passed
    rep = fba.lower_bound_check(B, zero, (0.0, 0.0), 0.0, [0.5])
    assert not rep.hypothesis_met and "unmet" in rep.message
    with pytest.raises(ValueError):
        fba.barrier_value(-1.0, (1, 0))


def test_circle_intersection_formula():
    assert fba.circle_intersection_area(1, 1, 3) == 0.0
    assert fba.circle_intersection_area(1, 0.5, 0.2) == pytest.approx(math.pi * 0.25)
    # two unit disks at distance 1: 2 pi / 3 - sqrt(3) / 2
    assert fba.circle_intersection_area(1, 1, 1) == pytest.approx(2 * math.pi / 3 - math.sqrt(3) / 2)
    # a ball centred on the circle of a large disk is about half outside
    assert fba.disk_exterior_fraction(100.0, 100.0, 0.1) == pytest.approx(0.5, abs=1e-3)


def test_lattice_density_against_formula():
    box = build_grid(DomainSpec.box((-1, -1), (1, 1)), 0.025)
    A = _disk_mask(box, H_INF)
    for c in fba.free_boundary_cells(A):
        d = float(np.hypot(*box.points[tuple(c)]))
        for rho in (0.1, 0.2, 0.3):
            lat = fba.positive_density(~A, c, rho)
            assert lat == pytest.approx(fba.disk_exterior_fraction(H_INF, d, rho), abs=0.03)


def test_positive_density_preconditions(box):
    A = _disk_mask(box, 0.5)
    with pytest.raises(ValueError):
        fba.positive_density(~A, box.index_of((0.0, 0.0)), 0.1)     # not on the free boundary
    with pytest.raises(ValueError):
        fba.positive_density(~A, box.index_of((1.0, 1.0)), 0.1)     # not in the contact set
    far = _disk_mask(box, 0.5, (1.6, 0.0))
    cell = fba.free_boundary_cells(far)
    right = cell[np.argmax(box.points[tuple(cell.T)][:, 0])]
    with pytest.raises(ValueError):
        fba.positive_density(~far, right, 0.3)                       # ball leaves the box


def test_hausdorff_one_sided(box):
    A = _disk_mask(box, 0.5)
    B = _disk_mask(box, 0.5, (0.2, 0.0))
    assert fba.hausdorff_one_sided(A, A) == 0.0
    assert fba.hausdorff_one_sided(A, B) == pytest.approx(0.2, abs=box.spacing)
    empty = Mask(box, np.zeros(box.shape, bool))
    assert fba.hausdorff_one_sided(empty, A) == 0.0
    assert fba.hausdorff_one_sided(A, empty) == math.inf
    inner = _disk_mask(box, 0.3)
    assert fba.hausdorff_one_sided(inner, A) == 0.0


def test_discrete_interior_erodes_one_layer(box):
    A = _disk_mask(box, 0.5)
    core = fba.discrete_interior(A)
    assert core.count < A.count
    assert np.all(A.values[core.values])
    assert fba.hausdorff_one_sided(A, core) <= 2 * box.spacing


def test_regularity_assumptions_on_barrier(box):
    nu = 3.0
    zero = constant_field(box, 0.0)
    B = sample_field(box, AnalyticSpec.barrier(nu))
    reg = fba.regularity_assumptions(B, zero, stencil_radius=0.15)
    assert reg.bounded_ok and reg.lipschitz_ok
    assert reg.n_detached > 0
    flat = fba.regularity_assumptions(zero, zero)
    assert flat.nu is None and not flat.nondegenerate


def test_gradient_match_exact_for_tangent_plane(box):
    psi = sample_field(box, AnalyticSpec.spherical_cap())
    m = fba.gradient_match(psi, psi, box.index_of((0.3, 0.2)))
    assert m.mismatch == 0.0
    np.testing.assert_allclose(m.du, [-0.6, -0.4], atol=1e-9)
    with pytest.raises(ValueError):
        fba.gradient_match(psi, psi, box.index_of((2.0, 0.0)))
