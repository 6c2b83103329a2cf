import numpy as np
import pytest
from hypothesis import given, strategies as st

from infobstacle.cones import (ConeParams, ConstraintCloud, admissible_min_cone,
                               brute_force_min_cone, boundary_vertices, compare_envelope,
                               cone_envelope, cone_envelope_detailed, superharmonic_defect)
from infobstacle.experiments import radial_exact, radial_problem
from infobstacle.geometry import sample_field


def test_cone_params_evaluate():
    c = ConeParams((1.0, 0.0), 2.0, -1.0)
    np.testing.assert_allclose(c(np.array([[1.0, 0.0], [4.0, 4.0]])), [-1.0, 9.0])


def test_cloud_validation():
    with pytest.raises(ValueError):
        ConstraintCloud([], [])
    with pytest.raises(ValueError):
        ConstraintCloud([-1.0], [0.0])
    with pytest.raises(ValueError):
        ConstraintCloud([1.0, 2.0], [0.0])
    cloud = ConstraintCloud.for_vertex((0, 0), np.array([[3.0, 4.0]]), [1.0])
    assert cloud.r[0] == 5.0


def test_query_below_every_radius_is_unbounded():
    with pytest.raises(ValueError):
        admissible_min_cone(ConstraintCloud([1.0, 2.0], [0.0, 1.0]), 0.5)


def test_hand_worked_program():
    # constraints at r = 1, 2, 3 with values 1, 3, 2: the tight pair at r_x = 1.5 is (1, 2)
    cloud = ConstraintCloud([1.0, 2.0, 3.0], [1.0, 3.0, 2.0])
    m = admissible_min_cone(cloud, 1.5)
    assert (m.b1, m.b2, m.value) == pytest.approx((2.0, -1.0, 2.0))
    # beyond the maximizer the flat cone b1 = 0 wins
    m = admissible_min_cone(cloud, 2.5)
    assert (m.b1, m.b2, m.value) == pytest.approx((0.0, 3.0, 3.0))


clouds = st.integers(1, 30).flatmap(lambda n: st.tuples(
    st.lists(st.integers(0, 40).map(lambda k: k / 8), min_size=n, max_size=n),
    st.lists(st.integers(-40, 40).map(lambda k: k / 8), min_size=n, max_size=n),
    st.floats(0, 1)))


@given(clouds)
def test_hull_matches_pair_enumeration(data):
    r, g, frac = data
    cloud = ConstraintCloud(r, g)
    rx = min(r) + frac * (6.0 - min(r))
    a = admissible_min_cone(cloud, rx)
    b = brute_force_min_cone(cloud, rx)
    assert a.value == pytest.approx(b.value, abs=1e-12)
    assert a.b1 == pytest.approx(b.b1, abs=1e-9)
    # feasibility of the returned cone
    assert np.all(a.b1 * cloud.r + a.b2 >= cloud.g - 1e-12)
    assert a.b1 >= 0


@pytest.fixture(scope="module")
def radial_env():
    g, psi, F = radial_problem(0.05)
    return g, psi, F, cone_envelope_detailed(g, psi, F)


def test_envelope_dominates_obstacle_and_matches_data(radial_env):
    g, psi, F, env = radial_env
    K = env.field
    assert np.all(K.values[g.active] >= psi.values[g.active] - 1e-12)
    np.testing.assert_allclose(K.values[g.boundary], sample_field(g, F).values[g.boundary],
                               atol=1e-12)
    assert np.all(env.b1[g.active] >= 0)
    np.testing.assert_array_equal(cone_envelope(g, psi, F).values, K.values)


def test_envelope_close_to_radial_solution(radial_env):
    g, psi, F, env = radial_env
    c = compare_envelope(radial_exact(g), env.field, 0.03)
    assert c.equality
    assert superharmonic_defect(env.field, F) >= -0.1


def test_boundary_vertices_lie_on_circle(radial_env):
    g = radial_env[0]
    v = boundary_vertices(g)
    np.testing.assert_allclose(np.hypot(*v.T), 2.0, atol=1e-9)


def test_compare_envelope_reports_violation(radial_env):
    g, _, _, env = radial_env
    u = env.field + 0.5
    c = compare_envelope(u, env.field, 1e-3)
    assert not c.ok and c.max_violation == pytest.approx(0.5)
    region = np.zeros(g.shape, bool)
    assert compare_envelope(env.field, env.field, 1e-3, region).min_gap_region is None
