import math

import numpy as np
import pytest

from folverify import flows
from folverify import localmodel as lm

TWO_PI = 2.0 * math.pi


@pytest.fixture(scope="module")
def params():
    return lm.ModelParams()


def test_constant_field_exits_the_unit_plug_at_one():
    tr = flows.integrate(flows.constant_field([0.0, 0.0, 0.0, 1.0]), np.zeros(4), 5.0,
                         exit=flows.ExitEvent(3, -1.0, 1.0))
    assert tr.status == 1
    assert tr.exit_time == pytest.approx(1.0, abs=1e-10)
    assert tr.end[3] == pytest.approx(1.0, abs=1e-10)


def test_linear_torus_flow_endpoint(params):
    c = params.c
    tr = flows.integrate(flows.torus_field(c), np.zeros(2), TWO_PI)
    np.testing.assert_allclose(tr.end, [TWO_PI, TWO_PI * c], rtol=1e-12)


def test_generic_vector_field_path_matches_kernel_path(params):
    c = params.c
    fn = lambda Y: np.stack([np.ones(len(Y)), np.full(len(Y), c)], axis=1)  # noqa: E731
    a = flows.integrate(fn, np.zeros(2), 3.0).end
    b = flows.integrate(flows.torus_field(c), np.zeros(2), 3.0).end
    np.testing.assert_allclose(a, b, rtol=1e-13)


def test_dimension_mismatch_is_rejected(params):
    with pytest.raises(ValueError):
        flows.integrate(flows.torus_field(0.3), np.zeros(3), 1.0)


def test_step_budget_failure_carries_location():
    with pytest.raises(flows.IntegrationError) as exc:
        flows.integrate(flows.torus_field(0.3), np.zeros(2), 100.0, h_max=0.01, max_steps=10)
    assert exc.value.where is not None


def test_core_set_keeps_t_and_s(params):
    y0 = np.zeros(params.m + 3)
    y0[-1] = 0.5
    tr = flows.integrate(flows.plug_field(params), y0, 50.0)
    assert np.abs(tr.points[:, 2:] - y0[2:]).max() == 0.0
    assert tr.end[0] == pytest.approx(50.0)


def test_rotation_number_of_reparametrized_flow(params):
    tr = flows.integrate(flows.torus_field(params.c, 0.3), np.zeros(2), 2000.0, h_max=0.5)
    est = flows.rotation_number(tr)
    assert abs(est.value - params.c) <= est.error_bound
    with pytest.raises(ValueError, match="winding"):
        flows.rotation_number(flows.integrate(flows.torus_field(params.c), np.zeros(2), 10.0))


def test_orbit_scans_rational_and_irrational():
    seeds = flows.torus_seeds(20, seed=3)
    rat = flows.closed_orbit_scan(flows.torus_field(0.5), seeds, 500.0)
    assert rat.count("suspected-closed") == 20
    assert rat.closest <= 1e-9
    assert np.all(rat.return_time > 0)
    irr = flows.closed_orbit_scan(flows.torus_field(lm.SQRT2_M1), seeds, 500.0)
    assert irr.count("suspected-closed") == 0 and irr.closest > 1e-3


def test_plug_exit_classification(params):
    y0 = np.zeros((1, params.m + 3))
    y0[0, -1] = 0.95          # psi = 0 there, the flow is ∂_s
    scan = flows.closed_orbit_scan(flows.plug_field(params), y0, 10.0, exit=flows.ExitEvent(params.m + 2, -1.0, 1.0))
    assert scan.verdicts[0].classification == "exits-plug"
    assert scan.verdicts[0].exit_time == pytest.approx(0.05, abs=1e-9)


def test_leaf_curve_projects_onto_base_flow(params):
    q = flows.core_fiber_point(params)
    assert lm.psi(params, np.concatenate([q[:2], q[params.t_index], [0.5]])) == 1.0
    lc = flows.trace_leaf_curve(params, q, 5.0, checkpoints=20)
    assert lc.consistency <= 1e-9
    np.testing.assert_array_equal(lc.lift[:, params.z_index], np.broadcast_to(q[params.z_index], (21, 4)))
    rng = np.random.default_rng(0)
    from folverify.pipeline import model_points
    p1 = model_points(params, rng, 1, r_lo=0.4, r_hi=0.6)[0]
    lc1 = flows.trace_leaf_curve(params, p1, 5.0, checkpoints=20)
    assert lc1.consistency <= 1e-8
    assert np.all(np.diff(lc1.s_along) >= 0.0)


def test_d_rho_of_liouville_field():
    rng = np.random.default_rng(0)
    Z = rng.normal(size=(500, 4))
    r = np.linalg.norm(Z, axis=1)
    np.testing.assert_allclose(flows.d_rho_of_Y(Z), -0.5 / r, rtol=1e-13)


def test_sign_region_map_is_negative_outside_repair_ball(params):
    G, r = flows.radial_grid(params, 50, 20, 0.9, r_min=params.delta * 1.01)
    m = flows.sign_region_map(params, G.reshape(-1, 4))
    assert not m.positive.any()
    assert m.diagonal_prediction == pytest.approx(2.0 / params.K)
    inner = flows.sign_region_map(params, flows.radial_grid(params, 50, 5, params.delta / 2.5, r_min=1e-4)[0].reshape(-1, 4))
    assert m.diagonal_positive == inner.diagonal_positive
