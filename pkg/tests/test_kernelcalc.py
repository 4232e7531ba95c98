import numpy as np
import pytest

from folverify import kernelcalc as kc
from folverify import localmodel as lm
from folverify.exterior import KForm


def test_trivial_linear_system():
    h = kc.HyperplaneData.at([0.0, 0.0, 0.0, 1.0], 0.0, 1.0)
    s = kc.solve_closed_form(h, 0.3, 0.2)
    assert (float(s.a2), float(s.b2)) == pytest.approx((0.0, 0.5))
    s0 = kc.solve_closed_form(h, 0.0, 0.0)
    assert (float(s0.a2), float(s0.b2)) == (0.0, 1.0)


def _instances(rng, n):
    z = rng.uniform(-1, 1, (n, 4))
    h = kc.HyperplaneData(z, rng.uniform(-1, 1, (n, 4)), rng.uniform(0, 5, n), rng.uniform(-1, 1, n))
    keep = np.abs(h.D) > 0.1
    return kc.HyperplaneData(h.z[keep], h.zbar[keep], h.K[keep], h.R[keep])


def test_closed_form_against_dense_solve():
    rng = np.random.default_rng(0)
    h = _instances(rng, 5000)
    a1, b1 = rng.normal(size=(2, len(h.R)))
    s = kc.solve_closed_form(h, a1, b1)
    na, nb = kc.solve_numeric(h, a1, b1)
    np.testing.assert_allclose(s.a2, na, rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose(s.b2, nb, rtol=1e-9, atol=1e-12)
    assert np.abs(s.residual_h1).max() <= 1e-10 and np.abs(s.residual_ker).max() <= 1e-10
    assert s.closed_form.all()


def test_degenerate_denominator():
    h = kc.HyperplaneData.at([1.0, 0.0, 0.0, 0.0], 0.0, 1.0)   # x2 = y2 = 0
    with pytest.raises(kc.DegenerateSystem) as exc:
        kc.solve_closed_form(h, 0.1, 0.2, strict=True)
    assert "D" in str(exc.value)
    h2 = kc.HyperplaneData.at([0.3, 0.2, 1e-9, 0.0], 0.0, 1.0)
    s = kc.solve_closed_form(h2, 0.1, 0.2)
    assert not s.closed_form.any()
    assert abs(float(s.residual_h1)) <= 1e-10


@pytest.mark.parametrize("zero", [2, 3])
def test_vanishing_loci(zero):
    rng = np.random.default_rng(zero)
    z = rng.uniform(-1, 1, (500, 4))
    z[:, [0, 1, zero]] = 0.0
    h = kc.HyperplaneData(z, z, 3.0, rng.uniform(-1, 1, 500))
    keep = np.abs(h.D) > 0.1
    h = kc.HyperplaneData(z[keep], z[keep], 3.0, h.R[keep])
    u = tuple(rng.normal(size=(2, len(h.R))))
    v = tuple(rng.normal(size=(2, len(h.R))))
    assert np.abs(kc.pairing_recomputed(h, u, v)).max() <= 1e-12


def test_full_pairing_examples():
    h = kc.HyperplaneData.at([0.0, 0.0, 0.0, 0.8], 2.0, 0.6)
    assert float(kc.full_pairing(h, (1.0, 0.0), (0.0, 1.0))) == pytest.approx(1.0, abs=1e-14)
    assert float(kc.full_pairing(h, (0.3, 0.4), (0.3, 0.4))) == 0.0
    rng = np.random.default_rng(1)
    hh = _instances(rng, 2000)
    u = tuple(rng.normal(size=(2, len(hh.R))))
    v = tuple(rng.normal(size=(2, len(hh.R))))
    assert np.abs(kc.full_pairing(hh, u, v) + kc.full_pairing(hh, v, u)).max() <= 1e-12


def test_display_discrepancy_is_detected_not_hidden():
    rng = np.random.default_rng(4)
    h = _instances(rng, 2000)
    u = tuple(rng.normal(size=(2, len(h.R))))
    v = tuple(rng.normal(size=(2, len(h.R))))
    c = kc.check_pairing_display(h, u, v)
    assert c.discrepant and c.witness["display"] != c.witness["recomputed"]


def test_perturbation_examples():
    p = lm.ModelParams()
    pert = kc.perturb_alpha(p)
    x0 = [0.0] * p.dim
    diff = (pert.alpha_tilde - pert.alpha).coefficients(x0)
    assert {k: v for k, v in diff.items() if v != 0.0} == {(5,): -p.eta / 2.0}
    far = [0.0] * p.dim
    far[6] = 2 * p.delta_bar
    assert all(v == 0.0 for v in (pert.alpha_tilde - pert.alpha).coefficients(far).values())
    assert isinstance(pert.alpha_tilde, KForm)


def test_perturbation_rejects_large_eta():
    p = lm.ModelParams(eta=50.0)
    with pytest.raises(kc.PerturbationError, match="smaller eta"):
        kc.check_perturbation(p, npts=2000)


def test_origin_nondegeneracy_needs_the_perturbation():
    p = lm.ModelParams()
    Z = np.zeros((1, 4))
    assert kc.nondegeneracy_near_origin(p, Z).margin > 1e-6
    ctrl = kc.nondegeneracy_near_origin(p, Z, perturbed=False)
    assert ctrl.margin <= 1e-9 and ctrl.null_dims[0] == 3


def test_origin_margin_agrees_with_leaf_restriction_in_plateau():
    # on the delta/2-ball the plane H_1 ∩ Ker α_tilde is checked directly
    p = lm.ModelParams()
    rng = np.random.default_rng(7)
    Z = kc._ball(rng, 2000, p.delta / 2)
    r = kc.nondegeneracy_near_origin(p, Z)
    assert r.passed and r.particular_residual <= 1e-12


def test_sign_choice_vectors():
    u, v = kc.sign_choice_vectors(0.3, -0.7)
    assert u[0] * v[1] - v[0] * u[1] == pytest.approx(0.3**2 + 0.7**2)
