import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from folverify import dual, kernels
from folverify import localmodel as lm


def test_defaults_validate_and_bad_params_are_rejected():
    p = lm.ModelParams()
    assert p.dim == 7 and p.z_index == [3, 4, 5, 6]
    with pytest.raises(lm.ParameterError):
        lm.ModelParams(delta=0.2)          # delta >= 1/K
    with pytest.raises(lm.ParameterError):
        lm.ModelParams(eps=0.2)            # eps >= eps1/3
    with pytest.raises(lm.ParameterError):
        lm.ModelParams(delta_bar=0.03)     # perturbation reaches the shell
    with pytest.raises(lm.ParameterError):
        lm.ModelParams(n=1)


def test_bump_plateaus_are_exact():
    spec = lm.BumpSpec(1.0 / 3.0, 1.0)
    assert lm.bump_profile(spec, 0.2) == (0.0, 0.0)
    assert lm.bump_profile(spec, 1.5) == (1.0, 0.0)
    v, dv = lm.bump_profile(spec, 0.6)
    assert 0.0 < v < 1.0 and dv > 0.0
    with pytest.raises(lm.ParameterError):
        lm.BumpSpec(1.0, 0.5)


@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0))
@settings(max_examples=80, deadline=None)
def test_smoothstep_is_monotone(u, w):
    a, b = sorted((u, w))
    assert lm.smoothstep(a) <= lm.smoothstep(b)


def test_psi_core_value_and_support():
    p = lm.ModelParams()
    assert lm.psi(p, [0.0, 0.0, 0.0, 0.5]) == 1.0
    assert lm.psi(p, [0.0, 0.0, 0.0, 0.0]) == 0.0
    assert lm.psi(p, [0.0, 0.0, 0.0, 1.0]) == 0.0
    assert lm.psi(p, [0.0, 0.0, 0.95, 0.5]) == 0.0
    assert lm.psi(p, [1.0, 2.0, 0.3, 0.5]) == 1.0
    assert 0.0 < lm.psi(p, [0.0, 0.0, 0.0, 0.3]) < 1.0


def test_rho_family_example():
    p = lm.ModelParams()
    f = lm.rho_family(p, [0.5, 0.0, 0.0, 0.0])
    assert f["rho"] == 1.0
    np.testing.assert_allclose(f["d_rho"], [-4.0, 0.0, 0.0, 0.0])
    assert f["rho_tilde"] == f["rho"]
    f0 = lm.rho_family(p, [0.0, 0.0, 0.0, 0.0])
    assert f0["rho"] is None and f0["rho_tilde"] == 0.0
    np.testing.assert_array_equal(f0["d_rho_tilde"], np.ones(4))


def test_rho_tilde_is_regular_in_the_repair_ball():
    p = lm.ModelParams()
    rng = np.random.default_rng(1)
    Z = rng.normal(size=(2000, 4))
    Z *= (p.delta * rng.uniform(0, 1, 2000) ** 0.25 / np.linalg.norm(Z, axis=1))[:, None]
    _, g = kernels.rho_tilde_grad(Z, p.K, p.delta)
    assert np.linalg.norm(g, axis=1).min() > 0.5


@pytest.mark.parametrize("r", [0.0, 0.01, 0.03, 0.04, 0.07, 0.5])
def test_kernel_gradient_matches_forward_ad(r):
    p = lm.ModelParams()
    z = np.array([0.3, -0.5, 0.7, 0.2])
    z = z / np.linalg.norm(z) * r
    f = lm.rho_family(p, z)
    v, g = kernels.rho_tilde_grad(z[None], p.K, p.delta)
    assert v[0] == pytest.approx(f["rho_tilde"], abs=1e-14)
    np.testing.assert_allclose(g[0], f["d_rho_tilde"], rtol=1e-10, atol=1e-10)


def test_named_constants():
    assert lm.NAMED_CONSTANTS["sqrt2-1"] == math.sqrt(2) - 1
    assert lm.ModelParams().c == lm.SQRT2_M1


def test_psi_derivative_vanishes_on_plateau():
    p = lm.ModelParams()
    fld = lm.psi_field(p)
    x = [0.0, 0.0, 0.2, 0.05]
    assert dual.derivative(fld, x, 3) == 0.0
