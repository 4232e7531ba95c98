import numpy as np
import pytest

from folverify import kernels
from folverify import localmodel as lm
from folverify.kernels import ref

jit = pytest.importorskip("folverify.kernels.jit")


def test_pfaffian_batch_agrees():
    rng = np.random.default_rng(0)
    for n in (2, 4, 6):
        A = rng.normal(size=(200, n, n))
        M = A - np.swapaxes(A, 1, 2)
        a, b = jit.pfaffian_batch(M), ref.pfaffian_batch(M)
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-14)
        np.testing.assert_allclose(a**2, np.linalg.det(M), rtol=1e-9)


def test_pfaffian_batch_handles_exact_zero():
    M = np.zeros((1, 4, 4))
    M[0, 0, 1], M[0, 1, 0] = 1.0, -1.0
    assert jit.pfaffian_batch(M)[0] == 0.0 == ref.pfaffian_batch(M)[0]


def test_rho_tilde_grad_agrees():
    p = lm.ModelParams()
    rng = np.random.default_rng(1)
    Z = rng.normal(size=(1000, 4)) * rng.uniform(0, 0.1, (1000, 1))
    for a, b in zip(jit.rho_tilde_grad(Z, p.K, p.delta), ref.rho_tilde_grad(Z, p.K, p.delta)):
        np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-13)


def _args(kind, p, periodic, horizon, fixed=False, h=1e-3, h_max=0.5):
    return (kind, p, periodic, horizon, 1e-10, h, h_max, fixed)


@pytest.mark.parametrize("fixed", [False, True])
def test_integrate_many_agrees(fixed):
    p = np.array([lm.SQRT2_M1, 0.0, 0.0, 0.0, 0.0, 0.3])
    Y0 = np.random.default_rng(2).uniform(0, 6, (16, 2))
    per = np.array([True, True])
    h = 0.05 if fixed else 1e-3
    A = jit.integrate_many(kernels.TORUS_REPARAM, Y0, p, per, 50.0, 1e-10, h, 0.05 if fixed else 0.5, fixed,
                           -1, 0.0, 0.0, 5.0, 1_000_000)
    B = ref.integrate_many(kernels.TORUS_REPARAM, Y0, p, per, 50.0, 1e-10, h, 0.05 if fixed else 0.5, fixed,
                           -1, 0.0, 0.0, 5.0, 1_000_000)
    np.testing.assert_allclose(A[0], B[0], rtol=1e-9, atol=1e-9)
    np.testing.assert_array_equal(A[4], B[4])
    np.testing.assert_allclose(A[6], B[6], atol=1e-9)


def test_integrate_record_agrees_on_plug_field():
    from folverify.flows import plug_field
    f = plug_field(lm.ModelParams())
    y0 = np.array([0.0, 0.0, 0.95, 0.3])   # t outside the support of psi
    args = (f.kind, y0, f.p, np.array(f.periodic), 8.0, 1e-10, 1e-3, 0.5, False, 3, -1.0, 1.0, 1_000_000)
    a, b = jit.integrate_record(*args), ref.integrate_record(*args)
    assert a[4] == b[4] == 1
    assert a[0][-1] == pytest.approx(0.7, abs=1e-9)
    np.testing.assert_allclose(a[0][-1], b[0][-1], rtol=1e-9)
    np.testing.assert_allclose(a[1][-1], b[1][-1], atol=1e-9)


def test_backend_reports_selection():
    assert kernels.backend() in ("numba", "numpy")
