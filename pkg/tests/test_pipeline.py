import numpy as np
import pytest

from folverify import localmodel as lm
from folverify import pipeline as pl
from folverify.exterior import KForm, coord, standard_symplectic
from folverify.verifier import example_form


@pytest.fixture(scope="module")
def params():
    return lm.ModelParams()


@pytest.fixture(scope="module")
def forms(params):
    return pl.build_two_forms(params)


def cols(P):
    return [P[:, k] for k in range(P.shape[1])]


def test_decompose_reassembles(params):
    d = params.q + 2 * params.n
    om = example_form(params) + KForm(d, 2, {(0, 3): coord(1), (1, 2): 0.5, (4, 5): coord(0) * coord(3)})
    dec = pl.decompose(om, params)
    assert set(dec.f) == {(0, 0), (1, 1), (1, 0)} and set(dec.g) == {(0, 1)}
    rng = np.random.default_rng(0)
    P = rng.uniform(-0.5, 0.5, (50, d))
    np.testing.assert_array_equal(dec.reassemble(params).matrix(cols(P)), om.matrix(cols(P)))


def test_normalization_of_example(params):
    N = pl.normalize_form(example_form(params), params)
    assert N.signs == (1, 1) and N.orientation == 1
    d = params.q + 2 * params.n
    P = np.zeros((1, d))
    np.testing.assert_array_equal(N.omega1.matrix(cols(P)),
                                  standard_symplectic(2, offset=params.q, dim=d).matrix(cols(P)))
    assert N.homotopy(0.0) is N.omega0 and N.homotopy(1.0) is N.omega1


def test_normalization_records_negative_signs(params):
    d = params.q + 2 * params.n
    x, y = pl.x_index, pl.y_index
    om = KForm(d, 2, {(x(params, 0), y(params, 0)): -2.0, (x(params, 1), y(params, 1)): 3.0})
    N = pl.normalize_form(om, params)
    assert N.signs == (-1, 1) and N.orientation == -1
    P = np.zeros((1, d))
    assert N.omega1.matrix(cols(P))[0, x(params, 0), y(params, 0)] == -1.0


def test_dominance_failure_has_witness(params):
    d = params.q + 2 * params.n
    x, y = pl.x_index, pl.y_index
    om = KForm(d, 2, {(x(params, 0), y(params, 0)): 0.1, (x(params, 1), y(params, 1)): 0.1,
                      (x(params, 0), y(params, 1)): 1.0, (x(params, 1), y(params, 0)): 1.0})
    with pytest.raises(pl.DominanceError) as exc:
        pl.normalize_form(om, params)
    assert exc.value.witness is not None


def test_X1_on_core_and_outside_support(params):
    X = pl.build_X1(params)
    np.testing.assert_allclose(X([0.0, 0.0, 0.0, 0.5]), [1.0, params.c, 0.0, 0.0])
    np.testing.assert_array_equal(X([0.0, 0.0, 0.0, 1.5]), [0.0, 0.0, 0.0, 1.0])


def test_beta_examples(params):
    beta = pl.build_beta(params, chart="base")
    Zp = np.array([1.0, params.c, 0.0, 0.0])
    assert beta.coefficients([0, 0, 0, 0.5])[(0,)] * Zp[0] + beta.coefficients([0, 0, 0, 0.5])[(1,)] * Zp[1] \
        == pytest.approx(1.0)
    assert all(v == 0.0 for v in beta.coefficients([0, 0, 0, 0.0]).values())
    const = pl.build_beta(params, mode="constant", chart="base")
    assert const.coefficients([0, 0, 0, 0.0])[(0,)] == pytest.approx(1.0 / (1.0 + params.c**2))


def test_leaf_basis_rho_regime_example(params):
    P = np.zeros((1, params.dim))
    P[0, 3] = 0.5                       # z = (0.5, 0, 0, 0): psi = 0, rho = 1
    P[0, 2] = 0.95                      # outside the t-support of psi
    frames, psi, g = pl.leaf_tangent_basis(params, P, "rho")
    assert psi[0] == 0.0
    np.testing.assert_allclose(g[0], [-4.0, 0, 0, 0])
    np.testing.assert_allclose(frames[0, -1, 3:], [-0.25, 0, 0, 0])
    span = frames[0, :-1, 3:]
    assert np.allclose(span[:, 0], 0.0)
    assert np.linalg.matrix_rank(span[:, 1:]) == 3


def test_leaf_basis_core_lift_and_pushforward(params):
    rng = np.random.default_rng(2)
    P = pl.model_points(params, rng, 300, r_lo=0.01)
    P[0, 2:] = 0.0
    P[0, 3] = 2.0 / 3.0                 # core set
    frames, psi, g = pl.leaf_tangent_basis(params, P)
    assert psi[0] == 1.0
    np.testing.assert_array_equal(frames[0, -1], [1.0, params.c, 0, 0, 0, 0, 0])
    # push forward under id x rho_tilde: kernel vectors map to 0, the lift to X_1
    ds = np.einsum("mkn,mn->mk", frames[:, :, 3:], g)
    assert np.abs(ds[:, :-1]).max() <= 1e-10
    np.testing.assert_allclose(ds[:, -1], 1.0 - psi, atol=1e-10)
    np.testing.assert_allclose(frames[:, -1, 1], params.c * frames[:, -1, 0])
    # frames are orthonormal on the kernel part and oriented
    K = frames[:, :-1, 3:]
    np.testing.assert_allclose(K @ np.swapaxes(K, 1, 2), np.broadcast_to(np.eye(3), (300, 3, 3)), atol=1e-12)
    full = np.concatenate([g[:, None, :], K], axis=1)
    assert np.all(np.linalg.det(full) > 0)


def test_membership_f0_margin_one(params):
    rng = np.random.default_rng(0)
    P = rng.uniform(-0.5, 0.5, (1000, params.q + 2 * params.n))
    r = pl.membership_delta_q(pl.pair_f0(params), P)
    assert r.margin == 1.0 and r.passed


def test_outside_psi_support_omega1pp_is_dalpha(params, forms):
    P = np.zeros((5, params.dim))
    P[:, 3] = np.linspace(0.2, 0.45, 5)      # rho > 1
    np.testing.assert_array_equal(forms.omega1pp.matrix(cols(P)), forms.d_alpha.matrix(cols(P)))


def test_gamma_equals_omega1pp_outside_perturbation(params, forms):
    P = np.zeros((4, params.dim))
    P[:, 6] = [2 * params.delta_bar, params.delta_bar, 0.04, 0.7]
    np.testing.assert_array_equal(forms.gamma.matrix(cols(P)), forms.omega1pp_tilde.matrix(cols(P)))


def test_gamma_minus_dalpha_has_rank_two(params, forms):
    rng = np.random.default_rng(5)
    P = pl.model_points(params, rng, 200, include_origin=True)
    M = forms.gamma.matrix(cols(P)) - forms.d_alpha.matrix(cols(P))
    for k in range(0, 200, 20):
        V = rng.normal(size=(4, params.dim))
        G = V @ M[k] @ V.T
        assert abs(G[0, 1] * G[2, 3] - G[0, 2] * G[1, 3] + G[0, 3] * G[1, 2]) <= 1e-12


def test_nondegeneracy_transfer_where_psi_vanishes(params, forms):
    # psi = 0: gamma on the leaf is dα on the full disc factor spanned by ker dρ and the lift
    P = np.zeros((1, params.dim))
    P[0, 3:] = [0.004, -0.002, 0.001, 0.003]
    pf = pl.leaf_pfaffians(pl.pair_gamma(params, forms), P)[0]
    frames, _, _ = pl.leaf_tangent_basis(params, P)
    from folverify.exterior import pfaffians, restrict_gram
    want = pfaffians(restrict_gram(forms.d_alpha.matrix(cols(P)), frames))[0]
    assert pf == pytest.approx(want, rel=1e-14)


def test_bisection_finds_planted_zero():
    rays = np.linspace(-1, 1, 11)[None, :, None] * np.ones((1, 1, 2))
    fn = lambda X: X[:, 0] - 0.123  # noqa: E731
    mag, pts = pl.bisect_sign_changes(fn, rays, fn(rays.reshape(-1, 2)).reshape(1, -1))
    assert mag.size == 1 and mag[0] < 1e-15 and pts[0, 0] == pytest.approx(0.123)
