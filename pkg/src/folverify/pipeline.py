"""Normalization of the 2-form on the product chart and construction of the plug pair.

Two charts appear here:

* the product chart D^q x D^{2n} with coordinates ``(z_1..z_q, x_1, y_1, ..., x_n, y_n)``
  (the leaves of F_0 are the D^{2n} slices);
* the model chart T^2 x D^{q-2} x D^{2n} from :mod:`folverify.localmodel`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import dual, localmodel as lm
from .exterior import (
    ONE, Chart, DomainError, KForm, ScalarField, VectorField, constant, contract, coord,
    pfaffians, restrict_gram, standard_symplectic, wedge,
)
from .kernels import rho_tilde_grad


class DominanceError(ValueError):
    """The diagonal product term does not dominate; carries the witness point."""

    def __init__(self, msg, witness=None):
        super().__init__(msg)
        self.witness = witness


# ------------------------------------------------------------------ product chart


def product_chart(params):
    q, n = params.q, params.n
    names = tuple(f"z{j + 1}" for j in range(q)) + tuple(f"{v}{i + 1}" for i in range(n) for v in ("x", "y"))
    d = q + 2 * n
    return Chart(names, (False,) * d, (-1.0,) * d, (1.0,) * d,
                 ((tuple(range(q)), 1.0), (tuple(range(q, d)), 1.0)))


def x_index(params, i):
    return params.q + 2 * i


def y_index(params, i):
    return params.q + 2 * i + 1


@dataclass
class SplitFormDecomposition:
    """ω = Σ f_ij dx_i∧dy_j + Σ_{i<j} g_ij dx_i∧dx_j + Σ_{i<j} h_ij dy_i∧dy_j + Ω (+ transverse part)."""

    dim: int
    f: dict
    g: dict
    h: dict
    mixed: KForm
    transverse: KForm

    def reassemble(self, params):
        out = self.mixed + self.transverse
        for (i, j), c in self.f.items():
            out = out + KForm(self.dim, 2, {(x_index(params, i), y_index(params, j)): c})
        for (i, j), c in self.g.items():
            out = out + KForm(self.dim, 2, {(x_index(params, i), x_index(params, j)): c})
        for (i, j), c in self.h.items():
            out = out + KForm(self.dim, 2, {(y_index(params, i), y_index(params, j)): c})
        return out


def decompose(omega, params):
    q, n = params.q, params.n
    if omega.degree != 2 or omega.dim != q + 2 * n:
        raise DomainError("decompose() needs a 2-form on the product chart")
    f, g, h = {}, {}, {}
    mixed = KForm(omega.dim, 2)
    transverse = KForm(omega.dim, 2)
    for (a, b), c in omega.coeffs.items():
        if b < q:
            transverse = transverse + KForm(omega.dim, 2, {(a, b): c})
        elif a < q:
            mixed = mixed + KForm(omega.dim, 2, {(a, b): c})
        else:
            ia, ka = divmod(a - q, 2)
            ib, kb = divmod(b - q, 2)
            if ka == 0 and kb == 1:
                f[(ia, ib)] = c
            elif ka == 1 and kb == 0:
                # dy_ia ∧ dx_ib = -dx_ib ∧ dy_ia
                f[(ib, ia)] = -c
            elif ka == 0:
                g[(ia, ib)] = c
            else:
                h[(ia, ib)] = c
    return SplitFormDecomposition(omega.dim, f, g, h, mixed, transverse)


def leaf_pfaffian_f0(omega, params, coords):
    """Pfaffian of ω restricted to the D^{2n} slices (the leaves of F_0)."""
    M = omega.matrix(coords)
    q = params.q
    return pfaffians(M[..., q:, q:])


def _box_bump(params, r0, r1):
    """Smooth function equal to 0 on the (r0, r0)-box and to 1 outside the (r1, r1)-box."""
    q = params.q
    spec = lm.BumpSpec(r0, r1)
    d = params.q + 2 * params.n

    def fn(x):
        sz = lm.bump_sq(spec, lm.sumsq(x[:q]))
        sx = lm.bump_sq(spec, lm.sumsq(x[q:]))
        return 1.0 - (1.0 - sz) * (1.0 - sx)

    return ScalarField(fn, deps=set(range(d)), name=f"box_bump({r0},{r1})")


@dataclass
class Normalization:
    omega0: KForm
    omega_bar: KForm
    omega1: KForm
    signs: tuple
    orientation: int
    decomposition: SplitFormDecomposition
    mix: ScalarField
    sign_mix: ScalarField

    def homotopy(self, t):
        """ω_t: t in [0, 1/2] cuts off cross terms, t in [1/2, 1] snaps f_i to ±1."""
        if t <= 0.0:
            return self.omega0
        if t >= 1.0:
            return self.omega1
        dec = self.decomposition
        n = len(self.signs)
        diag = {i: dec.f[(i, i)] for i in range(n)}
        rest = self.omega0 - _diag_form(self._params, diag)
        if t <= 0.5:
            tau = 2.0 * t
            weight = (1.0 - tau) + tau * self.mix
            return _diag_form(self._params, diag) + rest * weight
        tau = 2.0 * t - 1.0
        target = {i: (ONE - self.sign_mix) * self.signs[i] + self.sign_mix * diag[i] for i in range(n)}
        mixed_diag = {i: diag[i] * (1.0 - tau) + target[i] * tau for i in range(n)}
        return _diag_form(self._params, mixed_diag) + rest * self.mix


def _diag_form(params, coeffs):
    d = params.q + 2 * params.n
    return KForm(d, 2, {(x_index(params, i), y_index(params, i)): c for i, c in coeffs.items()})


def _box_grid(params, radius, npts, rng):
    """Points of the (radius, radius)-box of the product chart, uniformly by factor."""
    q, n = params.q, params.n

    def ball(dim):
        v = rng.normal(size=(npts, dim))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        r = radius * rng.uniform(0.0, 1.0, size=npts) ** (1.0 / dim)
        return v * r[:, None]

    P = np.concatenate([ball(q), ball(2 * n)], axis=1)
    P[0] = 0.0
    return P


def normalize_form(omega0, params, check_points=2000, seed=0):
    """Build ω_1 equal to 0 ⊕ Σ ±dx_i∧dy_i on the ε-box and to ω_0 outside the ε_1-box."""
    n, q = params.n, params.q
    dec = decompose(omega0, params)
    d = q + 2 * n
    origin = [np.zeros(1)] * d
    pf0 = float(leaf_pfaffian_f0(omega0, params, origin)[0])
    if pf0 == 0.0:
        raise DominanceError("leafwise Pfaffian vanishes at the origin", witness=[0.0] * d)
    orientation = 1 if pf0 > 0 else -1
    diag = {}
    for i in range(n):
        diag[i] = dec.f.get((i, i), constant(0.0))
    f_at_0 = [float(np.broadcast_to(dual.real(diag[i](origin)), (1,))[0]) for i in range(n)]
    if any(v == 0.0 for v in f_at_0):
        raise DominanceError("a diagonal coefficient f_i vanishes at the origin", witness=[0.0] * d)
    signs = tuple(1 if v > 0 else -1 for v in f_at_0)

    # dominance of the product term on the eps1-box
    rng = np.random.default_rng(seed)
    P = _box_grid(params, params.eps1, check_points, rng)
    coords = [P[:, k] for k in range(d)]
    pf = leaf_pfaffian_f0(omega0, params, coords)
    A1 = np.ones(len(P))
    for i in range(n):
        A1 = A1 * np.broadcast_to(dual.real(diag[i](coords)), (len(P),))
    bad = ~((orientation * A1 > 0) & (orientation * A1 > np.abs(pf - A1)) & (orientation * pf > 0))
    if bad.any():
        k = int(np.argmax(bad))
        raise DominanceError("product term f_1...f_n is not dominant on the eps1-box", witness=P[k].tolist())
    # the diagonal signs must be constant on the eps1/3-box, where cross terms are gone
    P3 = _box_grid(params, params.eps1 / 3.0, check_points, rng)
    coords3 = [P3[:, k] for k in range(d)]
    for i in range(n):
        v = np.broadcast_to(dual.real(diag[i](coords3)), (len(P3),))
        if np.any(np.sign(v) != signs[i]):
            k = int(np.argmax(np.sign(v) != signs[i]))
            raise DominanceError(f"f_{i + 1} changes sign on the eps1/3-box", witness=P3[k].tolist())

    mix = _box_bump(params, params.eps1 / 3.0, params.eps1)
    sign_mix = _box_bump(params, params.eps, params.eps1 / 3.0)
    rest = omega0 - _diag_form(params, diag)
    omega_bar = _diag_form(params, diag) + rest * mix
    target = {i: (ONE - sign_mix) * float(signs[i]) + sign_mix * diag[i] for i in range(n)}
    omega1 = _diag_form(params, target) + rest * mix
    norm = Normalization(omega0, omega_bar, omega1, signs, orientation, dec, mix, sign_mix)
    norm._params = params
    return norm


# ------------------------------------------------------------------ plug construction


def torus_direction(params):
    return np.array([1.0, params.c])


def build_X1(params):
    """X_1 = (1 - psi) ∂_s + psi Z' on the plug base; extends by ∂_s for s > 1."""
    psi = lm.psi_field(params)
    comps = [psi, psi * params.c] + [constant(0.0)] * params.m + [ONE - psi]
    return VectorField(comps)


def liouville_field(params, perturbation=None):
    """Y = ½ Σ (x_i ∂x_i + y_i ∂y_i) on the model chart, optionally plus ½ f ∂y_2."""
    N = params.dim
    comps = [constant(0.0)] * N
    for k in params.z_index:
        comps[k] = coord(k) * 0.5
    if perturbation is not None:
        k = params.z_index[3]
        comps[k] = comps[k] + perturbation * 0.5
    return VectorField(comps)


def standard_form(params, signs=None):
    return standard_symplectic(params.n, offset=2 + params.m, dim=params.dim, signs=signs)


def build_alpha(params, signs=None):
    Y = liouville_field(params)
    return Y, contract(Y, standard_form(params, signs))


def build_beta(params, mode="psi_mu", chart="model", submersion="rho_tilde"):
    """β = psi μ with μ(Z) = 1 and μ = 0 on Z^⊥ and on the disc directions.

    ``mode="constant"`` gives β = μ; ``chart="base"`` builds β on the plug base.
    """
    cc = params.c
    mu = np.array([1.0, cc]) / (1.0 + cc * cc)
    if chart == "base":
        dim = params.m + 3
        psi = lm.psi_field(params)
    else:
        dim = params.dim
        psi = lm.psi_on_model(params, submersion)
    weight = ONE if mode == "constant" else psi
    if mode not in ("psi_mu", "constant"):
        raise ValueError(f"unknown beta mode {mode!r}")
    return KForm(dim, 1, {(0,): weight * mu[0], (1,): weight * mu[1]})


def perturbation_field(params):
    """f = eta * bump on the delta_bar-ball; f(0) = eta."""
    spec = lm.BumpSpec(0.0, params.delta_bar, one_inside=True)
    zi = params.z_index
    return ScalarField(lambda x: params.eta * lm.bump_sq(spec, lm.sumsq([x[i] for i in zi])),
                       deps=set(zi), name="f")


@dataclass
class TwoForms:
    alpha: KForm
    alpha_tilde: KForm
    d_alpha: KForm
    beta_rho: KForm
    beta_rho_tilde: KForm
    omega1pp: KForm          # β∘ρ with α: the pair (F''_1, ω''_1) away from z = 0
    omega1pp_tilde: KForm    # same formula with β∘ρ_tilde (compared against γ)
    gamma: KForm
    order: str
    signs: tuple


def _beta_alpha(beta, alpha, order):
    if order == "beta_alpha":
        return wedge(beta, alpha)
    if order == "alpha_beta":
        return wedge(alpha, beta)
    raise ValueError(f"unknown wedge order {order!r}")


def build_two_forms(params, signs=None, order="alpha_beta", beta_mode="psi_mu", gamma_exact="dalpha",
                    perturbed=True):
    from .kernelcalc import perturb_alpha

    signs = tuple(signs) if signs is not None else (1,) * params.n
    _, alpha = build_alpha(params, signs)
    alpha_t = perturb_alpha(params, signs).alpha_tilde if perturbed else alpha
    dalpha = alpha.d()
    b_rho = build_beta(params, beta_mode, submersion="rho")
    b_rt = build_beta(params, beta_mode, submersion="rho_tilde")
    om = _beta_alpha(b_rho, alpha, order) + dalpha
    om_t = _beta_alpha(b_rt, alpha, order) + dalpha
    exact = dalpha if gamma_exact == "dalpha" else alpha_t.d()
    gamma = _beta_alpha(b_rt, alpha_t, order) + exact
    return TwoForms(alpha, alpha_t, dalpha, b_rho, b_rt, om, om_t, gamma, order, signs)


# ------------------------------------------------------------------ leaf tangents


def _householder_complement(g):
    """Oriented orthonormal basis of g^⊥ for each row of g (shape (M, k))."""
    M, k = g.shape
    gh = g / np.linalg.norm(g, axis=1, keepdims=True)
    s = np.where(gh[:, 0] >= 0.0, 1.0, -1.0)
    v = gh.copy()
    v[:, 0] += s
    vv = np.sum(v * v, axis=1)
    H = np.eye(k)[None] - 2.0 * v[:, :, None] * v[:, None, :] / vv[:, None, None]
    basis = np.swapaxes(H[:, :, 1:], 1, 2)  # rows: H e_2 .. H e_k
    # det[gh, H e_2, ...] = s; make every frame positively oriented
    basis[:, -1] *= s[:, None]
    return basis


def submersion_values(params, Z, submersion="rho_tilde"):
    """Values and gradients of the fiber submersion at fiber points Z (M, 2n)."""
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    if submersion == "rho_tilde":
        return rho_tilde_grad(Z, params.K, params.delta)
    r = np.linalg.norm(Z, axis=1)
    if np.any(r == 0.0):
        raise DomainError("rho is undefined at z = 0")
    return 1.0 / r - 1.0, -Z / (r**3)[:, None]


def leaf_tangent_basis(params, P, submersion="rho_tilde"):
    """Leaf tangent frames of (id x submersion)^{-1} of the X_1 foliation.

    ``P`` has shape (M, N) on the model chart.  Returns (frames, psi, grad):
    frames has shape (M, 2n, N): 2n-1 oriented orthonormal vectors spanning
    ker d(submersion) in the disc factor, then the lift psi Z' ⊕ (1-psi) g/|g|^2.
    """
    P = np.atleast_2d(np.asarray(P, dtype=float))
    M, N = P.shape
    ti, zi = params.t_index, params.z_index
    s, g = submersion_values(params, P[:, zi], submersion)
    t2 = np.sum(P[:, ti] ** 2, axis=1)
    psi = np.broadcast_to(np.asarray(lm.psi_value(t2, s, params.psi_margin), dtype=float), (M,))
    frames = np.zeros((M, 2 * params.n, N))
    frames[:, :-1, zi[0]:zi[-1] + 1] = _householder_complement(g)
    g2 = np.sum(g * g, axis=1)
    frames[:, -1, 0] = psi
    frames[:, -1, 1] = psi * params.c
    frames[:, -1, zi[0]:zi[-1] + 1] = ((1.0 - psi) / g2)[:, None] * g
    return frames, psi, g


def leaf_tangent_basis_f0(params, P):
    """Coordinate frame of the D^{2n} slices of the product chart."""
    P = np.atleast_2d(np.asarray(P, dtype=float))
    M, N = P.shape
    frames = np.zeros((M, 2 * params.n, N))
    for i in range(2 * params.n):
        frames[:, i, params.q + i] = 1.0
    return frames


def model_f0_basis(params, P):
    """Disc-factor coordinate frame on the model chart (the foliation F'_1)."""
    P = np.atleast_2d(np.asarray(P, dtype=float))
    frames = np.zeros((P.shape[0], 2 * params.n, P.shape[1]))
    for i, k in enumerate(params.z_index):
        frames[:, i, k] = 1.0
    return frames


# ------------------------------------------------------------------ membership in Δ_q


@dataclass
class FoliatedPair:
    name: str
    chart: Chart
    form: KForm
    basis: object  # callable P -> (M, 2n, N)


@dataclass
class MembershipResult:
    pfaffians: np.ndarray
    margin: float
    witness: list
    passed: bool
    tol: float
    extra: dict = field(default_factory=dict)


def leaf_pfaffians(pair, P):
    P = np.atleast_2d(np.asarray(P, dtype=float))
    frames = pair.basis(P)
    M = pair.form.matrix([P[:, k] for k in range(P.shape[1])])
    return pfaffians(restrict_gram(M, frames))


def membership_delta_q(pair, P, tol=1e-9):
    P = np.atleast_2d(np.asarray(P, dtype=float))
    pf = leaf_pfaffians(pair, P)
    k = int(np.argmin(np.abs(pf)))
    margin = float(abs(pf[k]))
    return MembershipResult(pf, margin, P[k].tolist(), bool(margin > tol), tol)


def bisect_sign_changes(fn, rays, values, iters=60):
    """Locate zeros of ``fn`` between consecutive ray samples of opposite sign.

    ``rays`` has shape (R, S, N) with samples ordered along each ray and
    ``values`` = fn on them, shape (R, S).  ``fn`` maps (M, N) points to M
    values.  All brackets are refined together; returns (|fn|, points) at the
    bracket midpoints, empty arrays when there is no sign change.
    """
    sg = np.sign(values)
    r, j = np.nonzero(sg[:, :-1] * sg[:, 1:] < 0)
    N = rays.shape[-1]
    if r.size == 0:
        return np.zeros(0), np.zeros((0, N))
    lo, hi = rays[r, j].copy(), rays[r, j + 1].copy()
    slo = sg[r, j]
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        sm = np.sign(fn(mid))
        same = (sm == slo)[:, None]
        lo = np.where(same, mid, lo)
        hi = np.where(same, hi, mid)
    mid = 0.5 * (lo + hi)
    return np.abs(fn(mid)), mid


def pair_f0(params, standard=True, omega=None):
    chart = product_chart(params)
    if omega is None:
        omega = standard_symplectic(params.n, offset=params.q, dim=params.q + 2 * params.n)
    return FoliatedPair("F0", chart, omega, lambda P: leaf_tangent_basis_f0(params, P))


def pair_f1pp(params, forms):
    return FoliatedPair("F1''", params.model_chart(), forms.omega1pp,
                        lambda P: leaf_tangent_basis(params, P, "rho")[0])


def pair_gamma(params, forms):
    return FoliatedPair("G", params.model_chart(), forms.gamma,
                        lambda P: leaf_tangent_basis(params, P, "rho_tilde")[0])


def model_points(params, rng, npts, r_lo=0.0, r_hi=0.999, t_max=0.999, include_origin=False):
    """Random model-chart points with |z| in [r_lo, r_hi]."""
    N, m, n2 = params.dim, params.m, 2 * params.n
    P = np.zeros((npts, N))
    P[:, 0:2] = rng.uniform(0.0, 2 * math.pi, size=(npts, 2))
    tv = rng.normal(size=(npts, m))
    tv /= np.linalg.norm(tv, axis=1, keepdims=True)
    P[:, 2:2 + m] = tv * (t_max * rng.uniform(0, 1, npts) ** (1.0 / m))[:, None]
    zv = rng.normal(size=(npts, n2))
    zv /= np.linalg.norm(zv, axis=1, keepdims=True)
    r = rng.uniform(r_lo, r_hi, npts)
    P[:, 2 + m:] = zv * r[:, None]
    if include_origin:
        P[0, 2 + m:] = 0.0
    return P
