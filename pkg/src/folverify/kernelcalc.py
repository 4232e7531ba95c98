"""Linear algebra of H_1 ∩ Ker α at n = 2 and the perturbation of α near z = 0.

Vectors in the disc factor are written (a_1, b_1, a_2, b_2) in the basis
(∂x_1, ∂y_1, ∂x_2, ∂y_2).  H_1 is cut out by the differential of rho_bar
with frozen ("barred") coefficients; Ker α by the unbarred point z.
Every function accepts numpy arrays and broadcasts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import dual, localmodel as lm
from .exterior import contract
from .kernels import rho_tilde_grad
from .pipeline import liouville_field, perturbation_field, standard_form


class DegenerateSystem(ValueError):
    def __init__(self, msg, D=None, witness=None):
        super().__init__(msg)
        self.D = D
        self.witness = witness


class PerturbationError(ValueError):
    pass


@dataclass
class HyperplaneData:
    z: np.ndarray      # (..., 4) point (x1, y1, x2, y2)
    zbar: np.ndarray   # (..., 4) frozen H_1 coefficients
    K: float | np.ndarray
    R: float | np.ndarray

    @classmethod
    def at(cls, z, K, R, zbar=None):
        z = np.asarray(z, dtype=float)
        return cls(z, z if zbar is None else np.asarray(zbar, dtype=float), K, R)

    @property
    def normal(self):
        """Coefficient row of the H_1 equation: (1 - K zbar_i)."""
        return 1.0 - np.asarray(self.K)[..., None] * self.zbar

    @property
    def kernel_row(self):
        x1, y1, x2, y2 = np.moveaxis(self.z, -1, 0)
        return np.stack([-y1, x1, -y2, x2], axis=-1)

    @property
    def D(self):
        p = self.normal
        x2, y2 = self.z[..., 2], self.z[..., 3]
        return y2 * p[..., 3] + x2 * p[..., 2]

    def tolerance(self):
        return 1e-6 * (1.0 + np.linalg.norm(self.z, axis=-1)) * (1.0 + np.abs(self.K))


@dataclass
class KernelSolution:
    a1: np.ndarray
    b1: np.ndarray
    a2: np.ndarray
    b2: np.ndarray
    residual_h1: np.ndarray
    residual_ker: np.ndarray
    closed_form: np.ndarray   # per instance: True where the closed form was used

    def vector(self):
        return np.stack([self.a1, self.b1, self.a2, self.b2], axis=-1)


def residuals(h, a1, b1, a2, b2):
    v = np.stack(np.broadcast_arrays(a1, b1, a2, b2), axis=-1)
    r_h = np.sum(h.normal * v, axis=-1) - h.R
    r_k = np.sum(h.kernel_row * v, axis=-1)
    return r_h, r_k


def _closed(h, a1, b1):
    x1, y1, x2, y2 = np.moveaxis(h.z, -1, 0)
    p = h.normal
    px1, py1, px2, py2 = np.moveaxis(p, -1, 0)
    D = h.D
    b2 = (y2 * h.R - (y2 * px1 - y1 * px2) * a1 - (y2 * py1 + x1 * px2) * b1) / D
    a2 = (x2 * h.R - (x2 * px1 + y1 * py2) * a1 - (x2 * py1 - x1 * py2) * b1) / D
    return a2, b2


def solve_numeric(h, a1, b1):
    """Pivoted 2x2 solve for (a_2, b_2); the oracle for the closed form."""
    a1, b1 = np.broadcast_arrays(np.asarray(a1, float), np.asarray(b1, float))
    p, k = h.normal, h.kernel_row
    A = np.stack([np.stack([p[..., 2], p[..., 3]], -1), np.stack([k[..., 2], k[..., 3]], -1)], -2)
    rhs = np.stack([h.R - p[..., 0] * a1 - p[..., 1] * b1, -k[..., 0] * a1 - k[..., 1] * b1], -1)
    A, rhs = np.broadcast_arrays(A, rhs[..., None])
    sol = np.linalg.solve(A, rhs)[..., 0]
    return sol[..., 0], sol[..., 1]


def solve_closed_form(h, a1, b1, tol=None, strict=False):
    a1 = np.asarray(a1, dtype=float)
    b1 = np.asarray(b1, dtype=float)
    D = h.D
    tol = h.tolerance() if tol is None else tol
    ok = np.abs(D) > tol
    if strict and not np.all(ok):
        k = int(np.argmin(np.abs(np.atleast_1d(D))))
        raise DegenerateSystem(f"denominator D = {np.atleast_1d(D)[k]:.3e} is below tolerance", D=D,
                               witness=np.atleast_2d(h.z)[k].tolist())
    with np.errstate(divide="ignore", invalid="ignore"):
        a2, b2 = _closed(h, a1, b1)
    if not np.all(ok):
        try:
            na2, nb2 = solve_numeric(h, a1, b1)
        except np.linalg.LinAlgError as exc:
            raise DegenerateSystem("H_1 ∩ Ker α is not a graph over (a_1, b_1)", D=D) from exc
        a2 = np.where(ok, a2, na2)
        b2 = np.where(ok, b2, nb2)
    r_h, r_k = residuals(h, a1, b1, a2, b2)
    a1, b1, a2, b2, ok = np.broadcast_arrays(a1, b1, a2, b2, ok)
    return KernelSolution(a1, b1, a2, b2, r_h, r_k, ok)


def pairing_value(h, u, v):
    """The displayed expression for a_2 b_2' - a_2' b_2 (claim under test)."""
    a1, b1 = u
    c1, d1 = v  # (a_1', b_1')
    x1, y1, x2, y2 = np.moveaxis(h.z, -1, 0)
    px1, py1, px2, py2 = np.moveaxis(h.normal, -1, 0)
    R = h.R
    t1 = x2 * y2 * px1 - x2 * y1 * px2 + x2 * y2 * px1 - y1 * y2 * py2
    t2 = x2 * y2 * py1 + x1 * x2 * px2 + x2 * y2 * py1 - x1 * y2 * py2
    t3 = (x2 * px1 - y1 * py2) * (y2 * py1 + x1 * px2) - (x2 * py1 + x1 * py2) * (y2 * px1 - y1 * px2)
    return (R * (c1 - a1) * t1 + R * (d1 - b1) * t2 + (a1 * d1 - c1 * b1) * t3) / h.D**2


def pairing_recomputed(h, u, v):
    """a_2 b_2' - a_2' b_2 from the solved kernel vectors."""
    s = solve_closed_form(h, *u)
    t = solve_closed_form(h, *v)
    return s.a2 * t.b2 - t.a2 * s.b2


def full_pairing(h, u, v):
    """dα on the two solved vectors: (a_1 b_1' - a_1' b_1) + (a_2 b_2' - a_2' b_2)."""
    s = solve_closed_form(h, *u)
    t = solve_closed_form(h, *v)
    return (s.a1 * t.b1 - t.a1 * s.b1) + (s.a2 * t.b2 - t.a2 * s.b2)


@dataclass
class PairingCheck:
    max_rel_discrepancy: float
    witness: list | None
    discrepant: bool


def check_pairing_display(h, u, v, rel_tol=1e-8):
    shown = np.atleast_1d(pairing_value(h, u, v))
    true = np.atleast_1d(pairing_recomputed(h, u, v))
    rel = np.abs(shown - true) / np.maximum(1.0, np.abs(true))
    k = int(np.argmax(rel))
    bad = bool(rel[k] > rel_tol)
    wit = None
    if bad:
        z = np.atleast_2d(h.z)
        wit = {"z": z[min(k, len(z) - 1)].tolist(), "display": float(shown[k]), "recomputed": float(true[k])}
    return PairingCheck(float(rel[k]), wit, bad)


# ------------------------------------------------------------------ perturbation


@dataclass
class Perturbation:
    alpha: object
    alpha_tilde: object
    Y: object
    Y_tilde: object
    f: object


def perturb_alpha(params, signs=None):
    """α_tilde = i_{Y_tilde} ω_std with Y_tilde = Y + ½ f ∂y_2."""
    if params.n != 2:
        raise lm.ParameterError("the perturbation near z = 0 is implemented for n = 2")
    omega = standard_form(params, signs)
    f = perturbation_field(params)
    Y = liouville_field(params)
    Yt = liouville_field(params, perturbation=f)
    return Perturbation(contract(Y, omega), contract(Yt, omega), Y, Yt, f)


def y_tilde_values(params, Z):
    """Disc components of Y_tilde at fiber points Z (M, 4)."""
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    spec = lm.BumpSpec(0.0, params.delta_bar, one_inside=True)
    f = params.eta * np.asarray(dual.real(lm.bump_sq(spec, np.sum(Z * Z, axis=1))), dtype=float)
    out = 0.5 * Z
    out[:, 3] += 0.5 * f
    return out


def transversality_functional(params, Z, perturbed=True):
    """d rho_tilde(Y_tilde) - (1 - psi) at fiber points (t = 0; Y_tilde in H_1 iff this is 0)."""
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    s, g = rho_tilde_grad(Z, params.K, params.delta)
    Yv = y_tilde_values(params, Z) if perturbed else 0.5 * Z
    psi = np.asarray(lm.psi_value(0.0, s, params.psi_margin), dtype=float)
    return np.sum(g * Yv, axis=1) - (1.0 - psi)


def check_perturbation(params, npts=10_000, seed=0, min_gap=0.5):
    """Y_tilde stays off H_1 on the delta_bar-ball (where the perturbation lives)."""
    rng = np.random.default_rng(seed)
    Z = _ball(rng, npts, params.delta_bar)
    val = transversality_functional(params, Z)
    k = int(np.argmin(np.abs(val)))
    if abs(val[k]) < min_gap:
        raise PerturbationError(
            f"Y_tilde comes within {abs(val[k]):.3e} of H_1 at z={Z[k].tolist()}; use a smaller eta")
    return float(abs(val[k]))


def _ball(rng, npts, radius, dim=4):
    v = rng.normal(size=(npts, dim))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return v * (radius * rng.uniform(0.0, 1.0, npts) ** (1.0 / dim))[:, None]


@dataclass
class OriginReport:
    margin: float
    witness: list
    margins: np.ndarray
    null_dims: np.ndarray
    particular_residual: float
    passed: bool


def alpha_covectors(params, Z, perturbed=True, signs=None):
    """α (or α_tilde) at fiber points as rows: α(v) = ω_std(Y, v)."""
    Yv = y_tilde_values(params, Z) if perturbed else 0.5 * np.atleast_2d(Z)
    sg = np.ones(2) if signs is None else np.asarray(signs, float)
    out = np.empty_like(Yv)
    out[:, 0] = -sg[0] * Yv[:, 1]
    out[:, 1] = sg[0] * Yv[:, 0]
    out[:, 2] = -sg[1] * Yv[:, 3]
    out[:, 3] = sg[1] * Yv[:, 2]
    return out


def nondegeneracy_near_origin(params, Z, perturbed=True, tol=1e-9, rank_tol=1e-12, signs=None):
    """dα restricted to the 2-plane H_1(z) ∩ Ker α_tilde_z for each fiber point z."""
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    s, g = rho_tilde_grad(Z, params.K, params.delta)
    psi = np.asarray(lm.psi_value(0.0, s, params.psi_margin), dtype=float) * np.ones(len(Z))
    A = np.stack([g, alpha_covectors(params, Z, perturbed, signs)], axis=1)  # (M, 2, 4)
    U, S, Vt = np.linalg.svd(A)
    scale = np.maximum(S[:, :1], 1.0)
    rank = np.sum(S > rank_tol * scale, axis=1)
    null_dims = 4 - rank
    # particular solution of dρ(A) = 1 - psi, α(A) = 0
    rhs = np.stack([1.0 - psi, np.zeros(len(Z))], axis=1)
    part = np.einsum("mji,mj->mi", Vt[:, :2], np.einsum("mji,mj->mi", U, rhs) / np.where(S > 0, S, 1.0))
    resid = np.abs(np.einsum("mij,mj->mi", A, part) - rhs).max(axis=1)
    resid = np.where(rank == 2, resid, 0.0)
    u, w = Vt[:, 2], Vt[:, 3]
    sg = np.ones(2) if signs is None else np.asarray(signs, float)
    om = sg[0] * (u[:, 0] * w[:, 1] - u[:, 1] * w[:, 0]) + sg[1] * (u[:, 2] * w[:, 3] - u[:, 3] * w[:, 2])
    margins = np.where(null_dims == 2, np.abs(om), 0.0)
    k = int(np.argmin(margins))
    return OriginReport(float(margins[k]), Z[k].tolist(), margins, null_dims, float(resid.max()),
                        bool(margins[k] > tol))


def sign_choice_vectors(a1, b1):
    """The pair (a_1, b_1), (-b_1, a_1) for which a_1 b_1' - a_1' b_1 = a_1^2 + b_1^2."""
    return (a1, b1), (-b1, a1)
