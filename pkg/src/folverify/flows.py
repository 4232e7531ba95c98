"""Flows of X_1 and the torus field, rotation numbers, closed-orbit scans, leaf curves."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .exterior import VectorField
from .kernels import ref as _ref

TWO_PI = 2.0 * math.pi


class IntegrationError(RuntimeError):
    def __init__(self, msg, where=None):
        super().__init__(msg)
        self.where = where


@dataclass(frozen=True)
class KernelField:
    """A vector field known to the compiled integrators."""

    kind: int
    p: np.ndarray
    dim: int
    periodic: tuple

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return _ref._rhs(self.kind, np.atleast_2d(x), self.p)[0] if x.ndim == 1 else _ref._rhs(self.kind, x, self.p)


def _pvec(params=None, c=None, amp=0.0, const=None, dim=0):
    if params is not None:
        p = params.kernel_params()
    else:
        p = np.zeros(6 + max(dim, 1) + 1)
        p[0] = c
    p[5] = amp
    if const is not None:
        p[6:6 + len(const)] = const
    return p


def torus_field(c, reparam_amp=0.0):
    """∂_a + c ∂_b, optionally scaled by the speed 1 + amp sin(a)."""
    kind = kernels.TORUS_REPARAM if reparam_amp else kernels.TORUS_LINEAR
    return KernelField(kind, _pvec(c=c, amp=reparam_amp, dim=2), 2, (True, True))


def plug_field(params):
    """X_1 on the plug base (a, b, t..., s)."""
    return KernelField(kernels.PLUG_X1, params.kernel_params(), params.m + 3,
                       (True, True) + (False,) * (params.m + 1))


def leaf_lift_field(params):
    """Lift of X_1 to the model chart along id x rho_tilde: ψZ' ⊕ (1-ψ) g/|g|^2."""
    return KernelField(kernels.LEAF_LIFT, params.kernel_params(), params.dim,
                       (True, True) + (False,) * (params.dim - 2))


def constant_field(v):
    v = np.asarray(v, dtype=float)
    return KernelField(kernels.CONSTANT, _pvec(c=0.0, const=v, dim=len(v)), len(v), (False,) * len(v))


@dataclass
class Trajectory:
    times: np.ndarray
    points: np.ndarray     # unwrapped
    n_steps: int
    n_rejected: int
    max_local_error: float
    status: int            # 0 reached horizon, 1 exited, 2 integrator failure
    exit_time: float | None

    @property
    def end(self):
        return self.points[-1]


@dataclass(frozen=True)
class ExitEvent:
    index: int
    lo: float = -math.inf
    hi: float = math.inf


def integrate(v, x0, horizon, tol=1e-10, exit=None, h0=1e-3, h_max=0.5, fixed=False, max_steps=2_000_000):
    """Adaptive Dormand-Prince 5(4) integration of ``v`` from ``x0``.

    ``v`` is a :class:`KernelField` (compiled path) or any VectorField /
    callable taking an (S, d) array of states.  The trajectory is clipped at
    the first crossing of ``exit`` bounds.
    """
    x0 = np.asarray(x0, dtype=float)
    d = x0.shape[0]
    ei, lo, hi = (exit.index, exit.lo, exit.hi) if exit is not None else (-1, 0.0, 0.0)
    if isinstance(v, KernelField):
        if v.dim != d:
            raise ValueError(f"field has dimension {v.dim}, start point {d}")
        ts, ys, ns, nr, st, me = kernels.integrate_record(
            v.kind, x0, v.p, np.array(v.periodic), float(horizon), tol, h0, h_max, fixed, ei, lo, hi, max_steps)
    else:
        rhs = _wrap_field(v, d)
        (_, _, nsa, nra, sta, mea, _, _), ts, ys = _ref._run(
            rhs, x0[None], None, np.zeros(d, bool), float(horizon), tol, h0, h_max, fixed, ei, lo, hi,
            -1.0, max_steps, True)
        ns, nr, st, me = nsa[0], nra[0], sta[0], mea[0]
    st = int(st)
    if st == 2:
        raise IntegrationError(f"step size underflow or step budget exhausted near t={ts[-1]:.6g}",
                               where=ys[-1].tolist())
    return Trajectory(np.asarray(ts), np.asarray(ys), int(ns), int(nr), float(me), st,
                      float(ts[-1]) if st == 1 else None)


def _wrap_field(v, d):
    if isinstance(v, VectorField):
        return lambda Y: v([Y[:, k] for k in range(d)]).T.reshape(Y.shape)
    return lambda Y: np.asarray(v(Y), dtype=float).reshape(Y.shape)


@dataclass
class RotationEstimate:
    value: float
    error_bound: float
    windings: float


def rotation_number(traj, a_index=0, b_index=1, min_windings=10.0):
    da = traj.points[-1, a_index] - traj.points[0, a_index]
    db = traj.points[-1, b_index] - traj.points[0, b_index]
    w = abs(da) / TWO_PI
    if w <= min_windings:
        raise ValueError(f"insufficient winding: {w:.2f} turns in a (need > {min_windings})")
    # |b - rot * a| stays bounded by one turn for a reparametrized linear flow
    return RotationEstimate(db / da, TWO_PI / abs(da), w)


@dataclass
class OrbitVerdict:
    classification: str   # exits-plug | recurrent-nonclosed | suspected-closed
    min_return: float
    return_time: float | None
    exit_time: float | None


@dataclass
class OrbitScan:
    verdicts: list
    min_return: np.ndarray
    return_time: np.ndarray
    status: np.ndarray

    def count(self, kind):
        return sum(v.classification == kind for v in self.verdicts)

    @property
    def closest(self):
        ok = self.status == 0
        if not ok.any():
            return math.inf
        return float(np.min(self.min_return[ok]))


def closed_orbit_scan(field, seeds, horizon, closure_tol=1e-3, transient=None, exit=None, tol=1e-10,
                      h_max=0.5, max_steps=5_000_000):
    """Integrate every seed and look for returns to the start after a transient."""
    seeds = np.atleast_2d(np.asarray(seeds, dtype=float))
    transient = 0.05 * horizon if transient is None else transient
    ei, lo, hi = (exit.index, exit.lo, exit.hi) if exit is not None else (-1, 0.0, 0.0)
    Yend, tend, ns, nr, st, me, mr, tr = kernels.integrate_many(
        field.kind, seeds, field.p, np.array(field.periodic), float(horizon), tol, 1e-3, h_max, False,
        ei, lo, hi, float(transient), max_steps)
    verdicts = []
    for k in range(len(seeds)):
        if st[k] == 1:
            verdicts.append(OrbitVerdict("exits-plug", float(mr[k]), None, float(tend[k])))
        elif st[k] == 2:
            raise IntegrationError(f"integration failed for seed {k}", where=seeds[k].tolist())
        elif mr[k] < closure_tol and tr[k] > 0.0:
            verdicts.append(OrbitVerdict("suspected-closed", float(mr[k]), float(tr[k]), None))
        else:
            verdicts.append(OrbitVerdict("recurrent-nonclosed", float(mr[k]), None, None))
    return OrbitScan(verdicts, np.asarray(mr), np.asarray(tr), np.asarray(st))


def torus_seeds(n, seed=0):
    rng = np.random.default_rng(seed)
    return rng.uniform(0.0, TWO_PI, size=(n, 2))


# ------------------------------------------------------------------ leaf curves


@dataclass
class LeafCurve:
    times: np.ndarray
    lift: np.ndarray         # model-chart states at checkpoints
    base: np.ndarray         # plug-base states at checkpoints
    s_along: np.ndarray      # rho_tilde of the lifted fiber coordinate
    consistency: float       # max |rho_tilde(z(t)) - s(t)| and torus mismatch


def _rho_tilde_rows(params, Z):
    return kernels.rho_tilde_grad(np.atleast_2d(Z), params.K, params.delta)[0]


def trace_leaf_curve(params, p0, horizon, tol=1e-11, checkpoints=200, h_max=0.05):
    """Follow the lifted X_1 on the model chart and the base flow side by side."""
    p0 = np.asarray(p0, dtype=float)
    lift, base = leaf_lift_field(params), plug_field(params)
    zi, ti = params.z_index, params.t_index
    b0 = np.concatenate([p0[:2], p0[ti], _rho_tilde_rows(params, p0[zi])])
    dt = horizon / checkpoints
    L = [p0.copy()]
    Bs = [b0.copy()]
    times = [0.0]
    yl, yb = p0.copy(), b0.copy()
    for k in range(checkpoints):
        for f, y, store in ((lift, yl, L), (base, yb, Bs)):
            Yend, _, _, _, st, _, _, _ = kernels.integrate_many(
                f.kind, y[None], f.p, np.array(f.periodic), dt, tol, 1e-4, h_max, False, -1, 0.0, 0.0, -1.0,
                5_000_000)
            if st[0] == 2:
                raise IntegrationError("leaf curve integration failed", where=y.tolist())
            store.append(Yend[0].copy())
        yl, yb = L[-1], Bs[-1]
        times.append((k + 1) * dt)
    L, Bs = np.array(L), np.array(Bs)
    s_along = _rho_tilde_rows(params, L[:, zi])
    dev = np.maximum(np.abs(s_along - Bs[:, -1]), np.max(np.abs(L[:, :2] - Bs[:, :2]), axis=1))
    return LeafCurve(np.array(times), L, Bs, s_along, float(dev.max()))


def core_fiber_point(params, a=0.3, b=1.1, direction=None):
    """A model-chart point over the core set psi = 1 (t = 0, rho = 1/2)."""
    N = params.dim
    direction = np.eye(2 * params.n)[0] if direction is None else np.asarray(direction, float)
    z = direction / np.linalg.norm(direction) * (2.0 / 3.0)
    p = np.zeros(N)
    p[0], p[1] = a, b
    p[params.z_index] = z
    return p


# ------------------------------------------------------------------ sign region of d rho(Y)


@dataclass
class SignRegionMap:
    points: np.ndarray
    values: np.ndarray        # d rho_tilde(Y) at each point
    positive: np.ndarray
    fraction_positive: float
    diagonal_prediction: float   # radius below which d rho_bar(Y) > 0 on the diagonal ray
    diagonal_positive: bool


def d_rho_of_Y(Z):
    """d rho(Y) with Y the Liouville field; equals -1/(2|z|)."""
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    r = np.linalg.norm(Z, axis=1)
    g = -Z / (r**3)[:, None]
    return np.sum(g * 0.5 * Z, axis=1)


def d_rho_tilde_of_Y(params, Z):
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    _, g = kernels.rho_tilde_grad(Z, params.K, params.delta)
    return np.sum(g * 0.5 * Z, axis=1)


def sign_region_map(params, Z):
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    vals = d_rho_tilde_of_Y(params, Z)
    pos = vals > 0.0
    n2 = 2 * params.n
    r_star = math.sqrt(n2) / params.K
    # a point on the diagonal ray inside the delta/2 plateau where rho_tilde = rho_bar
    r_probe = min(0.5 * r_star, 0.25 * params.delta)
    probe = np.full((1, n2), r_probe / math.sqrt(n2))
    return SignRegionMap(Z, vals, pos, float(pos.mean()), r_star, bool(d_rho_tilde_of_Y(params, probe)[0] > 0.0))


def radial_grid(params, n_dirs, n_radii, r_max, seed=0, r_min=0.0):
    """Fiber points on random rays: shape (n_dirs, n_radii, 2n); radius 0 included when r_min = 0."""
    rng = np.random.default_rng(seed)
    u = rng.normal(size=(n_dirs, 2 * params.n))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    r = np.linspace(r_min, r_max, n_radii)
    return u[:, None, :] * r[None, :, None], r


__all__ = [
    "KernelField", "Trajectory", "OrbitVerdict", "OrbitScan", "RotationEstimate", "LeafCurve", "SignRegionMap",
    "ExitEvent", "IntegrationError", "integrate", "rotation_number", "closed_orbit_scan", "trace_leaf_curve",
    "sign_region_map", "torus_field", "plug_field", "leaf_lift_field", "constant_field", "torus_seeds",
    "core_fiber_point", "d_rho_of_Y", "d_rho_tilde_of_Y", "radial_grid",
]
