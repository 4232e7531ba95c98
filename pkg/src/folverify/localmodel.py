"""Domains, bump functions, the plug function psi and the submersions rho, rho_bar, rho_tilde.

Coordinates on the model chart T^2 x D^{q-2} x D^{2n} are ordered
``(a, b, t_1..t_{q-2}, x_1, y_1, ..., x_n, y_n)``; on the plug base
T^2 x D^{q-2} x [0, inf) they are ``(a, b, t_1..t_{q-2}, s)``.

All scalar helpers accept floats, arrays or dual numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace

import numpy as np

from . import dual
from .exterior import Chart, ScalarField

SQRT2_M1 = math.sqrt(2.0) - 1.0

NAMED_CONSTANTS = {
    "sqrt2-1": SQRT2_M1,
    "pi-3": math.pi - 3.0,
    "golden-1": (math.sqrt(5.0) - 1.0) / 2.0,
}


class ParameterError(ValueError):
    pass


@dataclass(frozen=True)
class ModelParams:
    n: int = 2
    q: int = 3
    eps: float = 0.09
    eps1: float = 0.3
    delta: float = 0.05
    delta_bar: float = 0.005
    K: float = 10.0
    c: float = SQRT2_M1
    eta: float = 0.0005
    psi_margin: float = 0.1

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.n < 2:
            raise ParameterError(f"n must be >= 2, got {self.n}")
        if self.q < 3:
            raise ParameterError(f"q must be >= 3, got {self.q}")
        if not 0.0 < self.eps < self.eps1 / 3.0:
            raise ParameterError(f"need 0 < eps < eps1/3 (eps={self.eps}, eps1={self.eps1})")
        if self.eps1 >= 1.0:
            raise ParameterError("eps1 must be < 1 (box inside the unit discs)")
        if self.K <= 0.0:
            raise ParameterError("K must be positive")
        if not 0.0 < self.delta < 1.0 / self.K:
            raise ParameterError(f"need 0 < delta < 1/K (delta={self.delta}, 1/K={1.0 / self.K})")
        # the perturbation has to sit inside the plateau of the origin repair
        if not 0.0 < self.delta_bar < self.delta / 2.0:
            raise ParameterError(f"need 0 < delta_bar < delta/2 (delta_bar={self.delta_bar})")
        if self.eta <= 0.0:
            raise ParameterError("eta must be positive")
        if not 0.0 < self.psi_margin < 0.5:
            raise ParameterError("psi_margin must lie in (0, 1/2)")

    def with_(self, **kw):
        return replace(self, **kw)

    @classmethod
    def keys(cls):
        return [f.name for f in fields(cls)]

    # layout ------------------------------------------------------------------
    @property
    def m(self):
        return self.q - 2

    @property
    def dim(self):
        return self.q + 2 * self.n

    @property
    def t_index(self):
        return list(range(2, 2 + self.m))

    @property
    def z_index(self):
        return list(range(2 + self.m, self.dim))

    def model_chart(self):
        names = ("a", "b") + tuple(f"t{i + 1}" for i in range(self.m)) + tuple(
            f"{v}{i + 1}" for i in range(self.n) for v in ("x", "y"))
        periodic = (True, True) + (False,) * (self.dim - 2)
        lo = (0.0, 0.0) + (-1.0,) * (self.dim - 2)
        hi = (2 * math.pi, 2 * math.pi) + (1.0,) * (self.dim - 2)
        return Chart(names, periodic, lo, hi, ((tuple(self.t_index), 1.0), (tuple(self.z_index), 1.0)))

    def base_chart(self, s_max=math.inf):
        d = self.m + 3
        names = ("a", "b") + tuple(f"t{i + 1}" for i in range(self.m)) + ("s",)
        periodic = (True, True) + (False,) * (d - 2)
        lo = (0.0, 0.0) + (-1.0,) * self.m + (0.0,)
        hi = (2 * math.pi, 2 * math.pi) + (1.0,) * self.m + (s_max,)
        return Chart(names, periodic, lo, hi, ((tuple(self.t_index), 1.0),))

    def kernel_params(self):
        """Flat parameter vector understood by :mod:`folverify.kernels`."""
        p = np.zeros(6 + self.dim + 1)
        p[:6] = [self.c, self.psi_margin, self.K, self.delta, self.m, 0.0]
        return p


# ------------------------------------------------------------------ bumps


def mollifier(u):
    """exp(-1/u) for u > 0, exactly 0 otherwise."""
    r = dual.real(u)
    pos = r > 0.0
    safe = dual.where(pos, u, 1.0)
    return dual.where(pos, dual.exp(-1.0 * dual.reciprocal(safe)), 0.0)


def smoothstep(u):
    """C-infinity step: exactly 0 for u <= 0, exactly 1 for u >= 1, monotone between."""
    a = mollifier(u)
    b = mollifier(1.0 - u)
    return a / (a + b)


@dataclass(frozen=True)
class BumpSpec:
    r0: float
    r1: float
    one_inside: bool = False

    def __post_init__(self):
        if not 0.0 <= self.r0 < self.r1:
            raise ParameterError(f"bump radii must satisfy 0 <= r0 < r1, got {self.r0}, {self.r1}")


def bump_sq(spec, r2):
    """Bump as a function of the squared radius (smooth at the origin)."""
    u = (r2 - spec.r0 * spec.r0) * (1.0 / (spec.r1 * spec.r1 - spec.r0 * spec.r0))
    s = smoothstep(u)
    return 1.0 - s if spec.one_inside else s


def bump_profile(spec, r):
    """Bump value and its radial derivative at radius ``r`` >= 0."""
    if r < 0:
        raise ParameterError("radius must be non-negative")
    tag = dual.new_tag()
    out = bump_sq(spec, dual.Dual(float(r), 1.0, tag) ** 2)
    if isinstance(out, dual.Dual) and out.tag == tag:
        return float(dual.real(out.re)), float(dual.real(out.eps))
    return float(dual.real(out)), 0.0


def sumsq(xs):
    total = 0.0
    for x in xs:
        total = total + x * x
    return total


# ------------------------------------------------------------------ plug function


@dataclass(frozen=True)
class PlugGeometry:
    """psi = g(|t|) h(s): g == 1 on |t| <= 1/2, h peaks at exactly 1 only at s = 1/2."""

    margin: float = 0.1
    s_range: tuple = field(default=(0.0, 1.0))

    @property
    def t_bump(self):
        return BumpSpec(0.5, 1.0 - self.margin, one_inside=True)


def psi_value(t2, s, margin):
    g = bump_sq(BumpSpec(0.5, 1.0 - margin, one_inside=True), t2)
    u = (s - 0.5) * (1.0 / (0.5 - margin))
    v = 1.0 - u * u
    pos = dual.real(v) > 0.0
    safe = dual.where(pos, v, 1.0)
    h = dual.where(pos, dual.exp(1.0 - dual.reciprocal(safe)), 0.0)
    return g * h


def psi(params, p):
    """psi at a point (a, b, t..., s) of the plug base."""
    p = list(p)
    return psi_value(sumsq(p[2:2 + params.m]), p[2 + params.m], params.psi_margin)


def psi_field(params):
    """psi as a field on the plug base chart."""
    m = params.m
    return ScalarField(lambda x: psi_value(sumsq(x[2:2 + m]), x[2 + m], params.psi_margin),
                       deps=set(range(2, 3 + m)), name="psi")


# ------------------------------------------------------------------ submersions


def rho(z):
    r = dual.sqrt(sumsq(z))
    return dual.reciprocal(r) - 1.0


def rho_bar(z, K):
    total = 0.0
    for v in z:
        total = total + v
    return -0.5 * K * sumsq(z) + total


def repair_bump(params):
    """B: 1 on the delta/2-ball, 0 outside the delta-ball."""
    return BumpSpec(params.delta / 2.0, params.delta, one_inside=True)


def rho_tilde(z, params):
    r2 = sumsq(z)
    B = bump_sq(repair_bump(params), r2)
    Br = dual.real(B)
    inner = np.asarray(Br) == 1.0
    # rho is singular at the origin; it only enters where B < 1
    r = dual.sqrt(dual.where(inner, 1.0, r2))
    rh = dual.reciprocal(r) - 1.0
    rb = rho_bar(z, params.K)
    return dual.where(inner, rb, B * rb + (1.0 - B) * rh)


def _grad(fn, z):
    z = list(z)
    return np.array([float(dual.real(dual.derivative(fn, z, i))) for i in range(len(z))])


def rho_family(params, z):
    """Values and covectors of rho, rho_bar and rho_tilde at a fiber point ``z``."""
    z = [float(v) for v in z]
    if len(z) != 2 * params.n:
        raise ParameterError(f"expected {2 * params.n} fiber coordinates")
    out = {
        "rho_bar": float(rho_bar(z, params.K)),
        "d_rho_bar": _grad(lambda w: rho_bar(w, params.K), z),
        "rho_tilde": float(dual.real(rho_tilde(z, params))),
        "d_rho_tilde": _grad(lambda w: rho_tilde(w, params), z),
    }
    if sumsq(z) > 0.0:
        out["rho"] = float(rho(z))
        out["d_rho"] = _grad(rho, z)
    else:
        out["rho"] = None
        out["d_rho"] = None
    return out


def require_nonzero(z):
    if sumsq([float(v) for v in z]) == 0.0:
        raise ParameterError("rho is undefined at z = 0")


def rho_tilde_field(params):
    zi = params.z_index
    return ScalarField(lambda x: rho_tilde([x[i] for i in zi], params), deps=set(zi), name="rho_tilde")


def rho_field(params):
    zi = params.z_index
    return ScalarField(lambda x: rho([x[i] for i in zi]), deps=set(zi), name="rho")


def psi_on_model(params, submersion="rho_tilde"):
    """psi pulled back to the model chart through id x rho_tilde (or id x rho)."""
    ti, zi = params.t_index, params.z_index
    f = rho_tilde if submersion == "rho_tilde" else (lambda z, _p: rho(z))

    def fn(x):
        return psi_value(sumsq([x[i] for i in ti]), f([x[i] for i in zi], params), params.psi_margin)

    return ScalarField(fn, deps=set(ti) | set(zi), name=f"psi∘{submersion}")
