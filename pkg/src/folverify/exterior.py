"""Coordinate exterior calculus on box/torus product charts.

Forms store one :class:`ScalarField` per strictly increasing multi-index.
Coefficient fields are plain Python callables on a coordinate sequence, so
they accept floats, numpy arrays (vectorized grids) or dual numbers
(derivatives).  ``d`` differentiates coefficients with forward-mode duals.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import dual
from .kernels import pfaffian_batch

TWO_PI = 2.0 * math.pi


class DomainError(ValueError):
    """Point outside a chart, or mismatched dimensions."""


# --------------------------------------------------------------------------
# charts and points


@dataclass(frozen=True)
class Chart:
    """Product of circles, intervals and discs in fixed coordinate order.

    ``discs`` lists (indices, radius) groups whose Euclidean norm is bounded;
    every other non-periodic coordinate is bounded by ``lo``/``hi``.
    """

    names: tuple
    periodic: tuple
    lo: tuple
    hi: tuple
    discs: tuple = ()

    @property
    def dim(self):
        return len(self.names)

    def index(self, name):
        return self.names.index(name)

    def contains(self, coords, slack=1e-12):
        x = np.asarray(coords, dtype=float)
        if x.shape[0] != self.dim:
            return False
        for i in range(self.dim):
            if not self.periodic[i] and not (self.lo[i] - slack <= x[i] <= self.hi[i] + slack):
                return False
        for idx, radius in self.discs:
            if np.sqrt(np.sum(x[list(idx)] ** 2)) > radius + slack:
                return False
        return True

    def point(self, coords):
        x = np.array(coords, dtype=float)
        if x.shape != (self.dim,):
            raise DomainError(f"expected {self.dim} coordinates, got shape {x.shape}")
        if not self.contains(x):
            raise DomainError(f"point {x.tolist()} outside chart {self.names}")
        mask = np.asarray(self.periodic, dtype=bool)
        x[mask] = np.mod(x[mask], TWO_PI)
        return Point(self, x)


def euclidean_chart(n, radius=None, prefix="u"):
    names = tuple(f"{prefix}{i + 1}" for i in range(n))
    r = math.inf if radius is None else radius
    discs = () if radius is None else ((tuple(range(n)), radius),)
    return Chart(names, (False,) * n, (-r,) * n, (r,) * n, discs)


@dataclass(frozen=True)
class Point:
    chart: Chart
    coords: np.ndarray = field(repr=False)


def _coords_of(p, dim):
    if isinstance(p, Point):
        if p.chart.dim != dim:
            raise DomainError(f"point has dimension {p.chart.dim}, form expects {dim}")
        return list(p.coords)
    c = list(p)
    if len(c) != dim:
        raise DomainError(f"point has dimension {len(c)}, form expects {dim}")
    return c


# --------------------------------------------------------------------------
# scalar fields


class ScalarField:
    """Smooth function of a coordinate sequence.

    ``const`` marks constant fields (folded eagerly so sparse forms stay
    sparse); ``deps`` is the set of coordinates the field may depend on, or
    ``None`` when unknown.
    """

    __slots__ = ("fn", "const", "deps", "name")

    def __init__(self, fn=None, const=None, deps=None, name=None):
        if fn is None and const is None:
            raise ValueError("need fn or const")
        self.fn = fn
        self.const = None if const is None else float(const)
        self.deps = frozenset() if const is not None else (None if deps is None else frozenset(deps))
        self.name = name

    def __repr__(self):
        if self.const is not None:
            return f"ScalarField(const={self.const})"
        return f"ScalarField({self.name or self.fn!r})"

    def __call__(self, x):
        if self.const is not None:
            return self.const
        return self.fn(x)

    @property
    def is_zero(self):
        return self.const == 0.0

    # arithmetic -----------------------------------------------------------
    def __add__(self, other):
        other = as_field(other)
        if self.is_zero:
            return other
        if other.is_zero:
            return self
        if self.const is not None and other.const is not None:
            return constant(self.const + other.const)
        f, g = self, other
        return ScalarField(lambda x: f(x) + g(x), deps=_union(f, g))

    __radd__ = __add__

    def __neg__(self):
        if self.const is not None:
            return constant(-self.const)
        f = self
        return ScalarField(lambda x: -f(x), deps=f.deps)

    def __sub__(self, other):
        return self + (-as_field(other))

    def __rsub__(self, other):
        return as_field(other) + (-self)

    def __mul__(self, other):
        other = as_field(other)
        if self.is_zero or other.is_zero:
            return ZERO
        if self.const is not None and other.const is not None:
            return constant(self.const * other.const)
        if self.const == 1.0:
            return other
        if other.const == 1.0:
            return self
        f, g = self, other
        return ScalarField(lambda x: f(x) * g(x), deps=_union(f, g))

    __rmul__ = __mul__

    def partial(self, i):
        """Exact partial derivative along coordinate ``i`` as a new field."""
        if self.const is not None or (self.deps is not None and i not in self.deps):
            return ZERO
        f = self
        return ScalarField(lambda x: dual.derivative(f, x, i), deps=f.deps)


def _union(f, g):
    if f.deps is None or g.deps is None:
        return None
    return f.deps | g.deps


def constant(v):
    return ScalarField(const=v)


ZERO = constant(0.0)
ONE = constant(1.0)


def as_field(v):
    if isinstance(v, ScalarField):
        return v
    if callable(v):
        return ScalarField(v)
    return constant(v)


def coord(i):
    return ScalarField(lambda x: x[i], deps={i}, name=f"x[{i}]")


def field_of(fn, deps=None, name=None):
    return ScalarField(fn, deps=deps, name=name)


class VectorField:
    """Tuple of component fields; evaluation returns an N-vector."""

    def __init__(self, components):
        self.components = tuple(as_field(c) for c in components)

    @property
    def dim(self):
        return len(self.components)

    def __call__(self, p):
        x = _coords_of(p, self.dim)
        vals = [c(x) for c in self.components]
        shape = np.broadcast_shapes(*[np.shape(dual.real(v)) for v in vals])
        return np.array([np.broadcast_to(dual.real(v), shape) for v in vals], dtype=float)

    def __add__(self, other):
        return VectorField([a + b for a, b in zip(self.components, other.components)])

    def scale(self, f):
        f = as_field(f)
        return VectorField([f * c for c in self.components])


# --------------------------------------------------------------------------
# forms


def _perm_sign(seq):
    """Sign of the permutation sorting ``seq`` (distinct entries)."""
    s = 1
    a = list(seq)
    for i in range(len(a)):
        for j in range(i + 1, len(a)):
            if a[i] > a[j]:
                s = -s
    return s


class KForm:
    """Differential k-form on an N-dimensional chart."""

    def __init__(self, dim, degree, coeffs=None):
        if degree < 0 or degree > dim:
            raise DomainError(f"degree {degree} impossible in dimension {dim}")
        self.dim = dim
        self.degree = degree
        self.coeffs = {}
        for idx, c in (coeffs or {}).items():
            self._accumulate(tuple(idx), as_field(c))

    def _accumulate(self, idx, c):
        if len(idx) != self.degree or len(set(idx)) != len(idx):
            if len(set(idx)) != len(idx):
                return
            raise DomainError(f"index {idx} does not match degree {self.degree}")
        if any(i < 0 or i >= self.dim for i in idx):
            raise DomainError(f"index {idx} out of range for dimension {self.dim}")
        key = tuple(sorted(idx))
        if key != idx:
            c = c if _perm_sign(idx) > 0 else -c
        new = self.coeffs.get(key, ZERO) + c
        if new.is_zero:
            self.coeffs.pop(key, None)
        else:
            self.coeffs[key] = new

    def __repr__(self):
        return f"KForm(dim={self.dim}, degree={self.degree}, terms={sorted(self.coeffs)})"

    @classmethod
    def zero(cls, dim, degree):
        return cls(dim, degree)

    @classmethod
    def scalar(cls, dim, f):
        return cls(dim, 0, {(): f})

    @classmethod
    def basis(cls, dim, *idx, coeff=1.0):
        return cls(dim, len(idx), {tuple(idx): coeff})

    def _check_same(self, other):
        if self.dim != other.dim or self.degree != other.degree:
            raise DomainError("forms live in different spaces")

    def __add__(self, other):
        self._check_same(other)
        out = KForm(self.dim, self.degree, self.coeffs)
        for idx, c in other.coeffs.items():
            out._accumulate(idx, c)
        return out

    def __neg__(self):
        return KForm(self.dim, self.degree, {i: -c for i, c in self.coeffs.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, f):
        f = as_field(f)
        return KForm(self.dim, self.degree, {i: f * c for i, c in self.coeffs.items()})

    __rmul__ = __mul__

    def __xor__(self, other):
        return wedge(self, other)

    def d(self):
        return exterior_derivative(self)

    # evaluation -----------------------------------------------------------
    def coefficients(self, p):
        """Dict index -> coefficient value at ``p`` (scalars or arrays)."""
        x = _coords_of(p, self.dim)
        return {idx: c(x) for idx, c in self.coeffs.items()}

    def matrix(self, coords):
        """Values of a 2-form as skew matrices.

        ``coords`` has shape (N, ...) ; the result has shape (..., N, N).
        """
        if self.degree != 2:
            raise DomainError("matrix() needs a 2-form")
        x = [np.asarray(c, dtype=float) for c in coords]
        if len(x) != self.dim:
            raise DomainError(f"expected {self.dim} coordinate arrays")
        shape = np.broadcast_shapes(*[c.shape for c in x])
        out = np.zeros(shape + (self.dim, self.dim))
        for (i, j), c in self.coeffs.items():
            v = np.broadcast_to(dual.real(c(x)), shape)
            out[..., i, j] = v
            out[..., j, i] = -v
        return out

    def covector(self, coords):
        """Values of a 1-form, shape (..., N)."""
        if self.degree != 1:
            raise DomainError("covector() needs a 1-form")
        x = [np.asarray(c, dtype=float) for c in coords]
        shape = np.broadcast_shapes(*[c.shape for c in x])
        out = np.zeros(shape + (self.dim,))
        for (i,), c in self.coeffs.items():
            out[..., i] = np.broadcast_to(dual.real(c(x)), shape)
        return out


def _det(m):
    """Determinant by cofactor expansion; entries may be duals."""
    k = len(m)
    if k == 0:
        return 1.0
    if k == 1:
        return m[0][0]
    if k == 2:
        return m[0][0] * m[1][1] - m[0][1] * m[1][0]
    total = 0.0
    for j in range(k):
        minor = [row[:j] + row[j + 1:] for row in m[1:]]
        term = m[0][j] * _det(minor)
        total = total + term if j % 2 == 0 else total - term
    return total


def eval_form(form, p, vectors):
    """Multilinear, alternating value of ``form`` at ``p`` on ``vectors``."""
    if len(vectors) != form.degree:
        raise DomainError(f"{form.degree}-form evaluated on {len(vectors)} vectors")
    if isinstance(p, Point) and not p.chart.contains(p.coords):
        raise DomainError("point outside chart")
    vecs = [np.asarray(v, dtype=float) for v in vectors]
    for v in vecs:
        if v.shape != (form.dim,):
            raise DomainError(f"vector of shape {v.shape}, expected ({form.dim},)")
    vals = form.coefficients(p)
    total = 0.0
    for idx, c in vals.items():
        sub = [[vecs[a][i] for a in range(form.degree)] for i in idx]
        total += float(dual.real(c)) * float(_det(sub))
    return total


def wedge(a, b):
    if a.dim != b.dim:
        raise DomainError("wedge of forms on different charts")
    if a.degree + b.degree > a.dim:
        raise DomainError(f"degree {a.degree + b.degree} exceeds dimension {a.dim}")
    out = KForm(a.dim, a.degree + b.degree)
    for i, ca in a.coeffs.items():
        si = set(i)
        for j, cb in b.coeffs.items():
            if si.intersection(j):
                continue
            out._accumulate(i + j, ca * cb)
    return out


def exterior_derivative(form):
    if form.degree == form.dim:
        raise DomainError("exterior derivative of a top-degree form leaves the chart's degrees")
    out = KForm(form.dim, form.degree + 1)
    for idx, c in form.coeffs.items():
        for j in range(form.dim):
            if j in idx:
                continue
            out._accumulate((j,) + idx, c.partial(j))
    return out


def contract(v, form):
    """Interior product i_v form."""
    if form.degree == 0:
        raise DomainError("cannot contract a 0-form")
    if v.dim != form.dim:
        raise DomainError("vector field and form on different charts")
    out = KForm(form.dim, form.degree - 1)
    for idx, c in form.coeffs.items():
        for pos, j in enumerate(idx):
            vj = v.components[j]
            if vj.is_zero:
                continue
            rest = idx[:pos] + idx[pos + 1:]
            term = vj * c
            out._accumulate(rest, term if pos % 2 == 0 else -term)
    return out


class SmoothMap:
    """Map between charts given by component fields on the source."""

    def __init__(self, source_dim, components):
        self.source_dim = source_dim
        self.components = tuple(as_field(c) for c in components)

    @property
    def target_dim(self):
        return len(self.components)

    def __call__(self, x):
        return [c(x) for c in self.components]

    def jacobian(self, x):
        return [[0.0 if c.const is not None or (c.deps is not None and j not in c.deps)
                 else dual.derivative(c, x, j)
                 for j in range(self.source_dim)] for c in self.components]

    def compose(self, inner):
        """``self ∘ inner``."""
        outer = self
        return SmoothMap(inner.source_dim, [
            ScalarField(lambda x, c=c: c(inner(x))) for c in outer.components])

    @classmethod
    def linear(cls, L):
        L = np.asarray(L, dtype=float)

        def comp(r):
            row = L[r]
            nz = [j for j in range(L.shape[1]) if row[j] != 0.0]
            return ScalarField(lambda x: sum((row[j] * x[j] for j in nz), 0.0), deps=set(nz))

        return cls(L.shape[1], [comp(r) for r in range(L.shape[0])])

    @classmethod
    def identity(cls, n):
        return cls(n, [coord(i) for i in range(n)])


def pullback(fmap, form):
    if fmap.target_dim != form.dim:
        raise DomainError(f"map lands in dimension {fmap.target_dim}, form lives in {form.dim}")
    m, k = fmap.source_dim, form.degree
    out = KForm(m, k)
    items = list(form.coeffs.items())
    for J in itertools.combinations(range(m), k):
        def coeff(x, J=J):
            y = fmap(x)
            jac = fmap.jacobian(x)
            total = 0.0
            for I, c in items:
                sub = [[jac[i][j] for j in J] for i in I]
                total = total + c(y) * _det(sub)
            return total
        out._accumulate(J, ScalarField(coeff))
    return out


# --------------------------------------------------------------------------
# skew matrices, Gram restriction, Pfaffians


SKEW_TOL = 1e-14


def check_skew(m):
    m = np.asarray(m, dtype=float)
    if m.shape[-1] != m.shape[-2]:
        raise DomainError("matrix not square")
    scale = max(1.0, float(np.max(np.abs(m))) if m.size else 1.0)
    if m.size and np.max(np.abs(m + np.swapaxes(m, -1, -2))) > SKEW_TOL * scale:
        raise DomainError("matrix is not antisymmetric")
    return m


def pfaffian(m):
    """Pfaffian of an even-size skew matrix (block elimination, full pivoting)."""
    m = check_skew(m)
    if m.ndim != 2:
        raise DomainError("pfaffian() takes one matrix; use pfaffian_batch for stacks")
    if m.shape[0] % 2:
        raise DomainError("Pfaffian needs even dimension")
    if m.shape[0] == 0:
        return 1.0
    return float(pfaffian_batch(m[None])[0])


def pfaffians(ms):
    ms = check_skew(ms)
    if ms.shape[-1] % 2:
        raise DomainError("Pfaffian needs even dimension")
    flat = ms.reshape((-1,) + ms.shape[-2:])
    return pfaffian_batch(flat).reshape(ms.shape[:-2])


def restrict_gram(m, basis, independence_tol=1e-12):
    """Gram matrix G_ab = ω(v_a, v_b) of a 2-form value on ``basis``.

    ``m`` is (N, N) or batched (..., N, N); ``basis`` is (2m, N) or (..., 2m, N).
    """
    m = np.asarray(m, dtype=float)
    V = np.asarray(basis, dtype=float)
    gram = V @ np.swapaxes(V, -1, -2)
    if np.any(np.linalg.det(gram) <= independence_tol):
        raise DomainError("basis vectors are linearly dependent")
    G = V @ m @ np.swapaxes(V, -1, -2)
    return 0.5 * (G - np.swapaxes(G, -1, -2))


def standard_symplectic(n, offset=0, dim=None, signs=None):
    """Σ ±dx_i∧dy_i with (x_i, y_i) at chart indices offset+2i, offset+2i+1."""
    dim = 2 * n + offset if dim is None else dim
    signs = (1,) * n if signs is None else tuple(signs)
    return KForm(dim, 2, {(offset + 2 * i, offset + 2 * i + 1): float(signs[i]) for i in range(n)})
