"""Tagged dual numbers for forward-mode differentiation.

Components may be floats, numpy arrays or other :class:`Dual` objects, so
duals nest for higher derivatives.  Every differentiation pass gets a fresh
tag; an operand carrying an older tag is treated as a constant by the newer
pass, which keeps nested derivatives free of perturbation confusion.
"""

from __future__ import annotations

import itertools

import numpy as np

_tags = itertools.count(1)


def new_tag() -> int:
    return next(_tags)


class Dual:
    __slots__ = ("re", "eps", "tag")
    __array_ufunc__ = None  # make numpy defer to our reflected operators

    def __init__(self, re, eps, tag):
        self.re = re
        self.eps = eps
        self.tag = tag

    def __repr__(self):
        return f"Dual({self.re!r}, {self.eps!r}, tag={self.tag})"

    def __add__(self, other):
        return _add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return _add(self, -other)

    def __rsub__(self, other):
        return _add(-self, other)

    def __neg__(self):
        return Dual(-self.re, -self.eps, self.tag)

    def __pos__(self):
        return self

    def __mul__(self, other):
        return _mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return _mul(self, reciprocal(other))

    def __rtruediv__(self, other):
        return _mul(other, reciprocal(self))

    def __pow__(self, p):
        if isinstance(p, Dual):
            raise TypeError("dual exponents are not supported")
        if p == 0:
            return 1.0
        if p == 1:
            return self
        if p == 2:
            return self * self
        return Dual(self.re**p, p * self.re ** (p - 1) * self.eps, self.tag)


def _split(x, tag):
    if isinstance(x, Dual) and x.tag == tag:
        return x.re, x.eps
    return x, 0.0


def _top(x, y):
    tx = x.tag if isinstance(x, Dual) else 0
    ty = y.tag if isinstance(y, Dual) else 0
    return tx if tx >= ty else ty


def _add(x, y):
    t = _top(x, y)
    xr, xe = _split(x, t)
    yr, ye = _split(y, t)
    return Dual(xr + yr, xe + ye, t)


def _mul(x, y):
    t = _top(x, y)
    xr, xe = _split(x, t)
    yr, ye = _split(y, t)
    return Dual(xr * yr, xr * ye + xe * yr, t)


def reciprocal(x):
    if isinstance(x, Dual):
        r = reciprocal(x.re)
        return Dual(r, -(x.eps * r * r), x.tag)
    return 1.0 / x


def real(x):
    """Strip every dual layer and return the base value."""
    while isinstance(x, Dual):
        x = x.re
    return x


def exp(x):
    if isinstance(x, Dual):
        e = exp(x.re)
        return Dual(e, e * x.eps, x.tag)
    return np.exp(x)


def log(x):
    if isinstance(x, Dual):
        return Dual(log(x.re), x.eps * reciprocal(x.re), x.tag)
    return np.log(x)


def sqrt(x):
    if isinstance(x, Dual):
        s = sqrt(x.re)
        return Dual(s, 0.5 * x.eps * reciprocal(s), x.tag)
    return np.sqrt(x)


def sin(x):
    if isinstance(x, Dual):
        return Dual(sin(x.re), cos(x.re) * x.eps, x.tag)
    return np.sin(x)


def cos(x):
    if isinstance(x, Dual):
        return Dual(cos(x.re), -(sin(x.re) * x.eps), x.tag)
    return np.cos(x)


def where(cond, x, y):
    """Branch on a base-valued condition; derivatives follow the chosen branch."""
    if isinstance(x, Dual) or isinstance(y, Dual):
        t = _top(x, y)
        xr, xe = _split(x, t)
        yr, ye = _split(y, t)
        return Dual(where(cond, xr, yr), where(cond, xe, ye), t)
    if np.ndim(cond) == 0:
        return x if cond else y
    return np.where(cond, x, y)


def derivative(fn, point, i):
    """Partial derivative of ``fn`` (a function of a coordinate sequence) along coordinate ``i``."""
    tag = new_tag()
    pt = list(point)
    pt[i] = Dual(pt[i], 1.0, tag)
    out = fn(pt)
    if isinstance(out, Dual) and out.tag == tag:
        return out.eps
    return 0.0
