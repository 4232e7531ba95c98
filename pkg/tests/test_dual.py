import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from folverify import dual

finite = st.floats(-3.0, 3.0, allow_nan=False)


def test_polynomial_derivative():
    assert dual.derivative(lambda x: x[0] ** 3 + 2 * x[0] * x[1], [2.0, 5.0], 0) == pytest.approx(22.0)
    assert dual.derivative(lambda x: x[0] ** 3 + 2 * x[0] * x[1], [2.0, 5.0], 1) == pytest.approx(4.0)


def test_constant_function_has_zero_derivative():
    assert dual.derivative(lambda x: 7.0, [1.0], 0) == 0.0


@given(finite, finite)
@settings(max_examples=60, deadline=None)
def test_product_and_quotient_rules(a, b):
    f = lambda x: dual.sin(x[0]) * dual.exp(x[0]) / (2.0 + dual.cos(x[0]))  # noqa: E731
    d = dual.derivative(f, [a], 0)
    num = math.sin(a) * math.exp(a)
    den = 2.0 + math.cos(a)
    want = ((math.cos(a) * math.exp(a) + num) * den + num * math.sin(a)) / den**2
    assert d == pytest.approx(want, rel=1e-12, abs=1e-12)
    assert dual.derivative(lambda x: x[0] * x[1], [a, b], 1) == pytest.approx(a)


def test_nested_tags_give_second_derivatives():
    def f(x):
        return x[0] ** 2 * x[1] ** 3

    def fx(x):
        return dual.derivative(f, x, 0)

    # ∂y ∂x (x^2 y^3) = 6 x y^2
    assert dual.real(dual.derivative(fx, [1.5, 2.0], 1)) == pytest.approx(6 * 1.5 * 4.0)


def test_arrays_broadcast():
    x = np.linspace(0.1, 1.0, 5)
    d = dual.derivative(lambda v: dual.sqrt(v[0]) + dual.log(v[0]), [x], 0)
    np.testing.assert_allclose(d, 0.5 / np.sqrt(x) + 1.0 / x, rtol=1e-14)


def test_where_selects_branch_without_evaluating_singular_value_derivative():
    f = lambda v: dual.where(dual.real(v[0]) > 0.0, v[0] * v[0], 0.0)  # noqa: E731
    assert dual.derivative(f, [3.0], 0) == pytest.approx(6.0)
    assert dual.derivative(f, [-1.0], 0) == 0.0
