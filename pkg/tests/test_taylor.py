"""Tests for the truncated Taylor arithmetic tower."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from twistorlab import taylor
from twistorlab.errors import OrderBudgetError, SingularMetricError
from twistorlab.taylor import TaylorScalar, jet_space, seeds_at


def seed_pair(px, py, order=3):
    pts = np.array([[px, py]])
    return seeds_at(pts, order)


def test_order_zero_part_is_plain_evaluation():
    x, y = seed_pair(0.7, -0.3)
    f = taylor.sin(x * y) + x ** 3 / (1.0 + y ** 2)
    plain = math.sin(0.7 * -0.3) + 0.7 ** 3 / (1.0 + 0.09)
    assert f.value[0] == pytest.approx(plain, abs=1e-15)


@given(
    coeffs=st.lists(st.floats(-3, 3), min_size=10, max_size=10),
    px=st.floats(-2, 2),
    py=st.floats(-2, 2),
)
@settings(max_examples=60, deadline=None)
def test_polynomial_coefficients_exact(coeffs, px, py):
    """Degree <= 3 polynomials are represented exactly up to roundoff."""
    x, y = seed_pair(px, py)
    c = coeffs
    f = (c[0] + c[1] * x + c[2] * y + c[3] * x * y + c[4] * x ** 2
         + c[5] * y ** 2 + c[6] * x ** 3 + c[7] * y ** 3
         + c[8] * x ** 2 * y + c[9] * x * y ** 2)

    def poly(a, b):
        return (c[0] + c[1] * a + c[2] * b + c[3] * a * b + c[4] * a ** 2
                + c[5] * b ** 2 + c[6] * a ** 3 + c[7] * b ** 3
                + c[8] * a ** 2 * b + c[9] * a * b ** 2)

    # compare every stored coefficient against analytic Taylor coefficients
    import sympy as sp
    a, b = sp.symbols('a b')
    expr = poly(a, b)
    scale = sum(abs(v) for v in c) + 1.0
    for i, alpha in enumerate(f.space.mono):
        want = sp.diff(expr, a, alpha[0], b, alpha[1]).subs({a: px, b: py})
        want = float(want) / (math.factorial(alpha[0]) * math.factorial(alpha[1]))
        assert f.c[0, i] == pytest.approx(want, abs=1e-10 * scale)


def test_elementary_functions_match_closed_forms():
    pts = np.array([[0.6, 1.1]])
    x, y = seeds_at(pts, 3)
    f = taylor.exp(x) * taylor.sin(y)
    gx = f.gradient()[0]
    assert gx[0] == pytest.approx(math.exp(0.6) * math.sin(1.1), rel=1e-14)
    assert gx[1] == pytest.approx(math.exp(0.6) * math.cos(1.1), rel=1e-14)
    H = f.hessian()[0]
    assert H[0, 1] == pytest.approx(math.exp(0.6) * math.cos(1.1), rel=1e-14)
    assert H[1, 1] == pytest.approx(-math.exp(0.6) * math.sin(1.1), rel=1e-14)
    T = f.third()[0]
    assert T[0, 1, 1] == pytest.approx(-math.exp(0.6) * math.sin(1.1), rel=1e-13)
    assert T[1, 1, 1] == pytest.approx(-math.exp(0.6) * math.cos(1.1), rel=1e-13)


def test_division_and_sqrt_roundtrip():
    x, y = seed_pair(1.3, 0.4)
    f = (x * x + y * y + 1.0)
    g = f / taylor.sqrt(f)
    h = taylor.sqrt(f)
    assert np.allclose(g.c, h.c, atol=1e-14)
    r = (x / y) * y
    assert np.allclose(r.c, x.c, atol=1e-13)


def test_log_exp_inverse():
    x, _ = seed_pair(0.9, 0.2)
    f = taylor.log(taylor.exp(x))
    assert np.allclose(f.c, x.c, atol=1e-13)


def test_derivative_is_exact_and_product_rule_holds():
    x, y = seed_pair(0.5, 0.8)
    f = taylor.sin(x) * y ** 2
    lhs = (f.derivative(0)).c
    rhs = (taylor.cos(x).truncated(2) * y.truncated(2) ** 2).c
    assert np.allclose(lhs, rhs, atol=1e-14)


def test_order_budget_errors():
    with pytest.raises(OrderBudgetError):
        jet_space(3, 4)
    with pytest.raises(OrderBudgetError):
        seeds_at(np.array([[0.0, 0.0]]), 0)
    z = TaylorScalar.constant(jet_space(2, 0), np.array([1.0]))
    with pytest.raises(OrderBudgetError):
        z.derivative(0)
    with pytest.raises(OrderBudgetError):
        z.gradient()


def test_reciprocal_of_zero_value_raises():
    x, _ = seed_pair(0.0, 1.0)
    with pytest.raises(SingularMetricError):
        _ = 1.0 / x


def test_batched_and_scalar_mixing():
    pts = np.array([[0.2, 0.3], [1.5, -0.7], [2.0, 0.1]])
    x, y = seeds_at(pts, 2)
    f = 2.0 * x + y * np.array([1.0, 2.0, 3.0]) - 0.5
    assert f.value == pytest.approx(2 * pts[:, 0] + pts[:, 1] * [1, 2, 3] - 0.5)
    assert f.gradient()[:, 1] == pytest.approx([1.0, 2.0, 3.0])


def test_truncation_and_min_order_alignment():
    x, y = seed_pair(0.4, 0.9, order=3)
    f3 = taylor.sin(x)
    f1 = f3.truncated(1)
    assert f1.order == 1
    mixed = f3 * f1  # result truncates to order 1
    assert mixed.order == 1
    assert mixed.value[0] == pytest.approx(math.sin(0.4) ** 2, rel=1e-14)


def test_antiderivative_along_axis():
    pts = np.array([[0.3, 2.0]])
    x, y = seeds_at(pts, 2)
    g = taylor.cos(x)  # depends on axis 0 only
    F = taylor.antiderivative_along_axis(g, 0, np.array([math.sin(0.3)]))
    # F should be the order-3 jet of sin at 0.3
    s = taylor.sin(seeds_at(pts, 3)[0])
    assert np.allclose(F.c, s.c, atol=1e-14)
    mixed = taylor.cos(x) * y
    with pytest.raises(ValueError):
        taylor.antiderivative_along_axis(mixed, 0, np.array([0.0]))


def test_jet_matrix_inverse():
    pts = np.array([[0.7, 0.25], [1.2, 0.5]])
    x, y = seeds_at(pts, 2)
    space = jet_space(2, 2)
    A = taylor.jet_array([[2.0 + x * x, x * y], [x * y, 1.0 + y * y]], space, (2,))
    Ainv = taylor.jet_inv(A, space, (2,))
    Id = taylor.jet_matmul(A, Ainv)
    for i in range(2):
        for j in range(2):
            want = 1.0 if i == j else 0.0
            assert np.allclose(Id[i, j].c[:, 0], want, atol=1e-13)
            assert np.allclose(Id[i, j].c[:, 1:], 0.0, atol=1e-13)
