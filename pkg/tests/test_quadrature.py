from math import factorial

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sgefem import quadrature


def exact_monomial(a, b):
    """Integral of x^a y^b over the reference triangle."""
    return factorial(a) * factorial(b) / factorial(a + b + 2)


@pytest.mark.parametrize("degree", range(1, quadrature.MAX_DEGREE + 1))
def test_triangle_rule_monomial_exactness(degree):
    rule = quadrature.triangle_rule(degree)
    x, y = rule.xy.T
    assert np.all(rule.weights > 0)
    assert abs(rule.weights.sum() - 0.5) < 1e-15
    for a in range(degree + 1):
        for b in range(degree + 1 - a):
            exact = exact_monomial(a, b)
            assert abs(rule.weights @ (x**a * y**b) - exact) <= 1e-13 * exact


@pytest.mark.parametrize("degree", range(1, quadrature.MAX_DEGREE + 1))
def test_edge_rule_monomial_exactness(degree):
    rule = quadrature.edge_rule(degree)
    for k in range(degree + 1):
        assert abs(rule.weights @ rule.points**k - 1.0 / (k + 1)) <= 1e-13


def test_edge_rule_examples():
    assert quadrature.edge_rule(1).weights.sum() == pytest.approx(1.0, abs=1e-15)
    r = quadrature.edge_rule(2)
    assert r.weights @ r.points**2 == pytest.approx(1 / 3, abs=1e-15)
    r = quadrature.edge_rule(5)
    assert r.weights @ r.points**5 == pytest.approx(1 / 6, abs=1e-15)


def test_bubble_integral():
    for degree in (3, 7, 14):
        rule = quadrature.triangle_rule(degree)
        assert rule.weights @ rule.points.prod(axis=1) == pytest.approx(1 / 120, rel=1e-14)


@pytest.mark.parametrize("degree", [0, 15, 2.5])
def test_unsupported_degree(degree):
    with pytest.raises(ValueError):
        quadrature.triangle_rule(degree)
    with pytest.raises(ValueError):
        quadrature.edge_rule(degree)


def test_corner_refined_identity_and_area():
    base = quadrature.triangle_rule(6)
    assert quadrature.corner_refined_rule(base, 0) is base
    fine = quadrature.corner_refined_rule(base, 5, vertex=1)
    assert abs(fine.weights.sum() - 0.5) < 1e-13


@given(st.integers(0, 6), st.integers(0, 2), st.integers(0, 6))
def test_corner_refined_keeps_polynomial_exactness(levels, vertex, degree):
    base = quadrature.triangle_rule(max(degree, 1))
    rule = quadrature.corner_refined_rule(base, levels, vertex)
    x, y = rule.xy.T
    for a in range(degree + 1):
        b = degree - a
        assert abs(rule.weights @ (x**a * y**b) - exact_monomial(a, b)) < 1e-14


def test_corner_refined_singular_weight_converges():
    # q = lambda_2 (vanishes at vertex 0), weight 1/rho^2 from vertex 0 of the reference triangle.
    # Polar oracle: int_0^{pi/2} int_0^{R(t)} (r cos t)^2 / r^2 r dr dt, R(t) = 1/(cos t + sin t)
    from scipy.integrate import quad

    oracle = quad(lambda t: 0.5 * np.cos(t) ** 2 / (np.cos(t) + np.sin(t)) ** 2, 0, np.pi / 2, epsabs=1e-15)[0]
    base = quadrature.triangle_rule(14)
    vals = []
    for levels in (2, 4, 6, 8):
        rule = quadrature.corner_refined_rule(base, levels, vertex=0)
        x, y = rule.xy.T
        vals.append(rule.weights @ (x**2 / (x**2 + y**2)))
    steps = np.abs(np.diff(vals))
    assert np.all(steps[1:] < steps[:-1])
    assert abs(vals[-1] - oracle) < 1e-8


def test_rotate_moves_collapsed_vertex():
    rule = quadrature.triangle_rule(4)
    rot = quadrature.rotate(rule, 2)
    assert np.allclose(np.sort(rot.points[:, 2]), np.sort(rule.points[:, 0]))
    assert rot.weights.sum() == pytest.approx(0.5)
