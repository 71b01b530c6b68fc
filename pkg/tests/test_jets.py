import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import expr
import jets
from errors import InputError, SingularityError


def test_seed_variable_examples():
    x = jets.seed_variable(0, [0.5, 1.0])
    y = jets.seed_variable(1, [0.5, 1.0])
    assert x.value == 0.5
    np.testing.assert_array_equal(x.grad, [1.0, 0.0])
    assert y.value == 1.0
    np.testing.assert_array_equal(y.grad, [0.0, 1.0])
    assert not x.hess.any() and not x.third.any()


def test_seed_variable_out_of_range():
    with pytest.raises(InputError):
        jets.seed_variable(2, [0.5, 1.0])


def test_square_derivatives():
    x = jets.seed_variable(0, [3.0])
    sq = jets.arith("mul", x, x)
    assert sq.value == 9.0
    assert sq.grad[0] == 6.0
    assert sq.hess[0, 0] == 2.0
    assert sq.third[0, 0, 0] == 0.0


def test_reciprocal_raw_derivatives():
    x = jets.seed_variable(0, [2.0])
    inv = jets.arith("div", 1.0, x)
    np.testing.assert_allclose(
        [inv.value, inv.grad[0], inv.hess[0, 0], inv.third[0, 0, 0]], [0.5, -0.25, 0.25, -0.375], rtol=1e-15
    )


def test_add_then_sub_is_identity():
    a = expr.evaluate_jet(expr.parse("sin(x1)*x2"), [0.3, 1.7])
    b = expr.evaluate_jet(expr.parse("exp(x1 - x2)"), [0.3, 1.7])
    back = jets.arith("sub", jets.arith("add", a, b), b)
    for lhs, rhs in zip(back.levels(), a.levels()):
        np.testing.assert_allclose(lhs, rhs, rtol=1e-15, atol=1e-15)


@pytest.mark.parametrize(
    "fn, levels",
    [
        ("sin", [0.0, 1.0, 0.0, -1.0]),
        ("cos", [1.0, 0.0, -1.0, 0.0]),
        ("exp", [1.0, 1.0, 1.0, 1.0]),
    ],
)
def test_elementary_at_zero(fn, levels):
    f = jets.elementary(fn, jets.seed_variable(0, [0.0]))
    np.testing.assert_allclose([f.value, f.grad[0], f.hess[0, 0], f.third[0, 0, 0]], levels, atol=1e-15)


@pytest.mark.parametrize("fn, at", [("log", -1.0), ("log", 0.0), ("sqrt", 0.0), ("sqrt", -2.0)])
def test_domain_violations(fn, at):
    with pytest.raises(SingularityError):
        jets.elementary(fn, jets.seed_variable(0, [at]))


def test_division_by_zero_jet():
    with pytest.raises(SingularityError):
        jets.divide(1.0, jets.seed_variable(0, [0.0, 1.0]))


def test_dimension_mismatch():
    with pytest.raises(InputError):
        jets.seed_variable(0, [1.0]) + jets.seed_variable(0, [1.0, 2.0])


def test_pow_const_matches_repeated_product():
    x = jets.seed_variable(0, [1.3, 0.2])
    cube = jets.pow_const(x, 3)
    product = x * x * x
    for lhs, rhs in zip(cube.levels(), product.levels()):
        np.testing.assert_allclose(lhs, rhs, rtol=1e-14)


def test_matrix_inverse_jet():
    points = np.array([[0.4, 1.1], [2.0, 5.0]])
    node = [["2 + sin(x1)", "0.3*cos(x2)"], ["0.3*cos(x2)", "1.5 + 0.5*sin(x1 + x2)"]]
    entries = [[expr.evaluate_jet(expr.parse(t), points) for t in row] for row in node]
    M = jets.stack([jets.stack(row, axis=-1) for row in entries], axis=-2)
    product = jets.einsum("...ij,...jk->...ik", M, jets.inverse(M))
    np.testing.assert_allclose(product.value, np.broadcast_to(np.eye(2), (2, 2, 2)), atol=1e-14)
    for level in product.levels()[1:]:
        np.testing.assert_allclose(level, 0.0, atol=1e-12)


CORPUS = [
    "sin(x1)*cos(x2) + x1^2",
    "exp(0.3*x1 - x2) / (2 + cos(x1*x2))",
    "log(3 + sin(x2)) * sqrt(2 + cos(x1))",
    "(1 + 0.2*sin(x1 + x2))^3 - x2*exp(cos(x1))",
    "sqrt(1 + x1^2 + x2^2) / (1.5 + sin(x1)*sin(x2))",
]

coords = st.floats(min_value=-2.0, max_value=2.0, allow_nan=False, allow_infinity=False)


def _finite_differences(node, point, h=1e-4):
    grad = np.zeros(2)
    hess = np.zeros((2, 2))
    for i in range(2):
        e = np.zeros(2)
        e[i] = h
        grad[i] = (expr.evaluate(node, point + e) - expr.evaluate(node, point - e)) / (2 * h)
        for j in range(2):
            f = np.zeros(2)
            f[j] = h
            hess[i, j] = (
                expr.evaluate(node, point + e + f)
                - expr.evaluate(node, point + e - f)
                - expr.evaluate(node, point - e + f)
                + expr.evaluate(node, point - e - f)
            ) / (4 * h * h)
    return grad, hess


@settings(max_examples=20, deadline=None)
@given(st.sampled_from(CORPUS), coords, coords)
def test_jets_agree_with_finite_differences(text, a, b):
    node = expr.parse(text)
    point = np.array([a, b])
    jet = expr.evaluate_jet(node, point)
    grad, hess = _finite_differences(node, point)
    scale = 1.0 + np.abs(jet.value)
    np.testing.assert_allclose(jet.grad, grad, rtol=1e-6, atol=1e-6 * scale)
    np.testing.assert_allclose(jet.hess, hess, rtol=1e-4, atol=1e-4 * scale)


@settings(max_examples=20, deadline=None)
@given(st.sampled_from(CORPUS), coords, coords)
def test_derivative_levels_stay_symmetric(text, a, b):
    jet = expr.evaluate_jet(expr.parse(text), [a, b])
    np.testing.assert_allclose(jet.hess, jet.hess.T, rtol=1e-12, atol=1e-12)
    for axes in [(1, 0, 2), (0, 2, 1), (2, 1, 0)]:
        np.testing.assert_allclose(jet.third, np.transpose(jet.third, axes), rtol=1e-12, atol=1e-12)


def test_chain_rule_against_composition():
    a = jets.seed_variable(0, [0.7, -0.4])
    b = jets.seed_variable(1, [0.7, -0.4])
    composed = jets.elementary("sin", jets.arith("mul", a, b))
    direct = expr.evaluate_jet(expr.parse("sin(x1*x2)"), [0.7, -0.4])
    for lhs, rhs in zip(composed.levels(), direct.levels()):
        np.testing.assert_allclose(lhs, rhs, rtol=1e-15, atol=1e-15)


def test_derivative_drops_one_order():
    jet = expr.evaluate_jet(expr.parse("x1*x2^2"), [1.0, 2.0])
    d = jet.derivative()
    assert d.order == jet.order - 1
    np.testing.assert_allclose(d.value, jet.grad)
    np.testing.assert_allclose(d.grad, jet.hess)
