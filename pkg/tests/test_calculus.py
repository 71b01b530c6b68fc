import numpy as np
import pytest

import calculus
import formulas
import invariants
import jets
import structure as st
from errors import InputError


@pytest.fixture
def algebra_of():
    def make(structure, count=25, seed=11):
        points, y, _ = formulas.oracle_samples(structure, count, seed)
        return calculus.ShapeAlgebra(st.NormalField(st.FrameState(structure, points), y))

    return make


def test_power_divergence_closed_form(any_builtin, algebra_of):
    alg = algebra_of(any_builtin)
    for k in range(1, min(3, alg.n + 1) + 1):
        direct = calculus.divF_direct(alg, calculus.OperatorField.power(k))
        closed = calculus.divF_Ak_closed(alg, k)
        np.testing.assert_allclose(closed, direct, atol=1e-8 * max(1.0, np.abs(direct).max()))


def test_newton_divergence_closed_form(any_builtin, algebra_of):
    alg = algebra_of(any_builtin)
    for r in range(alg.n):
        direct = calculus.divF_direct(alg, calculus.OperatorField.newton(r))
        closed = calculus.divF_newton_closed(alg, r)
        np.testing.assert_allclose(closed, direct, atol=1e-8 * max(1.0, np.abs(direct).max()))


def test_general_divergence_closed_form(build, algebra_of):
    alg = algebra_of(build("generic-3-2-1"))
    rng = np.random.default_rng(3)
    for _ in range(5):
        recipe = formulas.random_recipe(alg.n, rng)
        direct = calculus.divF_direct(alg, calculus.OperatorField.general(recipe))
        closed = calculus.divF_general_closed(alg, recipe)
        np.testing.assert_allclose(closed, direct, atol=1e-8 * max(1.0, np.abs(direct).max()))


def test_identity_has_no_divergence(build, algebra_of):
    alg = algebra_of(build("generic-3-2-1"))
    recipe = invariants.CoefficientRecipe.parse("1; 0", 2)
    np.testing.assert_allclose(calculus.divF_general_closed(alg, recipe), 0.0, atol=1e-14)
    np.testing.assert_allclose(calculus.divF_newton_closed(alg, 0), 0.0, atol=1e-14)


def test_first_newton_divergence_is_curvature_trace(build, algebra_of):
    alg = algebra_of(build("subriemannian-4-2-1"))
    trace = np.einsum("...iil->...l", alg.R_leaf)
    np.testing.assert_allclose(calculus.divF_newton_closed(alg, 1), trace, atol=1e-14)


def test_index_ranges(build, algebra_of):
    alg = algebra_of(build("warped-torus"), count=3)
    with pytest.raises(InputError):
        calculus.divF_Ak_closed(alg, 0)
    with pytest.raises(InputError):
        calculus.divF_newton_closed(alg, 1)
    with pytest.raises(InputError):
        calculus.expanded_r2_integrand(alg)
    with pytest.raises(InputError):
        calculus.OperatorField("cubic")


def test_frame_lemma(any_builtin, algebra_of):
    alg = algebra_of(any_builtin)
    lhs, rhs = calculus.lemma31_sides(alg)
    np.testing.assert_allclose(lhs, rhs, atol=1e-8 * max(1.0, np.abs(rhs).max()))
    gaps = calculus.lemma31_check(alg)
    assert gaps.shape == alg.field.frame.points.shape[:-1]
    assert gaps.max() < 1e-8 * max(1.0, np.abs(rhs).max())


def test_divergence_splitting(any_builtin):
    points, _, _ = formulas.oracle_samples(any_builtin, 25)
    frame = st.FrameState(any_builtin, points)
    X = formulas._splitting_field(frame)
    assert np.abs(calculus.divergence_splitting_residual(frame, X)).max() < 1e-9


def test_bracket_term_vanishes_when_d_is_tm(build, algebra_of):
    alg = algebra_of(build("full-tangent-3"))
    assert not calculus.bracket_term(alg, alg.newton(0)).any()


def test_flat_integrands_vanish(build, algebra_of):
    alg = algebra_of(build("flat-torus-4-2-1"))
    for r in range(2):
        assert not np.any(calculus.closed_integrand_newton(alg, r))
        assert not np.any(calculus.fiber_integrand_newton(alg, r))
    assert not np.any(calculus.autoparallel_integrand(alg, 1, "tau"))
    assert not np.any(calculus.autoparallel_integrand(alg, 0, "sigma"))


def test_newton_recipe_integrands_agree(build, algebra_of):
    alg = algebra_of(build("generic-3-2-1"))
    recipe = invariants.CoefficientRecipe.parse("newton(1)", 2)
    np.testing.assert_allclose(
        calculus.fiber_integrand_general(alg, recipe), calculus.fiber_integrand_newton(alg, 1), atol=1e-10
    )


def test_operator_field_values_match_invariants(build, algebra_of):
    alg = algebra_of(build("generic-3-2-1"), count=4)
    A = alg.A.value
    np.testing.assert_allclose(calculus.OperatorField.power(2).values(alg), A @ A, atol=1e-14)
    for b in range(4):
        T = invariants.newton_transform(A[b], 1).entries
        np.testing.assert_allclose(calculus.OperatorField.newton(1).values(alg)[b], T, atol=1e-12)


def test_sigma_beyond_leaf_dimension_is_zero(build, algebra_of):
    alg = algebra_of(build("warped-torus"), count=3)
    assert not alg.sigma_value(2).any()
    np.testing.assert_allclose(jets.value_of(alg.tau(3)), np.einsum("...ii->...", alg.powers[3]), atol=1e-15)


def test_curvature_operator_at_a_point(build):
    structure = build("full-tangent-3")
    point = np.array([1.0, 2.0, 3.0])
    frame = st.FrameState(structure, point)
    xi = frame.E.value[:, 1]
    X = frame.E.value[:, 2]
    R = calculus.curvature_operator(structure, X, xi, point)
    np.testing.assert_allclose(R, frame.RPf[:1, :1, 2, 1], atol=1e-12)
