import numpy as np
import pytest

import expr
import geometry
import jets
import structure as st
from errors import InputError, ValidationError


def _metric(diagonal, params=None):
    m = len(diagonal)
    rows = [[diagonal[i] if j == i else "0" for j in range(m)] for i in range(m)]
    return geometry.MetricField(rows, params)


@pytest.fixture
def samples(rng):
    def draw(structure, count=6):
        return rng.uniform(0.0, 2.0 * np.pi, size=(count, structure.m))

    return draw


def test_frame_is_orthonormal(any_builtin, samples):
    frame = st.FrameState(any_builtin, samples(any_builtin))
    np.testing.assert_allclose(frame.gram(), np.broadcast_to(np.eye(any_builtin.m), frame.gram().shape), atol=1e-12)


def test_leaf_frame_spans_the_coordinate_fields(any_builtin, samples):
    frame = st.FrameState(any_builtin, samples(any_builtin))
    n = any_builtin.n
    np.testing.assert_allclose(frame.E.value[..., n:, :n], 0.0, atol=1e-14)


def test_orthoprojector_is_idempotent(any_builtin, samples):
    P = st.FrameState(any_builtin, samples(any_builtin)).P.value
    np.testing.assert_allclose(P @ P, P, atol=1e-12)
    if any_builtin.full_tangent:
        np.testing.assert_allclose(P, np.broadcast_to(np.eye(any_builtin.m), P.shape), atol=1e-12)


def test_rank_validation():
    with pytest.raises(ValidationError) as info:
        st.SubRiemannianStructure(_metric(["1", "1", "1"]), 2, 2)
    assert info.value.invariant == "ranks"


def test_leaf_span_must_be_coordinate_field():
    spans = [["1", "0.5", "0"], ["0", "1", "0"]]
    with pytest.raises(ValidationError) as info:
        st.SubRiemannianStructure(_metric(["1", "1", "1"]), 1, 1, spans)
    assert info.value.invariant == "leaf-span"


def test_dependent_spans_are_rejected():
    spans = [["1", "0", "0"], ["1", "0", "0"]]
    with pytest.raises(ValidationError) as info:
        st.SubRiemannianStructure(_metric(["1", "1", "1"]), 1, 1, spans)
    assert info.value.invariant == "span-independence"
    assert info.value.witness is not None


def test_complement_axes_skip_axes_inside_d():
    spans = [["1", "0", "0"], ["0", "0", "1"]]
    structure = st.SubRiemannianStructure(_metric(["1", "1", "1"]), 1, 1, spans)
    assert structure.tilde_axes == [1]


def test_span_shape_is_checked():
    with pytest.raises(ValidationError):
        st.SubRiemannianStructure(_metric(["1", "1", "1"]), 1, 1, [["1", "0", "0"], ["0", "1"]])


def test_shape_operator_sign():
    # g = diag(exp(2u(x2)), 1, 1): the x1-circles curve with A_{d2} = -u'(x2)
    eps = 0.3
    structure = st.SubRiemannianStructure(_metric(["exp(2*eps*sin(x2))", "1", "1"], {"eps": eps}), 1, 1)
    for x2 in (0.0, 0.7, 2.5):
        point = np.array([0.4, x2, 1.0])
        A = st.shape_operator(structure, [0.0, 1.0, 0.0], point)
        np.testing.assert_allclose(A.entries, [[-eps * np.cos(x2)]], atol=1e-13)


def test_warped_torus_normal_acceleration(build):
    structure = build("warped-torus")
    eps = structure.metric.params["eps"]
    points = np.array([[0.0, 1.0, 2.0], [1.1, 0.3, 4.0], [4.5, 2.0, 0.5]])
    field = st.NormalField(st.FrameState(structure, points), np.ones((3, 1)))
    np.testing.assert_allclose(field.A.value, 0.0, atol=1e-13)
    np.testing.assert_allclose(field.Z[:, 0], -eps * np.cos(points[:, 0]), atol=1e-13)


def test_shape_operator_rejects_non_normal_vectors(build):
    structure = build("warped-torus")
    with pytest.raises(InputError):
        st.shape_operator(structure, [1.0, 0.0, 0.0], np.zeros(3))
    with pytest.raises(InputError):
        st.shape_operator(structure, [0.0, 2.0, 0.0], np.zeros(3))


def test_normal_coefficients_must_be_unit(build):
    structure = build("full-tangent-3")
    frame = st.FrameState(structure, np.zeros((2, 3)))
    with pytest.raises(InputError):
        st.NormalField(frame, np.array([[1.0, 1.0], [0.0, 1.0]]))
    with pytest.raises(InputError):
        st.NormalField(frame, np.ones((2, 3)) / np.sqrt(3))


def test_shape_operator_is_symmetric(any_builtin, samples):
    points = samples(any_builtin)
    y = np.zeros((points.shape[0], any_builtin.p))
    y[:, 0] = 1.0
    field = st.NormalField(st.FrameState(any_builtin, points), y)
    assert field.asymmetry.max() < 1e-10
    A = field.A.value
    np.testing.assert_allclose(A, np.swapaxes(A, -1, -2), atol=1e-15)


def test_shape_operator_matches_second_fundamental_form(any_builtin, samples):
    points = samples(any_builtin)
    n = any_builtin.n
    frame = st.FrameState(any_builtin, points)
    sf = st.second_fundamental(any_builtin, points, frame=frame)
    for a in range(any_builtin.p):
        y = np.zeros((points.shape[0], any_builtin.p))
        y[:, a] = 1.0
        A = st.NormalField(frame, y).A.value
        np.testing.assert_allclose(A, sf.h[:, n + a], atol=1e-10)
    assert sf.integrability.max() < 1e-10


def test_curvature_p_equals_riemann_when_d_is_tm(build, rng):
    structure = build("full-tangent-3")
    point = np.array([0.3, 1.7, 4.2])
    X, Y, U = rng.standard_normal((3, 3))
    slot = geometry.riemann(structure.metric, point[None, :])
    expected = slot.apply(X, Y, U)[0]
    np.testing.assert_allclose(st.curvature_P(structure, X, Y, U, point[None, :])[0], expected, atol=1e-10)


def test_induced_curvature_is_antisymmetric(build):
    frame = st.FrameState(build("subriemannian-4-2-1"), np.array([[0.1, 0.9, 2.3, 4.4], [3.0, 1.0, 0.2, 5.9]]))
    R = frame.RPf
    np.testing.assert_allclose(R, -np.swapaxes(R, -2, -3), atol=1e-10)


def test_codazzi_type_equation(any_builtin, samples):
    points = samples(any_builtin, 20)
    y = np.random.default_rng(5).standard_normal((20, any_builtin.p))
    y /= np.linalg.norm(y, axis=-1, keepdims=True)
    field = st.NormalField(st.FrameState(any_builtin, points), y)
    assert st.codazzi_residual(field).max() < 1e-8
    if any_builtin.full_tangent:
        assert st.classical_codazzi_residual(field).max() < 1e-8


def test_gaussian_p_curvature_needs_curves_in_surfaces(build):
    with pytest.raises(InputError):
        st.gaussian_P_curvature(build("full-tangent-3"), np.zeros((1, 3)))


def test_flat_torus_scalars_vanish(build):
    structure = build("flat-torus-3-1-1")
    scalars = st.curvature_scalars(structure, np.zeros((2, 3)), y=[1.0])
    assert not scalars["S_mix_P"].any()
    assert not scalars["ric_P"].any()
    assert not scalars["K_P"].any()


def test_describe(build):
    summary = build("subriemannian-4-2-1").describe()
    assert summary["rank_D"] == 3 and summary["rank_D_tilde"] == 1
    assert summary["full_tangent"] is False


def test_unvalidated_structure_defers_checks():
    structure = st.SubRiemannianStructure(_metric(["cos(x1)", "1", "1"]), 1, 1, validate=False)
    with pytest.raises(ValidationError):
        structure.validate()



def test_adapted_frame_on_a_tilted_distribution():
    spans = [["1", "0", "0"], ["0", "1", "1"]]
    structure = st.SubRiemannianStructure(_metric(["1", "1", "1"]), 1, 1, spans)
    E = st.adapted_frame(structure, np.array([[0.2, 1.0, 3.0]])).E.value[0]
    s = 1.0 / np.sqrt(2.0)
    np.testing.assert_allclose(E[:, 0], [1.0, 0.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(E[:, 1], [0.0, s, s], atol=1e-15)
    np.testing.assert_allclose(E[:, 2], [0.0, s, -s], atol=1e-15)


def test_orthoprojector_on_flat_torus(build):
    P = st.orthoprojector(build("flat-torus-3-1-1"), np.array([[0.5, 2.0, 4.0], [6.0, 0.1, 1.0]])).value
    np.testing.assert_allclose(P, np.broadcast_to(np.diag([1.0, 1.0, 0.0]), P.shape), atol=1e-15)


def _field(components, points):
    return jets.stack([expr.evaluate_jet(expr.parse(c), points) for c in components], axis=-1)


def test_induced_connection_is_levi_civita_when_d_is_tm(build, rng):
    structure = build("full-tangent-3")
    points = rng.uniform(0.0, 2.0 * np.pi, size=(4, 3))
    U = _field(["sin(x2)", "1 + cos(x1 + x3)", "0.5*sin(x1)"], points)
    X = rng.standard_normal(3)
    induced = st.induced_connection(structure, X, U, points)
    np.testing.assert_allclose(induced, geometry.covariant_derivative_field(structure.metric, U, X, points), atol=1e-12)


def test_induced_connection_of_constant_field_on_flat_torus(build, rng):
    points = rng.uniform(0.0, 2.0 * np.pi, size=(3, 3))
    U = jets.Jet.constant(np.broadcast_to([1.0, 2.0, 0.5], (3, 3)), dim=3)
    out = st.induced_connection(build("flat-torus-3-1-1"), rng.standard_normal(3), U, points)
    np.testing.assert_allclose(out, 0.0, atol=1e-15)


def test_induced_connection_stays_in_d(build, rng):
    structure = build("subriemannian-4-2-1")
    points = rng.uniform(0.0, 2.0 * np.pi, size=(5, 4))
    U = _field(["cos(x3)", "sin(x4)", "1", "0.2*cos(x1)"], points)
    out = st.induced_connection(structure, rng.standard_normal(4), U, points)
    P = st.orthoprojector(structure, points).value
    np.testing.assert_allclose(np.einsum("...kl,...l->...k", P, out), out, atol=1e-12)
