import itertools
import math
import sys

import numpy as np
import pytest

import quadrature
import settings
from errors import DegeneracyError, InputError


def _exponents(p, total):
    return [lam for lam in itertools.product(range(total + 1), repeat=p) if sum(lam) <= total]


@pytest.mark.parametrize("p", [1, 2, 3])
def test_sphere_schemes_reproduce_moments(p):
    scheme = quadrature.SphereScheme(p, 16)
    for lam in _exponents(p, 4):
        numeric = math.fsum(scheme.weights * np.prod(scheme.nodes ** np.array(lam), axis=-1))
        assert numeric == pytest.approx(quadrature.moment_integral(lam), abs=1e-10)


def test_circle_length_is_exact():
    scheme = quadrature.SphereScheme(2, 64)
    assert abs(math.fsum(scheme.weights) - 2.0 * math.pi) < 1e-13
    assert abs(quadrature.moment_integral([0, 0]) - 2.0 * math.pi) < 1e-13


@pytest.mark.parametrize("p, volume", [(1, 2.0), (2, 2.0 * math.pi), (3, 4.0 * math.pi)])
def test_sphere_volumes(p, volume):
    assert quadrature.sphere_volume(p) == pytest.approx(volume, rel=1e-15)
    assert quadrature.moment_integral([0] * p) == pytest.approx(volume, rel=1e-15)


def test_odd_moments_vanish():
    assert quadrature.moment_integral([1, 2]) == 0.0
    assert quadrature.moment_integral([2, 2, 3]) == 0.0


def test_scheme_arguments_are_checked():
    with pytest.raises(InputError):
        quadrature.GridScheme((8, 3))
    with pytest.raises(InputError):
        quadrature.SphereScheme(2, 7)
    with pytest.raises(InputError):
        quadrature.SphereScheme(4, 8)
    with pytest.raises(InputError):
        quadrature.moment_integral([-1, 2])


@pytest.mark.parametrize("p", [1, 2, 3])
def test_sphere_nodes_are_balanced(p):
    scheme = quadrature.SphereScheme(p, 8)
    np.testing.assert_allclose(np.linalg.norm(scheme.nodes, axis=-1), 1.0, atol=1e-15)
    np.testing.assert_allclose(scheme.weights @ scheme.nodes, 0.0, atol=1e-13)


def test_torus_integrals(build):
    metric = build("flat-torus-3-1-1").metric
    grid = quadrature.GridScheme.uniform(3, 8)
    assert float(quadrature.integrate_torus(lambda x: 1.0, metric, grid)) == pytest.approx((2 * math.pi) ** 3)
    value = quadrature.integrate_torus(lambda x: np.cos(x[:, 0]) ** 2, metric, grid).value
    assert value == pytest.approx((2 * math.pi) ** 3 / 2, rel=1e-14)


def test_warped_volume(build):
    structure = build("warped-torus")
    grid = quadrature.GridScheme.uniform(3, 24)
    eps = structure.metric.params["eps"]
    # vol = (2 pi)^2 * int exp(eps sin t) dt = (2 pi)^3 I_0(eps)
    bessel = math.fsum((eps / 2) ** (2 * k) / math.factorial(k) ** 2 for k in range(20))
    volume = quadrature.integrate_torus(lambda x: 1.0, structure.metric, grid).value
    assert volume == pytest.approx((2 * math.pi) ** 3 * bessel, rel=1e-13)


def test_leaf_and_fiber_integrals(build):
    structure = build("full-tangent-3")
    leaf = quadrature.integrate_leaf(lambda x: 1.0, build("flat-torus-3-1-1"), np.zeros(3), quadrature.GridScheme((16,)))
    assert leaf.value == pytest.approx(2 * math.pi)
    sphere = quadrature.SphereScheme(2, 16)
    fiber = quadrature.integrate_fiber(lambda frame, y: y[..., 0] ** 2, structure, np.array([0.5, 1.0, 2.0]), sphere)
    assert fiber.value == pytest.approx(math.pi, rel=1e-14)


def test_bundle_integral_of_constant(build):
    structure = build("flat-torus-4-2-1")
    grid = quadrature.GridScheme.uniform(4, 4)
    sphere = quadrature.SphereScheme(1)

    def constant(frame, y):
        return np.ones(y.shape[:-1])

    total = quadrature.integrate_bundle(constant, structure, grid, sphere)
    assert total.value == pytest.approx(2.0 * (2 * math.pi) ** 4, rel=1e-14)
    assert total.magnitude == total.value


def test_components_are_integrated_separately(build):
    structure = build("flat-torus-3-1-1")
    grid = quadrature.GridScheme.uniform(3, 4)

    def pair(frame):
        x = frame.points
        return np.stack([np.ones(x.shape[0]), np.sin(x[:, 1])], axis=-1)

    one, sine = quadrature.integrate_frames(pair, structure, grid, components=2)
    assert one.value == pytest.approx((2 * math.pi) ** 3)
    assert abs(sine.value) < 1e-12
    assert sine.magnitude > 0.0


def test_worker_count_does_not_change_results(build, monkeypatch):
    structure = build("full-tangent-3")
    grid = quadrature.GridScheme.uniform(3, 12)
    f = lambda x: np.exp(np.sin(x[:, 0] + 2 * x[:, 2])) * np.cos(x[:, 1])  # noqa: E731
    monkeypatch.setenv("FOLINT_THREADS", "1")
    serial = quadrature.integrate_torus(f, structure.metric, grid)
    monkeypatch.setenv("FOLINT_THREADS", "4")
    parallel = quadrature.integrate_torus(f, structure.metric, grid)
    assert serial == parallel


@pytest.mark.parametrize("raw", ["0", "-2", "many"])
def test_bad_thread_counts(monkeypatch, raw):
    monkeypatch.setenv("FOLINT_THREADS", raw)
    with pytest.raises(InputError):
        settings.worker_count()


@pytest.mark.skipif(sys.version_info < (3, 11), reason="exception notes need Python 3.11")
def test_chunk_failures_carry_the_node(monkeypatch):
    monkeypatch.setenv("FOLINT_THREADS", "1")
    points = np.zeros((3, 2))

    def task(chunk):
        raise DegeneracyError("span field 2 is nearly dependent", chunk[0])

    with pytest.raises(DegeneracyError) as info:
        quadrature._run(task, points)
    assert any("chunk starting at node" in note for note in info.value.__notes__)
