"""
Periodic charts, metric fields and the Levi-Civita connection.

Every field is evaluated on a batch of points at once: a point array has
shape (..., m) and tensor jets carry that batch shape in front of their
tensor indices. Index layout conventions used throughout:

    G[i, j]          g_ij
    gamma[k, i, j]   Gamma^k_ij
    R[l, k, i, j]    R^l_kij, i.e. R(d_i, d_j) d_k = R^l_kij d_l
"""

import itertools
import logging
from dataclasses import dataclass

import numpy as np

import expr
import jets
import settings
from errors import GeometryError, InputError, ValidationError

log = logging.getLogger(__name__)

PERIOD = 2.0 * np.pi


@dataclass(frozen=True)
class TorusChart:
    dim: int

    def __post_init__(self):
        if not 2 <= self.dim <= 4:
            raise InputError(f"chart dimension must be between 2 and 4, got {self.dim}")

    def reduce(self, points):
        return np.mod(np.asarray(points, dtype=float), PERIOD)

    def grid(self, counts, axes=None, base=None):
        """Uniform periodic nodes along ``axes`` (default: all), other coordinates fixed at ``base``."""
        axes = list(range(self.dim)) if axes is None else list(axes)
        if np.isscalar(counts):
            counts = [int(counts)] * len(axes)
        if len(counts) != len(axes):
            raise InputError(f"expected {len(axes)} node counts, got {len(counts)}")
        base = np.zeros(self.dim) if base is None else np.asarray(base, dtype=float)
        lines = [np.arange(n) * (PERIOD / n) for n in counts]
        nodes = np.array(list(itertools.product(*lines)), dtype=float).reshape(-1, len(axes))
        points = np.tile(base, (nodes.shape[0], 1))
        points[:, axes] = nodes
        return points


class MetricField:
    """Symmetric matrix of expressions, upper triangle given, parameters late-bound."""

    def __init__(self, entries, params=None):
        self.dim = len(entries)
        self.params = dict(params or {})
        self.entries = [[None] * self.dim for _ in range(self.dim)]
        for i in range(self.dim):
            for j in range(i, self.dim):
                node = entries[i][j]
                if isinstance(node, str):
                    node = expr.parse(node)
                expr.check_bindings(node, self.dim, self.params, where=f"metric entry g{i + 1}{j + 1}")
                self.entries[i][j] = self.entries[j][i] = node

    def values(self, points):
        points = np.asarray(points, dtype=float)
        rows = [
            np.stack([np.asarray(expr.evaluate(self.entries[i][j], points, self.params)) for j in range(self.dim)], -1)
            for i in range(self.dim)
        ]
        return np.stack(rows, axis=-2)

    def jet(self, points, order=settings.JET_ORDER):
        points = np.asarray(points, dtype=float)
        cache = {}
        for i in range(self.dim):
            for j in range(i, self.dim):
                cache[i, j] = cache[j, i] = expr.evaluate_jet(self.entries[i][j], points, self.params, order)
        rows = [jets.stack([cache[i, j] for j in range(self.dim)], axis=-1) for i in range(self.dim)]
        return jets.stack(rows, axis=-2)


def _positive_definite_witness(values, points):
    eigen = np.linalg.eigvalsh(values)
    smallest = eigen[..., 0].reshape(-1)
    worst = int(np.argmin(smallest))
    if smallest[worst] > 0.0:
        return None
    return points.reshape(-1, points.shape[-1])[worst]


def check_positive_definite(values, points):
    try:
        np.linalg.cholesky(values)
    except np.linalg.LinAlgError:
        witness = _positive_definite_witness(values, points)
        raise GeometryError("metric is not positive definite", witness)
    witness = _positive_definite_witness(values, points)
    if witness is not None:
        raise GeometryError("metric is not positive definite", witness)


def validate_metric(metric, samples=settings.VALIDATION_SAMPLES):
    """Positive definiteness and numerical 2*pi periodicity on a coarse grid."""
    chart = TorusChart(metric.dim)
    points = chart.grid(samples)
    values = metric.values(points)
    try:
        check_positive_definite(values, points)
    except GeometryError as exc:
        raise ValidationError("positive-definite", "metric fails Cholesky", exc.witness)
    for axis in range(metric.dim):
        shifted = points.copy()
        shifted[:, axis] += PERIOD
        drift = np.abs(metric.values(shifted) - values).max(axis=(-1, -2))
        worst = int(np.argmax(drift))
        if drift[worst] >= settings.PERIODICITY_TOLERANCE:
            raise ValidationError(
                "periodicity",
                f"metric changes by {drift[worst]:.3e} under a shift of x{axis + 1} by 2*pi",
                points[worst],
            )
    log.debug("metric validated on %d samples", points.shape[0])


def metric_jet(metric, points, order=settings.JET_ORDER):
    points = TorusChart(metric.dim).reduce(points)
    G = metric.jet(points, order)
    check_positive_definite(G.value, points)
    return G


def volume_density(metric, points):
    return np.sqrt(np.linalg.det(metric.values(points)))


def christoffel_from(G, Ginv):
    dG = G.derivative()  # dG[i, j, l] = d_l g_ij
    lowered = jets.einsum("...jli->...ijl", dG) + jets.einsum("...ilj->...ijl", dG) - dG
    return jets.einsum("...kl,...ijl->...kij", Ginv, lowered) * 0.5


def riemann_from(gamma):
    """R[l, k, i, j] from a Christoffel jet; result loses one jet order."""
    dgamma = gamma.derivative()  # dgamma[l, j, k, i] = d_i Gamma^l_jk
    lower = gamma.truncate(dgamma.order)
    return (
        jets.einsum("...ljki->...lkij", dgamma)
        - jets.einsum("...likj->...lkij", dgamma)
        + jets.einsum("...liq,...qjk->...lkij", lower, lower)
        - jets.einsum("...ljq,...qik->...lkij", lower, lower)
    )


@dataclass
class Connection:
    """Metric, inverse metric and Christoffel symbols as jets over a batch of points."""

    points: np.ndarray
    G: jets.Jet
    Ginv: jets.Jet
    gamma: jets.Jet

    @property
    def dim(self):
        return self.G.dim


def connection(metric, points, order=settings.JET_ORDER):
    G = metric_jet(metric, points, order)
    Ginv = jets.inverse(G)
    return Connection(TorusChart(metric.dim).reduce(points), G, Ginv, christoffel_from(G, Ginv))


def christoffel(metric, points):
    """Gamma^k_ij jets (one retained derivative order beyond the values)."""
    return connection(metric, points).gamma


@dataclass
class CurvatureSlot:
    point: np.ndarray
    R: np.ndarray
    G: np.ndarray

    def apply(self, X, Y, U):
        """R(X, Y)U as a coordinate vector."""
        return np.einsum("...lkij,...i,...j,...k->...l", self.R, X, Y, U)

    def lowered(self):
        """R_{lkij} = g_lq R^q_kij, so that <R(d_i, d_j) d_k, d_l> = lowered[l, k, i, j]."""
        return np.einsum("...lq,...qkij->...lkij", self.G, self.R)


def riemann(metric, points):
    conn = connection(metric, points)
    R = riemann_from(conn.gamma)
    return CurvatureSlot(conn.points, R.value, conn.G.value)


def covariant_jacobian(gamma, V):
    """DV[k, i] = d_i V^k + Gamma^k_ij V^j, i.e. (nabla_{d_i} V)^k, as a jet."""
    return V.derivative() + jets.einsum("...kij,...j->...ki", gamma.truncate(V.order - 1), V)


def covariant_derivative_field(metric, V, X, points):
    """(nabla_X V)^k for a jet-valued vector field V of base shape (..., m)."""
    gamma = christoffel(metric, points)
    D = covariant_jacobian(gamma, V)
    return np.einsum("...ki,...i->...k", D.value, np.asarray(X, dtype=float))
