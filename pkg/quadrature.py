"""
Quadrature over the torus, over compact coordinate leaves, over the unit
spheres of NF and over the normal sphere bundle.

Nodes are processed in chunks of CHUNK_SIZE points fanned out to a thread
pool; partial results are collected in submission order and summed with
math.fsum, so the result does not depend on the worker count.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import gamma

import geometry
import settings
import structure as st
from errors import FolintError, InputError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Integral:
    value: float
    magnitude: float  # integral of the absolute integrand

    def __float__(self):
        return self.value


@dataclass(frozen=True)
class GridScheme:
    counts: tuple

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        if any(c < 4 for c in counts):
            raise InputError(f"grid needs at least 4 nodes per axis, got {counts}")
        object.__setattr__(self, "counts", counts)

    @classmethod
    def uniform(cls, dim, count):
        return cls((count,) * dim)

    @property
    def cell(self):
        return math.prod(geometry.PERIOD / c for c in self.counts)

    def describe(self):
        return "x".join(str(c) for c in self.counts)


def sphere_volume(p):
    """vol(S^{p-1}) = 2 pi^{p/2} / Gamma(p/2)."""
    return 2.0 * math.pi ** (p / 2.0) / gamma(p / 2.0)


def moment_integral(lam):
    """Integral of y^lambda over the unit sphere S^{p-1}; zero for any odd exponent."""
    lam = [int(v) for v in lam]
    if any(v < 0 for v in lam):
        raise InputError(f"moment exponents must be non-negative, got {lam}")
    if any(v % 2 for v in lam):
        return 0.0
    numerator = math.prod(gamma((v + 1) / 2.0) for v in lam)
    return float(2.0 * numerator / gamma(sum(v + 1 for v in lam) / 2.0))


class SphereScheme:
    """
    Antipodally symmetric nodes on S^{p-1} (p <= 3).

    p = 1: the two points +1, -1 with unit weights; p = 2: ``count`` uniform
    angles; p = 3: Gauss-Legendre in cos(theta) (count // 2 nodes) times
    ``count`` uniform azimuths.
    """

    def __init__(self, p, count=settings.DEFAULT_SPHERE):
        self.p = p
        self.count = count
        if p == 1:
            self.nodes = np.array([[1.0], [-1.0]])
            self.weights = np.ones(2)
        elif p in (2, 3):
            if count < 4 or count % 2:
                raise InputError(f"sphere resolution must be even and >= 4, got {count}")
            phi = np.arange(count) * (2.0 * math.pi / count)
            if p == 2:
                self.nodes = np.stack([np.cos(phi), np.sin(phi)], axis=-1)
                self.weights = np.full(count, 2.0 * math.pi / count)
            else:
                t, wt = np.polynomial.legendre.leggauss(max(3, count // 2))
                s = np.sqrt(1.0 - t**2)
                self.nodes = np.stack(
                    [
                        (s[:, None] * np.cos(phi)[None, :]).reshape(-1),
                        (s[:, None] * np.sin(phi)[None, :]).reshape(-1),
                        np.repeat(t, count),
                    ],
                    axis=-1,
                )
                self.weights = np.repeat(wt, count) * (2.0 * math.pi / count)
        else:
            raise InputError(f"fiber dimension p must be 1, 2 or 3, got {p}")

    def __len__(self):
        return len(self.weights)

    def describe(self):
        return {"p": self.p, "nodes": len(self)}


def chunks(points):
    for start in range(0, points.shape[0], settings.CHUNK_SIZE):
        yield points[start : start + settings.CHUNK_SIZE]


def _run(task, points, components=None):
    """
    Evaluate ``task`` chunk by chunk and sum the contributions.

    With ``components`` the task returns a trailing axis of that length and
    one Integral per component is returned.
    """
    batches = list(chunks(points))
    log.debug("integrating %d nodes in %d chunks", points.shape[0], len(batches))
    width = 1 if components is None else components

    def guarded(chunk):
        try:
            return np.asarray(task(chunk), dtype=float).reshape(-1, width)
        except FolintError as exc:
            exc.add_note(f"while evaluating the chunk starting at node {list(map(float, chunk[0]))}")
            raise

    workers = settings.worker_count()
    if workers == 1 or len(batches) == 1:
        parts = [guarded(chunk) for chunk in batches]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(guarded, batches))
    contributions = np.concatenate(parts) if parts else np.zeros((0, width))
    integrals = [
        Integral(math.fsum(contributions[:, c]), math.fsum(np.abs(contributions[:, c]))) for c in range(width)
    ]
    return integrals[0] if components is None else integrals


def integrate_torus(f, metric, scheme):
    """sum of weight * f(node) * sqrt(det g(node)) over the grid."""
    chart = geometry.TorusChart(metric.dim)
    points = chart.grid(scheme.counts)

    def task(chunk):
        return np.asarray(f(chunk), dtype=float) * geometry.volume_density(metric, chunk) * scheme.cell

    return _run(task, points)


def integrate_leaf(f, structure, basepoint, scheme):
    """Integral over the coordinate leaf through ``basepoint`` with the induced volume."""
    n = structure.n
    points = structure.chart.grid(scheme.counts, axes=range(n), base=basepoint)

    def task(chunk):
        G = structure.metric.values(chunk)[..., :n, :n]
        return np.asarray(f(chunk), dtype=float) * np.sqrt(np.linalg.det(G)) * scheme.cell

    return _run(task, points)


def integrate_fiber(f, structure, point, scheme):
    """sum of weight * f(frame, y) over the sphere nodes y at a single point."""
    frame = st.FrameState(structure, point)
    values = np.asarray(f(frame, scheme.nodes), dtype=float)
    contributions = values * scheme.weights
    return Integral(math.fsum(contributions), math.fsum(np.abs(contributions)))


def fiber_nodes(scheme, batch):
    return np.broadcast_to(scheme.nodes, (batch,) + scheme.nodes.shape)


def _weighted(values, weights):
    values = np.asarray(values, dtype=float)
    return values * (weights[..., None] if values.ndim == weights.ndim + 1 else weights)


def _bundle_task(f, structure, sphere, measure):
    def task(chunk):
        frame = st.FrameState(structure, chunk)
        values = f(frame, fiber_nodes(sphere, chunk.shape[0]))
        return _weighted(values, sphere.weights[None, :] * measure(frame)[:, None])

    return task


def _frame_task(f, structure, measure):
    def task(chunk):
        frame = st.FrameState(structure, chunk)
        return _weighted(f(frame), measure(frame))

    return task


def _volume(grid, leaf_dim=None):
    def measure(frame):
        G = frame.conn.G.value
        if leaf_dim is not None:
            G = G[..., :leaf_dim, :leaf_dim]
        return np.sqrt(np.linalg.det(G)) * grid.cell

    return measure


def integrate_bundle(f, structure, grid, sphere, components=None):
    """Fubini: integral over M of the fiber integrals of f(frame, y), y of shape (B, K, p)."""
    points = structure.chart.grid(grid.counts)
    return _run(_bundle_task(f, structure, sphere, _volume(grid)), points, components)


def integrate_leaf_bundle(f, structure, basepoint, grid, sphere, components=None):
    """Integral over N_1F restricted to the leaf through ``basepoint``."""
    n = structure.n
    points = structure.chart.grid(grid.counts, axes=range(n), base=basepoint)
    return _run(_bundle_task(f, structure, sphere, _volume(grid, n)), points, components)


def integrate_frames(f, structure, grid, components=None):
    """Integral over M of a frame-level integrand f(frame) (no fiber)."""
    points = structure.chart.grid(grid.counts)
    return _run(_frame_task(f, structure, _volume(grid)), points, components)


def integrate_leaf_frames(f, structure, basepoint, grid, components=None):
    n = structure.n
    points = structure.chart.grid(grid.counts, axes=range(n), base=basepoint)
    return _run(_frame_task(f, structure, _volume(grid, n)), points, components)
