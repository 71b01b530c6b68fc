"""
Foliated sub-Riemannian structure on a periodic chart.

The leaves are the coordinate sub-tori spanned by d_1..d_n, the distribution
D is spanned by n + p vector fields (the first n being d_1..d_n) and D~ is
its orthogonal complement. Everything is evaluated on batches of points:
an adapted frame over a batch is one jet of base shape (..., m, m) whose
columns are e_1..e_n (leaf), e_{n+1}..e_{n+p} (normal) and the D~ frame.

Frame index layout used below:

    E[k, b]          k-th coordinate of e_b
    omega[c, b, a]   <nabla_{e_a} e_b, e_c>
    omega_c[c, b, k] <nabla_{d_k} e_b, e_c>
    RPf[d, x, y, a]  <R^P(e_x, e_y) e_a, e_d>      (a runs over the D frame)
"""

import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np

import expr
import geometry
import jets
import settings
from errors import ConsistencyError, DegeneracyError, InputError, ValidationError
from invariants import SymmetricOperator

log = logging.getLogger(__name__)


def _unit_spans(m, count):
    return [["1" if k == j else "0" for k in range(m)] for j in range(count)]


class SubRiemannianStructure:
    def __init__(self, metric, n, p, spans=None, name="custom", validate=True):
        self.name = name
        self.metric = metric
        self.chart = geometry.TorusChart(metric.dim)
        m = metric.dim
        if n < 1 or p < 1 or n + p > m:
            raise ValidationError("ranks", f"need n >= 1, p >= 1 and n + p <= m, got n={n}, p={p}, m={m}")
        self.n, self.p = n, p
        spans = _unit_spans(m, n + p) if spans is None else spans
        if len(spans) != n + p:
            raise ValidationError("span-count", f"expected {n + p} span fields, got {len(spans)}")
        self.spans = []
        for j, field in enumerate(spans):
            if len(field) != m:
                raise ValidationError("span-shape", f"span field {j + 1} has {len(field)} components, chart has {m}")
            nodes = [expr.parse(c) if isinstance(c, str) else c for c in field]
            for k, node in enumerate(nodes):
                expr.check_bindings(node, m, metric.params, where=f"span {j + 1} component {k + 1}")
            self.spans.append(nodes)
        self.tilde_axes = list(range(n + p, m))
        if validate:
            self.validate()

    @property
    def m(self):
        return self.metric.dim

    @property
    def rank(self):
        return self.n + self.p

    @property
    def tilde_rank(self):
        return self.m - self.rank

    @property
    def full_tangent(self):
        return self.rank == self.m

    def span_jet(self, points, order=settings.JET_ORDER):
        """Jet of base shape (..., m, n + p) holding the span fields as columns."""
        points = np.asarray(points, dtype=float)
        columns = []
        for field in self.spans:
            comps = [expr.evaluate_jet(node, points, self.metric.params, order) for node in field]
            columns.append(jets.stack(comps, axis=-1))
        return jets.stack(columns, axis=-1)

    def validate(self, samples=settings.VALIDATION_SAMPLES):
        geometry.validate_metric(self.metric, samples)
        points = self.chart.grid(samples)
        spans = self.span_jet(points, order=0).value
        for j in range(self.n):
            unit = np.zeros(self.m)
            unit[j] = 1.0
            drift = np.abs(spans[..., j] - unit).max(axis=-1)
            if drift.max() > 0.0:
                worst = int(np.argmax(drift))
                raise ValidationError("leaf-span", f"span field {j + 1} must be the coordinate field d{j + 1}", points[worst])
        try:
            build_frame(self, points, order=0, tilde_axes=[])
        except DegeneracyError as exc:
            raise ValidationError("span-independence", str(exc.args[0]), exc.witness)
        chosen = []
        for axis in range(self.n, self.m):
            if len(chosen) == self.tilde_rank:
                break
            try:
                build_frame(self, points, order=0, tilde_axes=chosen + [axis])
            except DegeneracyError:
                continue
            chosen.append(axis)
        if len(chosen) != self.tilde_rank:
            raise ValidationError("complement", "no coordinate fields complete D to a frame of TM")
        self.tilde_axes = chosen
        log.debug("structure %s validated, D~ completed by axes %s", self.name, chosen)

    def describe(self):
        return {
            "name": self.name,
            "m": self.m,
            "n": self.n,
            "p": self.p,
            "rank_D": self.rank,
            "rank_D_tilde": self.tilde_rank,
            "full_tangent": self.full_tangent,
        }


# --- adapted frames -------------------------------------------------------


def _inner(G, a, b):
    return jets.einsum("...i,...i->...", a, jets.einsum("...ij,...j->...i", G, b))


def _coordinate_field(axis, points, dim, order):
    unit = np.zeros(np.shape(points)[:-1] + (dim,))
    unit[..., axis] = 1.0
    return jets.Jet.constant(unit, dim, order)


def _gram_schmidt(G, candidates, points, labels):
    basis = []
    for v, label in zip(candidates, labels):
        w = v
        for e in basis:
            w = w - e * _inner(G, e, w).expand(-1)
        norm2 = _inner(G, w, w)
        ratio = np.asarray(norm2.value / _inner(G, v, v).value).reshape(-1)
        worst = int(np.argmin(ratio))
        if ratio[worst] < settings.DEGENERACY_TOLERANCE:
            witness = np.asarray(points).reshape(-1, np.shape(points)[-1])[worst]
            raise DegeneracyError(f"{label} is nearly dependent on the previous frame fields", witness)
        basis.append(w / jets.sqrt(norm2).expand(-1))
    return basis


def build_frame(structure, points, G=None, order=settings.JET_ORDER, tilde_axes=None):
    """Gram-Schmidt over jets: d_1..d_n, then the normal spans, then the D~ completion."""
    points = np.asarray(points, dtype=float)
    m, n = structure.m, structure.n
    if G is None:
        G = geometry.metric_jet(structure.metric, points, order)
    spans = structure.span_jet(points, order)
    tilde_axes = structure.tilde_axes if tilde_axes is None else tilde_axes
    candidates = [_coordinate_field(k, points, m, order) for k in range(n)]
    candidates += [spans[..., :, j] for j in range(n, structure.rank)]
    candidates += [_coordinate_field(k, points, m, order) for k in tilde_axes]
    labels = [f"span field {j + 1}" for j in range(structure.rank)]
    labels += [f"complement field d{k + 1}" for k in tilde_axes]
    basis = _gram_schmidt(G, candidates, points, labels)
    return jets.stack(basis, axis=-1)


def induced_curvature_fields(conn, P, V):
    """
    R^P(d_x, d_y)V_a for D-valued jet fields V of base shape (..., m, A), order >= 2.

    Returns values RPc[k, x, y, a].
    """
    gamma = conn.gamma
    cov = V.derivative() + jets.einsum("...kil,...la->...kai", gamma, V)
    first = jets.einsum("...kl,...lai->...kai", P, cov)
    cov2 = first.derivative() + jets.einsum("...kjl,...lai->...kaij", gamma, first)
    second = jets.einsum("...kl,...laij->...kaij", P, cov2).value
    return np.einsum("...kayx->...kxya", second) - np.einsum("...kaxy->...kxya", second)


class FrameState:
    """Adapted frame and everything derived from it over one batch of points."""

    def __init__(self, structure, points, order=settings.JET_ORDER):
        self.structure = structure
        self.points = structure.chart.reduce(points)
        self.conn = geometry.connection(structure.metric, self.points, order)
        self.E = build_frame(structure, self.points, self.conn.G, order)
        log.debug("frame built on batch of shape %s", self.points.shape[:-1])

    @property
    def n(self):
        return self.structure.n

    @property
    def p(self):
        return self.structure.p

    @property
    def m(self):
        return self.structure.m

    @property
    def rank(self):
        return self.structure.rank

    @property
    def batch_ndim(self):
        return self.points.ndim - 1

    @cached_property
    def GE(self):
        return jets.einsum("...ij,...jb->...ib", self.conn.G, self.E)

    @cached_property
    def E_D(self):
        return self.E[..., :, : self.rank]

    @cached_property
    def DE(self):
        """DE[k, b, i] = (nabla_{d_i} e_b)^k."""
        return self.E.derivative() + jets.einsum("...kil,...lb->...kbi", self.conn.gamma, self.E)

    @cached_property
    def omega_c(self):
        return jets.einsum("...kc,...kbi->...cbi", self.GE, self.DE)

    @cached_property
    def omega(self):
        return jets.einsum("...cbi,...ia->...cba", self.omega_c, self.E)

    @cached_property
    def P(self):
        return jets.einsum("...ka,...la->...kl", self.E_D, self.GE[..., :, : self.rank])

    @cached_property
    def RPc(self):
        return induced_curvature_fields(self.conn, self.P, self.E_D)

    @cached_property
    def RPf(self):
        E = self.E.value
        return np.einsum("...kd,...kija,...ix,...jy->...dxya", self.GE.value, self.RPc, E, E, optimize=True)

    @cached_property
    def riemann(self):
        """Classical R[l, k, i, j] = R^l_kij from the Levi-Civita connection."""
        return geometry.riemann_from(self.conn.gamma).value

    @cached_property
    def Rf(self):
        """<R(e_x, e_y) e_z, e_d> as Rf[d, x, y, z]."""
        lowered = np.einsum("...lq,...qkij->...lkij", self.conn.G.value, self.riemann)
        E = self.E.value
        return np.einsum("...lkij,...ld,...kz,...ix,...jy->...dxyz", lowered, E, E, E, E, optimize=True)

    def gram(self):
        return np.einsum("...ka,...kb->...ab", self.GE.value, self.E.value)


def adapted_frame(structure, points, order=settings.JET_ORDER):
    return FrameState(structure, points, order)


def orthoprojector(structure, points):
    return FrameState(structure, points).P


def induced_connection(structure, X, U, points):
    """nabla^P_X U = P nabla_X (P U) for a jet vector field U of base shape (..., m)."""
    frame = FrameState(structure, points)
    PU = jets.einsum("...kl,...l->...k", frame.P, U)
    D = geometry.covariant_jacobian(frame.conn.gamma, PU)
    return np.einsum("...kl,...li,...i->...k", frame.P.value, D.value, np.asarray(X, dtype=float))


def curvature_P(structure, X, Y, U, points, coefficients=None):
    """
    R^P(X, Y)U at ``points``.

    U is extended by its D-frame coefficients; by default they are held
    constant, ``coefficients`` supplies another extension as a jet of base
    shape (..., n + p) whose value must match U's coefficients.
    """
    frame = FrameState(structure, points)
    X, Y, U = (np.asarray(v, dtype=float) for v in (X, Y, U))
    u = np.einsum("...ka,...k->...a", frame.GE.value[..., :, : frame.rank], U)
    if coefficients is None:
        return np.einsum("...kija,...i,...j,...a->...k", frame.RPc, X, Y, u)
    gap = np.abs(coefficients.value - u).max(initial=0.0)
    if gap > settings.UNIT_TOLERANCE:
        raise InputError(f"extension coefficients differ from U by {gap:.3e} at the base point")
    field = jets.einsum("...ka,...a->...k", frame.E_D, coefficients).expand(-1)
    R = induced_curvature_fields(frame.conn, frame.P, field)[..., 0]
    return np.einsum("...kij,...i,...j->...k", R, X, Y)


# --- unit normals ---------------------------------------------------------


def _lift(x, axis, extra):
    if not extra:
        return x
    if isinstance(x, jets.Jet):
        return x.expand(axis)
    return np.expand_dims(x, axis)


class NormalField:
    """
    Unit normals xi = sum_a y_a e_{n+a} over a frame batch, extended so that
    (nabla_v xi)^NF = 0 at the base points.

    ``y`` has shape batch + (p,) or batch + (K, p) for K fiber nodes per point.
    """

    def __init__(self, frame, y):
        y = np.asarray(y, dtype=float)
        if y.shape[-1] != frame.p:
            raise InputError(f"normal coefficients must have length p = {frame.p}, got {y.shape[-1]}")
        extra = y.ndim - 1 - frame.batch_ndim
        if extra not in (0, 1):
            raise InputError(f"normal coefficients of shape {y.shape} do not match the frame batch")
        length = np.abs(np.linalg.norm(y, axis=-1) - 1.0).max(initial=0.0)
        if length > settings.UNIT_TOLERANCE:
            raise InputError(f"normal is not a unit vector (|xi| - 1 = {length:.3e})")
        self.frame = frame
        self.y = y
        self.extra = extra
        self.axis = frame.batch_ndim

    def lift(self, x):
        return _lift(x, self.axis, self.extra)

    @cached_property
    def omega(self):
        return self.lift(self.frame.omega)

    @cached_property
    def E(self):
        return self.lift(self.frame.E.value)

    @cached_property
    def RPf(self):
        return self.lift(self.frame.RPf)

    @cached_property
    def y_jet(self):
        n, rank = self.frame.n, self.frame.rank
        omega_c = self.lift(self.frame.omega_c.value)[..., n:rank, n:rank, :]
        grad = -np.einsum("...abk,...b->...ak", omega_c, self.y)
        return jets.Jet._from_levels([self.y, grad], self.frame.m)

    @cached_property
    def vector(self):
        return np.einsum("...ka,...a->...k", self.E[..., :, self.frame.n : self.frame.rank], self.y)

    @cached_property
    def raw_shape(self):
        """A[j, i] = <A_xi e_i, e_j> as an order-1 jet, before symmetrization."""
        n, rank = self.frame.n, self.frame.rank
        return -jets.einsum("...jai,...a->...ji", self.omega[..., :n, n:rank, :n], self.y_jet)

    @cached_property
    def asymmetry(self):
        A = self.raw_shape.value
        return np.abs(A - np.swapaxes(A, -1, -2)).max(axis=(-1, -2))

    @cached_property
    def A(self):
        worst = float(np.max(self.asymmetry, initial=0.0))
        if worst > settings.ASYMMETRY_TOLERANCE:
            raise ConsistencyError(f"shape operator asymmetry {worst:.3e} exceeds tolerance")
        raw = self.raw_shape
        return (raw + jets.einsum("...ji->...ij", raw)) * 0.5

    @cached_property
    def Z(self):
        """Leaf components of (nabla_xi xi)^T."""
        n, rank = self.frame.n, self.frame.rank
        return np.einsum("...jba,...a,...b->...j", self.omega.value[..., :n, n:rank, n:rank], self.y, self.y)

    @cached_property
    def U(self):
        """U[a, i] = <nabla_{e_a} xi, e_i>."""
        n, rank = self.frame.n, self.frame.rank
        return np.einsum("...iba,...b->...ai", self.omega.value[..., :n, n:rank, n:rank], self.y)

    @cached_property
    def W(self):
        """W[a, i] = <nabla_xi e_a, e_i>."""
        n, rank = self.frame.n, self.frame.rank
        return np.einsum("...iab,...b->...ai", self.omega.value[..., :n, n:rank, n:rank], self.y)

    @cached_property
    def R_xi(self):
        """Rx[j, i, b] = <R^P(e_i, e_b) xi, e_j> for e_b in the D frame."""
        n, rank = self.frame.n, self.frame.rank
        return np.einsum("...jiba,...a->...jib", self.RPf[..., :n, :n, :rank, n:rank], self.y)

    @cached_property
    def R_xixi(self):
        """R^P_{xi,xi}[j, i] = <R^P(e_i, xi) xi, e_j>."""
        n, rank = self.frame.n, self.frame.rank
        return np.einsum("...jib,...b->...ji", self.R_xi[..., n:rank], self.y)

    def R_operator(self, X):
        """R^P_{X,xi}[j, i] = <R^P(e_i, X) xi, e_j> for X given by D-frame components."""
        return np.einsum("...jib,...b->...ji", self.R_xi, X)

    def _broadcast(self, x, f):
        return x.reshape(x.shape[:-2] + (1,) * (f.ndim - self.y.ndim + 1) + x.shape[-2:])

    def leaf_derivatives(self, f):
        """e_i(f) for a jet f; the leaf index is appended."""
        E_leaf = self._broadcast(self.E[..., :, : self.frame.n], f)
        return np.einsum("...k,...ki->...i", f.grad, E_leaf)

    def xi_derivative(self, f):
        v = self._broadcast(self.vector[..., None], f)[..., 0]
        return np.einsum("...k,...k->...", f.grad, v)


def shape_operator(structure, xi, point):
    """A_xi at a single point for a coordinate vector xi (unit, normal to TF, inside D)."""
    frame = FrameState(structure, point)
    xi = np.asarray(xi, dtype=float)
    components = np.einsum("kb,k->b", frame.GE.value, xi)
    n, rank = structure.n, structure.rank
    if abs(np.linalg.norm(components) - 1.0) > settings.UNIT_TOLERANCE:
        raise InputError(f"xi is not a unit vector (|xi| = {np.linalg.norm(components):.6g})")
    stray = np.abs(np.concatenate([components[:n], components[rank:]])).max(initial=0.0)
    if stray > settings.UNIT_TOLERANCE:
        raise InputError(f"xi is not a normal vector inside D (stray component {stray:.3e})")
    field = NormalField(frame, components[n:rank])
    return SymmetricOperator(field.A.value)


@dataclass
class SecondFundamentalData:
    points: np.ndarray
    h: np.ndarray
    h_perp: np.ndarray
    T_perp: np.ndarray
    H: np.ndarray
    H_perp: np.ndarray
    H_tilde: np.ndarray
    Z: list
    integrability: np.ndarray


def second_fundamental(structure, points, xi_list=(), frame=None):
    """
    Second fundamental forms and mean curvature vectors in full-frame components.

    h[c, i, j] = <nabla_{e_i} e_j, e_c> off TF, h_perp / T_perp the symmetric and
    antisymmetric parts of <nabla_{e_a} e_b, e_c> off NF.
    """
    frame = FrameState(structure, points) if frame is None else frame
    n, rank, m = structure.n, structure.rank, structure.m
    w = frame.omega.value
    h = np.swapaxes(w[..., :, :n, :n], -1, -2).copy()
    h[..., :n, :, :] = 0.0
    integrability = np.abs(h - np.swapaxes(h, -1, -2)).max(axis=(-1, -2, -3))
    normal = np.swapaxes(w[..., :, n:rank, n:rank], -1, -2)
    h_perp = 0.5 * (normal + np.swapaxes(normal, -1, -2))
    T_perp = 0.5 * (normal - np.swapaxes(normal, -1, -2))
    h_perp[..., n:rank, :, :] = 0.0
    T_perp[..., n:rank, :, :] = 0.0
    H = np.einsum("...cii->...c", h)
    H_perp = np.einsum("...caa->...c", h_perp)
    H_tilde = np.einsum("...cmm->...c", w[..., :, rank:, rank:]) if rank < m else np.zeros(w.shape[:-2])
    H_tilde = np.array(H_tilde)
    H_tilde[..., rank:] = 0.0
    Z = [NormalField(frame, np.broadcast_to(y, frame.points.shape[:-1] + (structure.p,))).Z for y in xi_list]
    return SecondFundamentalData(frame.points, h, h_perp, T_perp, H, H_perp, H_tilde, Z, integrability)


def curvature_scalars(structure, points, y=None, frame=None):
    frame = FrameState(structure, points) if frame is None else frame
    n, rank = structure.n, structure.rank
    RPf = frame.RPf
    scalars = {"S_mix_P": np.einsum("...iiaa->...", RPf[..., :n, :n, n:rank, n:rank])}
    if y is not None:
        field = NormalField(frame, np.broadcast_to(y, frame.points.shape[:-1] + (structure.p,)))
        scalars["ric_P"] = np.einsum("...ii->...", field.R_xixi)
    if n == 1 and structure.p == 1:
        scalars["K_P"] = RPf[..., 0, 0, 1, 1]
    return scalars


def gaussian_P_curvature(structure, points, frame=None):
    if structure.n != 1 or structure.p != 1:
        raise InputError(f"Gaussian P-curvature needs n = p = 1, got n={structure.n}, p={structure.p}")
    frame = FrameState(structure, points) if frame is None else frame
    return frame.RPf[..., 0, 0, 1, 1]


def leaf_covariant_derivative(field, S):
    """NS[j, i, l] = <(nabla^F_{e_l} S) e_i, e_j> for a leaf operator jet S[j, i]."""
    n = field.frame.n
    w = field.omega.value[..., :n, :n, :n]
    dS = field.leaf_derivatives(S)
    Sv = S.value
    return dS + np.einsum("...jtl,...ti->...jil", w, Sv) - np.einsum("...jt,...til->...jil", Sv, w)


def codazzi_residual(field):
    """(nabla^F_X A)Y - (nabla^F_Y A)X + (R^P(X, Y)xi)^T over leaf frame pairs, max norm."""
    n, rank = field.frame.n, field.frame.rank
    NA = leaf_covariant_derivative(field, field.raw_shape)
    curvature = np.einsum("...jlsa,...a->...jsl", field.RPf[..., :n, :n, :n, n:rank], field.y)
    residual = NA - np.swapaxes(NA, -1, -2) + curvature
    return np.abs(residual).max(axis=(-1, -2, -3))


def classical_codazzi_residual(field):
    """Codazzi equation for D = TM written with the ambient Riemann tensor."""
    n, rank = field.frame.n, field.frame.rank
    NA = leaf_covariant_derivative(field, field.raw_shape)
    Rf = field.lift(field.frame.Rf)
    curvature = np.einsum("...alsj,...a->...jsl", Rf[..., n:rank, :n, :n, :n], field.y)
    residual = NA - np.swapaxes(NA, -1, -2) - curvature
    return np.abs(residual).max(axis=(-1, -2, -3))
