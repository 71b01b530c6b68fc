"""
F-divergences of leaf operator fields, the curvature operator R^P_{X,xi},
the closed divergence identities and the integrands of the fiber-divergence
proposition.

Every function works on a ``structure.NormalField`` (a batch of base points,
optionally with K fiber nodes per point) wrapped in a ``ShapeAlgebra``.
Leaf covectors are returned as arrays (..., n) with components <Div S, e_l>.
"""

from functools import cached_property

import numpy as np

import geometry
import invariants
import jets
import structure as st
from errors import InputError


class ShapeAlgebra:
    """Shape operator of a normal field with its powers, power sums and Newton data."""

    def __init__(self, field):
        self.field = field
        self.n = field.frame.n

    @cached_property
    def A(self):
        return self.field.A

    @cached_property
    def powers(self):
        """Values of A^0 .. A^{n+2}."""
        return invariants.matrix_powers(self.A.value, self.n + 2)

    @cached_property
    def taus(self):
        """Jets of tau_1 .. tau_{n+2}."""
        return invariants.power_sums(self.A, self.n + 2)

    def tau(self, k):
        return self.taus[k - 1]

    @cached_property
    def sigmas(self):
        """Jets of sigma_0 .. sigma_{n+2}; indices past n are exactly 0."""
        return invariants.elementary_from_power_sums(self.taus[: self.n], self.n + 2)

    def sigma_value(self, r):
        return jets.value_of(self.sigmas[r]) if r <= self.n else np.zeros(self.A.value.shape[:-2])

    def newton(self, r):
        """T_r(A) values (recursive form)."""
        sig = [jets.value_of(s) for s in self.sigmas]
        return invariants.newton_recursive(self.A.value, r, sig)

    def leaf_d(self, f):
        if isinstance(f, jets.Jet):
            return self.field.leaf_derivatives(f)
        return np.zeros(self.A.value.shape[:-1])

    def xi_d(self, f):
        if isinstance(f, jets.Jet):
            return self.field.xi_derivative(f)
        return np.zeros(self.A.value.shape[:-2])

    @cached_property
    def R_leaf(self):
        """Rx[j, i, c] = <R^P(e_i, e_c) xi, e_j> for leaf c."""
        return self.field.R_xi[..., : self.n]

    @cached_property
    def H_perp(self):
        """Leaf components of the mean curvature vector of NF."""
        n, rank = self.n, self.field.frame.rank
        return np.einsum("...iaa->...i", self.field.omega.value[..., :n, n:rank, n:rank])


# --- operator fields --------------------------------------------------------


class OperatorField:
    """A leaf operator field S(xi) built from the shape operator: A^k, T_r(A) or a general transform."""

    def __init__(self, kind, index=None, recipe=None):
        if kind not in ("power", "newton", "general"):
            raise InputError(f"unknown operator field kind {kind!r}")
        self.kind = kind
        self.index = index
        self.recipe = recipe

    @classmethod
    def power(cls, k):
        return cls("power", index=k)

    @classmethod
    def newton(cls, r):
        return cls("newton", index=r)

    @classmethod
    def general(cls, recipe):
        return cls("general", recipe=recipe)

    def jet(self, alg):
        A = alg.A
        if self.kind == "power":
            return invariants.matrix_powers(A, self.index)[-1] if self.index else jets.Jet.constant(alg.powers[0], A.dim, A.order)
        if self.kind == "newton":
            T = invariants.newton_recursive(A, self.index, alg.sigmas)
            return T if isinstance(T, jets.Jet) else jets.Jet.constant(T, A.dim, A.order)
        f = self.recipe.coefficients(alg.taus[: alg.n])
        powers = invariants.matrix_powers(A, alg.n - 1)
        total = jets.Jet.constant(np.zeros_like(A.value), A.dim, A.order)
        for k in range(alg.n):
            total = total + invariants.scale(f[k], powers[k])
        return total

    def values(self, alg):
        return self.jet(alg).value


def divF_direct(alg, operator):
    """Sum_i (nabla^F_{e_i} S) e_i from jets of S along the leaf frame."""
    NS = st.leaf_covariant_derivative(alg.field, operator.jet(alg))
    return np.einsum("...lii->...l", NS)


def curvature_operator(structure, X, xi, point):
    """R^P_{X,xi}: V -> (R^P(V, X) xi)^T as a leaf matrix [j, i] = <R^P(e_i, X) xi, e_j>."""
    frame = st.FrameState(structure, point)
    n, rank = structure.n, structure.rank
    GE = frame.GE.value
    X_comp = np.einsum("kb,k->b", GE, np.asarray(X, dtype=float))
    xi_comp = np.einsum("kb,k->b", GE, np.asarray(xi, dtype=float))
    if np.abs(X_comp[rank:]).max(initial=0.0) > 1e-9:
        raise InputError("X must lie in D")
    field = st.NormalField(frame, xi_comp[n:rank])
    return field.R_operator(X_comp[:rank])


# --- closed forms -------------------------------------------------------------


def _trace_curvature(alg, left, right):
    """tr(left R^P_{V_l, xi}) for V_l = right[:, l], summed into a leaf covector."""
    return np.einsum("...ba,...abc,...cl->...l", left, alg.R_leaf, right)


def _power_divergence(alg, k):
    total = 0.0
    for j in range(1, k + 1):
        degree = k - j + 1
        d_tau = alg.leaf_d(alg.tau(degree))
        total = total + np.einsum("...il,...i->...l", alg.powers[j - 1], d_tau) / degree
        total = total - _trace_curvature(alg, alg.powers[k - j], alg.powers[j - 1])
    return total


def divF_Ak_closed(alg, k):
    """<Div_F A^k, X> = sum_j [ (A^{j-1}X)(tau_{k-j+1}) / (k-j+1) - tr(A^{k-j} R^P_{A^{j-1}X, xi}) ]."""
    if not 1 <= k < alg.n + 2:
        raise InputError(f"power index k must satisfy 1 <= k < n + 2 = {alg.n + 2}, got {k}")
    return _power_divergence(alg, k)


def divF_newton_closed(alg, r):
    """<Div_F T_r, X> = sum_{j=1}^r tr(T_{r-j} R^P_{(-A)^{j-1}X, xi})."""
    if not 0 <= r < alg.n:
        raise InputError(f"Newton index r must satisfy 0 <= r < n = {alg.n}, got {r}")
    total = np.zeros(alg.A.value.shape[:-1])
    for j in range(1, r + 1):
        sign = (-1.0) ** (j - 1)
        total = total + sign * _trace_curvature(alg, alg.newton(r - j), alg.powers[j - 1])
    return total


def divF_general_closed(alg, recipe):
    if recipe.n != alg.n:
        raise InputError(f"recipe arity {recipe.n} does not match leaf dimension {alg.n}")
    f = recipe.coefficients(alg.taus[: alg.n])
    total = np.zeros(alg.A.value.shape[:-1])
    for k in range(alg.n):
        total = total + np.einsum("...il,...i->...l", alg.powers[k], alg.leaf_d(f[k]))
        if k:
            total = total + jets.value_of(f[k])[..., None] * _power_divergence(alg, k)
    return total


def bracket_term(alg, S):
    """sum_i <nabla_{Q[e_i, xi]} xi, S e_i>, Q the projection onto D~ (zero when D~ = 0)."""
    field = alg.field
    n, rank, m = field.frame.n, field.frame.rank, field.frame.m
    if rank == m:
        return np.zeros(S.shape[:-2])
    w = field.omega.value
    y = field.y
    q = np.einsum("...ubi,...b->...ui", w[..., rank:, n:rank, :n], y) - np.einsum(
        "...uib,...b->...ui", w[..., rank:, :n, n:rank], y
    )
    lean = np.einsum("...jbu,...b->...ju", w[..., :n, n:rank, rank:], y)
    E = np.einsum("...ui,...ju->...ji", q, lean)
    return np.einsum("...ji,...ji->...", S, E)


# --- fiber integrands -------------------------------------------------------


def _common_terms(alg, S):
    field = alg.field
    curvature = np.einsum("...ij,...ji->...", S, field.R_xixi)
    mixed = np.einsum("...aj,...ji,...ai->...", field.W, S, field.U)
    return curvature + mixed


def fiber_integrand_general(alg, recipe, include_bracket=False):
    """<Div_F A, Z> + tr(A R^P_{xi,xi}) + sum_k (f_k tau_{k+2} - f_k xi(tau_{k+1}) / (k+1)) + sum_a <A (nabla_{e_a} xi)^T, nabla_xi e_a>."""
    S = OperatorField.general(recipe).values(alg)
    f = recipe.coefficients(alg.taus[: alg.n])
    total = np.einsum("...l,...l->...", divF_general_closed(alg, recipe), alg.field.Z)
    total = total + _common_terms(alg, S)
    for k in range(alg.n):
        fk = jets.value_of(f[k])
        total = total + fk * jets.value_of(alg.tau(k + 2)) - fk * alg.xi_d(alg.tau(k + 1)) / (k + 1)
    if include_bracket:
        total = total + bracket_term(alg, S)
    return total


def fiber_integrand_newton(alg, r, include_bracket=False):
    """<Div_F T_r, Z> - xi(sigma_{r+1}) - (r+2) sigma_{r+2} + sigma_1 sigma_{r+1} + tr(T_r R^P_{xi,xi}) + mixed term."""
    T = alg.newton(r)
    total = np.einsum("...l,...l->...", divF_newton_closed(alg, r), alg.field.Z)
    total = total - alg.xi_d(alg.sigmas[r + 1]) - (r + 2) * alg.sigma_value(r + 2)
    total = total + alg.sigma_value(1) * alg.sigma_value(r + 1) + _common_terms(alg, T)
    if include_bracket:
        total = total + bracket_term(alg, T)
    return total


def closed_integrand_general(alg, recipe):
    """Integrand of the closed-manifold formula for a general transform."""
    S = OperatorField.general(recipe).values(alg)
    f = recipe.coefficients(alg.taus[: alg.n])
    Z = alg.field.Z
    tau1 = jets.value_of(alg.tau(1))
    total = np.einsum("...l,...l->...", divF_general_closed(alg, recipe), Z)
    for k in range(alg.n):
        fk = jets.value_of(f[k])
        tk = jets.value_of(alg.tau(k + 1))
        total = total + fk * jets.value_of(alg.tau(k + 2)) + tk / (k + 1) * (alg.xi_d(f[k]) - fk * tau1)
    total = total + _common_terms(alg, S) - np.einsum("...j,...ji,...i->...", alg.H_perp, S, Z)
    return total


def closed_integrand_newton(alg, r):
    T = alg.newton(r)
    Z = alg.field.Z
    total = np.einsum("...l,...l->...", divF_newton_closed(alg, r), Z) - (r + 2) * alg.sigma_value(r + 2)
    return total - np.einsum("...j,...ji,...i->...", alg.H_perp, T, Z) + _common_terms(alg, T)


def expanded_r2_integrand(alg):
    """Closed Newton integrand for r = 2 written out with sigma_1, sigma_2, A and A^2."""
    if alg.n < 3:
        raise InputError(f"the r = 2 expansion needs n >= 3, got n = {alg.n}")
    field = alg.field
    A, A2 = alg.powers[1], alg.powers[2]
    s1, s2 = alg.sigma_value(1), alg.sigma_value(2)
    T1 = invariants.scale(s1, alg.powers[0]) - A
    T2 = invariants.scale(s2, alg.powers[0]) - invariants.scale(s1, A) + A2
    Z = field.Z
    R_Z = np.einsum("...jic,...c->...ji", alg.R_leaf, Z)
    R_AZ = np.einsum("...jic,...cl,...l->...ji", alg.R_leaf, A, Z)
    div_term = np.einsum("...ij,...ji->...", T1, R_Z) - np.einsum("...ii->...", R_AZ)
    total = div_term - 4.0 * alg.sigma_value(4)
    total = total - np.einsum("...j,...ji,...i->...", alg.H_perp, T2, Z)
    return total + _common_terms(alg, T2)


def autoparallel_integrand(alg, index, kind):
    """tau_{k+2} - tau_{k+1} tau_1 / (k+1) + tr(A^k R_{xi,xi}), or (r+2) sigma_{r+2} - tr(T_r R_{xi,xi})."""
    R = alg.field.R_xixi
    if kind == "tau":
        k = index
        t1 = jets.value_of(alg.tau(1))
        return (
            jets.value_of(alg.tau(k + 2))
            - jets.value_of(alg.tau(k + 1)) * t1 / (k + 1)
            + np.einsum("...ij,...ji->...", alg.powers[k], R)
        )
    r = index
    return (r + 2) * alg.sigma_value(r + 2) - np.einsum("...ij,...ji->...", alg.newton(r), R)


# --- the frame lemma -------------------------------------------------------


def lemma31_sides(alg):
    """Both sides of the identity for <nabla^F_{e_i} Z_xi, e_j>, as leaf matrices [j, i]."""
    field = alg.field
    n, rank = field.frame.n, field.frame.rank
    omega = field.omega
    y_jet = field.y_jet
    w = omega.value
    normal_block = omega[..., :n, n:rank, n:rank]
    Z = jets.einsum("...jb,...b->...j", jets.einsum("...jba,...a->...jb", normal_block, y_jet), y_jet)
    dZ = field.leaf_derivatives(Z)  # dZ[j, i] = e_i(Z_j)
    lhs = dZ + np.einsum("...l,...jli->...ji", Z.value, w[..., :n, :n, :n])

    A = alg.A
    Av = A.value
    omega_xi = np.einsum("...jla,...a->...jl", w[..., :n, :n, n:rank], field.y)
    nabla_xi_A = field.xi_derivative(A) + np.einsum("...jl,...li->...ji", omega_xi, Av)
    nabla_xi_A = nabla_xi_A - np.einsum("...jl,...li->...ji", Av, omega_xi)
    mixed = np.einsum("...ai,...aj->...ji", field.W, field.U)
    rhs = alg.powers[2] + field.R_xixi - nabla_xi_A + mixed
    if rank < field.frame.m:
        q = np.einsum("...ubi,...b->...ui", w[..., rank:, n:rank, :n], field.y) - np.einsum(
            "...uib,...b->...ui", w[..., rank:, :n, n:rank], field.y
        )
        lean = np.einsum("...jbu,...b->...ju", w[..., :n, n:rank, rank:], field.y)
        rhs = rhs + np.einsum("...ui,...ju->...ji", q, lean)
    return lhs, rhs


def lemma31_check(alg):
    lhs, rhs = lemma31_sides(alg)
    return np.abs(lhs - rhs).max(axis=(-1, -2))


# --- divergence splitting -------------------------------------------------


def divergence_splitting_residual(frame, X):
    """
    Div X - Div_F X + <X, H_perp> + <X, H~> for a TF-valued jet field X of base shape (..., m).
    """
    n, rank, m = frame.n, frame.rank, frame.m
    D = geometry.covariant_jacobian(frame.conn.gamma, X).value  # D[k, i] = (nabla_{d_i} X)^k
    full = np.einsum("...kk->...", D)
    E = frame.E.value
    GE = frame.GE.value
    leaf = np.einsum("...kb,...ki,...ib->...", GE[..., :, :n], D, E[..., :, :n])
    x = np.einsum("...kb,...k->...b", GE, X.value)
    w = frame.omega.value
    h_perp = np.einsum("...c,...caa->...", x, w[..., :, n:rank, n:rank])
    h_tilde = np.einsum("...c,...cuu->...", x[..., :rank], w[..., :rank, rank:, rank:]) if rank < m else 0.0
    return full - leaf + h_perp + h_tilde
