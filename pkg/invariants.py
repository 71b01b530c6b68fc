"""
Power sums, elementary symmetric functions and Newton transformations of
self-adjoint leaf operators.

The array-level helpers accept a plain matrix (..., n, n), a batch of them,
or a matrix jet, so the same code yields values and directional derivatives.
"""

from dataclasses import dataclass

import numpy as np

import expr
import jets
import settings
from errors import ConsistencyError, InputError


@dataclass(frozen=True)
class SymmetricOperator:
    entries: np.ndarray

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=float)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise InputError(f"operator must be a square matrix, got shape {entries.shape}")
        if np.abs(entries - entries.T).max(initial=0.0) > 1e-12 * max(1.0, np.abs(entries).max(initial=0.0)):
            raise InputError("operator entries are not symmetric")
        object.__setattr__(self, "entries", entries)

    @property
    def n(self):
        return self.entries.shape[0]


def _entries(A):
    return A.entries if isinstance(A, SymmetricOperator) else A


def _size(M):
    return M.shape[-1]


def matmul(a, b):
    return jets.einsum("...ij,...jk->...ik", a, b)


def trace(M):
    return jets.einsum("...ii->...", M)


def scale(s, M):
    """Scalar field times matrix field, broadcasting the scalar over the two matrix axes."""
    if isinstance(s, jets.Jet):
        return s.expand(-1).expand(-1) * M
    s = np.asarray(s, dtype=float)
    return M * s[..., None, None]


def identity_like(M):
    n = _size(M)
    shape = np.shape(jets.value_of(M))
    return np.broadcast_to(np.eye(n), shape).copy()


def matrix_powers(M, count):
    """[M^0, M^1, ..., M^count]."""
    powers = [identity_like(M)]
    if count >= 1:
        powers.append(M)
    for _ in range(2, count + 1):
        powers.append(matmul(powers[-1], M))
    return powers


def power_sums(M, count):
    """[tau_1, ..., tau_count]."""
    powers = matrix_powers(M, count)
    return [trace(P) for P in powers[1:]]


def elementary_from_power_sums(taus, count):
    """[sigma_0, ..., sigma_count] by Newton's identities; entries past len(taus) are 0."""
    sigmas = [1.0]
    for k in range(1, count + 1):
        if k > len(taus):
            sigmas.append(0.0)
            continue
        total = 0.0
        for i in range(1, k + 1):
            term = sigmas[k - i] * taus[i - 1]
            total = total + term if i % 2 == 1 else total - term
        sigmas.append(total / k)
    return sigmas


def newton_recursive(M, r, sigmas):
    T = identity_like(M)
    for s in range(1, r + 1):
        T = scale(sigmas[s], identity_like(M)) - matmul(M, T)
    return T


def newton_explicit(M, r, sigmas):
    powers = matrix_powers(M, r)
    total = 0.0
    for j in range(r + 1):
        term = scale(sigmas[r - j], powers[j])
        total = total + term if j % 2 == 0 else total - term
    return total


# --- operations on a single operator --------------------------------------


def tau(A, k):
    M = _entries(A)
    if k < 1:
        raise InputError(f"power-sum index must be >= 1, got {k}")
    return float(power_sums(M, k)[-1])


def sigma(A, r):
    M = _entries(A)
    n = _size(M)
    if not 0 <= r <= n:
        raise InputError(f"sigma index {r} outside 0..{n}")
    return float(elementary_from_power_sums(power_sums(M, r), r)[r])


def newton_transform(A, r):
    """T_r(A), computed recursively and explicitly and cross-checked."""
    M = _entries(A)
    n = _size(M)
    if not 0 <= r <= n:
        raise InputError(f"Newton transformation index {r} outside 0..{n}")
    sigmas = elementary_from_power_sums(power_sums(M, r), r)
    recursive = newton_recursive(M, r, sigmas)
    explicit = newton_explicit(M, r, sigmas)
    scale_ = max(1.0, float(np.abs(recursive).max(initial=0.0)))
    gap = float(np.abs(np.asarray(recursive) - np.asarray(explicit)).max(initial=0.0))
    if gap > settings.NEWTON_FORM_TOLERANCE * scale_:
        raise ConsistencyError(f"recursive and explicit T_{r} differ by {gap:.3e}")
    return SymmetricOperator(0.5 * (recursive + recursive.T))


# --- coefficient recipes --------------------------------------------------


class CoefficientRecipe:
    """
    Coefficients f_0..f_{n-1} of a general transform sum_j f_j(tau_1..tau_n) A^j.

    Either the builtin ``newton(r)`` (f_j = (-1)^j sigma_{r-j}) or one expression
    per coefficient in the variables t1..tn, separated by ';'.
    """

    def __init__(self, n, newton=None, expressions=None):
        self.n = n
        self.newton = newton
        self.expressions = expressions
        if newton is not None:
            if not 0 <= newton < n:
                raise InputError(f"newton({newton}) needs 0 <= r < n = {n}")
        elif expressions is None or len(expressions) != n:
            count = 0 if expressions is None else len(expressions)
            raise InputError(f"recipe needs exactly {n} coefficient expressions, got {count}")
        else:
            allowed = {f"t{i}" for i in range(1, n + 1)}
            for index, node in enumerate(expressions):
                if expr.coordinates(node):
                    raise InputError(f"recipe coefficient f{index} must not use chart coordinates")
                unknown = set(expr.parameters(node)) - allowed
                if unknown:
                    raise InputError(f"recipe coefficient f{index} uses unknown variables {sorted(unknown)}")

    @classmethod
    def parse(cls, text, n):
        text = text.strip()
        if text.startswith("newton(") and text.endswith(")"):
            try:
                r = int(text[len("newton(") : -1])
            except ValueError:
                raise InputError(f"bad recipe {text!r}")
            return cls(n, newton=r)
        parts = [part for part in text.split(";")]
        return cls(n, expressions=[expr.parse(part) for part in parts])

    def describe(self):
        if self.newton is not None:
            return f"newton({self.newton})"
        return "; ".join(expr.pretty(node) for node in self.expressions)

    def coefficients(self, taus):
        """[f_0, ..., f_{n-1}] from [tau_1, ..., tau_n] (floats, arrays or jets)."""
        if self.newton is not None:
            sigmas = elementary_from_power_sums(taus, self.newton)
            return [
                ((-1.0) ** j) * sigmas[self.newton - j] if j <= self.newton else 0.0 for j in range(self.n)
            ]
        bindings = {f"t{i + 1}": t for i, t in enumerate(taus)}
        return [expr.evaluate_bound(node, bindings) for node in self.expressions]


def general_transform(A, recipe):
    M = _entries(A)
    n = _size(M)
    if recipe.n != n:
        raise InputError(f"recipe arity {recipe.n} does not match operator size {n}")
    powers = matrix_powers(M, n)
    f = recipe.coefficients(power_sums(M, n))
    total = np.zeros_like(M)
    for k in range(n):
        total = total + np.asarray(f[k], dtype=float) * powers[k]
    return SymmetricOperator(0.5 * (total + total.T))
