"""
Truncated multivariate Taylor jets (total order <= 3) over numpy arrays.

A Jet stores raw partial derivatives, not Taylor coefficients:

    value   shape S
    grad    shape S + (m,)
    hess    shape S + (m, m)
    third   shape S + (m, m, m)

S is an arbitrary leading shape. A batch of B points carrying an m x m matrix
field is one Jet with S = (B, m, m); derivative axes always trail.
Each jet records the order up to which its derivatives are exact; derived
fields (``derivative``) lose one order.
"""

import numpy as np

import settings
from errors import InputError, SingularityError

_LEFT = "UVW"
_RIGHT = "XYZ"


class Jet:
    __slots__ = ("dim", "order", "value", "grad", "hess", "third")
    __array_ufunc__ = None  # let ndarray (op) Jet fall through to the reflected method

    def __init__(self, value, grad=None, hess=None, third=None, *, dim, order=settings.JET_ORDER):
        if not 0 <= order <= 3:
            raise InputError(f"Jet order must be in 0..3, got {order}")
        self.dim = dim
        self.order = order
        self.value = np.asarray(value, dtype=float)
        self.grad = grad if order >= 1 else None
        self.hess = hess if order >= 2 else None
        self.third = third if order >= 3 else None

    # --- construction -------------------------------------------------

    @classmethod
    def constant(cls, value, dim, order=settings.JET_ORDER):
        value = np.asarray(value, dtype=float)
        levels = [value] + [np.zeros(value.shape + (dim,) * k) for k in range(1, order + 1)]
        return cls._from_levels(levels, dim)

    @classmethod
    def _from_levels(cls, levels, dim):
        shape = np.shape(levels[0])
        fitted = [np.asarray(levels[0], dtype=float)]
        for k, level in enumerate(levels[1:], start=1):
            level = np.asarray(level, dtype=float)
            target = shape + (dim,) * k
            if level.shape != target:
                level = np.broadcast_to(level, target)
            fitted.append(level)
        fitted += [None] * (4 - len(fitted))
        return cls(fitted[0], fitted[1], fitted[2], fitted[3], dim=dim, order=len(levels) - 1)

    def levels(self):
        return [self.value, self.grad, self.hess, self.third][: self.order + 1]

    # --- shape handling -----------------------------------------------

    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    def __getitem__(self, key):
        if not isinstance(key, tuple):
            key = (key,)
        levels = [lv[key + (slice(None),) * k] for k, lv in enumerate(self.levels())]
        return Jet._from_levels(levels, self.dim)

    def expand(self, axis):
        """Insert a unit base axis at ``axis`` (counted within the base shape)."""
        base = self.ndim + 1
        if axis < 0:
            axis += base
        levels = [np.expand_dims(lv, axis) for lv in self.levels()]
        return Jet._from_levels(levels, self.dim)

    def truncate(self, order):
        if order > self.order:
            raise InputError(f"cannot raise jet order from {self.order} to {order}")
        return Jet._from_levels(self.levels()[: order + 1], self.dim)

    def derivative(self):
        """Jet of the partial derivatives; the derivative index becomes the last base axis."""
        if self.order < 1:
            raise InputError("no derivative information left in an order-0 jet")
        return Jet._from_levels(self.levels()[1:], self.dim)

    # --- arithmetic -----------------------------------------------------

    def _check(self, other):
        if isinstance(other, Jet) and other.dim != self.dim:
            raise InputError(f"jet dimension mismatch: {self.dim} vs {other.dim}")

    def __add__(self, other):
        self._check(other)
        if isinstance(other, Jet):
            order = min(self.order, other.order)
            levels = [a + b for a, b in zip(self.levels()[: order + 1], other.levels())]
        else:
            levels = [self.value + np.asarray(other, dtype=float)] + self.levels()[1:]
        return Jet._from_levels(levels, self.dim)

    __radd__ = __add__

    def __neg__(self):
        return Jet._from_levels([-lv for lv in self.levels()], self.dim)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        self._check(other)
        if isinstance(other, Jet):
            order = min(self.order, other.order)
            levels = _leibniz(_outer_pair, self.levels(), other.levels(), order)
            return Jet._from_levels(levels, self.dim)
        other = np.asarray(other, dtype=float)
        levels = [lv * other.reshape(other.shape + (1,) * k) for k, lv in enumerate(self.levels())]
        return Jet._from_levels(levels, self.dim)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return divide(self, other)

    def __rtruediv__(self, other):
        return divide(other, self)

    def __pow__(self, exponent):
        if isinstance(exponent, Jet):
            raise InputError("jet exponents must be constants")
        return pow_const(self, float(exponent))

    def _compose(self, f0, f1, f2, f3):
        """Faa di Bruno through order 3 for a scalar function with derivatives f0..f3."""
        levels = [f0]
        g = self.grad
        if self.order >= 1:
            levels.append(f1[..., None] * g)
        if self.order >= 2:
            gg = g[..., :, None] * g[..., None, :]
            levels.append(f2[..., None, None] * gg + f1[..., None, None] * self.hess)
        if self.order >= 3:
            ggg = gg[..., None] * g[..., None, None, :]
            hg = self.hess[..., None] * g[..., None, None, :]
            levels.append(
                f3[..., None, None, None] * ggg
                + f2[..., None, None, None] * _sym3(hg)
                + f1[..., None, None, None] * self.third
            )
        return Jet._from_levels(levels, self.dim)

    def __repr__(self):
        return f"Jet(shape={self.shape}, dim={self.dim}, order={self.order})"


# --- Leibniz machinery ----------------------------------------------------


def _sym3(u):
    """u[x,y,z] + u[x,z,y] + u[y,z,x]: symmetrize a tensor whose last index is the odd one out."""
    return u + np.swapaxes(u, -1, -2) + np.moveaxis(u, -1, -3)


def _outer_pair(x, y, kx, ky):
    xs = x.reshape(x.shape + (1,) * ky)
    ys = y.reshape(y.shape[: y.ndim - ky] + (1,) * kx + y.shape[y.ndim - ky :])
    return xs * ys


def _einsum_pair(first, second, output):
    def pair(x, y, kx, ky):
        lx, ly = _LEFT[:kx], _RIGHT[:ky]
        return np.einsum(f"{first}{lx},{second}{ly}->{output}{lx}{ly}", x, y)

    return pair


def _leibniz(pair, a, b, order):
    out = [pair(a[0], b[0], 0, 0)]
    if order >= 1:
        out.append(pair(a[1], b[0], 1, 0) + pair(a[0], b[1], 0, 1))
    if order >= 2:
        cross = pair(a[1], b[1], 1, 1)
        out.append(pair(a[2], b[0], 2, 0) + cross + np.swapaxes(cross, -1, -2) + pair(a[0], b[2], 0, 2))
    if order >= 3:
        out.append(
            pair(a[3], b[0], 3, 0)
            + _sym3(pair(a[2], b[1], 2, 1))
            + _sym3(np.moveaxis(pair(a[1], b[2], 1, 2), -3, -1))
            + pair(a[0], b[3], 0, 3)
        )
    return out


# --- public operations ----------------------------------------------------


def seed_variable(index, point, order=settings.JET_ORDER):
    """Coordinate jet x_index at ``point`` (shape (m,) or a batch (..., m))."""
    point = np.asarray(point, dtype=float)
    dim = point.shape[-1]
    if not 0 <= index < dim:
        raise InputError(f"coordinate index {index} out of range for dimension {dim}")
    value = point[..., index]
    levels = [value]
    if order >= 1:
        grad = np.zeros(value.shape + (dim,))
        grad[..., index] = 1.0
        levels.append(grad)
    for k in range(2, order + 1):
        levels.append(np.zeros(value.shape + (dim,) * k))
    return Jet._from_levels(levels, dim)


def seed_point(point, order=settings.JET_ORDER):
    point = np.asarray(point, dtype=float)
    return [seed_variable(i, point, order) for i in range(point.shape[-1])]


def arith(op, a, b=None):
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "div":
        return divide(a, b)
    if op == "neg":
        return -a
    raise InputError(f"unknown jet operation {op!r}")


def divide(a, b):
    if isinstance(b, Jet):
        if np.any(b.value == 0.0):
            raise SingularityError("division by a jet with zero value")
        inverse_b = reciprocal(b)
        result = a * inverse_b
        quotient = (a.value if isinstance(a, Jet) else np.asarray(a, dtype=float)) / b.value
        return Jet._from_levels([quotient] + result.levels()[1:], result.dim)
    b = np.asarray(b, dtype=float)
    if np.any(b == 0.0):
        raise SingularityError("division by zero")
    if isinstance(a, Jet):
        levels = [lv / b.reshape(b.shape + (1,) * k) for k, lv in enumerate(a.levels())]
        return Jet._from_levels(levels, a.dim)
    return np.asarray(a, dtype=float) / b


def reciprocal(a):
    v = a.value
    if np.any(v == 0.0):
        raise SingularityError("reciprocal of a jet with zero value")
    r = 1.0 / v
    return a._compose(r, -r * r, 2.0 * r**3, -6.0 * r**4)


def sin(a):
    if not isinstance(a, Jet):
        return np.sin(a)
    s, c = np.sin(a.value), np.cos(a.value)
    return a._compose(s, c, -s, -c)


def cos(a):
    if not isinstance(a, Jet):
        return np.cos(a)
    s, c = np.sin(a.value), np.cos(a.value)
    return a._compose(c, -s, -c, s)


def exp(a):
    if not isinstance(a, Jet):
        return np.exp(a)
    e = np.exp(a.value)
    return a._compose(e, e, e, e)


def log(a):
    v = a.value if isinstance(a, Jet) else np.asarray(a, dtype=float)
    if np.any(v <= 0.0):
        raise SingularityError(f"log of non-positive value {float(np.min(v))}")
    if not isinstance(a, Jet):
        return np.log(v)
    r = 1.0 / v
    return a._compose(np.log(v), r, -r * r, 2.0 * r**3)


def sqrt(a):
    if not isinstance(a, Jet):
        v = np.asarray(a, dtype=float)
        if np.any(v < 0.0):
            raise SingularityError(f"sqrt of negative value {float(np.min(v))}")
        return np.sqrt(v)
    v = a.value
    if np.any(v <= 0.0):
        raise SingularityError(f"sqrt jet at non-positive value {float(np.min(v))}")
    s = np.sqrt(v)
    return a._compose(s, 0.5 / s, -0.25 / (s * v), 0.375 / (s * v * v))


def pow_const(a, c):
    c = float(c)
    integral = c.is_integer()
    v = a.value if isinstance(a, Jet) else np.asarray(a, dtype=float)
    if not integral and np.any(v < 0.0):
        raise SingularityError(f"non-integer power {c} of negative value")
    if c < 0.0 and np.any(v == 0.0):
        raise SingularityError(f"negative power {c} of zero")
    if not isinstance(a, Jet):
        return np.power(v, c)
    if not integral and np.any(v == 0.0):
        raise SingularityError(f"power {c} is not differentiable at zero")
    coefficients = [np.power(v, c)]
    falling = 1.0
    for k in range(1, 4):
        falling *= c - (k - 1)
        if integral and c >= 0.0 and k > c:
            coefficients.append(np.zeros_like(v))
        else:
            coefficients.append(falling * np.power(v, c - k))
    return a._compose(*coefficients)


def elementary(fn, a, exponent=None):
    table = {"sin": sin, "cos": cos, "exp": exp, "log": log, "sqrt": sqrt}
    if fn == "pow_const":
        return pow_const(a, exponent)
    if fn not in table:
        raise InputError(f"unknown elementary function {fn!r}")
    return table[fn](a)


def einsum(subscripts, *operands):
    """numpy.einsum lifted to jets (one or two operands, Leibniz rule for two)."""
    inputs, output = subscripts.replace(" ", "").split("->")
    specs = inputs.split(",")
    if len(specs) != len(operands):
        raise InputError(f"einsum spec {subscripts!r} does not match {len(operands)} operands")
    if not any(isinstance(op, Jet) for op in operands):
        return np.einsum(subscripts, *operands)
    if len(operands) == 1:
        (a,) = operands
        levels = [
            np.einsum(f"{specs[0]}{_LEFT[:k]}->{output}{_LEFT[:k]}", lv) for k, lv in enumerate(a.levels())
        ]
        return Jet._from_levels(levels, a.dim)
    if len(operands) != 2:
        raise InputError("jet einsum supports one or two operands")
    a, b = operands
    pair = _einsum_pair(specs[0], specs[1], output)
    if isinstance(a, Jet) and isinstance(b, Jet):
        a._check(b)
        order = min(a.order, b.order)
        return Jet._from_levels(_leibniz(pair, a.levels(), b.levels(), order), a.dim)
    if isinstance(a, Jet):
        b = np.asarray(b, dtype=float)
        return Jet._from_levels([pair(lv, b, k, 0) for k, lv in enumerate(a.levels())], a.dim)
    a = np.asarray(a, dtype=float)
    return Jet._from_levels([pair(a, lv, 0, k) for k, lv in enumerate(b.levels())], b.dim)


def stack(items, axis=-1):
    """Stack jets (or constants) along a new base axis."""
    jets = [item for item in items if isinstance(item, Jet)]
    if not jets:
        return np.stack([np.asarray(item, dtype=float) for item in items], axis=axis)
    dim = jets[0].dim
    order = min(j.order for j in jets)
    shape = np.broadcast_shapes(*[np.shape(item.value if isinstance(item, Jet) else item) for item in items])
    lifted = []
    for item in items:
        if not isinstance(item, Jet):
            item = Jet.constant(np.broadcast_to(np.asarray(item, dtype=float), shape), dim, order)
        elif item.shape != shape:
            item = item + np.zeros(shape)
        lifted.append(item.truncate(order))
    levels = []
    for k in range(order + 1):
        ax = axis - k if axis < 0 else axis
        levels.append(np.stack([j.levels()[k] for j in lifted], axis=ax))
    return Jet._from_levels(levels, dim)


def inverse(matrix):
    """Inverse of a matrix jet (base shape (..., m, m)) via the truncated Neumann series."""
    inv0 = np.linalg.inv(matrix.value)
    nilpotent = Jet._from_levels([np.zeros_like(matrix.value)] + matrix.levels()[1:], matrix.dim)
    step = einsum("...ij,...jk->...ik", inv0, nilpotent)
    term = Jet.constant(inv0, matrix.dim, matrix.order)
    total = term
    for _ in range(matrix.order):
        term = -einsum("...ij,...jk->...ik", step, term)
        total = total + term
    return total


def value_of(x):
    return x.value if isinstance(x, Jet) else np.asarray(x, dtype=float)


def gradient_of(x, dim):
    """First derivatives of a jet, zeros for constants."""
    if isinstance(x, Jet):
        return x.grad
    x = np.asarray(x, dtype=float)
    return np.zeros(x.shape + (dim,))
