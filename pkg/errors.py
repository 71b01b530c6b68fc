"""
Exception hierarchy shared by every folint module.
"""


class FolintError(Exception):
    """Base class for all errors raised by folint."""


class InputError(FolintError):
    """Bad arguments, unknown identifiers or malformed manifests."""


class ExpressionSyntaxError(InputError):
    def __init__(self, message, text, offset):
        self.text = text
        self.offset = offset
        super().__init__(f"{message} at offset {offset}: {text!r}")


class ValidationError(InputError):
    """A structural invariant failed; `witness` is the offending point."""

    def __init__(self, invariant, message, witness=None):
        self.invariant = invariant
        self.witness = witness
        where = "" if witness is None else f" (witness point {list(map(float, witness))})"
        super().__init__(f"{invariant}: {message}{where}")


class SingularityError(FolintError):
    """Domain violation inside jet or expression arithmetic."""


class GeometryError(FolintError):
    """Metric is not positive definite at an evaluation point."""

    def __init__(self, message, witness=None):
        self.witness = witness
        where = "" if witness is None else f" at {list(map(float, witness))}"
        super().__init__(f"{message}{where}")


class DegeneracyError(FolintError):
    """Gram-Schmidt met a nearly dependent spanning field."""

    def __init__(self, message, witness=None):
        self.witness = witness
        where = "" if witness is None else f" at {list(map(float, witness))}"
        super().__init__(f"{message}{where}")


class ConsistencyError(FolintError):
    """Two independent computations of the same quantity disagree."""


class InapplicableError(InputError):
    """A check does not apply to the structure (wrong fiber dimension, D != TM, ...)."""
