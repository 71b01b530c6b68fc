"""
Manifold manifests: the JSON schema, the builtin registry and loading.

A manifest is a single JSON document:

    {
      "name": "warped-torus",
      "m": 3, "n": 1, "p": 1,
      "metric": [["1", "0", "0"], ["exp(2*eps*sin(x1))", "0"], ["1"]],
      "d_span": [["1", "0", "0"], ["0", "1", "0"]],
      "params": {"eps": 0.1}
    }

``metric`` holds the upper triangle row by row (row i has m - i entries; full
rows of length m are accepted too). ``d_span`` is optional and defaults to the
coordinate fields d_1..d_{n+p}.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import geometry
import structure as st
from errors import InputError

log = logging.getLogger(__name__)


def _entry(value, where):
    if isinstance(value, bool) or not isinstance(value, (str, int, float)):
        raise InputError(f"{where}: expected an expression string or a number, got {value!r}")
    return value if isinstance(value, str) else repr(float(value))


def _diagonal(m, diagonal):
    return [[diagonal[i] if j == 0 else "0" for j in range(m - i)] for i in range(m)]


@dataclass
class ManifoldSpec:
    name: str
    m: int
    n: int
    p: int
    metric: list
    d_span: list = None
    params: dict = field(default_factory=dict)
    description: str = ""

    @classmethod
    def from_dict(cls, data, source="manifest"):
        if not isinstance(data, dict):
            raise InputError(f"{source}: top level must be a JSON object")
        unknown = set(data) - {"name", "m", "n", "p", "metric", "d_span", "params", "description"}
        if unknown:
            raise InputError(f"{source}: unknown keys {sorted(unknown)}")
        for key in ("name", "m", "n", "p", "metric"):
            if key not in data:
                raise InputError(f"{source}: missing key {key!r}")
        for key in ("m", "n", "p"):
            if isinstance(data[key], bool) or not isinstance(data[key], int):
                raise InputError(f"{source}: {key!r} must be an integer, got {data[key]!r}")
        m = data["m"]
        metric = data["metric"]
        if not isinstance(metric, list) or len(metric) != m:
            raise InputError(f"{source}: 'metric' must list {m} rows")
        rows = []
        for i, row in enumerate(metric):
            if not isinstance(row, list) or len(row) not in (m - i, m):
                raise InputError(f"{source}: metric row {i + 1} must have {m - i} (or {m}) entries")
            row = row[i:] if len(row) == m else row
            rows.append([_entry(v, f"{source}: metric row {i + 1}") for v in row])
        spans = data.get("d_span")
        if spans is not None:
            if not isinstance(spans, list) or not all(isinstance(v, list) for v in spans):
                raise InputError(f"{source}: 'd_span' must be a list of vectors")
            spans = [[_entry(v, f"{source}: d_span vector {j + 1}") for v in vector] for j, vector in enumerate(spans)]
        params = data.get("params", {})
        if not isinstance(params, dict):
            raise InputError(f"{source}: 'params' must be an object")
        for name, value in params.items():
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise InputError(f"{source}: parameter {name!r} must be a number, got {value!r}")
        return cls(
            str(data["name"]), m, data["n"], data["p"], rows, spans,
            {k: float(v) for k, v in params.items()}, str(data.get("description", "")),
        )

    def to_dict(self):
        out = {"name": self.name, "m": self.m, "n": self.n, "p": self.p, "metric": self.metric}
        if self.d_span is not None:
            out["d_span"] = self.d_span
        out["params"] = self.params
        if self.description:
            out["description"] = self.description
        return out

    def _full_metric(self):
        full = [[None] * self.m for _ in range(self.m)]
        for i, row in enumerate(self.metric):
            for offset, value in enumerate(row):
                full[i][i + offset] = value
        return full

    def build(self, validate=True):
        """Parse every expression and validate the structure (periodicity, positivity, independence)."""
        metric = geometry.MetricField(self._full_metric(), self.params)
        if metric.dim != self.m:
            raise InputError(f"{self.name}: metric dimension {metric.dim} does not match m = {self.m}")
        structure = st.SubRiemannianStructure(metric, self.n, self.p, self.d_span, name=self.name, validate=validate)
        log.debug("manifold %s built", self.name)
        return structure


def load_spec(path):
    """Read and parse a manifest file without building the structure."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read manifest {path}: {exc.strerror}")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}")
    return ManifoldSpec.from_dict(data, source=str(path))


def load_manifest(path):
    """Read, parse and validate a manifest file."""
    return load_spec(path).build()


# --- builtin registry ------------------------------------------------------

BUILTINS = {
    spec.name: spec
    for spec in (
        ManifoldSpec(
            "flat-torus-3-1-1", 3, 1, 1, _diagonal(3, ["1", "1", "1"]),
            description="flat T^3, leaves x1-circles, D = span(d1, d2)",
        ),
        ManifoldSpec(
            "flat-torus-4-2-1", 4, 2, 1, _diagonal(4, ["1", "1", "1", "1"]),
            description="flat T^4, leaves (x1, x2)-tori, D = span(d1, d2, d3)",
        ),
        ManifoldSpec(
            "warped-torus", 3, 1, 1, _diagonal(3, ["1", "exp(2*eps*sin(x1))", "1"]),
            params={"eps": 0.1},
            description="g = diag(1, exp(2 eps sin x1), 1), D = span(d1, d2)",
        ),
        ManifoldSpec(
            "full-tangent-3", 3, 1, 2,
            [
                ["1 + 2*eps*cos(x2) + eps*sin(x3)", "eps*sin(x1 + x3)", "0.5*eps*cos(x2)"],
                ["1 + 1.5*eps*sin(x1)", "eps*cos(x1 - x2)"],
                ["1 + 2*eps*cos(x1 + x2)"],
            ],
            params={"eps": 0.1},
            description="D = TM, generic periodic metric on T^3",
        ),
        ManifoldSpec(
            "block-product", 3, 1, 2,
            [["(1 + eps*cos(x1))^2", "0", "0"], ["1", "0.3"], ["1.5"]],
            params={"eps": 0.3},
            description="D = TM, leaf block depending on x1 only, constant NF block",
        ),
        ManifoldSpec(
            "twisted-normal", 4, 1, 2, _diagonal(4, ["1", "1", "1", "1"]),
            d_span=[
                ["1", "0", "0", "0"],
                ["0", "1", "0", "eps*cos(x3)"],
                ["0", "0", "1", "eps*sin(x2)"],
            ],
            params={"eps": 0.3},
            description="flat T^4, normal spans mixing x4 with coordinate-dependent coefficients",
        ),
        ManifoldSpec(
            "generic-3-2-1", 3, 2, 1,
            [
                ["1 + eps*cos(x2 + x3)", "0.5*eps*sin(x1)", "0.3*eps*cos(x3)"],
                ["1 + eps*sin(x1 - x3)", "0.4*eps*sin(x2)"],
                ["1 + 0.5*eps*cos(x1 + x2)"],
            ],
            params={"eps": 0.2},
            description="D = TM, leaves (x1, x2)-tori, generic periodic metric",
        ),
        ManifoldSpec(
            "subriemannian-4-2-1", 4, 2, 1,
            [
                ["1 + eps*cos(x3)", "0.3*eps*sin(x4)", "0.2*eps*cos(x1 + x4)", "0"],
                ["1 + eps*sin(x3 + x4)", "0", "0.3*eps*cos(x2)"],
                ["1 + 0.5*eps*cos(x4)", "0.2*eps*sin(x1)"],
                ["1 + 0.5*eps*sin(x2)"],
            ],
            d_span=[
                ["1", "0", "0", "0"],
                ["0", "1", "0", "0"],
                ["0", "0", "1", "eps*sin(x3 + x4)"],
            ],
            params={"eps": 0.15},
            description="D = span(d1, d2, d3 + eps sin(x3 + x4) d4) in T^4, generic metric",
        ),
        ManifoldSpec(
            "warped-leaves-3-2-1", 3, 2, 1, _diagonal(3, ["exp(2*eps*sin(x3))", "exp(2*eps*cos(x3))", "1"]),
            params={"eps": 0.2},
            description="D = TM, leaves (x1, x2)-tori warped along the geodesic normal x3",
        ),
        ManifoldSpec(
            "split-distribution-4-2-1", 4, 2, 1,
            [
                ["1 + eps*cos(x2 + x4)", "0.3*eps*sin(x3)", "0.2*eps*cos(x4)", "0"],
                ["1 + eps*sin(x1 - x4)", "0.3*eps*cos(x1)", "0"],
                ["1 + 0.5*eps*cos(x3 + x4)", "0"],
                ["1"],
            ],
            params={"eps": 0.15},
            description="D = span(d1, d2, d3) in T^4 with d4 a unit geodesic field orthogonal to D",
        ),
    )
}


def builtin(name):
    try:
        return BUILTINS[name]
    except KeyError:
        raise InputError(f"unknown builtin manifold {name!r}; available: {', '.join(BUILTINS)}") from None


def resolve(name=None, path=None):
    """ManifoldSpec and validated structure from a builtin name or a manifest path."""
    if (name is None) == (path is None):
        raise InputError("give exactly one of a builtin name or a manifest path")
    if name is not None:
        spec = builtin(name)
        return spec, spec.build()
    spec = load_spec(path)
    return spec, spec.build()
