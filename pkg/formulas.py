"""
Integral-formula checkers.

Each checker probes the hypotheses of its formula, evaluates the integrand
on the chosen quadrature and returns a FormulaReport. Hypotheses never gate
execution: a report whose probes fail is classified "hypotheses-not-met" and
its residual is informational only.
"""

import logging
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.special import binom

import calculus
import expr
import geometry
import invariants
import jets
import quadrature
import settings
import structure as st
from errors import InapplicableError, InputError

log = logging.getLogger(__name__)

HYPOTHESIS_KINDS = (
    "harmonic_Dtilde",
    "P_autoparallel_NF",
    "P_harmonic_F",
    "P_totally_umbilical_F",
    "P_curvature_invariant",
    "constant_P_curvature",
    "P_Einstein",
    "TF_NF_bracket_in_D",
)

PW_TERMS = ("S_mix_P", "|P h|^2", "|P h_perp|^2", "-|P H|^2", "-|P H_perp|^2", "-|P T_perp|^2")


# --- reports --------------------------------------------------------------


@dataclass
class HypothesisProbe:
    kind: str
    violation: float
    threshold: float = settings.HYPOTHESIS_THRESHOLD
    fitted: float = None
    resolution: int = settings.PROBE_GRID

    @property
    def passed(self):
        return self.violation <= self.threshold

    def to_dict(self):
        out = {
            "name": self.kind,
            "max_violation": self.violation,
            "threshold": self.threshold,
            "passed": self.passed,
        }
        if self.fitted is not None:
            out["fitted"] = self.fitted
        return out


@dataclass
class FormulaReport:
    formula_id: str
    status: str = "pass"
    hypotheses: list = field(default_factory=list)
    residual: float = 0.0
    normalizer: float = 0.0
    resolution: dict = field(default_factory=dict)
    wall_time: float = 0.0
    details: dict = field(default_factory=dict)
    message: str = ""

    @property
    def relative_residual(self):
        return abs(self.residual) / max(self.normalizer, settings.RELATIVE_FLOOR)

    @property
    def hypotheses_met(self):
        return all(h.passed for h in self.hypotheses)

    def classify(self, tolerance=settings.DEFAULT_TOLERANCE):
        if self.status == "inapplicable":
            return self
        if not self.hypotheses_met:
            self.status = "hypotheses-not-met"
        elif abs(self.residual) <= settings.ABSOLUTE_FLOOR or self.relative_residual < tolerance:
            self.status = "pass"
        else:
            self.status = "fail"
        return self

    @classmethod
    def inapplicable(cls, formula_id, message):
        return cls(formula_id, status="inapplicable", message=message)

    def to_dict(self):
        return {
            "formula_id": self.formula_id,
            "status": self.status,
            "hypotheses": [h.to_dict() for h in self.hypotheses],
            "residual": self.residual,
            "normalizer": self.normalizer,
            "relative_residual": self.relative_residual,
            "resolution": self.resolution,
            "wall_time": self.wall_time,
            "details": self.details,
            "message": self.message,
        }


def _finish(formula_id, probes, residual, normalizer, started, tolerance, resolution=None, details=None):
    report = FormulaReport(
        formula_id,
        hypotheses=list(probes),
        residual=float(residual),
        normalizer=float(normalizer),
        resolution=resolution or {},
        wall_time=time.perf_counter() - started,
        details=details or {},
    )
    report.classify(tolerance)
    log.info("%s: %s, residual %.3e (relative %.3e)", formula_id, report.status, report.residual, report.relative_residual)
    return report


def _require_agreement(report, label, gap, magnitude):
    """Fail ``report`` when two forms of its integral differ by more than AGREEMENT_TOLERANCE."""
    limit = settings.AGREEMENT_TOLERANCE * max(1.0, magnitude)
    if report.status != "inapplicable" and gap > limit:
        report.status = "fail"
        report.message = f"{label} differs by {gap:.3e} (limit {limit:.3e})"
        log.warning("%s: %s", report.formula_id, report.message)
    return report


# --- schemes and helpers ----------------------------------------------------


def grid_scheme(structure, grid, dims=None):
    if isinstance(grid, quadrature.GridScheme):
        return grid
    dims = structure.m if dims is None else dims
    counts = [int(grid)] * dims if np.isscalar(grid) else [int(c) for c in grid]
    if len(counts) == 1 and dims > 1:
        counts = counts * dims
    if len(counts) != dims:
        raise InputError(f"grid needs 1 or {dims} node counts, got {len(counts)}")
    return quadrature.GridScheme(counts)


def sphere_scheme(structure, sphere):
    if isinstance(sphere, quadrature.SphereScheme):
        return sphere
    return quadrature.SphereScheme(structure.p, int(sphere))


def _resolution(grid, sphere=None):
    out = {"grid": list(grid.counts)}
    if sphere is not None:
        out["sphere"] = len(sphere)
    return out


def _algebra(frame, y):
    return calculus.ShapeAlgebra(st.NormalField(frame, y))


def _normal_up(frame):
    """The global unit normal N = e_{n+1} when p = 1."""
    return np.ones(frame.points.shape[:-1] + (1,))


def _recipe(structure, recipe):
    if isinstance(recipe, invariants.CoefficientRecipe):
        return recipe
    return invariants.CoefficientRecipe.parse(recipe, structure.n)


def random_recipe(n, rng):
    """A coefficient recipe with random low-degree polynomial coefficients in t1..tn."""
    parts = []
    for _ in range(n):
        a, b, c = np.round(rng.uniform(-1.0, 1.0, size=3), 3)
        u, v = rng.integers(1, n + 1, size=2)
        parts.append(f"{a} + {b}*t{u} + {c}*t{v}^2")
    return invariants.CoefficientRecipe.parse("; ".join(parts), n)


def oracle_samples(structure, count=settings.ORACLE_SAMPLES, seed=settings.ORACLE_SEED):
    """Random base points and unit normal coefficients, reproducible from ``seed``."""
    rng = np.random.default_rng(seed)
    points = rng.uniform(0.0, 2.0 * np.pi, size=(count, structure.m))
    y = rng.standard_normal((count, structure.p))
    return points, y / np.linalg.norm(y, axis=-1, keepdims=True), rng


def _basepoints(structure, leaf):
    n, m = structure.n, structure.m
    if leaf is None:
        return structure.chart.grid(settings.LEAF_SWEEP, axes=range(n, m))
    leaf = np.asarray(leaf, dtype=float).reshape(-1)
    if leaf.size == m - n:
        point = np.zeros(m)
        point[n:] = leaf
        return point[None, :]
    if leaf.size == m:
        return leaf[None, :]
    raise InputError(f"leaf basepoint needs {m - n} transversal or {m} coordinates, got {leaf.size}")


# --- hypothesis probes -----------------------------------------------------


def _fiber_nodes(frame):
    return quadrature.fiber_nodes(quadrature.SphereScheme(frame.p, settings.PROBE_SPHERE), frame.points.shape[0])


def _pointwise(frame, kind):
    n, rank, m = frame.n, frame.rank, frame.m
    w = frame.omega.value
    batch = frame.points.shape[:-1]
    if kind == "harmonic_Dtilde":
        if rank == m:
            return np.zeros(batch)
        return np.linalg.norm(np.einsum("...cuu->...c", w[..., :rank, rank:, rank:]), axis=-1)
    if kind == "P_autoparallel_NF":
        return np.abs(w[..., :n, n:rank, n:rank]).max(axis=(-1, -2, -3))
    if kind == "P_harmonic_F":
        # sigma_1(e_a) = <H, e_a>; the max over unit xi is the norm of the NF part of H
        return np.linalg.norm(np.einsum("...iai->...a", w[..., :n, n:rank, :n]), axis=-1)
    if kind == "P_totally_umbilical_F":
        A = st.NormalField(frame, _fiber_nodes(frame)).A.value
        shift = np.einsum("...ii->...", A)[..., None, None] / n * np.eye(n)
        return np.linalg.norm(A - shift, axis=(-1, -2)).max(axis=-1)
    if kind == "P_curvature_invariant":
        return np.abs(frame.RPf[..., n:rank, :n, :n, :n]).max(axis=(-1, -2, -3, -4))
    if kind == "TF_NF_bracket_in_D":
        if rank == m:
            return np.zeros(batch)
        bracket = w[..., rank:, n:rank, :n] - np.swapaxes(w[..., rank:, :n, n:rank], -1, -2)
        return np.abs(bracket).max(axis=(-1, -2, -3))
    if kind == "constant_P_curvature":
        return frame.RPf[..., :rank, :rank, :rank, :rank]
    if kind == "P_Einstein":
        return np.einsum("...iixa->...xa", frame.RPf[..., :n, :n, :rank, n:rank])
    raise InputError(f"unknown hypothesis kind {kind!r}; expected one of {', '.join(HYPOTHESIS_KINDS)}")


def _space_form_model(rank):
    delta = np.eye(rank)
    return np.einsum("yz,dx->dxyz", delta, delta) - np.einsum("xz,dy->dxyz", delta, delta)


def _fit(samples, model):
    """Least-squares constant c in samples ~ c * model, with the max deviation."""
    flat = samples.reshape(samples.shape[0], -1)
    model = model.reshape(-1)
    denominator = flat.shape[0] * float(model @ model)
    c = float((flat @ model).sum() / denominator) if denominator else 0.0
    return c, float(np.abs(flat - c * model).max(initial=0.0))


def probe(structure, kinds=HYPOTHESIS_KINDS, resolution=settings.PROBE_GRID):
    """Evaluate several hypothesis probes in one pass over the probe grid."""
    for kind in kinds:
        if kind not in HYPOTHESIS_KINDS:
            raise InputError(f"unknown hypothesis kind {kind!r}; expected one of {', '.join(HYPOTHESIS_KINDS)}")
    collected = {kind: [] for kind in kinds}
    for chunk in quadrature.chunks(structure.chart.grid(resolution)):
        frame = st.FrameState(structure, chunk)
        for kind in kinds:
            collected[kind].append(_pointwise(frame, kind))
    probes = {}
    for kind in kinds:
        values = np.concatenate(collected[kind])
        if kind == "constant_P_curvature":
            c, deviation = _fit(values, _space_form_model(structure.rank))
            probes[kind] = HypothesisProbe(kind, deviation, fitted=c, resolution=resolution)
        elif kind == "P_Einstein":
            C, deviation = _fit(values, np.eye(structure.rank)[:, structure.n :])
            probes[kind] = HypothesisProbe(kind, deviation, fitted=C, resolution=resolution)
        else:
            probes[kind] = HypothesisProbe(kind, float(values.max(initial=0.0)), resolution=resolution)
        log.debug("probe %s: violation %.3e", kind, probes[kind].violation)
    return probes


def check_hypothesis(structure, kind, resolution=settings.PROBE_GRID):
    return probe(structure, (kind,), resolution)[kind]


def check_hypotheses(structure, resolution=settings.PROBE_GRID, tolerance=settings.DEFAULT_TOLERANCE):
    started = time.perf_counter()
    probes = probe(structure, HYPOTHESIS_KINDS, resolution)
    report = _finish("hypotheses", [], 0.0, 0.0, started, tolerance, {"probe_grid": resolution})
    report.details = {kind: p.to_dict() for kind, p in probes.items()}
    return report


# --- closed-manifold formulas ------------------------------------------------

CLOSED_HYPOTHESES = ("harmonic_Dtilde", "TF_NF_bracket_in_D")


def _newton_index(structure, r):
    if not 0 <= r < structure.n:
        raise InputError(f"Newton index r must satisfy 0 <= r < n = {structure.n}, got {r}")


def check_closed_newton(
    structure, r=0, grid=settings.DEFAULT_GRID, sphere=settings.DEFAULT_SPHERE, tolerance=settings.DEFAULT_TOLERANCE
):
    started = time.perf_counter()
    _newton_index(structure, r)
    probes = probe(structure, CLOSED_HYPOTHESES).values()
    grid, sphere = grid_scheme(structure, grid), sphere_scheme(structure, sphere)

    def integrand(frame, y):
        return calculus.closed_integrand_newton(_algebra(frame, y), r)

    integral = quadrature.integrate_bundle(integrand, structure, grid, sphere)
    return _finish(
        f"closed-newton({r})", probes, integral.value, integral.magnitude, started, tolerance,
        _resolution(grid, sphere), {"r": r},
    )


def check_closed_general(
    structure, recipe, grid=settings.DEFAULT_GRID, sphere=settings.DEFAULT_SPHERE, tolerance=settings.DEFAULT_TOLERANCE
):
    started = time.perf_counter()
    recipe = _recipe(structure, recipe)
    probes = probe(structure, CLOSED_HYPOTHESES).values()
    grid, sphere = grid_scheme(structure, grid), sphere_scheme(structure, sphere)

    def integrand(frame, y):
        alg = _algebra(frame, y)
        general = calculus.closed_integrand_general(alg, recipe)
        if recipe.newton is None:
            return general
        return np.stack([general, calculus.closed_integrand_newton(alg, recipe.newton)], axis=-1)

    details = {"recipe": recipe.describe()}
    if recipe.newton is None:
        integral = quadrature.integrate_bundle(integrand, structure, grid, sphere)
    else:
        integral, newton = quadrature.integrate_bundle(integrand, structure, grid, sphere, components=2)
        details["newton_form_residual"] = newton.value
        details["recipe_agreement"] = abs(integral.value - newton.value)
    return _finish(
        "closed-general", probes, integral.value, integral.magnitude, started, tolerance,
        _resolution(grid, sphere), details,
    )


def check_r2_expansion(
    structure, grid=settings.DEFAULT_GRID, sphere=settings.DEFAULT_SPHERE, tolerance=settings.DEFAULT_TOLERANCE
):
    """The r = 2 closed Newton integrand against its expansion in sigma_1, sigma_2, A, A^2."""
    if structure.n < 3:
        raise InapplicableError(f"the r = 2 expansion needs n >= 3, got n = {structure.n}")
    started = time.perf_counter()
    probes = probe(structure, CLOSED_HYPOTHESES).values()
    grid, sphere = grid_scheme(structure, grid), sphere_scheme(structure, sphere)

    def integrand(frame, y):
        alg = _algebra(frame, y)
        closed = calculus.closed_integrand_newton(alg, 2)
        return np.stack([closed, calculus.expanded_r2_integrand(alg) - closed], axis=-1)

    closed, gap = quadrature.integrate_bundle(integrand, structure, grid, sphere, components=2)
    return _finish(
        "r2-expansion", probes, gap.value, closed.magnitude, started, tolerance, _resolution(grid, sphere),
        {"closed_newton_residual": closed.value, "expanded_residual": closed.value + gap.value, "pointwise_gap_l1": gap.magnitude},
    )


def _pw_terms(structure, frame):
    n, rank = structure.n, structure.rank
    sf = st.second_fundamental(structure, frame.points, frame=frame)
    S = st.curvature_scalars(structure, frame.points, frame=frame)["S_mix_P"]
    terms = [
        S,
        np.einsum("...cij,...cij->...", sf.h[..., n:rank, :, :], sf.h[..., n:rank, :, :]),
        np.einsum("...cab,...cab->...", sf.h_perp[..., :rank, :, :], sf.h_perp[..., :rank, :, :]),
        -np.einsum("...c,...c->...", sf.H[..., n:rank], sf.H[..., n:rank]),
        -np.einsum("...c,...c->...", sf.H_perp[..., :rank], sf.H_perp[..., :rank]),
        -np.einsum("...cab,...cab->...", sf.T_perp[..., :rank, :, :], sf.T_perp[..., :rank, :, :]),
    ]
    return np.stack(terms, axis=-1)


def check_pw(structure, grid=settings.DEFAULT_GRID, sphere=settings.DEFAULT_SPHERE, tolerance=settings.DEFAULT_TOLERANCE):
    """Integral formula for the mixed scalar P-curvature, cross-checked against the fiber form with r = 0."""
    started = time.perf_counter()
    probes = probe(structure, CLOSED_HYPOTHESES).values()
    grid, sphere = grid_scheme(structure, grid), sphere_scheme(structure, sphere)

    def integrand(frame):
        terms = _pw_terms(structure, frame)
        return np.concatenate([terms, terms.sum(axis=-1, keepdims=True)], axis=-1)

    *terms, total = quadrature.integrate_frames(integrand, structure, grid, components=len(PW_TERMS) + 1)

    def fiber_integrand(frame, y):
        return calculus.closed_integrand_newton(_algebra(frame, y), 0)

    fiber = quadrature.integrate_bundle(fiber_integrand, structure, grid, sphere)
    second_moment = quadrature.sphere_volume(structure.p) / structure.p
    details = {
        "terms": {name: t.value for name, t in zip(PW_TERMS, terms)},
        "fiber_residual": fiber.value,
        "fiber_residual_scaled": fiber.value / second_moment,
        "fiber_agreement": abs(fiber.value / second_moment - total.value),
    }
    report = _finish("pw", probes, total.value, total.magnitude, started, tolerance, _resolution(grid, sphere), details)
    return _require_agreement(report, "fiber form", details["fiber_agreement"], total.magnitude)


def curvature_sign_summary(structure, grid=settings.DEFAULT_GRID):
    """Pointwise min/max of S^P_mix and of each term of the mixed-curvature formula."""
    grid = grid_scheme(structure, grid)
    values = []
    for chunk in quadrature.chunks(structure.chart.grid(grid.counts)):
        values.append(_pw_terms(structure, st.FrameState(structure, chunk)))
    values = np.concatenate(values)
    return {name: {"min": float(values[:, k].min()), "max": float(values[:, k].max())} for k, name in enumerate(PW_TERMS)}


# --- leafwise formulas -----------------------------------------------------


def _leafwise_integrand(structure, form):
    if isinstance(form, (int, np.integer)):
        _newton_index(structure, int(form))

        def integrand(frame, y):
            alg = _algebra(frame, y)
            stated = calculus.fiber_integrand_newton(alg, int(form))
            return np.stack([stated, calculus.bracket_term(alg, alg.newton(int(form)))], axis=-1)

        return integrand, {"r": int(form)}, 2

    recipe = _recipe(structure, form)

    def integrand(frame, y):
        alg = _algebra(frame, y)
        stated = calculus.fiber_integrand_general(alg, recipe)
        S = calculus.OperatorField.general(recipe).values(alg)
        parts = [stated, calculus.bracket_term(alg, S)]
        if recipe.newton is not None:
            parts.append(calculus.fiber_integrand_newton(alg, recipe.newton) - stated)
        return np.stack(parts, axis=-1)

    return integrand, {"recipe": recipe.describe()}, 2 if recipe.newton is None else 3


def check_leafwise(
    structure, form=0, leaf=None, leaf_grid=settings.DEFAULT_LEAF_GRID, sphere=settings.DEFAULT_SPHERE,
    tolerance=settings.DEFAULT_TOLERANCE,
):
    """
    Leafwise formula over N_1F restricted to a compact leaf.

    ``form`` is a Newton index r or a coefficient recipe; ``leaf`` selects the
    leaf by basepoint, None sweeps a transversal grid of leaves and averages.
    """
    started = time.perf_counter()
    integrand, details, width = _leafwise_integrand(structure, form)
    probes = probe(structure, ("TF_NF_bracket_in_D",)).values()
    grid = grid_scheme(structure, leaf_grid, dims=structure.n)
    sphere = sphere_scheme(structure, sphere)
    leaves = []
    for base in _basepoints(structure, leaf):
        parts = quadrature.integrate_leaf_bundle(integrand, structure, base, grid, sphere, components=width)
        entry = {
            "basepoint": [float(v) for v in base],
            "residual": parts[0].value,
            "normalizer": parts[0].magnitude,
            "bracket_corrected_residual": parts[0].value + parts[1].value,
        }
        if width == 3:
            entry["newton_form_gap_l1"] = parts[2].magnitude
        leaves.append(entry)
    details["leaves"] = leaves
    residual = float(np.mean([e["residual"] for e in leaves]))
    normalizer = float(np.mean([e["normalizer"] for e in leaves]))
    return _finish("leafwise", probes, residual, normalizer, started, tolerance, _resolution(grid, sphere), details)


# --- auto-parallel series and total mean curvatures ----------------------------

AUTOPARALLEL_HYPOTHESES = ("harmonic_Dtilde", "P_autoparallel_NF", "TF_NF_bracket_in_D")


def check_autoparallel_series(
    structure, index=0, kind="sigma", grid=settings.DEFAULT_GRID, sphere=settings.DEFAULT_SPHERE,
    tolerance=settings.DEFAULT_TOLERANCE,
):
    """tau-series (kind "tau", index k) or sigma-series (kind "sigma", index r) for P-auto-parallel NF."""
    started = time.perf_counter()
    if kind == "tau":
        if not 0 <= index <= structure.n:
            raise InputError(f"power index k must satisfy 0 <= k <= n = {structure.n}, got {index}")
    elif kind == "sigma":
        _newton_index(structure, index)
    else:
        raise InputError(f"series kind must be 'tau' or 'sigma', got {kind!r}")
    probes = probe(structure, AUTOPARALLEL_HYPOTHESES).values()
    grid, sphere = grid_scheme(structure, grid), sphere_scheme(structure, sphere)

    def integrand(frame, y):
        return calculus.autoparallel_integrand(_algebra(frame, y), index, kind)

    integral = quadrature.integrate_bundle(integrand, structure, grid, sphere)
    return _finish(
        f"autoparallel-{kind}({index})", probes, integral.value, integral.magnitude, started, tolerance,
        _resolution(grid, sphere), {"kind": kind, "index": index},
    )


def _mean_curvatures(A, n, indices):
    """Columns sigma_k, tau_k for every k in ``indices`` from shape operator values."""
    top = max(indices, default=0)
    taus = invariants.power_sums(A, max(top, 1))
    sigmas = invariants.elementary_from_power_sums(taus[:n], max(top, 1))
    batch = A.shape[:-2]
    columns = []
    for k in indices:
        sigma = np.ones(batch) if k == 0 else np.broadcast_to(np.asarray(sigmas[k], dtype=float), batch)
        tau = np.full(batch, float(n)) if k == 0 else taus[k - 1]
        columns += [sigma, tau]
    return np.stack(columns, axis=-1)


def _total_mean(structure, indices, grid, sphere):
    def integrand(frame, y):
        return _mean_curvatures(st.NormalField(frame, y).A.value, structure.n, indices)

    parts = quadrature.integrate_bundle(integrand, structure, grid, sphere, components=2 * len(indices))
    return {k: (parts[2 * i], parts[2 * i + 1]) for i, k in enumerate(indices)}


def total_mean_curvature(structure, index, kind="sigma", grid=settings.DEFAULT_GRID, sphere=settings.DEFAULT_SPHERE):
    """sigma_k(F) or tau_k(F): the integral of sigma_k(xi) or tau_k(xi) over N_1F."""
    if index < 0:
        raise InputError(f"mean curvature index must be >= 0, got {index}")
    if kind not in ("sigma", "tau"):
        raise InputError(f"kind must be 'sigma' or 'tau', got {kind!r}")
    sigma, tau = _total_mean(structure, [index], grid_scheme(structure, grid), sphere_scheme(structure, sphere))[index]
    return sigma if kind == "sigma" else tau


def check_total_mean(
    structure, index=None, grid=settings.DEFAULT_GRID, sphere=settings.DEFAULT_SPHERE, tolerance=settings.DEFAULT_TOLERANCE
):
    """Total mean curvatures; the residual is the largest odd-index value, which must vanish."""
    started = time.perf_counter()
    indices = list(range(structure.n + 2)) if index is None else [int(index)]
    grid, sphere = grid_scheme(structure, grid), sphere_scheme(structure, sphere)
    totals = _total_mean(structure, indices, grid, sphere)
    odd = [part for k, pair in totals.items() if k % 2 for part in pair]
    worst = max(odd, key=lambda part: abs(part.value), default=None)
    details = {
        "sigma": {str(k): pair[0].value for k, pair in totals.items()},
        "tau": {str(k): pair[1].value for k, pair in totals.items()},
    }
    if 0 in totals:
        details["sigma_0_unit_convention"] = totals[0][0].value
        details["sigma_0_scaled_by_n"] = structure.n * totals[0][0].value
    residual = 0.0 if worst is None else worst.value
    normalizer = max((part.magnitude for part in odd), default=0.0)
    return _finish("total-mean", [], residual, normalizer, started, tolerance, _resolution(grid, sphere), details)


# --- closed-form series ----------------------------------------------------


def _volume(structure, grid):
    return quadrature.integrate_torus(lambda points: 1.0, structure.metric, grid).value


def _series_gap(measured, closed):
    return max((abs(measured[k] - closed[k]) for k in closed), default=0.0)


def _series_term(n, index, term):
    """Closed-form series entry: zero for odd ``index`` and, when n is odd, for every index past 0."""
    if index % 2 or (n % 2 and index > 0):
        return 0.0
    return term(index)


def check_constant_curvature_series(
    structure, grid=settings.DEFAULT_GRID, sphere=settings.DEFAULT_SPHERE, tolerance=settings.DEFAULT_TOLERANCE
):
    """sigma_r(F) and tau_k(F) against their values for constant P-curvature c."""
    started = time.perf_counter()
    n, p = structure.n, structure.p
    probes = probe(structure, AUTOPARALLEL_HYPOTHESES + ("constant_P_curvature", "P_harmonic_F"))
    c = probes["constant_P_curvature"].fitted
    grid, sphere = grid_scheme(structure, grid), sphere_scheme(structure, sphere)
    totals = _total_mean(structure, list(range(n + 1)), grid, sphere)
    volume = _volume(structure, grid)
    S = quadrature.sphere_volume(p)
    sigma = {r: totals[r][0].value for r in totals}
    tau = {k: totals[k][1].value for k in totals}
    sigma_closed = {r: _series_term(n, r, lambda r: S * binom(n / 2, r / 2) * c ** (r // 2) * volume) for r in sigma}
    tau_closed = {k: _series_term(n, k, lambda k: n * S * (-c) ** (k // 2) * volume) for k in tau}
    recursion = max(
        (abs(sigma[r + 2] - c * (n - r) / (r + 2) * sigma[r]) for r in range(n - 1)), default=0.0
    )
    harmonic = probes.pop("P_harmonic_F")
    residual = max(_series_gap(sigma, sigma_closed), _series_gap(tau, tau_closed) if harmonic.passed else 0.0)
    details = {
        "c": c,
        "volume": volume,
        "sigma": {str(r): v for r, v in sigma.items()},
        "sigma_closed_form": {str(r): v for r, v in sigma_closed.items()},
        "tau": {str(k): v for k, v in tau.items()},
        "tau_closed_form": {str(k): v for k, v in tau_closed.items()},
        "tau_closed_form_unscaled": {str(k): v / n for k, v in tau_closed.items()},
        "tau_series_checked": harmonic.passed,
        "P_harmonic_F": harmonic.to_dict(),
        "recursion_gap": recursion,
    }
    normalizer = max([abs(v) for v in sigma_closed.values()] + [abs(v) for v in tau_closed.values()])
    return _finish(
        "const-curv", probes.values(), residual, normalizer, started, tolerance, _resolution(grid, sphere), details
    )


def check_einstein_umbilical(
    structure, grid=settings.DEFAULT_GRID, sphere=settings.DEFAULT_SPHERE, tolerance=settings.DEFAULT_TOLERANCE
):
    """sigma_r(F) against its value for a P-Einstein structure with P-totally umbilical leaves."""
    started = time.perf_counter()
    n, p = structure.n, structure.p
    probes = probe(structure, AUTOPARALLEL_HYPOTHESES + ("P_totally_umbilical_F", "P_Einstein"))
    C = probes["P_Einstein"].fitted
    grid, sphere = grid_scheme(structure, grid), sphere_scheme(structure, sphere)
    totals = _total_mean(structure, list(range(n + 1)), grid, sphere)
    volume = _volume(structure, grid)
    S = quadrature.sphere_volume(p)
    sigma = {r: totals[r][0].value for r in totals}
    closed = {r: _series_term(n, r, lambda r: S * (C / n) ** (r // 2) * binom(n / 2, r / 2) * volume) for r in sigma}
    recursion = max(
        (abs(sigma[r + 2] - C / n * (n - r) / (r + 2) * sigma[r]) for r in range(n - 1)), default=0.0
    )
    details = {
        "C": C,
        "volume": volume,
        "sigma": {str(r): v for r, v in sigma.items()},
        "sigma_closed_form": {str(r): v for r, v in closed.items()},
        "sigma_closed_form_unscaled": {str(r): v / S for r, v in closed.items()},
        "odd_sigma_max": max((abs(v) for r, v in sigma.items() if r % 2), default=0.0),
        "recursion_gap": recursion,
    }
    normalizer = max(abs(v) for v in closed.values())
    return _finish(
        "einstein-umbilical", probes.values(), _series_gap(sigma, closed), normalizer, started, tolerance,
        _resolution(grid, sphere), details,
    )


# --- codimension one and the Reeb formula -------------------------------------


def check_codim1(
    structure, r=0, grid=settings.DEFAULT_GRID, leaf=None, leaf_grid=settings.DEFAULT_LEAF_GRID,
    tolerance=settings.DEFAULT_TOLERANCE,
):
    """
    Codimension-one formulas for the global unit normal N = e_{n+1}: the closed
    form (reported residual), the leafwise form on one leaf, the r = 0
    sigma_2 / Ricci form and, for n = 1, the integral of the Gaussian P-curvature.
    """
    if structure.p != 1:
        raise InapplicableError(f"codimension-one formulas need p = 1, got p = {structure.p}")
    _newton_index(structure, r)
    started = time.perf_counter()
    n = structure.n
    probes = probe(structure, CLOSED_HYPOTHESES).values()
    grid = grid_scheme(structure, grid)

    def closed(frame):
        alg = _algebra(frame, _normal_up(frame))
        ricci = np.einsum("...ii->...", alg.field.R_xixi)
        gaussian = st.gaussian_P_curvature(structure, frame.points, frame) if n == 1 else np.zeros_like(ricci)
        return np.stack(
            [calculus.closed_integrand_newton(alg, r), 2.0 * alg.sigma_value(2) - ricci, gaussian], axis=-1
        )

    closed_part, sigma2, gaussian = quadrature.integrate_frames(closed, structure, grid, components=3)

    def leafwise(frame):
        return calculus.fiber_integrand_newton(_algebra(frame, _normal_up(frame)), r)

    leaf_scheme = grid_scheme(structure, leaf_grid, dims=n)
    base = _basepoints(structure, leaf if leaf is not None else np.zeros(structure.m - n))[0]
    leaf_part = quadrature.integrate_leaf_frames(leafwise, structure, base, leaf_scheme)
    details = {
        "r": r,
        "leafwise_residual": leaf_part.value,
        "leafwise_normalizer": leaf_part.magnitude,
        "leaf_basepoint": [float(v) for v in base],
        "sigma2_ricci_residual": sigma2.value,
        "sigma2_ricci_normalizer": sigma2.magnitude,
    }
    if n == 1:
        details["gaussian_P_integral"] = gaussian.value
        details["gaussian_P_normalizer"] = gaussian.magnitude
    resolution = {"grid": list(grid.counts), "leaf_grid": list(leaf_scheme.counts)}
    return _finish(
        f"codim1({r})", probes, closed_part.value, closed_part.magnitude, started, tolerance, resolution, details
    )


def check_reeb(structure, grid=settings.DEFAULT_GRID, tolerance=settings.DEFAULT_TOLERANCE):
    """Integral of sigma_1(N) over M, with Div N = -sigma_1(N) checked pointwise."""
    if structure.p != 1 or not structure.full_tangent:
        raise InapplicableError("the Reeb formula needs p = 1 and D = TM")
    started = time.perf_counter()
    n = structure.n
    grid = grid_scheme(structure, grid)

    def integrand(frame):
        sigma1 = np.einsum("...ii->...", st.NormalField(frame, _normal_up(frame)).A.value)
        N = frame.E[..., :, n]
        div = np.einsum("...kk->...", geometry.covariant_jacobian(frame.conn.gamma, N).value)
        return np.stack([sigma1, div, div + sigma1], axis=-1)

    sigma1, div, gap = quadrature.integrate_frames(integrand, structure, grid, components=3)
    details = {"divergence_integral": div.value, "sign_gap_l1": gap.magnitude}
    return _finish("reeb", [], sigma1.value, sigma1.magnitude, started, tolerance, _resolution(grid), details)


# --- pointwise oracles -----------------------------------------------------


def check_codazzi(structure, samples=settings.ORACLE_SAMPLES, tolerance=settings.DEFAULT_TOLERANCE):
    """Codazzi-type equation at random (point, xi) samples; absolute residual."""
    started = time.perf_counter()
    points, y, _ = oracle_samples(structure, samples)
    field = st.NormalField(st.FrameState(structure, points), y)
    residual = float(st.codazzi_residual(field).max(initial=0.0))
    details = {"samples": samples}
    if structure.full_tangent:
        details["classical_residual"] = float(st.classical_codazzi_residual(field).max(initial=0.0))
    return _finish("codazzi", [], residual, 1.0, started, tolerance, {"samples": samples}, details)


def check_lemma31(structure, samples=settings.ORACLE_SAMPLES, tolerance=settings.DEFAULT_TOLERANCE):
    """Frame identity for the leaf derivative of Z_xi at random samples; absolute residual."""
    started = time.perf_counter()
    points, y, _ = oracle_samples(structure, samples)
    alg = _algebra(st.FrameState(structure, points), y)
    residual = float(calculus.lemma31_check(alg).max(initial=0.0))
    return _finish("lemma31", [], residual, 1.0, started, tolerance, {"samples": samples}, {"samples": samples})


def _splitting_field(frame):
    """A TF-valued test field sum_i c_i e_i with periodic coefficients."""
    m, n = frame.m, frame.n
    coefficients = []
    for i in range(n):
        text = f"1 + 0.5*sin(x{(i + 1) % m + 1}) + 0.25*cos(x{i + 1} + x{m})"
        coefficients.append(expr.evaluate_jet(expr.parse(text), frame.points, order=frame.E.order))
    c = jets.stack(coefficients, axis=-1)
    return jets.einsum("...ki,...i->...k", frame.E[..., :, :n], c)


def check_divergence_oracles(
    structure, samples=settings.ORACLE_SAMPLES, recipes=5, tolerance=settings.DEFAULT_TOLERANCE
):
    """Closed F-divergence forms against direct jet divergences, and the divergence splitting."""
    started = time.perf_counter()
    points, y, rng = oracle_samples(structure, samples)
    frame = st.FrameState(structure, points)
    alg = _algebra(frame, y)
    n = structure.n
    oracles = []

    def compare(label, operator, closed):
        direct = calculus.divF_direct(alg, operator)
        oracles.append((label, float(np.abs(direct - closed).max(initial=0.0)), float(np.abs(direct).max(initial=0.0))))

    for k in range(1, min(3, n + 1) + 1):
        compare(f"power({k})", calculus.OperatorField.power(k), calculus.divF_Ak_closed(alg, k))
    for r in range(n):
        compare(f"newton({r})", calculus.OperatorField.newton(r), calculus.divF_newton_closed(alg, r))
    for _ in range(recipes):
        recipe = random_recipe(n, rng)
        compare(f"recipe({recipe.describe()})", calculus.OperatorField.general(recipe), calculus.divF_general_closed(alg, recipe))

    X = _splitting_field(frame)
    splitting = calculus.divergence_splitting_residual(frame, X)
    div = np.einsum("...kk->...", geometry.covariant_jacobian(frame.conn.gamma, X).value)
    oracles.append(("divergence-splitting", float(np.abs(splitting).max()), float(np.abs(div).max())))

    details = {label: {"max_error": err, "scale": scale} for label, err, scale in oracles}
    worst = max(oracles, key=lambda o: o[1] / max(o[2], settings.RELATIVE_FLOOR))
    return _finish(
        "divergence-oracles", [], worst[1], worst[2], started, tolerance, {"samples": samples},
        {"worst": worst[0], "oracles": details},
    )
