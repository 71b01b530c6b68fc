#!/usr/bin/env python3
"""
folint - numerical verification of integral formulas on foliated sub-Riemannian manifolds
Loads a builtin or manifest manifold, runs the formula checkers and writes a JSON report.

    python folint.py list
    python folint.py describe warped-torus
    python folint.py check --manifold warped-torus --formula closed-newton --r 0 --grid 24 --sphere 64
    python folint.py sweep --manifold full-tangent-3 --formula pw --grids 8,16,24
"""

import argparse
import json
import logging
import math
import sys
import time
from dataclasses import dataclass, replace

import numpy as np
import pandas as pd

import formulas
import inspectManifolds
import manifolds
import settings
from errors import FolintError, InapplicableError, InputError

# === Check registry ===
CHECK_IDS = (
    "pw",
    "closed-newton",
    "closed-general",
    "leafwise",
    "autoparallel",
    "total-mean",
    "const-curv",
    "einstein-umbilical",
    "codim1",
    "reeb",
    "hypotheses",
    "lemma31",
    "codazzi",
    "divergence-oracles",
    "r2-expansion",
)
RANDOM_RECIPES = 2  # recipes drawn for closed-general when --recipe is not given
SWEEP_NOISE = 1e-12  # relative residuals below this count as converged
# ==============================

EXIT_OK, EXIT_RESIDUAL, EXIT_INPUT = 0, 1, 2


@dataclass
class CheckOptions:
    r: int = None
    kind: str = "sigma"
    recipe: str = None
    grid: object = settings.DEFAULT_GRID
    sphere: int = settings.DEFAULT_SPHERE
    leaf: list = None
    leaf_grid: int = settings.DEFAULT_LEAF_GRID
    tolerance: float = settings.DEFAULT_TOLERANCE

    def describe(self):
        return {
            "grid": self.grid,
            "sphere": self.sphere,
            "leaf_grid": self.leaf_grid,
            "tolerance": self.tolerance,
        }


def _dispatch(structure, check_id, o):
    n = structure.n
    if check_id == "pw":
        return [formulas.check_pw(structure, o.grid, o.sphere, o.tolerance)]
    if check_id == "closed-newton":
        indices = [o.r] if o.r is not None else range(max(1, n - 1))
        return [formulas.check_closed_newton(structure, r, o.grid, o.sphere, o.tolerance) for r in indices]
    if check_id == "closed-general":
        if o.recipe is not None:
            recipes = [o.recipe]
        else:
            rng = np.random.default_rng(settings.ORACLE_SEED)
            recipes = [formulas.random_recipe(n, rng) for _ in range(RANDOM_RECIPES)]
        return [formulas.check_closed_general(structure, recipe, o.grid, o.sphere, o.tolerance) for recipe in recipes]
    if check_id == "leafwise":
        form = o.recipe if o.recipe is not None else (o.r or 0)
        return [formulas.check_leafwise(structure, form, o.leaf, o.leaf_grid, o.sphere, o.tolerance)]
    if check_id == "autoparallel":
        return [formulas.check_autoparallel_series(structure, o.r or 0, o.kind, o.grid, o.sphere, o.tolerance)]
    if check_id == "total-mean":
        return [formulas.check_total_mean(structure, o.r, o.grid, o.sphere, o.tolerance)]
    if check_id == "const-curv":
        return [formulas.check_constant_curvature_series(structure, o.grid, o.sphere, o.tolerance)]
    if check_id == "einstein-umbilical":
        return [formulas.check_einstein_umbilical(structure, o.grid, o.sphere, o.tolerance)]
    if check_id == "codim1":
        return [formulas.check_codim1(structure, o.r or 0, o.grid, o.leaf, o.leaf_grid, o.tolerance)]
    if check_id == "reeb":
        return [formulas.check_reeb(structure, o.grid, o.tolerance)]
    if check_id == "hypotheses":
        return [formulas.check_hypotheses(structure, tolerance=o.tolerance)]
    if check_id == "lemma31":
        return [formulas.check_lemma31(structure, tolerance=o.tolerance)]
    if check_id == "codazzi":
        return [formulas.check_codazzi(structure, tolerance=o.tolerance)]
    if check_id == "divergence-oracles":
        return [formulas.check_divergence_oracles(structure, tolerance=o.tolerance)]
    if check_id == "r2-expansion":
        return [formulas.check_r2_expansion(structure, o.grid, o.sphere, o.tolerance)]
    raise InputError(f"unknown check id {check_id!r}; expected one of {', '.join(CHECK_IDS)}")


def run_check(structure, check_id, options):
    """Reports of one check id; an inapplicable structure gives an "inapplicable" entry."""
    if check_id not in CHECK_IDS:
        raise InputError(f"unknown check id {check_id!r}; expected one of {', '.join(CHECK_IDS)}")
    try:
        return _dispatch(structure, check_id, options)
    except InapplicableError as exc:
        return [formulas.FormulaReport.inapplicable(check_id, str(exc))]


def exit_status(reports):
    return EXIT_RESIDUAL if any(r.status == "fail" for r in reports) else EXIT_OK


def at_level(options, check_id, level):
    if check_id == "leafwise":
        return replace(options, grid=level, leaf_grid=level)
    return replace(options, grid=level)


def run_sweep(structure, check_id, levels, options):
    """Residual-vs-resolution table over grid levels plus a monotonicity verdict."""
    if len(levels) < 2:
        raise InapplicableError(f"a sweep needs at least 2 grid levels, got {len(levels)}")
    rows = []
    for level in levels:
        for report in run_check(structure, check_id, at_level(options, check_id, level)):
            rows.append(
                {
                    "level": level,
                    "formula_id": report.formula_id,
                    "status": report.status,
                    "residual": report.residual,
                    "normalizer": report.normalizer,
                    "relative_residual": report.relative_residual,
                }
            )
    table = pd.DataFrame(rows)
    verdicts = {}
    for formula_id, group in table.groupby("formula_id", sort=False):
        rel = group["relative_residual"].to_numpy()
        verdicts[formula_id] = bool(
            all(b <= a + SWEEP_NOISE or b < SWEEP_NOISE for a, b in zip(rel[:-1], rel[1:]))
        )
    return table, verdicts


# --- report document ---------------------------------------------------------


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if not math.isfinite(value):
            return None
        return float(f"{value:.{settings.SIGNIFICANT_DIGITS}g}")
    return value


def build_document(spec, structure, reports, options, timings=True, sweep=None):
    described = structure.describe()
    described["tilde_axes"] = [f"x{k + 1}" for k in structure.tilde_axes]
    report_dicts = [r.to_dict() for r in reports]
    if not timings:
        for entry in report_dicts:
            entry.pop("wall_time")
    document = {
        "tool_version": settings.TOOL_VERSION,
        "manifest": spec.to_dict(),
        "structure": described,
        "schemes": options.describe(),
        "reports": report_dicts,
        "summary": {
            "checks": len(reports),
            "failed": sum(r.status == "fail" for r in reports),
            "exit_status": exit_status(reports),
        },
    }
    if sweep is not None:
        document["sweep"] = sweep
    return document


def to_json(document):
    return json.dumps(_jsonable(document), indent=2) + "\n"


def _write_json(document, target, out):
    text = to_json(document)
    if target == "-":
        sys.stdout.write(text)
        return
    with open(target, "w", encoding="utf-8") as fh:
        fh.write(text)
    print(f"      ✓ Report written to {target}", file=out)


def _summary(reports):
    rows = [
        {
            "check": r.formula_id,
            "status": r.status,
            "residual": r.residual,
            "relative": r.relative_residual,
            "time [s]": r.wall_time,
        }
        for r in reports
    ]
    return pd.DataFrame(rows).to_string(index=False, float_format=lambda v: f"{v:.3e}")


# --- command line -------------------------------------------------------------


def _counts(text):
    values = [int(v) for v in text.split(",") if v.strip()]
    return values[0] if len(values) == 1 else values


def _floats(text):
    return [float(v) for v in text.split(",") if v.strip()]


def _levels(text):
    return [int(v) for v in text.split(",") if v.strip()]


def build_parser():
    parser = argparse.ArgumentParser(prog="folint", description=__doc__.splitlines()[1])
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    commands = parser.add_subparsers(dest="command", required=True)

    commands.add_parser("list", help="list builtin manifolds")
    describe = commands.add_parser("describe", help="print a manifest and its structure summary")
    describe.add_argument("name", help="builtin name or manifest path")

    for name in ("check", "sweep"):
        sub = commands.add_parser(name, help=f"{name} integral formulas")
        source = sub.add_mutually_exclusive_group(required=True)
        source.add_argument("--manifold", help="builtin manifold name")
        source.add_argument("--manifest", help="path to a JSON manifest")
        sub.add_argument("--r", type=int, default=None, help="Newton / power / mean-curvature index")
        sub.add_argument("--kind", choices=("sigma", "tau"), default="sigma", help="series kind for autoparallel")
        sub.add_argument("--recipe", default=None, help="coefficient recipe: 'newton(r)' or 'f0; f1; ...' in t1..tn")
        sub.add_argument("--sphere", type=int, default=settings.DEFAULT_SPHERE, help="fiber resolution")
        sub.add_argument("--leaf", type=_floats, default=None, help="leaf basepoint (transversal coordinates)")
        sub.add_argument("--leaf-grid", type=int, default=settings.DEFAULT_LEAF_GRID, help="nodes per leaf axis")
        sub.add_argument("--tol", type=float, default=settings.DEFAULT_TOLERANCE, help="relative residual tolerance")
        sub.add_argument("--json", default=None, help="write the JSON report to a path ('-' for stdout)")
        sub.add_argument("--no-timings", action="store_true", help="omit wall times (byte-identical reports)")
        if name == "check":
            which = sub.add_mutually_exclusive_group(required=True)
            which.add_argument("--formula", choices=CHECK_IDS)
            which.add_argument("--all", action="store_true", help="run every check")
            sub.add_argument("--grid", type=_counts, default=settings.DEFAULT_GRID, help="n or n1,n2,.. per axis")
        else:
            sub.add_argument("--formula", choices=CHECK_IDS, required=True)
            sub.add_argument("--grids", type=_levels, required=True, help="grid levels, e.g. 8,16,24")
    return parser


def _options(args):
    return CheckOptions(
        r=args.r,
        kind=args.kind,
        recipe=args.recipe,
        grid=getattr(args, "grid", settings.DEFAULT_GRID),
        sphere=args.sphere,
        leaf=args.leaf,
        leaf_grid=args.leaf_grid,
        tolerance=args.tol,
    )


def _describe(name):
    if name in manifolds.BUILTINS:
        spec, structure = manifolds.resolve(name=name)
    else:
        spec, structure = manifolds.resolve(path=name)
    print(json.dumps(spec.to_dict(), indent=2))
    print("-" * 60)
    summary = structure.describe()
    summary["tilde_axes"] = ", ".join(f"x{k + 1}" for k in structure.tilde_axes) or "-"
    for key, value in summary.items():
        print(f"{key:<16} | {value}")
    return EXIT_OK


def _run(args, out):
    options = _options(args)
    started = time.perf_counter()
    print("folint - integral formula verification", file=out)
    print("=" * 60, file=out)

    print("\n[1/3] Loading manifold...", file=out)
    spec, structure = manifolds.resolve(name=args.manifold, path=args.manifest)
    print(f"      ✓ {spec.name} (m={spec.m}, n={spec.n}, p={spec.p}, rank D={structure.rank})", file=out)

    sweep = None
    if args.command == "check":
        ids = CHECK_IDS if args.all else (args.formula,)
        print(f"\n[2/3] Running {len(ids)} check(s)...", file=out)
        reports = []
        for check_id in ids:
            for report in run_check(structure, check_id, options):
                marker = "✗" if report.status == "fail" else "✓"
                print(f"      {marker} {report.formula_id:<22} {report.status}", file=out)
                reports.append(report)
    else:
        print(f"\n[2/3] Sweeping {args.formula} over grids {args.grids}...", file=out)
        table, verdicts = run_sweep(structure, args.formula, args.grids, options)
        print(table.to_string(index=False, float_format=lambda v: f"{v:.3e}"), file=out)
        for formula_id, monotone in verdicts.items():
            print(f"      {'✓' if monotone else '✗'} {formula_id}: {'monotone' if monotone else 'not monotone'}", file=out)
        reports = run_check(structure, args.formula, at_level(options, args.formula, max(args.grids)))
        sweep = {"levels": args.grids, "table": table.to_dict(orient="records"), "monotone": verdicts}

    print("\n[3/3] Writing report...", file=out)
    print(_summary(reports), file=out)
    document = build_document(spec, structure, reports, options, timings=not args.no_timings, sweep=sweep)
    if args.json is not None:
        _write_json(document, args.json, out)

    status = exit_status(reports)
    if sweep is not None and not all(sweep["monotone"].values()):
        status = EXIT_RESIDUAL
    print("\n" + "=" * 60, file=out)
    if status == EXIT_OK:
        print("✓✓✓ ALL CHECKS PASSED ✓✓✓", file=out)
    else:
        print(f"✗ {document['summary']['failed']} check(s) failed", file=out)
    print(f"Total time: {time.perf_counter() - started:.1f}s", file=out)
    print("=" * 60, file=out)
    return status


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    out = sys.stderr if getattr(args, "json", None) == "-" else sys.stdout
    try:
        if args.command == "list":
            inspectManifolds.list_builtin_manifolds()
            return EXIT_OK
        if args.command == "describe":
            return _describe(args.name)
        return _run(args, out)
    except FolintError as e:
        print(f"      ✗ Error: {e}", file=out)
        for note in getattr(e, "__notes__", []):
            print(f"        {note}", file=out)
        return EXIT_INPUT
    except Exception as e:
        print(f"\n✗ Error: {e}", file=out)
        import traceback

        traceback.print_exc()
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
