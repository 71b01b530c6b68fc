"""
folint - adjustable parameters
All tolerances, default resolutions and execution knobs live here.
"""

import os

from errors import InputError

TOOL_VERSION = "1.0.0"

# === Jet arithmetic ===
JET_ORDER = 3  # truncation order of every seeded jet

# === Validation ===
VALIDATION_SAMPLES = 16  # per axis, periodicity / positivity sampling
PERIODICITY_TOLERANCE = 1e-12
DEGENERACY_TOLERANCE = 1e-10  # normalized Gram determinant floor
UNIT_TOLERANCE = 1e-9  # |xi| = 1 and xi normal checks

# === Internal consistency ===
ASYMMETRY_TOLERANCE = 1e-6  # raw shape operator asymmetry
NEWTON_FORM_TOLERANCE = 1e-8  # recursive vs explicit Newton transform
AGREEMENT_TOLERANCE = 1e-9  # two forms of one integral, relative to max(1, magnitude)

# === Formula checks ===
HYPOTHESIS_THRESHOLD = 1e-9
RELATIVE_FLOOR = 1e-14  # normalizer floor for relative residuals
ABSOLUTE_FLOOR = 1e-12  # residuals below this pass regardless of the normalizer
DEFAULT_TOLERANCE = 1e-8

# === Default resolutions ===
DEFAULT_GRID = 16  # nodes per torus axis
DEFAULT_LEAF_GRID = 64  # nodes per leaf axis
DEFAULT_SPHERE = 16  # fiber nodes (p=2: angles, p=3: azimuths)
PROBE_GRID = 6  # nodes per axis for hypothesis probes
ORACLE_SAMPLES = 100  # random (point, xi) samples for pointwise oracles
ORACLE_SEED = 20240611
PROBE_SPHERE = 8  # fiber nodes for xi-dependent probes
LEAF_SWEEP = 3  # basepoints per transversal axis in a leaf sweep

# === Execution ===
CHUNK_SIZE = 256  # quadrature nodes evaluated per batch
SIGNIFICANT_DIGITS = 17  # JSON number formatting
# ==============================


def worker_count():
    """
    Number of worker threads used to fan out quadrature chunks.

    FOLINT_THREADS overrides the default (available CPUs).
    """
    raw = os.environ.get("FOLINT_THREADS")
    if raw is None or raw.strip() == "":
        return max(1, os.cpu_count() or 1)
    try:
        value = int(raw)
    except ValueError:
        raise InputError(f"FOLINT_THREADS must be a positive integer, got {raw!r}")
    if value < 1:
        raise InputError(f"FOLINT_THREADS must be a positive integer, got {raw!r}")
    return value
