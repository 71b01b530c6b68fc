import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

import manifolds  # noqa: E402

_BUILT = {}


def _build(name):
    if name not in _BUILT:
        _BUILT[name] = manifolds.builtin(name).build()
    return _BUILT[name]


@pytest.fixture(scope="session")
def build():
    """Validated builtin structures, built once per session."""
    return _build


@pytest.fixture(params=sorted(manifolds.BUILTINS))
def any_builtin(request):
    return _build(request.param)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_symmetric(rng, n, scale=1.0):
    M = rng.standard_normal((n, n)) * scale
    return 0.5 * (M + M.T)


@pytest.fixture
def symmetric():
    return random_symmetric


@pytest.fixture
def single_thread(monkeypatch):
    monkeypatch.setenv("FOLINT_THREADS", "1")
