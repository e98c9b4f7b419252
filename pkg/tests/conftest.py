import os

import numpy as np
import pytest

from sepstruct.filtering import NullStore

REPO_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))

# Null distributions are expensive (10^4 reconstructions per key); they are
# cached on disk and reused across test runs. Override with SEPSTRUCT_TEST_CACHE.
CACHE_DIR = os.environ.get("SEPSTRUCT_TEST_CACHE", os.path.join(REPO_ROOT, ".cache", "nulls"))

WORKERS = max(1, min(4, os.cpu_count() or 1))


@pytest.fixture(scope="session")
def null_store():
    return NullStore(CACHE_DIR)


@pytest.fixture(scope="session")
def workers():
    return WORKERS


def random_density(rng: np.random.Generator, n_qubits: int, rank: int | None = None):
    """Haar-ish random state for property tests (not part of the library API)."""
    from sepstruct.qmath import DensityMatrix

    d = 2**n_qubits
    rank = rank or d
    g = rng.standard_normal((d, rank)) + 1j * rng.standard_normal((d, rank))
    m = g @ g.conj().T
    return DensityMatrix(tuple(range(1, n_qubits + 1)), m / np.trace(m).real)


def random_unitary(rng: np.random.Generator, d: int) -> np.ndarray:
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    q, r = np.linalg.qr(g)
    return q * (np.diag(r) / np.abs(np.diag(r)))
