from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

FIXTURES = Path(__file__).parent / "fixtures"
GOLDENS = Path(__file__).parent / "goldens"

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture(scope="session", autouse=True)
def warm_omp_kernel():
    """Trigger the one-time numba compile (cached on disk) before any timed test."""
    from opal import _omp_kernels

    d = np.eye(3)
    _omp_kernels.greedy_pass(
        np.ascontiguousarray(d.T), np.array([1.0, 0.0, 0.0]), 1, 1, 1e-8, np.zeros(3)
    )


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def goldens_dir() -> Path:
    return GOLDENS
