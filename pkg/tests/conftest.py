"""
Pytest configuration for prevmap tests.
"""

import sys
from pathlib import Path

import numpy as np
import pytest

# Add src to Python path for tests
src_path = Path(__file__).parent.parent / 'src'
sys.path.insert(0, str(src_path))

from prevmap.core.config import EmOptions  # noqa: E402


@pytest.fixture
def fast_opts() -> EmOptions:
    """EM options loose enough for quick tests."""
    return EmOptions(max_iter=200, rel_tol=1e-6, grid_step=0.1, top_k_starts=3)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240601)
