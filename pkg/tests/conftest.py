import sys
from pathlib import Path

import numpy as np
import pytest

REPO = Path(__file__).resolve().parents[1]
if str(REPO / "src") not in sys.path:
    sys.path.insert(0, str(REPO / "src"))


@pytest.fixture(scope="session")
def repo_root() -> Path:
    return REPO


@pytest.fixture(scope="session")
def goldens_root() -> Path:
    return REPO / "goldens"


def rel_err(got: np.ndarray, ref: np.ndarray, floor: float = 1e-8) -> float:
    """Hybrid max error: relative above the floor magnitude, absolute below."""
    got, ref = np.asarray(got, float), np.asarray(ref, float)
    diff = np.abs(got - ref)
    mag = np.abs(ref)
    return float(np.where(mag >= floor, diff / np.maximum(mag, floor), diff).max())
