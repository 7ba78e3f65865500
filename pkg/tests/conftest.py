import os
import sys

import pytest

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
for sub in ("src", "utils"):
    path = os.path.join(ROOT, sub)
    if path not in sys.path:
        sys.path.insert(0, path)

from attractor import alpha_policy, build_attractor  # noqa: E402


@pytest.fixture
def data_dir():
    return os.path.join(ROOT, "data")


@pytest.fixture
def attractor():
    """L = 1, H = 3."""
    return build_attractor(1.0, 3)


@pytest.fixture
def expert():
    return alpha_policy(0.0, 3)


@pytest.fixture
def half():
    return alpha_policy(0.5, 3)
