from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from assistdlo import elastica as el  # noqa: E402


@pytest.fixture(scope="session")
def projection_table():
    """Default 128-entry lookup table, built once per session."""
    return el.default_table()


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
