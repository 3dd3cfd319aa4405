# levytype/tests/conftest.py
import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from samplers import RandomSource  # noqa: E402


@pytest.fixture
def rng():
    return RandomSource(12345)


@pytest.fixture
def out_dir(tmp_path):
    return str(tmp_path / "run")
