"""Shared fixtures for the laboratory test suite."""

import math
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from src.core.model import ModelKind, make_spec
from src.core.settings import LabSettings

REPO_ROOT = Path(__file__).parent.parent


@pytest.fixture
def settings():
    return LabSettings()


@pytest.fixture
def hermitian_model3():
    return make_spec(kind=ModelKind.MODEL3, J=1.0, V=0.5, phi=math.pi / 2, gamma=0.0, L=8)


@pytest.fixture
def model2_small():
    return make_spec(kind=ModelKind.MODEL2, J=1.0, V=1.5, phi=math.pi / 2, beta=0.3, L=8)


@pytest.fixture
def free_ring_model2():
    """V = 0 nonreciprocal ring: two identical spin copies of a Hatano-Nelson chain."""
    return make_spec(kind=ModelKind.MODEL2, J=1.0, V=0.0, beta=0.5, L=8)




@pytest.fixture
def repo_root():
    return REPO_ROOT
