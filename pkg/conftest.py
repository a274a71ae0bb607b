from __future__ import annotations
import json
import math
from pathlib import Path

import numpy as np
import pytest

from src.services.engine import SemiAlgebraicSet, SwitchedSystem
from src.services.polylift import Polynomial

FIXTURES = Path(__file__).parent / "fixtures"
SQRT2 = math.sqrt(2.0)


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: full-size runs on the shipped fixtures")


def poly(terms) -> Polynomial:
    return Polynomial.from_terms(2, terms)


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def unit_circle() -> SemiAlgebraicSet:
    return SemiAlgebraicSet((poly([((2, 0), 1.0), ((0, 2), 1.0)]),))


@pytest.fixture
def running_system() -> SwitchedSystem:
    return SwitchedSystem((
        np.array([[1.0425, 0.3416], [-0.5893, 0.5839]]),
        np.array([[0.0, 0.65], [0.65, 0.0]]),
    ))


@pytest.fixture
def running_constraints() -> SemiAlgebraicSet:
    return SemiAlgebraicSet((
        poly([((2, 0), 1.0), ((0, 2), 1.0)]),
        poly([((0, 2), 1.0), ((1, 1), 6 * SQRT2), ((2, 0), -4.0)]),
        poly([((0, 2), -3.0), ((1, 1), 10 * SQRT2), ((2, 0), 2.0)]),
    ))


@pytest.fixture
def example1_system() -> SwitchedSystem:
    return SwitchedSystem((np.array([[1.0216, 0.3234], [-0.6597, 0.5226]]),))


@pytest.fixture
def isolated_log(tmp_path, monkeypatch):
    """Keep the CLI's rotating log file out of the working tree."""
    from src.config import settings

    monkeypatch.setattr(settings, "LOG_FILE", str(tmp_path / "run.log"))
    return tmp_path


def load_fixture(name: str) -> dict:
    return json.loads((FIXTURES / name).read_text(encoding="utf-8"))
