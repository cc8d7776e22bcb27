from __future__ import annotations

import numpy as np
import pytest

from online_sampler.models.schemas import DEFAULT_SEED
from online_sampler.services.point_set import SortedPointSet


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow acceptance checks")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


@pytest.fixture
def default_seed() -> SortedPointSet:
    return SortedPointSet.from_values(DEFAULT_SEED)


@pytest.fixture(autouse=True)
def _quiet_progress(monkeypatch):
    monkeypatch.setenv("ONLINE_SAMPLER_PROGRESS_EVERY", "0")
