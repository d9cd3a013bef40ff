"""
Shared fixtures
"""

from typing import Optional, Sequence, Tuple

import numpy as np
import pytest

from core.config import Fi2PopConfig, GridConfig, NumericConfig, SifaConfig
from core.domains import NumericDomain, VoxelDomain
from core.population import Feasibility, RngStream, Solution


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow acceptance tests")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng() -> RngStream:
    return RngStream(0)


@pytest.fixture
def voxel_domain() -> VoxelDomain:
    return VoxelDomain()


@pytest.fixture
def numeric_domain() -> NumericDomain:
    return NumericDomain(NumericConfig())


@pytest.fixture
def short_loop() -> Fi2PopConfig:
    return Fi2PopConfig(generations=5)


@pytest.fixture
def sifa_cfg() -> SifaConfig:
    return SifaConfig()


@pytest.fixture
def grid_cfg() -> GridConfig:
    return GridConfig().with_ranges((1.0, 5.0), (1.0, 5.0))


def make_solution(
    solution_id: int,
    fitness: float,
    violations: int = 0,
    behavior: Tuple[float, float] = (1.0, 1.0),
    features: Optional[Sequence[float]] = None,
    genome=None,
) -> Solution:
    """Hand-built solution; violations > 0 makes it infeasible"""
    feasibility = Feasibility.infeasible(violations) if violations else Feasibility.feasible()
    return Solution(
        id=solution_id,
        genome=genome,
        feasibility=feasibility,
        fitness=fitness,
        behavior=behavior,
        features=np.asarray(features if features is not None else [0.5, 0.5], dtype=float),
    )


@pytest.fixture
def solution_factory():
    return make_solution
