import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from modrecip import ConnectingFamily, MetricGrid, SolverConfig, solve_modulus


@pytest.fixture(scope="session")
def linf64():
    """The sup-norm unit-square solve at n=64, shared by several suites."""
    grid = MetricGrid(64, norm="linf")
    result = solve_modulus(ConnectingFamily(grid), SolverConfig(p=2.0))
    return grid, result
