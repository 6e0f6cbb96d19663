import numpy as np
import pytest

from lsmicro.grid import PeriodicGrid, isotropic_tensor
from lsmicro.levelset import initial_structure

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report():
    """Record a one-line acceptance verdict, printed in the terminal summary."""

    def _report(criterion: str, passed: bool, detail: str) -> None:
        ACCEPTANCE_LINES.append(f"[{'PASS' if passed else 'FAIL'}] criterion {criterion}: {detail}")

    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def solid():
    return isotropic_tensor(1.0, 0.3)


@pytest.fixture(scope="session")
def multiphase_base():
    E1 = isotropic_tensor(1.0, 0.3)
    return [1e-3 * E1, E1, isotropic_tensor(0.5, 0.3), 1e-3 * E1]


@pytest.fixture(scope="session")
def grid32():
    return PeriodicGrid(32)


@pytest.fixture(scope="session")
def holes100():
    return initial_structure(PeriodicGrid(100), "holes", m=2, r=0.15)


def smooth_bumps(grid, count, seed, layers=1):
    """Random periodic Gaussian bumps, shape ``(count, layers, n, n)``."""
    rng = np.random.default_rng(seed)
    X, Y = grid.coordinates()
    out = np.empty((count, layers) + grid.shape)
    for k in range(count):
        for m in range(layers):
            c = rng.uniform(0.0, 1.0, 2)
            s = rng.uniform(0.08, 0.2)
            dx = (X - c[0] + 0.5) % 1.0 - 0.5
            dy = (Y - c[1] + 0.5) % 1.0 - 0.5
            out[k, m] = np.exp(-(dx**2 + dy**2) / (2 * s * s))
    return out
