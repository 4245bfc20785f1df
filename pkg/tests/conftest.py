import numpy as np
import pytest

from twofluid.core import FluidState, Grid, ScalarField, VectorField


@pytest.fixture
def grid1d():
    return Grid((1.0,), (64,))


@pytest.fixture
def grid2d():
    return Grid((1.0, 1.0), (16, 16))


def sine_velocity(grid, amp=1.0):
    """``amp·Π sin(πx_a)`` on every component; zero on the boundary."""
    v = np.full(grid.shape, amp)
    for x, L in zip(grid.coords, grid.extent):
        v = v * np.sin(np.pi * x / L)
    comps = np.stack([v] * grid.dim)
    comps[:, grid.boundary_mask] = 0.0
    return VectorField(grid, comps)


def smooth_density(grid, level=1.0, amp=0.5):
    f = np.full(grid.shape, 1.0)
    for x, L in zip(grid.coords, grid.extent):
        f = f * np.cos(2 * np.pi * x / L)
    return ScalarField(grid, level * (1 + amp * f), density=True)


def uniform_state(grid, rho=1.0, n=1.0):
    return FluidState.from_arrays(grid, np.full(grid.shape, rho), np.full(grid.shape, n))


_CRITERIA = []


@pytest.fixture
def criterion():
    """Record and print one ``PASS``/``FAIL`` line per acceptance criterion."""

    def emit(label: str, passed: bool, detail: str) -> bool:
        line = f"{'PASS' if passed else 'FAIL'}  {label}: {detail}"
        print(line)
        _CRITERIA.append(line)
        return passed

    return emit


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERIA:
            terminalreporter.write_line(line)
