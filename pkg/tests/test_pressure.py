import numpy as np
import pytest

from twofluid.core import FluidState, Grid, ModelParams, ScalarField, VectorField
from twofluid.pressure import effective_flux, potential_G, pressure_field
from twofluid.transport import discrete_div

from conftest import sine_velocity, uniform_state


def _fields(grid, rho, n):
    return (ScalarField(grid, np.full(grid.shape, rho), density=True),
            ScalarField(grid, np.full(grid.shape, n), density=True))


@pytest.mark.parametrize("rho, n, kwargs, expected", [
    (1.0, 1.0, dict(gamma=2, alpha=2), 2.0),
    (0.0, 0.0, dict(gamma=2, alpha=2), 0.0),
    (1.0, 1.0, dict(delta=0.1, beta=5), 2 + 0.1 * 2 ** 5),
])
def test_pressure_examples(grid1d, rho, n, kwargs, expected):
    r, m = _fields(grid1d, rho, n)
    np.testing.assert_allclose(pressure_field(r, m, ModelParams(**kwargs)).values, expected,
                               rtol=1e-15)


@pytest.mark.parametrize("alpha, n, expected", [(1, 1.0, 0.0), (2, 2.0, 4.0), (1, 0.0, 1.0)])
def test_potential_examples(grid1d, alpha, n, expected):
    _, m = _fields(grid1d, 0.0, n)
    np.testing.assert_allclose(potential_G(m, alpha).values, expected, atol=1e-15)


def test_effective_flux_at_rest(grid1d):
    s = uniform_state(grid1d, 1.3, 0.7)
    p = ModelParams()
    np.testing.assert_array_equal(effective_flux(s, p).values,
                                  pressure_field(s.rho, s.n, p).values)


def test_effective_flux_vacuum(grid2d):
    u = sine_velocity(grid2d)
    s = FluidState(*_fields(grid2d, 0.0, 0.0), u)
    p = ModelParams(mu=1.0, lam=0.5)
    np.testing.assert_allclose(effective_flux(s, p).values, -2.5 * discrete_div(u))


def test_effective_flux_shear_is_pressure():
    g = Grid((1.0, 1.0), (16, 16))
    x, y = g.coords
    u = np.stack([y, np.zeros_like(y)])  # linear shear, div u = 0
    r, m = _fields(g, 1.0, 2.0)
    s = FluidState(r, m, VectorField(g, u), dirichlet=False)
    p = ModelParams()
    H = effective_flux(s, p).values
    assert np.max(np.abs(H - (1.0 + 4.0))) <= 1e-12


@pytest.mark.parametrize("x", [1e-9, -3e-5, 0.05, -0.0999, 0.0999, 0.1001])
def test_entropy_potential_near_one(grid1d, x):
    x = (1 + x) - 1  # the offset actually stored
    expected = sum((-x) ** j / (j * (j - 1)) for j in range(2, 40))
    n = ScalarField(grid1d, np.full(grid1d.shape, 1 + x))
    got = potential_G(n, 1.0).values[0]
    assert abs(got - expected) <= 1e-14 * expected
