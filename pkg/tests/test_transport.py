import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from twofluid.core import Grid, ScalarField, ValidationError, VectorField, total_mass
from twofluid.diagnostics import weight_family
from twofluid.transport import (
    MollifierSpec,
    StabilityError,
    advance_density,
    beta_k,
    commutator_error,
    continuity_residual,
    cutoff_b,
    cutoff_b_prime,
    cutoff_L,
    cutoff_T,
    cutoff_T_prime,
    cutoff_T_second,
    mollify,
    renormalization_residual,
    stable_dt,
)

from conftest import sine_velocity, smooth_density


# ---------------------------------------------------------------- advance_density

def test_rest_is_stationary(grid1d):
    f = smooth_density(grid1d)
    out = advance_density(f, VectorField.zeros(grid1d), 0.0, 0.1)
    np.testing.assert_array_equal(out.values, f.values)


def _discrete_solenoidal(grid):
    """Centred curl of a stream function vanishing on the outer two node rings.

    Face velocities are nodal averages, so the face-flux divergence of this
    field is a difference of commuting centred differences: zero exactly.
    """
    x, y = grid.coords
    hx, hy = grid.spacing
    psi = np.sin(np.pi * x) ** 2 * np.sin(np.pi * y) ** 2
    psi[grid.distance_to_boundary() < 1.5 * hx] = 0.0
    u = np.zeros((2,) + grid.shape)
    u[0, 1:-1, 1:-1] = (psi[1:-1, 2:] - psi[1:-1, :-2]) / (2 * hy)
    u[1, 1:-1, 1:-1] = -(psi[2:, 1:-1] - psi[:-2, 1:-1]) / (2 * hx)
    return VectorField(grid, u)


@pytest.mark.parametrize("eps", [0.0, 1e-2])
def test_constants_stay_constant_2d(grid2d, eps):
    v = _discrete_solenoidal(grid2d)
    assert v.max_abs() > 0.5
    f = ScalarField.constant(grid2d, 2.5, density=True)
    for _ in range(20):
        f = advance_density(f, v, eps, 0.5 * stable_dt(v))
    assert np.max(np.abs(f.values - 2.5)) <= 1e-12


def test_constant_under_zero_flux_divergence():
    g = Grid((1.0,), (32,))
    f = ScalarField.constant(g, 3.0, density=True)
    out = advance_density(f, VectorField.zeros(g), 0.3, 0.01)
    assert np.max(np.abs(out.values - 3.0)) <= 1e-12


def test_heat_step_against_cosine_series():
    g = Grid((1.0,), (128,))
    x = g.coords[0]
    f0 = np.exp(-((x - 0.4) / 0.1) ** 2)
    eps, dt, steps = 1e-2, 1e-3, 200
    f = ScalarField(g, f0, density=True)
    for _ in range(steps):
        f = advance_density(f, VectorField.zeros(g), eps, dt)
    assert total_mass(f) == pytest.approx(total_mass(ScalarField(g, f0)), rel=1e-13)
    assert f.values.max() < f0.max()
    # Neumann heat solution from the cosine series of the continuous profile
    t = dt * steps
    ref = np.zeros_like(x)
    for m in range(60):
        am, _ = integrate.quad(lambda s: math.exp(-((s - 0.4) / 0.1) ** 2)
                               * math.cos(m * math.pi * s), 0, 1, limit=200)
        am *= 1 if m == 0 else 2
        ref += am * np.cos(m * math.pi * x) * math.exp(-eps * (m * math.pi) ** 2 * t)
    assert np.max(np.abs(f.values - ref)) < 2e-3


def test_stability_violation_reports_bound(grid1d):
    u = sine_velocity(grid1d)
    dt_max = stable_dt(u)
    assert dt_max == pytest.approx(grid1d.spacing[0] / (2 * np.max(u.components)))
    with pytest.raises(StabilityError) as info:
        advance_density(smooth_density(grid1d), u, 0.0, 2 * dt_max)
    assert info.value.dt_max == pytest.approx(dt_max)


def test_rejects_bad_input(grid1d):
    f = smooth_density(grid1d)
    with pytest.raises(ValidationError):
        advance_density(f, VectorField.zeros(grid1d), -1.0, 0.1)
    with pytest.raises(ValidationError):
        advance_density(f, VectorField.zeros(grid1d), 0.0, 0.0)


@settings(max_examples=25, deadline=None)
@given(
    seed=st.integers(0, 10_000),
    eps=st.sampled_from([0.0, 1e-3, 1e-1]),
    frac=st.floats(0.05, 1.0),
    dim=st.sampled_from([1, 2]),
)
def test_positivity_mass_and_comparability(seed, eps, frac, dim):
    rng = np.random.default_rng(seed)
    g = Grid((1.0,) * dim, (16,) * dim)
    u = rng.normal(size=(dim,) + g.shape)
    u[:, g.boundary_mask] = 0.0
    v = VectorField(g, u)
    f = ScalarField(g, rng.uniform(0, 2, g.shape), density=True)
    r = ScalarField(g, f.values * rng.uniform(0.5, 2.0, g.shape), density=True)
    dt = frac * stable_dt(v)
    m0 = total_mass(f)
    f1 = advance_density(f, v, eps, dt)
    assert np.all(f1.values >= 0)
    assert abs(total_mass(f1) - m0) <= 1e-12 * m0
    # monotone and linear: the ordering f/2 ≤ r ≤ 2f survives the step
    r1 = advance_density(r, v, eps, dt)
    assert np.all(r1.values <= 2 * f1.values + 1e-13)
    assert np.all(f1.values <= 2 * r1.values + 1e-13)


# --------------------------------------------------------- renormalization residual

def _trajectory(points, T=0.1, eps=0.0):
    g = Grid((1.0,), (points,))
    u = sine_velocity(g)
    f = ScalarField(g, 2 + 1.5 * np.cos(2 * np.pi * g.coords[0]), density=True)
    n = int(round(T / (0.4 * g.spacing[0])))
    dt = T / n
    fs = [f]
    for _ in range(n):
        fs.append(advance_density(fs[-1], u, eps, dt))
    return g, fs, [u] * n, dt


def test_renormalization_rest(grid1d):
    f = ScalarField.constant(grid1d, 2.0, density=True)
    w = weight_family(grid1d, 4)
    u = VectorField.zeros(grid1d)
    r = renormalization_residual([f, f, f], [u, u], lambda z: z ** 2, lambda z: 2 * z, w, 0.1)
    assert abs(r) <= 1e-12


def test_identity_b_gives_continuity_residual():
    g, fs, us, dt = _trajectory(64)
    w = weight_family(g, 4)
    r = renormalization_residual(fs, us, lambda z: z, np.ones_like, w, dt)
    assert r == continuity_residual(fs, us, w, dt)
    assert abs(r) <= 1e-12


def test_renormalization_rejects():
    g, fs, us, dt = _trajectory(32)
    w = weight_family(g, 4)
    with pytest.raises(ValidationError):
        renormalization_residual(fs, us[:-3], lambda z: z, np.ones_like, w, dt)
    with pytest.raises(ValidationError):
        renormalization_residual(fs, us, lambda z: z, np.ones_like, np.ones(g.shape), dt)


def test_renormalization_defect_shrinks_with_refinement():
    k = 1.0
    vals = []
    for points in (64, 128, 256):
        g, fs, us, dt = _trajectory(points)
        vals.append(abs(renormalization_residual(
            fs, us, lambda z: cutoff_T(z, k), lambda z: cutoff_T_prime(z, k),
            weight_family(g, 4), dt)))
    assert vals[0] > vals[1] > vals[2]


# ------------------------------------------------------------------- commutator

def _smooth_pair(points):
    g = Grid((1.0,), (points,))
    x = g.coords[0]
    return g, ScalarField(g, 1 + 0.5 * np.cos(2 * np.pi * x), density=True), sine_velocity(g)


def test_commutator_constant_velocity():
    g, f, _ = _smooth_pair(256)
    u = VectorField(g, np.full((1,) + g.shape, 0.7))
    assert commutator_error(f, u, MollifierSpec(8 * g.spacing[0])) <= 1e-10


def test_commutator_zero_density():
    g, _, u = _smooth_pair(256)
    f = ScalarField.constant(g, 0.0, density=True)
    assert commutator_error(f, u, MollifierSpec(8 * g.spacing[0])) == 0.0


def test_commutator_decreases():
    g, f, u = _smooth_pair(512)
    h = g.spacing[0]
    errs = [commutator_error(f, u, MollifierSpec(m * h)) for m in (32, 16, 8, 4)]
    assert all(a > b for a, b in zip(errs, errs[1:]))


@pytest.mark.parametrize("factor", [1.0, 1.9])
def test_commutator_rejects_unresolved(factor):
    g, f, u = _smooth_pair(128)
    with pytest.raises(ValidationError):
        commutator_error(f, u, MollifierSpec(factor * g.spacing[0]))


def test_mollify_reproduces_constants_inside():
    g = Grid((1.0,), (256,))
    sigma = 8 * g.spacing[0]
    out = mollify(np.ones(g.shape), g, MollifierSpec(sigma))
    inside = g.distance_to_boundary() > sigma + 1e-12
    np.testing.assert_allclose(out[inside], 1.0, atol=1e-13)


def test_mollify_2d_conserves_mass():
    g = Grid((1.0, 1.0), (64, 64))
    f = smooth_density(g).values
    out = mollify(f, g, MollifierSpec(4 * g.spacing[0]), extended=True)
    assert out.sum() * np.prod(g.spacing) == pytest.approx(g.integrate(f), rel=1e-12)


# ---------------------------------------------------------------------- cut-offs

K_VALUES = [0.5, 1.0, 2.0, 7.5]


@pytest.mark.parametrize("k", K_VALUES)
def test_cutoff_T_shape(k):
    z = np.linspace(0, 5 * k, 501)  # coarse enough that round-off stays below 1e-10
    T = cutoff_T(z, k)
    low = z <= k
    np.testing.assert_array_equal(T[low], z[low])
    assert cutoff_T(5 * k, k) == pytest.approx(2 * k, abs=1e-15)
    assert np.all(np.diff(T) >= 0)
    hstep = z[1] - z[0]
    second = (T[2:] - 2 * T[1:-1] + T[:-2]) / hstep ** 2
    assert second.max() <= 1e-10
    assert np.all(cutoff_T_second(z, k) <= 0)


@pytest.mark.parametrize("k", K_VALUES)
def test_cutoff_T_is_twice_differentiable(k):
    for joint in (k, 3 * k):
        lo, hi = joint * (1 - 1e-9), joint * (1 + 1e-9)
        assert cutoff_T_prime(lo, k) == pytest.approx(cutoff_T_prime(hi, k), abs=1e-8)
        assert cutoff_T_second(lo, k) == pytest.approx(cutoff_T_second(hi, k), abs=1e-8)


@pytest.mark.parametrize("k", K_VALUES)
def test_cutoff_L_examples(k):
    z = np.linspace(1e-3, k, 50)
    np.testing.assert_allclose(cutoff_L(z, k), z * np.log(z), rtol=1e-15)
    integral, _ = integrate.quad(lambda s: float(cutoff_T(s, k)) / s ** 2, k, 3 * k,
                                 epsabs=1e-14, epsrel=1e-14)
    beta = math.log(k) + integral + 2 / 3
    assert beta_k(k) == pytest.approx(beta, rel=1e-13)
    assert cutoff_L(3 * k, k) == pytest.approx(beta * 3 * k - 2 * k, rel=1e-12)
    assert cutoff_L(0.0, k) == 0.0


def test_L1_at_one():
    assert cutoff_L(1.0, 1.0) == 0.0


@pytest.mark.parametrize("k", K_VALUES)
def test_cutoff_L_exact_matches_quadrature(k):
    z = np.linspace(0, 4 * k, 41)
    np.testing.assert_allclose(cutoff_L(z, k), cutoff_L(z, k, method="quad"),
                               rtol=1e-10, atol=1e-12)


@pytest.mark.parametrize("k", K_VALUES)
def test_cutoff_b_examples(k):
    z = np.linspace(0.01, 5 * k, 500)
    np.testing.assert_allclose(cutoff_b(z, k) + beta_k(k) * z, cutoff_L(z, k),
                               rtol=1e-12, atol=1e-12)
    far = z[z >= 3 * k]
    assert np.max(np.abs(cutoff_b_prime(far, k))) <= 1e-10
    np.testing.assert_allclose(cutoff_b(far, k), -2 * k, rtol=1e-15)
    # b'z - b = T analytically and under centered differences
    np.testing.assert_allclose(cutoff_b_prime(z, k) * z - cutoff_b(z, k), cutoff_T(z, k),
                               atol=1e-12 * max(k, 1))
    step = 1e-5
    fd = (cutoff_b(z + step, k) - cutoff_b(z - step, k)) / (2 * step)
    assert np.max(np.abs(fd * z - cutoff_b(z, k) - cutoff_T(z, k))) <= 1e-6
