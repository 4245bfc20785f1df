"""Galerkin momentum update coupled to the density transport.

The unknown is the vector of momentum projections ``m_i = ∫ (ρ+n) u·ψ_i``.
Each step solves

    G(d¹) c¹ = G(d⁰) c⁰ + dt R(ρ⁰, n⁰, d¹, u^½) - dt V (c⁰ + c¹)/2

where ``G`` is the mass-weighted Gram matrix, ``V`` the viscous stiffness
(Crank-Nicolson, exact in the eigenbasis) and ``R`` collects pressure,
convection and the ``ε∇u·∇(ρ+n)`` term.  The densities ``ρ¹, n¹`` come from
:func:`advance_density` driven by the midpoint velocity ``u^½``, which makes
the map ``c¹ ↦ c¹`` a fixed-point problem solved by Picard iteration.

Pressure and convection are written on the faces with the same upwind mass
fluxes as the transport step.  Tested against the velocity, those terms then
cancel the potential- and kinetic-energy changes caused by transport exactly,
so the discrete energy balance only carries the time-discretization error.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .basis import GalerkinBasis, SpectralCoeffs, project, reconstruct
from .core import FluidState, ModelParams, ScalarField, VectorField
from .pressure import enthalpy_artificial, enthalpy_n, enthalpy_rho
from .transport import (
    StabilityError,
    advance_density,
    face_area,
    face_average,
    face_jump,
    face_velocities,
    stable_dt,
    upwind_value,
)

__all__ = [
    "FixedPointError",
    "StepReport",
    "gram_matrix",
    "viscous_matrix",
    "momentum_projection",
    "explicit_forces",
    "momentum_rhs",
    "step_state",
]

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 50
GRAM_REGULARIZATION = 1e-14


class FixedPointError(RuntimeError):
    """Picard iteration did not reach the tolerance."""

    def __init__(self, residual: float, iterations: int):
        super().__init__(
            f"fixed point not reached after {iterations} iterations (residual {residual:.3e})"
        )
        self.residual = residual
        self.iterations = iterations


@dataclass
class StepReport:
    iterations: int
    residual: float
    dt: float
    coeffs: Optional[np.ndarray] = field(default=None, repr=False)
    vacuum_regularized: bool = False


def _face_tables(basis: GalerkinBasis):
    """Face averages and jumps of every mode, per axis, flattened over faces."""
    cached = basis._cache.get("faces")
    if cached is None:
        avg, jump = [], []
        for a in range(basis.grid.dim):
            avg.append(face_average(basis.table, a + 1).reshape(basis.k, -1))
            jump.append(face_jump(basis.table, a + 1).reshape(basis.k, -1))
        cached = basis._cache["faces"] = (avg, jump)
    return cached


def gram_matrix(basis: GalerkinBasis, d: np.ndarray) -> np.ndarray:
    """``G_ij = ∫ d ψ_i ψ_j`` under grid quadrature."""
    return (basis.weighted_flat * d.reshape(1, -1)) @ basis.flat.T


def viscous_matrix(basis: GalerkinBasis, p: ModelParams) -> np.ndarray:
    """Stiffness of ``-μΔ - (μ+λ)∇div`` on the (component, mode) index.

    Row/column ``a*k + i`` is mode ``i`` of component ``a``.
    """
    S = basis.stiffness
    dim, k = basis.grid.dim, basis.k
    lap = sum(S[a, a] for a in range(dim))
    V = np.zeros((dim * k, dim * k))
    for a in range(dim):
        for b in range(dim):
            block = (p.mu + p.lam) * S[b, a].T
            if a == b:
                block = block + p.mu * lap
            V[a * k:(a + 1) * k, b * k:(b + 1) * k] = block
    return V


def _flat(c: np.ndarray) -> np.ndarray:
    return c.T.reshape(-1)


def _unflat(v: np.ndarray, k: int, dim: int) -> np.ndarray:
    return v.reshape(dim, k).T


def momentum_projection(state: FluidState, basis: GalerkinBasis) -> np.ndarray:
    """``m[i, a] = ∫ (ρ+n) u_a ψ_i``."""
    comps = state.u.components.reshape(basis.grid.dim, -1)
    return basis.weighted_flat @ (comps * state.d.reshape(1, -1)).T


def explicit_forces(
    rho: np.ndarray,
    n: np.ndarray,
    u: VectorField,
    p: ModelParams,
    basis: GalerkinBasis,
    d_eps: Optional[np.ndarray] = None,
    include_eps_term: bool = True,
) -> np.ndarray:
    """Pressure, convection and ε-coupling tested against every mode.

    ``rho, n`` feed the pressure force and the convective mass flux;
    ``d_eps`` (default ``rho + n``) is the total density whose gradient enters
    the ``ε∇u·∇(ρ+n)`` term.
    """
    grid = basis.grid
    dim, k = grid.dim, basis.k
    avg, jump = _face_tables(basis)
    d = rho + n
    if d_eps is None:
        d_eps = d
    h_rho = enthalpy_rho(rho, p.gamma)
    h_n = enthalpy_n(n, p.alpha)
    h_d = enthalpy_artificial(d, p) if p.delta > 0 else None
    uf = face_velocities(u)
    out = np.zeros((k, dim))

    for b in range(dim):
        area = face_area(grid, b)
        ub = uf[b]
        # pressure: Σ density_upwind · jump(enthalpy) on faces normal to b
        force = upwind_value(rho, ub, b) * face_jump(h_rho, b)
        force = force + upwind_value(n, ub, b) * face_jump(h_n, b)
        if h_d is not None:
            force = force + upwind_value(d, ub, b) * face_jump(h_d, b)
        out[:, b] -= avg[b] @ (area * force).ravel()

        mass_flux = (area * ub * upwind_value(d, ub, b)).ravel()
        for a in range(dim):
            ua_face = face_average(u.components[a], b).ravel()
            out[:, a] += jump[b] @ (mass_flux * ua_face)

        if include_eps_term and p.epsilon > 0:
            coupling = (p.epsilon * area / grid.spacing[b] * face_jump(d_eps, b)).ravel()
            for a in range(dim):
                du = face_jump(u.components[a], b).ravel()
                out[:, a] -= avg[b] @ (coupling * du)
    return out


def momentum_rhs(state: FluidState, p: ModelParams, basis: GalerkinBasis) -> SpectralCoeffs:
    """Time derivative of the momentum projections at ``state``.

    The viscous part uses the exact mode gradients; the rest is
    :func:`explicit_forces` evaluated at the state itself.
    """
    c = project(state.u, basis).values
    V = viscous_matrix(basis, p)
    visc = _unflat(V @ _flat(c), basis.k, basis.grid.dim)
    forces = explicit_forces(state.rho.values, state.n.values, state.u, p, basis)
    return SpectralCoeffs(forces - visc)


def _solve_velocity(G: np.ndarray, V: np.ndarray, rhs: np.ndarray, dt: float,
                    k: int, dim: int) -> np.ndarray:
    A = 0.5 * dt * V
    for a in range(dim):
        A[a * k:(a + 1) * k, a * k:(a + 1) * k] += G
    return _unflat(np.linalg.solve(A, _flat(rhs)), k, dim)


def step_state(
    state: FluidState,
    p: ModelParams,
    basis: GalerkinBasis,
    dt: float,
    coeffs: Optional[np.ndarray] = None,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    freeze_densities: bool = False,
    include_eps_term: bool = True,
    forcing: Optional[Callable[[float], np.ndarray]] = None,
):
    """Advance ``state`` by ``dt``.

    Parameters
    ----------
    coeffs : (k, dim) array, optional
        Velocity coefficients of ``state``; projected from ``state.u`` if omitted.
    freeze_densities : bool
        Skip the transport step (isolates the coefficient ODE for verification).
    include_eps_term : bool
        Drop the ``ε∇u·∇(ρ+n)`` momentum term when False (sign-sensitivity checks).
    forcing : callable, optional
        ``t -> (k, dim)`` source added to the momentum projections, averaged
        over the step.

    Returns
    -------
    (FluidState, StepReport)

    Raises
    ------
    StabilityError
        If ``dt`` violates the transport bound for the current or midpoint velocity.
    FixedPointError
        If the Picard iteration does not converge within ``max_iter``.
    """
    grid = basis.grid
    k, dim = basis.k, grid.dim
    c0 = project(state.u, basis).values if coeffs is None else np.asarray(coeffs, float)
    if not freeze_densities:
        dt_max = stable_dt(state.u)
        if dt > dt_max * (1 + 1e-12):
            raise StabilityError(dt, dt_max)

    rho0, n0 = state.rho, state.n
    d0 = state.d
    regularized = bool(np.any(d0 <= 0))
    G0 = gram_matrix(basis, d0)
    V = viscous_matrix(basis, p)
    base = _unflat(_flat(G0 @ c0) - 0.5 * dt * (V @ _flat(c0)), k, dim)
    if forcing is not None:
        base = base + 0.5 * dt * (forcing(state.time) + forcing(state.time + dt))

    c_iter = c0.copy()
    rho1, n1 = rho0, n0
    residual = np.inf
    for it in range(1, max_iter + 1):
        u_mid = reconstruct(SpectralCoeffs(0.5 * (c0 + c_iter)), basis)
        if not freeze_densities:
            rho1 = advance_density(rho0, u_mid, p.epsilon, dt)
            n1 = advance_density(n0, u_mid, p.epsilon, dt)
        d1 = rho1.values + n1.values
        G1 = gram_matrix(basis, d1)
        if np.any(d1 <= 0):
            regularized = True
        if regularized:
            G1 = G1 + GRAM_REGULARIZATION * np.eye(k)
        forces = explicit_forces(
            rho0.values, n0.values, u_mid, p, basis, d_eps=d1,
            include_eps_term=include_eps_term,
        )
        c_new = _solve_velocity(G1, V, base + dt * forces, dt, k, dim)
        residual = float(np.max(np.abs(c_new - c_iter))) if c_new.size else 0.0
        c_iter = c_new
        if residual <= tol:
            break
    else:
        raise FixedPointError(residual, max_iter)

    u1 = reconstruct(SpectralCoeffs(c_iter), basis)
    new_state = FluidState(
        ScalarField(grid, rho1.values.copy(), density=True),
        ScalarField(grid, n1.values.copy(), density=True),
        u1,
        state.time + dt,
    )
    return new_state, StepReport(it, residual, dt, c_iter, regularized)
