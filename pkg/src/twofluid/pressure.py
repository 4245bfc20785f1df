"""Constitutive scalars: pressure, potentials, enthalpies and the effective flux."""

from __future__ import annotations

import numpy as np

from .core import FluidState, ModelParams, ScalarField
from .transport import discrete_div

__all__ = [
    "power",
    "pressure_field",
    "potential_G",
    "potential_rho",
    "enthalpy_n",
    "enthalpy_rho",
    "enthalpy_artificial",
    "effective_flux",
]


def power(z, p: float) -> np.ndarray:
    """``z**p`` for ``z ≥ 0`` with ``0**p = 0`` exactly (p > 0)."""
    z = np.asarray(z, dtype=float)
    out = np.zeros_like(z)
    pos = z > 0
    out[pos] = z[pos] ** p
    return out


def _pressure(rho, n, p: ModelParams) -> np.ndarray:
    out = power(rho, p.gamma) + power(n, p.alpha)
    if p.delta > 0:
        out = out + p.delta * power(rho + n, p.beta)
    return out


def pressure_field(rho: ScalarField, n: ScalarField, p: ModelParams) -> ScalarField:
    """``ρ^γ + n^α + δ(ρ+n)^β`` nodewise; the artificial term only when δ > 0."""
    return ScalarField(rho.grid, _pressure(rho.values, n.values, p))


_SERIES_RADIUS = 0.1
_SERIES_TERMS = 18


def _entropy_near_one(x: np.ndarray) -> np.ndarray:
    """``(1+x)log(1+x) - x = Σ_{j≥2} (-x)^j / (j(j-1))`` for small ``|x|``."""
    out = np.zeros_like(x)
    for j in range(_SERIES_TERMS + 1, 1, -1):
        out = out + (-x) ** j / (j * (j - 1))
    return out


def _G(n, alpha: float) -> np.ndarray:
    n = np.asarray(n, dtype=float)
    if alpha == 1:
        out = np.ones_like(n)
        pos = n > 0
        x = n[pos] - 1.0
        near = np.abs(x) < _SERIES_RADIUS
        out[pos] = np.where(
            near, _entropy_near_one(np.where(near, x, 0.0)),
            n[pos] * np.log(n[pos]) - n[pos] + 1.0,
        )
        return out
    return power(n, alpha) / (alpha - 1.0)


def potential_G(n: ScalarField, alpha: float) -> ScalarField:
    """``n ln n - n + 1`` for α = 1 (value 1 on vacuum), ``n^α/(α-1)`` for α > 1."""
    if alpha < 1:
        raise ValueError("α must be at least 1")
    return ScalarField(n.grid, _G(n.values, alpha))


def potential_rho(rho, gamma: float) -> np.ndarray:
    if gamma <= 1:
        raise ValueError("the ρ-potential needs γ > 1")
    return power(rho, gamma) / (gamma - 1.0)


# Enthalpies are the derivatives of the stored-energy densities.  The momentum
# solver writes the pressure force as Σ density·∇enthalpy so that its work
# cancels the potential-energy change produced by the upwind transport.

_VACUUM_LOG = 1e-300


def enthalpy_n(n, alpha: float) -> np.ndarray:
    n = np.asarray(n, dtype=float)
    if alpha == 1:
        return np.log(np.maximum(n, _VACUUM_LOG))
    return alpha / (alpha - 1.0) * power(n, alpha - 1.0)


def enthalpy_rho(rho, gamma: float) -> np.ndarray:
    rho = np.asarray(rho, dtype=float)
    if gamma == 1:
        return np.log(np.maximum(rho, _VACUUM_LOG))
    return gamma / (gamma - 1.0) * power(rho, gamma - 1.0)


def enthalpy_artificial(d, p: ModelParams) -> np.ndarray:
    return p.delta * p.beta / (p.beta - 1.0) * power(d, p.beta - 1.0)


def effective_flux(state: FluidState, p: ModelParams) -> ScalarField:
    """``P_total - (2μ+λ) div u``; with δ = 0 only the two physical pressures remain."""
    P = _pressure(state.rho.values, state.n.values, p)
    return ScalarField(state.grid, P - (2 * p.mu + p.lam) * discrete_div(state.u))
