"""Numerical lab for the compressible two-fluid Navier-Stokes approximation.

The system couples two densities ``ρ, n`` transported by one velocity ``u``
through the pressure ``ρ^γ + n^α``.  It is approximated in three tiers:
a Galerkin velocity on ``k`` Laplacian modes, artificial viscosity ``ε`` in
the continuity equations and artificial pressure ``δ(ρ+n)^β``.
"""

from .basis import GalerkinBasis, SpectralCoeffs, build_basis, project, reconstruct
from .core import (
    FluidState,
    Grid,
    ModelParams,
    ScalarField,
    ValidationError,
    VectorField,
    Verdict,
    total_mass,
    validate_params,
)
from .diagnostics import DefectReport, EnergyBudget, energy_budget
from .harness import InitialSpec, Scenario, ladder, make_initial, run_simulation
from .momentum import FixedPointError, step_state
from .transport import StabilityError, advance_density

__version__ = "0.1.0"

__all__ = [
    "GalerkinBasis", "SpectralCoeffs", "build_basis", "project", "reconstruct",
    "FluidState", "Grid", "ModelParams", "ScalarField", "ValidationError", "VectorField",
    "Verdict", "total_mass", "validate_params",
    "DefectReport", "EnergyBudget", "energy_budget",
    "InitialSpec", "Scenario", "ladder", "make_initial", "run_simulation",
    "FixedPointError", "step_state", "StabilityError", "advance_density",
]
