"""Quantities monitored along solver trajectories.

All integrals use the trapezoid rule of the grid.  Gradients inside the
energy functional are taken with the operators of the solver: exact mode
derivatives for the Galerkin velocity, face jumps for the densities.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .basis import GalerkinBasis, project
from .core import FluidState, Grid, ModelParams, ScalarField, ValidationError
from .pressure import (
    _G,
    effective_flux,
    enthalpy_artificial,
    enthalpy_n,
    enthalpy_rho,
    potential_rho,
    power,
)
from .transport import cutoff_T, face_area, face_jump

__all__ = [
    "EnergyBudget",
    "DefectReport",
    "energy_budget",
    "energy_equality_residual",
    "step_energy_residual",
    "default_theta",
    "comparability_check",
    "convex_ratio",
    "fractions",
    "vacuum_mask",
    "reduction_metric",
    "llogl",
    "check_theta",
    "higher_integrability",
    "flux_pairing",
    "smooth_step",
    "interior_cutoff",
    "weight_family",
    "time_integral",
]

VACUUM_FLOOR = 1e-12


@dataclass
class EnergyBudget:
    kinetic: float
    potential_n: float
    potential_rho: float
    artificial: float
    dissipation_rate: float
    eps_dissipation_rate: float

    @property
    def total(self) -> float:
        return self.kinetic + self.potential_n + self.potential_rho + self.artificial

    def as_dict(self) -> dict:
        out = asdict(self)
        out["total"] = self.total
        return out


@dataclass
class DefectReport:
    """Per-run record of the monitored quantities.

    Series are aligned with the stored snapshots (``times``).
    """

    times: List[float] = field(default_factory=list)
    comparability_margin: Optional[float] = None
    comparability_series: List[float] = field(default_factory=list)
    convex_ratio_series: Dict[str, List[float]] = field(
        default_factory=lambda: {"rho": [], "n": []}
    )
    reduction_metric: Optional[float] = None
    llogl: Tuple[float, float] = (0.0, 0.0)
    llogl_series: Dict[str, List[float]] = field(
        default_factory=lambda: {"rho": [], "n": []}
    )
    higher_integrability: Dict[str, float] = field(default_factory=dict)
    flux_pairing: Optional[float] = None
    artificial_series: Dict[str, List[float]] = field(
        default_factory=lambda: {"delta_rho_n_beta": [], "delta_d_beta": []}
    )
    energy: List[dict] = field(default_factory=list)
    energy_residual: List[float] = field(default_factory=list)
    failure: Optional[str] = None

    def to_dict(self) -> dict:
        out = asdict(self)
        out["llogl"] = list(self.llogl)
        return out


# ---------------------------------------------------------------------------
# energy


def _face_energy_rate(grid: Grid, pairs) -> float:
    """``Σ_faces (A_f/h) Δa Δb`` summed over (a, b) pairs and axes."""
    total = 0.0
    for ax, h in enumerate(grid.spacing):
        coef = face_area(grid, ax) / h
        for a, b in pairs:
            total += float(np.sum(coef * face_jump(a, ax) * face_jump(b, ax)))
    return total


def _velocity_dissipation(state: FluidState, p: ModelParams,
                          basis: Optional[GalerkinBasis], coeffs) -> float:
    grid = state.grid
    if basis is not None:
        from .momentum import viscous_matrix

        c = project(state.u, basis).values if coeffs is None else np.asarray(coeffs)
        flat = c.T.reshape(-1)
        return float(flat @ viscous_matrix(basis, p) @ flat)
    from .transport import discrete_div

    grad2 = _face_energy_rate(grid, [(c, c) for c in state.u.components])
    div = discrete_div(state.u)
    return p.mu * grad2 + (p.mu + p.lam) * grid.integrate(div ** 2)


def _eps_dissipation(rho, n, grid: Grid, p: ModelParams) -> float:
    if p.epsilon == 0:
        return 0.0
    pairs = [(rho, enthalpy_rho(rho, p.gamma)), (n, enthalpy_n(n, p.alpha))]
    if p.delta > 0:
        d = rho + n
        pairs.append((d, enthalpy_artificial(d, p)))
    return p.epsilon * _face_energy_rate(grid, pairs)


def energy_budget(state: FluidState, p: ModelParams,
                  basis: Optional[GalerkinBasis] = None, coeffs=None) -> EnergyBudget:
    """Stored energies and dissipation rates of ``state``.

    With ``basis`` the viscous dissipation is the exact quadratic form of the
    Galerkin velocity; otherwise nodal differences are used.  The ε-terms are
    written as ``ε Σ_faces (A/h) Δf Δh(f)`` with ``h`` the enthalpy of each
    stored energy, the difference form of ``ε ∫ h'(f)|∇f|²`` that the
    transport step dissipates.
    """
    if p.gamma <= 1:
        raise ValidationError("energy diagnostics need γ > 1")
    grid = state.grid
    rho, n = state.rho.values, state.n.values
    d = rho + n
    speed2 = np.sum(state.u.components ** 2, axis=0)
    artificial = 0.0
    if p.delta > 0:
        artificial = p.delta * grid.integrate(power(d, p.beta)) / (p.beta - 1.0)
    return EnergyBudget(
        kinetic=0.5 * grid.integrate(d * speed2),
        potential_n=grid.integrate(_G(n, p.alpha)),
        potential_rho=grid.integrate(potential_rho(rho, p.gamma)),
        artificial=artificial,
        dissipation_rate=_velocity_dissipation(state, p, basis, coeffs),
        eps_dissipation_rate=_eps_dissipation(rho, n, grid, p),
    )


def step_energy_residual(s0: FluidState, s1: FluidState, p: ModelParams,
                         basis: Optional[GalerkinBasis] = None,
                         c0=None, c1=None, e0: Optional[float] = None,
                         e1: Optional[float] = None) -> float:
    """``(E¹ - E⁰)/Δt + D(u_mid) + D_ε(ρ_mid, n_mid)`` for one pair of states.

    ``mid`` averages the two states (velocity coefficients when given).
    """
    grid = s0.grid
    dt = s1.time - s0.time
    if dt <= 0:
        raise ValidationError("states must be ordered in time")
    if e0 is None:
        e0 = energy_budget(s0, p).total
    if e1 is None:
        e1 = energy_budget(s1, p).total
    rho_m = 0.5 * (s0.rho.values + s1.rho.values)
    n_m = 0.5 * (s0.n.values + s1.n.values)
    mid = FluidState.from_arrays(
        grid, rho_m, n_m, 0.5 * (s0.u.components + s1.u.components), s0.time
    )
    c_mid = None
    if basis is not None and c0 is not None and c1 is not None:
        c_mid = 0.5 * (np.asarray(c0) + np.asarray(c1))
    diss = _velocity_dissipation(mid, p, basis, c_mid)
    return (e1 - e0) / dt + diss + _eps_dissipation(rho_m, n_m, grid, p)


def energy_equality_residual(trajectory, p: ModelParams) -> np.ndarray:
    """Discrete energy-equality residual between consecutive stored states.

    Meaningful per step when every step is stored (stride 1).
    """
    states = trajectory.states
    basis = getattr(trajectory, "basis", None)
    coeffs = getattr(trajectory, "coeffs", None)
    if len(states) < 2:
        return np.zeros(0)
    energies = [energy_budget(s, p).total for s in states]
    out = np.empty(len(states) - 1)
    for j in range(len(states) - 1):
        c0 = c1 = None
        if coeffs is not None:
            c0, c1 = coeffs[j], coeffs[j + 1]
        out[j] = step_energy_residual(states[j], states[j + 1], p, basis, c0, c1,
                                      energies[j], energies[j + 1])
    return out


# ---------------------------------------------------------------------------
# comparability, convexity, fractions


def vacuum_mask(state: FluidState, vacuum_floor: float = VACUUM_FLOOR) -> np.ndarray:
    return state.d < vacuum_floor


def comparability_check(state: FluidState, c0: float,
                        vacuum_floor: float = VACUUM_FLOOR) -> float:
    """``max(max(n - c₀ρ), max(ρ/c₀ - n))`` off vacuum; ≤ 0 when the sandwich holds."""
    if c0 < 1:
        raise ValidationError("c0 must be at least 1")
    live = ~vacuum_mask(state, vacuum_floor)
    if not np.any(live):
        return -np.inf
    rho, n = state.rho.values[live], state.n.values[live]
    return float(max(np.max(n - c0 * rho), np.max(rho / c0 - n)))


def convex_ratio(state: FluidState, which: str, sigma_floor: float = 0.0) -> float:
    """``∫ b²/(d + σ)`` with ``b`` the selected density and ``d = ρ + n``."""
    if which not in ("rho", "n"):
        raise ValueError("which must be 'rho' or 'n'")
    b = state.rho.values if which == "rho" else state.n.values
    denom = state.d + sigma_floor
    safe = np.where(denom > 0, denom, 1.0)
    return state.grid.integrate(np.where(denom > 0, b ** 2 / safe, 0.0))


def fractions(state: FluidState, vacuum_floor: float = VACUUM_FLOOR):
    """``(A, B) = (n/d, ρ/d)`` off vacuum, both zero on vacuum nodes."""
    d = state.d
    live = d >= vacuum_floor
    safe = np.where(live, d, 1.0)
    A = np.where(live, state.n.values / safe, 0.0)
    B = np.where(live, state.rho.values / safe, 0.0)
    return ScalarField(state.grid, A), ScalarField(state.grid, B)


def reduction_metric(state: FluidState, A_ref, s: float = 2.0,
                     vacuum_floor: float = VACUUM_FLOOR) -> float:
    """``∫ d |A - A_ref|^s`` for one time slice."""
    if s <= 1:
        raise ValidationError("exponent s must exceed 1")
    ref = A_ref.values if isinstance(A_ref, ScalarField) else np.asarray(A_ref)
    if ref.shape != state.grid.shape:
        raise ValidationError("reference fraction lives on a different grid")
    A, _ = fractions(state, vacuum_floor)
    return state.grid.integrate(state.d * np.abs(A.values - ref) ** s)


def _zlogz(z):
    out = np.zeros_like(z)
    pos = z > 0
    out[pos] = z[pos] * np.log(z[pos])
    return out


def llogl(state: FluidState) -> Tuple[float, float]:
    """``(∫ ρ log ρ, ∫ n log n)`` with the integrand set to 0 on vacuum."""
    g = state.grid
    return g.integrate(_zlogz(state.rho.values)), g.integrate(_zlogz(state.n.values))


# ---------------------------------------------------------------------------
# higher integrability and flux pairings


def check_theta(alpha: float, gamma: float, theta1: float, theta2: float,
                comparability: bool = False) -> None:
    """Raise :class:`ValidationError` naming the first violated admissibility bound."""
    checks = [("θ₁>0", theta1 > 0), ("θ₂>0", theta2 > 0)]
    if comparability:
        top = max(alpha, gamma)
        checks += [
            ("θ₁=θ₂", theta1 == theta2),
            ("γ>3/2", gamma > 1.5),
            ("α≥1", alpha >= 1),
            ("θ<max{α,γ}/3", theta1 < top / 3),
            ("θ≤min{1,2max{α,γ}/3−1}", theta1 <= min(1.0, 2 * top / 3 - 1)),
        ]
    else:
        checks += [
            ("α>3/2", alpha > 1.5),
            ("γ>3/2", gamma > 1.5),
            ("θ₁<α/3", theta1 < alpha / 3),
            ("θ₁≤min{1,2α/3−1}", theta1 <= min(1.0, 2 * alpha / 3 - 1)),
            ("θ₂<γ/3", theta2 < gamma / 3),
            ("θ₂≤min{1,2γ/3−1}", theta2 <= min(1.0, 2 * gamma / 3 - 1)),
        ]
    for name, ok in checks:
        if not ok:
            raise ValidationError(f"{name} fails")


def higher_integrability(state: FluidState, p: ModelParams, theta1: float,
                         theta2: float, comparability: bool = False) -> Dict[str, float]:
    """The four space integrals whose time integrals stay bounded in δ.

    Keys: ``n^(alpha+theta1)``, ``rho^(gamma+theta2)``,
    ``delta*n^(beta+theta1)``, ``delta*rho^(beta+theta2)``.
    """
    check_theta(p.alpha, p.gamma, theta1, theta2, comparability)
    g = state.grid
    rho, n = state.rho.values, state.n.values
    return {
        "n^(alpha+theta1)": g.integrate(power(n, p.alpha + theta1)),
        "rho^(gamma+theta2)": g.integrate(power(rho, p.gamma + theta2)),
        "delta*n^(beta+theta1)": p.delta * g.integrate(power(n, p.beta + theta1)),
        "delta*rho^(beta+theta2)": p.delta * g.integrate(power(rho, p.beta + theta2)),
    }


def default_theta(p: ModelParams, comparability: bool = False) -> Optional[Tuple[float, float]]:
    """Half of the largest admissible exponents, or None if none exist."""
    def half(x):
        bound = min(x / 3, 1.0, 2 * x / 3 - 1)
        return 0.5 * bound if bound > 0 else None

    if comparability:
        t = half(max(p.alpha, p.gamma))
        return None if t is None or p.gamma <= 1.5 else (t, t)
    t1, t2 = half(p.alpha), half(p.gamma)
    if t1 is None or t2 is None:
        return None
    return t1, t2


def flux_pairing(state: FluidState, p: ModelParams, weight_t: float,
                 weight_x, pairing: str = "density_sum",
                 k: Optional[float] = None) -> float:
    """``weight_t ∫ weight_x H G`` with ``H`` the effective viscous flux.

    ``G = ρ + n`` for ``pairing='density_sum'`` and ``T_k(ρ) + T_k(n)`` for
    ``pairing='cutoff_k'``.
    """
    w = weight_x.values if isinstance(weight_x, ScalarField) else np.asarray(weight_x)
    g = state.grid
    if np.any(w[g.boundary_mask] != 0):
        raise ValidationError("spatial weight must vanish on the boundary")
    H = effective_flux(state, p).values
    if pairing == "density_sum":
        G = state.d
    elif pairing == "cutoff_k":
        if k is None:
            raise ValidationError("cutoff_k pairing needs k")
        G = cutoff_T(state.rho.values, k) + cutoff_T(state.n.values, k)
    else:
        raise ValueError(f"unknown pairing {pairing!r}")
    return weight_t * g.integrate(w * H * G)


# ---------------------------------------------------------------------------
# frozen weight functions


def smooth_step(t):
    """C^∞ step: 0 for t ≤ 0, 1 for t ≥ 1."""
    t = np.asarray(t, dtype=float)
    a = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
    b = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1.0 - t, 1.0)), 0.0)
    return a / (a + b)


def interior_cutoff(grid: Grid, scale: float) -> np.ndarray:
    """Zero within ``scale/2`` of the boundary, one beyond ``scale``."""
    dist = grid.distance_to_boundary()
    return smooth_step(2.0 * dist / scale - 1.0)


def weight_family(grid: Grid, j: int) -> np.ndarray:
    """Member ``j`` of the boundary cut-off family (scale ``1/j`` of the extent)."""
    return interior_cutoff(grid, min(grid.extent) / j)


def time_integral(times, values) -> float:
    """Trapezoid rule over stored snapshots."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if times.size < 2:
        return 0.0
    return float(np.trapezoid(values, times)) if hasattr(np, "trapezoid") else float(
        np.trapz(values, times)
    )
