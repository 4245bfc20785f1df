"""Initial data, full runs, parameter ladders and convergence verification."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .basis import GalerkinBasis, SpectralCoeffs, build_basis, reconstruct
from .core import FluidState, Grid, ModelParams, ScalarField, ValidationError, VectorField
from .diagnostics import (
    DefectReport,
    comparability_check,
    convex_ratio,
    default_theta,
    energy_budget,
    flux_pairing,
    fractions,
    higher_integrability,
    interior_cutoff,
    llogl,
    step_energy_residual,
    time_integral,
    weight_family,
)
from .momentum import (
    FixedPointError,
    explicit_forces,
    gram_matrix,
    momentum_projection,
    step_state,
    viscous_matrix,
)
from .pressure import power
from .transport import MollifierSpec, StabilityError, advance_density, mollify

__all__ = [
    "InitialSpec",
    "Scenario",
    "Trajectory",
    "LadderResult",
    "ConvergenceResult",
    "make_initial",
    "initial_coefficients",
    "run_simulation",
    "run_scenario",
    "ladder",
    "manufactured_convergence",
    "MONOTONE_RTOL",
    "ORDER_TOL",
    "monotone_decreasing",
]

PROFILES = ("constant", "bump", "mixture")
MONOTONE_RTOL = 1e-12
FLUX_WEIGHT_INDEX = 4


# ---------------------------------------------------------------------------
# initial data


@dataclass
class InitialSpec:
    """Profile family for ``(ρ₀, n₀, M₀)``.

    ``constant`` uses the two levels; ``bump`` adds ``amplitude`` times a
    compactly supported bump of radius ``width·min(extent)`` centred in the
    box; ``mixture`` sets ``ρ₀ = rho_level(1 + a c)``, ``n₀ = n_level(1 - a c)``
    with ``c = Π cos(π x_a / L_a)``.  ``n_ratio`` overrides ``n₀`` by
    ``n_ratio·ρ₀``.  ``M₀/√(ρ₀+n₀)`` is ``momentum·Π sin(m π x_a/L_a)`` on the
    first velocity component.  The velocity mollification radius defaults to
    δ; ``mollifier_radius`` decouples it for grids that cannot resolve δ.
    """

    profile: str = "constant"
    rho_level: float = 1.0
    n_level: float = 1.0
    amplitude: float = 0.0
    width: float = 0.25
    n_ratio: Optional[float] = None
    momentum: float = 0.0
    momentum_mode: int = 1
    c0: Optional[float] = None
    mollifier_radius: Optional[float] = None

    def __post_init__(self):
        if self.profile not in PROFILES:
            raise ValidationError(f"profile must be one of {PROFILES}, got {self.profile!r}")
        if self.width <= 0:
            raise ValidationError("bump width must be positive")
        if self.momentum_mode < 1:
            raise ValidationError("momentum_mode must be a positive integer")
        if self.c0 is not None and self.c0 < 1:
            raise ValidationError("c0 must be at least 1")


def _bump(grid: Grid, width: float) -> np.ndarray:
    r2 = sum((x - 0.5 * L) ** 2 for x, L in zip(grid.coords, grid.extent))
    r2 = r2 / (width * min(grid.extent)) ** 2
    out = np.zeros(grid.shape)
    inside = r2 < 1
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - r2[inside]))
    return out


def _profiles(spec: InitialSpec, grid: Grid) -> Tuple[np.ndarray, np.ndarray]:
    if spec.profile == "constant":
        rho = np.full(grid.shape, spec.rho_level)
        n = np.full(grid.shape, spec.n_level)
    elif spec.profile == "bump":
        b = spec.amplitude * _bump(grid, spec.width)
        rho, n = spec.rho_level + b, spec.n_level + b
    else:
        c = np.ones(grid.shape)
        for x, L in zip(grid.coords, grid.extent):
            c = c * np.cos(np.pi * x / L)
        rho = spec.rho_level * (1 + spec.amplitude * c)
        n = spec.n_level * (1 - spec.amplitude * c)
    if spec.n_ratio is not None:
        n = spec.n_ratio * rho
    if np.any(rho < 0) or np.any(n < 0):
        raise ValidationError("initial profiles must be nonnegative")
    return rho, n


def _sandwich(rho, n, c0) -> bool:
    return bool(np.all(n <= c0 * rho) and np.all(rho <= c0 * n))


def make_initial(spec: InitialSpec, grid: Grid, p: ModelParams) -> FluidState:
    """Regularized initial state.

    Densities are clamped into ``[δ, δ^{-1/(2β)}]`` when ``δ > 0``.  The
    velocity is ``φ/√(ρ₀+n₀) · η*(M₀/√(ρ₀+n₀))`` with the unclamped total
    density inside the mollifier and the clamped one outside; ``φ`` is the
    interior cut-off at the mollification radius.
    """
    rho0, n0 = _profiles(spec, grid)
    rho, n = rho0.copy(), n0.copy()
    if p.delta > 0:
        lo, hi = p.delta, p.delta ** (-1.0 / (2.0 * p.beta))
        rho = np.clip(rho, lo, hi)
        n = np.clip(n, lo, hi)
    if spec.c0 is not None and _sandwich(rho0, n0, spec.c0):
        if not _sandwich(rho, n, spec.c0):
            raise ValidationError("clamping broke the comparability sandwich")

    m = np.full(grid.shape, spec.momentum)
    for x, L in zip(grid.coords, grid.extent):
        m = m * np.sin(spec.momentum_mode * np.pi * x / L)
    radius = spec.mollifier_radius if spec.mollifier_radius is not None else (
        p.delta if p.delta > 0 else None
    )
    if radius is not None and spec.momentum != 0:
        m = mollify(m, grid, MollifierSpec(radius))
        m = m * interior_cutoff(grid, radius)

    d = rho + n
    u0 = np.where(d > 0, m / np.sqrt(np.where(d > 0, d, 1.0)), 0.0)
    u = np.zeros((grid.dim,) + grid.shape)
    u[0] = u0
    u[:, grid.boundary_mask] = 0.0
    return FluidState.from_arrays(grid, rho, n, u)


def initial_coefficients(state: FluidState, basis: GalerkinBasis) -> np.ndarray:
    """Galerkin velocity whose momentum projections match those of ``state``.

    Solves ``G(ρ+n) c = ∫ (ρ+n) u ψ``.
    """
    G = gram_matrix(basis, state.d)
    if np.any(state.d <= 0):
        G = G + 1e-14 * np.eye(basis.k)
    return np.linalg.solve(G, momentum_projection(state, basis))


# ---------------------------------------------------------------------------
# single runs


@dataclass
class Trajectory:
    """Stored snapshots of one run.

    ``step_residuals`` and ``iterations`` have one entry per time step;
    ``states``, ``times`` and ``coeffs`` one per stored snapshot.
    """

    basis: GalerkinBasis
    params: ModelParams
    states: List[FluidState] = field(default_factory=list)
    coeffs: List[np.ndarray] = field(default_factory=list)
    step_residuals: List[float] = field(default_factory=list)
    iterations: List[int] = field(default_factory=list)
    failure: Optional[str] = None

    @property
    def times(self) -> List[float]:
        return [s.time for s in self.states]

    @property
    def complete(self) -> bool:
        return self.failure is None


class _Recorder:
    """Fills a :class:`DefectReport` snapshot by snapshot."""

    def __init__(self, p: ModelParams, c0: Optional[float], grid: Grid):
        self.p = p
        self.c0 = c0
        self.report = DefectReport()
        self.theta = default_theta(p)
        self.weight = weight_family(grid, FLUX_WEIGHT_INDEX)
        self.energy_ok = p.gamma > 1
        self._hi: Dict[str, List[float]] = {}
        self._pair: List[float] = []

    def record(self, state: FluidState, basis, coeffs, residual: float):
        r, p = self.report, self.p
        g = state.grid
        r.times.append(state.time)
        if self.c0 is not None:
            r.comparability_series.append(comparability_check(state, self.c0))
        for which in ("rho", "n"):
            r.convex_ratio_series[which].append(convex_ratio(state, which))
        lr, ln = llogl(state)
        r.llogl_series["rho"].append(lr)
        r.llogl_series["n"].append(ln)
        if self.energy_ok:
            r.energy.append(energy_budget(state, p, basis, coeffs).as_dict())
        r.energy_residual.append(residual)
        rho, n = state.rho.values, state.n.values
        r.artificial_series["delta_rho_n_beta"].append(
            p.delta * g.integrate(power(rho, p.beta) + power(n, p.beta)))
        r.artificial_series["delta_d_beta"].append(
            p.delta * g.integrate(power(rho + n, p.beta)))
        if self.theta is not None:
            for key, val in higher_integrability(state, p, *self.theta).items():
                self._hi.setdefault(key, []).append(val)
        self._pair.append(flux_pairing(state, p, 1.0, self.weight))

    def finish(self) -> DefectReport:
        r = self.report
        if r.comparability_series:
            r.comparability_margin = max(r.comparability_series)
        if r.times:
            r.llogl = (r.llogl_series["rho"][-1], r.llogl_series["n"][-1])
        r.higher_integrability = {k: time_integral(r.times, v) for k, v in self._hi.items()}
        r.flux_pairing = time_integral(r.times, self._pair)
        return r


def run_simulation(
    init: FluidState,
    p: ModelParams,
    basis: GalerkinBasis,
    T: float,
    dt: float,
    snapshot_stride: int = 1,
    c0: Optional[float] = None,
    tol: float = 1e-10,
    max_iter: int = 50,
) -> Tuple[Trajectory, DefectReport]:
    """Advance ``init`` to time ``T`` and collect diagnostics.

    The initial velocity is replaced by its Galerkin counterpart with the same
    momentum projections.  Every ``snapshot_stride``-th state is stored, plus
    the final one.  A stability or fixed-point failure stops the run; the
    trajectory up to that point is kept and ``failure`` describes it.

    The energy residual recorded at a snapshot is the step residual of largest
    magnitude since the previous snapshot (0 at ``t = 0``).
    """
    if T <= 0 or dt <= 0:
        raise ValidationError("T and dt must be positive")
    if snapshot_stride < 1:
        raise ValidationError("snapshot_stride must be at least 1")
    if c0 is None:
        c0 = p.c0
    grid = basis.grid
    if init.grid != grid:
        raise ValidationError("initial state and basis live on different grids")

    c = initial_coefficients(init, basis)
    state = FluidState(init.rho.copy(), init.n.copy(),
                       reconstruct(SpectralCoeffs(c), basis), init.time)
    traj = Trajectory(basis, p)
    rec = _Recorder(p, c0, grid)
    traj.states.append(state)
    traj.coeffs.append(c)
    rec.record(state, basis, c, 0.0)

    nsteps = max(1, int(math.ceil(T / dt - 1e-9)))
    t_end = init.time + T
    energy_prev = energy_budget(state, p).total if p.gamma > 1 else None
    window: List[float] = []
    for step in range(1, nsteps + 1):
        h = min(dt, t_end - state.time) if step == nsteps else dt
        try:
            new, report = step_state(state, p, basis, h, coeffs=c, tol=tol, max_iter=max_iter)
        except StabilityError as exc:
            traj.failure = f"stability failure at t={state.time:.6g}: {exc}"
            break
        except FixedPointError as exc:
            traj.failure = f"fixed-point failure at t={state.time:.6g}: {exc}"
            break
        traj.iterations.append(report.iterations)
        if energy_prev is not None:
            energy_new = energy_budget(new, p).total
            res = step_energy_residual(state, new, p, basis, c, report.coeffs,
                                       energy_prev, energy_new)
            energy_prev = energy_new
        else:
            res = 0.0
        traj.step_residuals.append(res)
        window.append(res)
        state, c = new, report.coeffs
        if step % snapshot_stride == 0 or step == nsteps:
            traj.states.append(state)
            traj.coeffs.append(c)
            rec.record(state, basis, c, max(window, key=abs))
            window = []
    report = rec.finish()
    report.failure = traj.failure
    return traj, report


# ---------------------------------------------------------------------------
# ladders


@dataclass
class Scenario:
    """Everything a run needs: grid, parameters, initial data and schedule."""

    grid: Grid
    params: ModelParams
    initial: InitialSpec
    k: int
    T: float
    dt: float
    stride: int = 1


def run_scenario(s: Scenario) -> Tuple[Trajectory, DefectReport]:
    basis = build_basis(s.grid, s.k)
    init = make_initial(s.initial, s.grid, s.params)
    c0 = s.params.c0 if s.params.c0 is not None else s.initial.c0
    return run_simulation(init, s.params, basis, s.T, s.dt, s.stride, c0=c0)


def _rung(kind: str, value, base: Scenario) -> Scenario:
    if kind == "epsilon":
        return Scenario(base.grid, base.params.replace(epsilon=float(value)), base.initial,
                        base.k, base.T, base.dt, base.stride)
    if kind == "delta":
        return Scenario(base.grid, base.params.replace(delta=float(value)), base.initial,
                        base.k, base.T, base.dt, base.stride)
    return Scenario(base.grid, base.params, base.initial, int(value), base.T, base.dt,
                    base.stride)


def _safe_run(s: Scenario):
    try:
        return run_scenario(s)
    except (ValidationError, np.linalg.LinAlgError) as exc:
        return None, str(exc)


@dataclass
class LadderResult:
    """Per-rung metrics against the reference (last) rung.

    ``metrics[i]`` holds ``reduction_metric`` (∫∫ d|A - A_ref|², trapezoid
    in time), ``llogl_diff``, ``flux_pairing_diff`` and, for every kind, the
    artificial-pressure quantities ``sup_delta_norm_beta`` (sup over
    snapshots of δ∫(ρ^β+n^β)), ``accumulated_delta_d_beta`` (∫∫δ(ρ+n)^β)
    and ``initial_energy``.  ``primary`` names the metric used for the
    order and the Cauchy ratios.
    """

    kind: str
    values: List[float]
    reports: List[Optional[DefectReport]]
    metrics: List[Dict[str, float]]
    primary: str
    order: float
    orders: List[float]
    cauchy_ratios: List[float]
    monotone: Dict[str, bool]
    partial: bool
    failures: List[Optional[str]]

    def to_dict(self) -> dict:
        out = asdict(self)
        out["reports"] = [r.to_dict() if r is not None else None for r in self.reports]
        return out


def monotone_decreasing(series: Sequence[float], rtol: float = MONOTONE_RTOL) -> bool:
    """Non-increasing within ``rtol·max|series|``."""
    s = np.asarray(series, dtype=float)
    if s.size < 2 or not np.all(np.isfinite(s)):
        return bool(s.size < 2)
    tol = rtol * np.max(np.abs(s))
    return bool(np.all(np.diff(s) <= tol))


def _rung_metrics(traj: Trajectory, rep: DefectReport, ref: Optional[Trajectory],
                  ref_rep: Optional[DefectReport]) -> Dict[str, float]:
    p = traj.params
    art = rep.artificial_series
    m = {
        "sup_delta_norm_beta": float(max(art["delta_rho_n_beta"])),
        "accumulated_delta_d_beta": time_integral(rep.times, art["delta_d_beta"]),
        "initial_energy": rep.energy[0]["total"] if rep.energy else float("nan"),
        "energy_bound": (p.beta - 1.0) * rep.energy[0]["total"] if rep.energy else float("nan"),
    }
    nan = float("nan")
    if ref is None or ref_rep is None or len(ref.states) != len(traj.states) or not np.allclose(
        ref.times, traj.times, rtol=0, atol=1e-12
    ):
        m.update(reduction_metric=nan, llogl_diff=nan, flux_pairing_diff=nan)
        return m
    series = []
    for s, s_ref in zip(traj.states, ref.states):
        A, _ = fractions(s)
        A_ref, _ = fractions(s_ref)
        series.append(s.grid.integrate(s.d * (A.values - A_ref.values) ** 2))
    m["reduction_metric"] = time_integral(traj.times, series)
    m["llogl_diff"] = float(abs(rep.llogl[0] - ref_rep.llogl[0]) + abs(rep.llogl[1] - ref_rep.llogl[1]))
    m["flux_pairing_diff"] = float(abs(rep.flux_pairing - ref_rep.flux_pairing))
    return m


def _orders(values: Sequence[float], metric: Sequence[float]) -> List[float]:
    out = []
    for i in range(len(metric) - 1):
        a, b = metric[i], metric[i + 1]
        va, vb = values[i], values[i + 1]
        if a > 0 and b > 0 and va != vb:
            out.append(math.log(a / b) / abs(math.log(va / vb)))
        else:
            out.append(float("nan"))
    return out


def ladder(kind: str, values: Sequence[float], base: Scenario,
           workers: Optional[int] = None) -> LadderResult:
    """Run a continuation study in ``epsilon``, ``delta`` or ``basis_k``.

    ``values`` must be strictly decreasing for ``epsilon``/``delta`` and
    strictly increasing for ``basis_k`` so that the last rung is always the
    finest one, used as reference.  Rungs run in worker processes when
    ``workers > 1``; results do not depend on the worker count.
    """
    if kind not in ("epsilon", "delta", "basis_k"):
        raise ValidationError(f"unknown ladder kind {kind!r}")
    values = list(values)
    if len(values) < 3:
        raise ValidationError("a ladder needs at least 3 rungs")
    diffs = np.diff(np.asarray(values, dtype=float))
    if kind == "basis_k":
        if np.any(diffs < 0):
            raise ValidationError("basis_k rungs must increase")
    elif np.any(diffs > 0):
        raise ValidationError(f"{kind} rungs must decrease")

    scenarios = [_rung(kind, v, base) for v in values]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_safe_run, scenarios))
    else:
        results = [_safe_run(s) for s in scenarios]

    trajs, reports, failures = [], [], []
    for traj, rep in results:
        if traj is None:
            trajs.append(None)
            reports.append(None)
            failures.append(rep)
        else:
            trajs.append(traj)
            reports.append(rep)
            failures.append(traj.failure)
    partial = any(f is not None for f in failures)

    ref, ref_rep = trajs[-1], reports[-1]
    if ref is not None and ref.failure is not None:
        ref, ref_rep = None, None
    metrics = []
    for traj, rep in zip(trajs, reports):
        if traj is None:
            metrics.append({})
        else:
            metrics.append(_rung_metrics(traj, rep, ref, ref_rep))

    primary = "accumulated_delta_d_beta" if kind == "delta" else "reduction_metric"
    series = [m.get(primary, float("nan")) for m in metrics]
    # the reference rung measures zero against itself for Cauchy metrics
    used_vals, used = (values, series) if kind == "delta" else (values[:-1], series[:-1])
    orders = _orders(used_vals, used)
    finite = [o for o in orders if np.isfinite(o)]
    order = float(np.mean(finite)) if finite else float("nan")
    ratios = [
        used[i + 1] / used[i] if used[i] not in (0,) and np.isfinite(used[i]) else float("nan")
        for i in range(len(used) - 1)
    ]
    monotone = {primary: monotone_decreasing(used)}
    if kind != "delta":
        monotone["accumulated_delta_d_beta"] = True
    else:
        monotone["sup_delta_norm_beta"] = monotone_decreasing(
            [m.get("sup_delta_norm_beta", float("nan")) for m in metrics]
        )
    return LadderResult(kind, [float(v) for v in values], reports, metrics, primary, order,
                        orders, ratios, monotone, partial, failures)


# ---------------------------------------------------------------------------
# manufactured solutions


@dataclass
class ConvergenceResult:
    profile: str
    sizes: List[float]
    errors: List[float]
    orders: List[float]
    gate: float

    @property
    def order(self) -> float:
        """Order over the finest refinement pair."""
        return self.orders[-1] if self.orders else float("nan")

    @property
    def passed(self) -> bool:
        if self.profile == "equilibrium":
            return max(self.errors) <= EQUILIBRIUM_TOL
        return bool(np.isfinite(self.order) and self.order >= self.gate - ORDER_TOL)

    def to_dict(self) -> dict:
        out = asdict(self)
        out.update(order=self.order, passed=self.passed)
        return out


CONVERGENCE_GATES = {"diffusion": 1.5, "advection": 0.8, "momentum": 2.0, "equilibrium": 0.0}
# A method of order q measures q - O(h) at finite resolution, so gates are
# read at two-digit precision.
ORDER_TOL = 0.05
EQUILIBRIUM_TOL = 1e-12


def _l2(grid: Grid, err: np.ndarray) -> float:
    return math.sqrt(grid.integrate(err ** 2))


def _diffusion_error(points: int, T: float = 0.5) -> Tuple[float, float]:
    # f = 3 + (1+t) cos(πx): linear in t, so backward Euler with the source at
    # the new time level is exact in time and only the spatial error remains.
    grid = Grid((1.0,), (points,))
    x = grid.coords[0]
    eps = 1.0
    h = grid.spacing[0]
    nsteps = int(round(T / h))
    dt = T / nsteps
    u = VectorField.zeros(grid)
    f = ScalarField(grid, 3 + np.cos(np.pi * x))
    for j in range(1, nsteps + 1):
        t1 = j * dt
        src = np.cos(np.pi * x) + eps * np.pi ** 2 * (1 + t1) * np.cos(np.pi * x)
        f = advance_density(f, u, eps, dt, source=src)
    return h, _l2(grid, f.values - (3 + (1 + T) * np.cos(np.pi * x)))


def _advection_error(points: int, T: float = 0.5) -> Tuple[float, float]:
    # f = 2 + sin(2πx - t) carried by u = sin(πx), no diffusion
    grid = Grid((1.0,), (points,))
    x = grid.coords[0]
    h = grid.spacing[0]
    uvals = np.sin(np.pi * x)
    uvals[0] = uvals[-1] = 0.0
    u = VectorField(grid, uvals[None])
    nsteps = int(math.ceil(T / (0.25 * h)))
    dt = T / nsteps
    f = ScalarField(grid, 2 + np.sin(2 * np.pi * x))
    for j in range(nsteps):
        t = j * dt
        ph = 2 * np.pi * x - t
        fe = 2 + np.sin(ph)
        src = -np.cos(ph) + 2 * np.pi * np.cos(ph) * np.sin(np.pi * x) + fe * np.pi * np.cos(np.pi * x)
        f = advance_density(f, u, 0.0, dt, source=src)
    return h, _l2(grid, f.values - (2 + np.sin(2 * np.pi * x - T)))


def _momentum_error(nsteps: int, T: float = 1.0, points: int = 32) -> Tuple[float, float]:
    # single mode c(t) = 0.5 e^{-t} with a forcing that makes it exact
    grid = Grid((1.0,), (points,))
    basis = build_basis(grid, 1)
    p = ModelParams(mu=1.0, lam=0.0, gamma=2.0, alpha=2.0)
    rho = np.full(grid.shape, 1.0)
    n = np.full(grid.shape, 0.5)
    G = gram_matrix(basis, rho + n)
    V = viscous_matrix(basis, p)

    def exact(t):
        return np.array([[0.5 * math.exp(-t)]])

    def forcing(t):
        c = exact(t)
        u = reconstruct(SpectralCoeffs(c), basis)
        return G @ (-c) + V @ c - explicit_forces(rho, n, u, p, basis)

    dt = T / nsteps
    c = exact(0.0)
    state = FluidState.from_arrays(grid, rho, n, reconstruct(SpectralCoeffs(c), basis).components)
    for _ in range(nsteps):
        state, rep = step_state(state, p, basis, dt, coeffs=c, tol=1e-15, max_iter=200,
                                freeze_densities=True, forcing=forcing)
        c = rep.coeffs
    return dt, float(np.max(np.abs(c - exact(T))))


def _equilibrium_error(points: int) -> Tuple[float, float]:
    grid = Grid((1.0,), (points,))
    basis = build_basis(grid, 4)
    p = ModelParams(epsilon=1e-2, delta=1e-3)
    state = FluidState.from_arrays(grid, np.ones(grid.shape), np.full(grid.shape, 2.0))
    init = state.copy()
    c = np.zeros((basis.k, 1))
    for _ in range(5):
        state, rep = step_state(state, p, basis, 1e-2, coeffs=c)
        c = rep.coeffs
    err = max(np.max(np.abs(state.rho.values - init.rho.values)),
              np.max(np.abs(state.n.values - init.n.values)),
              np.max(np.abs(state.u.components)))
    return grid.spacing[0], float(err)


def manufactured_convergence(profile: str, refinements: int = 4,
                             base: Optional[int] = None) -> ConvergenceResult:
    """Observed order of a manufactured-solution refinement study.

    ``diffusion`` and ``advection`` refine the grid of the density transport
    (``base`` cells, default 32); ``momentum`` refines dt for the single-mode
    coefficient ODE (``base`` steps, default 8); ``equilibrium`` checks that a
    state at rest stays exactly at rest.
    """
    if refinements < 3:
        raise ValidationError("need at least 3 refinements")
    runners = {
        "diffusion": (_diffusion_error, 32),
        "advection": (_advection_error, 32),
        "momentum": (_momentum_error, 8),
        "equilibrium": (_equilibrium_error, 16),
    }
    if profile not in runners:
        raise ValidationError(f"unknown profile {profile!r}; choose from {sorted(runners)}")
    fn, default = runners[profile]
    start = default if base is None else base
    sizes, errors = [], []
    for i in range(refinements):
        s, e = fn(start * 2 ** i)
        sizes.append(s)
        errors.append(e)
    orders = [
        math.log2(errors[i] / errors[i + 1]) if errors[i] > 0 and errors[i + 1] > 0 else float("nan")
        for i in range(len(errors) - 1)
    ]
    return ConvergenceResult(profile, sizes, errors, orders, CONVERGENCE_GATES[profile])
