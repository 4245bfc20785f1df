"""Regularized continuity equations and the renormalization machinery.

The density step is a conservative finite-volume update on the dual cells of
the vertex-centred grid: first-order upwind face fluxes, advanced explicitly,
followed by an implicit solve for the artificial diffusion with zero normal
flux through the walls.  Every face quantity used by the momentum solver is
built from the helpers in this module so that the transport and momentum
discretizations share one set of operators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy import integrate, signal
from scipy.sparse.linalg import splu

from .core import Grid, ScalarField, ValidationError, VectorField

__all__ = [
    "StabilityError",
    "MollifierSpec",
    "stable_dt",
    "advance_density",
    "flux_divergence",
    "upwind_fluxes",
    "discrete_div",
    "mollify",
    "commutator_error",
    "renormalization_residual",
    "continuity_residual",
    "cutoff_T",
    "cutoff_T_prime",
    "cutoff_T_second",
    "cutoff_L",
    "cutoff_L_prime",
    "cutoff_b",
    "cutoff_b_prime",
    "beta_k",
]


class StabilityError(RuntimeError):
    """Time step exceeds the transport stability bound."""

    def __init__(self, dt: float, dt_max: float):
        super().__init__(f"dt={dt:.6g} exceeds the admissible dt_max={dt_max:.6g}")
        self.dt = dt
        self.dt_max = dt_max


# ---------------------------------------------------------------------------
# face operators


def face_slices(dim: int, axis: int):
    """Index tuples selecting the left and right node of every face on ``axis``."""
    left = [slice(None)] * dim
    right = [slice(None)] * dim
    left[axis] = slice(0, -1)
    right[axis] = slice(1, None)
    return tuple(left), tuple(right)


@lru_cache(maxsize=64)
def face_area(grid: Grid, axis: int) -> np.ndarray:
    """Dual-cell face measure for faces normal to ``axis`` (1 in 1D)."""
    shape = list(grid.shape)
    shape[axis] -= 1
    out = np.ones(shape)
    for b, h in enumerate(grid.spacing):
        if b == axis:
            continue
        wb = np.full(grid.shape[b], h)
        wb[0] = wb[-1] = 0.5 * h
        bshape = [1] * grid.dim
        bshape[b] = -1
        out = out * wb.reshape(bshape)
    return out


def face_average(values: np.ndarray, axis: int) -> np.ndarray:
    left, right = face_slices(values.ndim, axis)
    return 0.5 * (values[left] + values[right])


def face_jump(values: np.ndarray, axis: int) -> np.ndarray:
    left, right = face_slices(values.ndim, axis)
    return values[right] - values[left]


def upwind_value(values: np.ndarray, uf: np.ndarray, axis: int) -> np.ndarray:
    """Donor-cell value on each face; the mean where the face velocity is zero."""
    left, right = face_slices(values.ndim, axis)
    fl, fr = values[left], values[right]
    return np.where(uf > 0, fl, np.where(uf < 0, fr, 0.5 * (fl + fr)))


def face_velocities(u: VectorField) -> list:
    return [face_average(u.components[a], a) for a in range(u.grid.dim)]


def upwind_fluxes(f: np.ndarray, uf: Sequence[np.ndarray], grid: Grid) -> list:
    """Face fluxes ``A_f u_f f_upwind`` for every axis."""
    return [face_area(grid, a) * uf[a] * upwind_value(f, uf[a], a) for a in range(grid.dim)]


def flux_divergence(fluxes: Sequence[np.ndarray], grid: Grid) -> np.ndarray:
    """Net outflow per unit dual-cell volume."""
    acc = np.zeros(grid.shape)
    for a, F in enumerate(fluxes):
        left, right = face_slices(grid.dim, a)
        acc[left] += F
        acc[right] -= F
    return acc / grid.weights


def discrete_div(u: VectorField) -> np.ndarray:
    """Nodal divergence: centred differences inside, one-sided on the boundary.

    For a velocity vanishing on the boundary this equals the flux divergence
    of the constant field 1, i.e. the divergence implied by the transport step.
    """
    out = np.zeros(u.grid.shape)
    for a, h in enumerate(u.grid.spacing):
        out += np.gradient(u.components[a], h, axis=a, edge_order=1)
    return out


@lru_cache(maxsize=32)
def _stiffness_matrix(grid: Grid) -> sp.csc_matrix:
    """Neumann graph Laplacian ``K`` with face coefficients ``A_f / h``."""
    idx = np.arange(grid.size).reshape(grid.shape)
    rows, cols, vals = [], [], []
    for a, h in enumerate(grid.spacing):
        left, right = face_slices(grid.dim, a)
        i = idx[left].ravel()
        j = idx[right].ravel()
        c = (face_area(grid, a) / h).ravel()
        rows += [i, j, i, j]
        cols += [i, j, j, i]
        vals += [c, c, -c, -c]
    K = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(grid.size, grid.size),
    )
    return K.tocsc()


@lru_cache(maxsize=32)
def _diffusion_solver(grid: Grid, coeff: float):
    M = sp.diags(grid.weights.ravel()) + coeff * _stiffness_matrix(grid)
    return splu(M.tocsc())


def diffusion_flux_sum(f: np.ndarray, grid: Grid) -> np.ndarray:
    """``Σ_faces (A_f/h)(f_j - f_i)`` per node, i.e. ``-K f`` (undivided)."""
    return -(_stiffness_matrix(grid) @ f.ravel()).reshape(grid.shape)


# ---------------------------------------------------------------------------
# density step


def stable_dt(u: VectorField) -> float:
    """Largest dt keeping the explicit upwind step monotone.

    ``1 / (2 Σ_a max|u_a| / h_a)``, which is ``h / (2 max|u|)`` in 1D.
    """
    rate = sum(
        np.max(np.abs(u.components[a])) / h for a, h in enumerate(u.grid.spacing)
    )
    return math.inf if rate == 0 else 1.0 / (2.0 * rate)


def advance_density(
    f: ScalarField,
    u: VectorField,
    eps: float,
    dt: float,
    source: Optional[np.ndarray] = None,
) -> ScalarField:
    """One step of ``f_t + div(f u) = eps Δf`` with zero flux through the walls.

    Parameters
    ----------
    f : ScalarField
        Nonnegative density.
    u : VectorField
        Transporting velocity, held fixed over the step.
    eps : float
        Artificial viscosity; the diffusion part is solved implicitly.
    dt : float
        Step size, at most :func:`stable_dt` ``(u)``.
    source : array, optional
        Volumetric source added to the explicit stage (manufactured solutions).

    Returns
    -------
    ScalarField
        Advanced density.  Mass is conserved to round-off; without a source
        the result is nonnegative.

    Raises
    ------
    StabilityError
        If ``dt`` exceeds the advective bound.
    """
    if dt <= 0:
        raise ValidationError("dt must be positive")
    if eps < 0:
        raise ValidationError("eps must be nonnegative")
    grid = f.grid
    if u.grid != grid:
        raise ValidationError("density and velocity live on different grids")
    if np.any(f.values < 0):
        raise ValidationError("advance_density needs a nonnegative field")
    dt_max = stable_dt(u)
    if dt > dt_max * (1 + 1e-12):
        raise StabilityError(dt, dt_max)

    vals = f.values
    fluxes = upwind_fluxes(vals, face_velocities(u), grid)
    star = vals - dt * flux_divergence(fluxes, grid)
    if source is not None:
        star = star + dt * source
    if eps > 0:
        solver = _diffusion_solver(grid, float(eps * dt))
        star = solver.solve((grid.weights * star).ravel()).reshape(grid.shape)
    return ScalarField(grid, star, density=source is None)


# ---------------------------------------------------------------------------
# mollification and the commutator


@dataclass(frozen=True)
class MollifierSpec:
    """Standard bump ``exp(-1/(1-|x/σ|²))`` of radius ``σ``."""

    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValidationError("mollifier radius must be positive")

    def kernel(self, grid: Grid) -> np.ndarray:
        """Discrete kernel weights on the node lattice, summing to exactly one.

        Multiplying by ``1/h^d`` gives nodal values of ``η_σ``; the weights are
        renormalized so the quadrature of the kernel is 1.
        """
        h = grid.spacing
        half = [int(math.ceil(self.radius / ha)) for ha in h]
        axes = [np.arange(-m, m + 1) * ha for m, ha in zip(half, h)]
        X = np.meshgrid(*axes, indexing="ij")
        r2 = sum(x ** 2 for x in X) / self.radius ** 2
        eta = np.zeros_like(r2)
        inside = r2 < 1
        eta[inside] = np.exp(-1.0 / (1.0 - r2[inside]))
        total = eta.sum()
        if total == 0:
            raise ValidationError("mollifier radius below grid resolution")
        return eta / total

    def pad(self, grid: Grid) -> tuple:
        return tuple(int(math.ceil(self.radius / h)) + 2 for h in grid.spacing)


def _check_resolved(grid: Grid, m: MollifierSpec):
    hmax = max(grid.spacing)
    if m.radius < 2 * hmax:
        raise ValidationError(
            f"mollification radius {m.radius:.3g} below 2h={2 * hmax:.3g}; unresolvable"
        )


def _zero_extend(values: np.ndarray, pad: Sequence[int]) -> np.ndarray:
    return np.pad(values, [(p, p) for p in pad])


def mollify(f: np.ndarray, grid: Grid, m: MollifierSpec, extended: bool = False) -> np.ndarray:
    """``η_σ * f`` with ``f`` prolonged by zero outside the box.

    The box integral uses trapezoid weights so that a constant is reproduced
    exactly at nodes farther than ``σ`` from the boundary.  With
    ``extended=True`` the result lives on the grid padded by
    :meth:`MollifierSpec.pad` nodes per side.
    """
    _check_resolved(grid, m)
    pad = m.pad(grid)
    cell = float(np.prod(grid.spacing))
    g = _zero_extend(np.asarray(f) * grid.weights / cell, pad)
    out = signal.fftconvolve(g, m.kernel(grid), mode="same")
    if extended:
        return out
    inner = tuple(slice(p, -p) for p in pad)
    return out[inner]


def commutator_error(f: ScalarField, u: VectorField, m: MollifierSpec) -> float:
    """L¹ norm of ``η_σ * div(f u) - div(u (f * η_σ))`` over the whole space.

    ``f`` is prolonged by zero outside the box and ``u`` by its boundary
    values (zero for Dirichlet velocities, so a constant velocity stays
    constant).  Both terms see ``f`` through the same trapezoid weights, so
    the discrete operators commute exactly for constant ``u``.  The norm is
    taken on the padded lattice that contains the support of both terms.
    """
    grid = f.grid
    _check_resolved(grid, m)
    if m.radius > 0.25 * min(grid.extent):
        raise ValidationError("mollification radius must be below a quarter of the extent")
    pad = m.pad(grid)
    h = grid.spacing
    cell = float(np.prod(h))
    kernel = m.kernel(grid)

    f_ext = _zero_extend(f.values * grid.weights / cell, pad)
    u_ext = np.stack([np.pad(c, [(p, p) for p in pad], mode="edge") for c in u.components])
    div_fu = sum(np.gradient(f_ext * u_ext[a], h[a], axis=a) for a in range(grid.dim))
    first = signal.fftconvolve(div_fu, kernel, mode="same")

    f_smooth = signal.fftconvolve(f_ext, kernel, mode="same")
    second = sum(np.gradient(u_ext[a] * f_smooth, h[a], axis=a) for a in range(grid.dim))
    return float(np.sum(np.abs(first - second)) * cell)


# ---------------------------------------------------------------------------
# renormalized transport


def _as_arrays(series, kind) -> list:
    out = []
    for item in series:
        if isinstance(item, ScalarField):
            out.append(item.values)
        elif isinstance(item, VectorField):
            out.append(item)
        else:
            out.append(item if kind is VectorField else np.asarray(item, dtype=float))
    return out


def renormalization_residual(
    f_series: Sequence,
    u_series: Sequence,
    b: Callable[[np.ndarray], np.ndarray],
    db: Callable[[np.ndarray], np.ndarray],
    weight: np.ndarray,
    dt: float,
    grid: Optional[Grid] = None,
) -> float:
    """Space-time weak residual of ``∂_t b(f) + div(b(f)u) + [b'(f)f - b(f)] div u``.

    The equation is tested against ``weight`` using the operators of
    :func:`advance_density`: forward difference in time, upwind flux
    divergence for ``div(b(f)u)`` and the flux divergence of the constant 1
    for ``div u``.  ``u_series[i]`` is the velocity that advanced
    ``f_series[i]`` to ``f_series[i+1]``.
    """
    fs = _as_arrays(f_series, ScalarField)
    us = list(u_series)
    if len(us) not in (len(fs), len(fs) - 1) or len(fs) < 2:
        raise ValidationError(
            f"series lengths do not match: {len(fs)} densities, {len(us)} velocities"
        )
    if grid is None:
        grid = us[0].grid
    weight = np.asarray(weight, dtype=float)
    if np.any(weight[grid.boundary_mask] != 0):
        raise ValidationError("test weight must vanish on the boundary")
    ones = np.ones(grid.shape)
    wq = grid.weights * weight
    total = 0.0
    for n in range(len(fs) - 1):
        f0, f1, u = fs[n], fs[n + 1], us[n]
        uf = face_velocities(u)
        b0 = b(f0)
        div_bu = flux_divergence(upwind_fluxes(b0, uf, grid), grid)
        div_u = flux_divergence(upwind_fluxes(ones, uf, grid), grid)
        integrand = (b(f1) - b0) / dt + div_bu + (db(f0) * f0 - b0) * div_u
        total += dt * float(np.sum(wq * integrand))
    return total


def continuity_residual(f_series, u_series, weight, dt, grid=None) -> float:
    """Weak residual of ``∂_t f + div(f u)`` (the case ``b(z) = z``)."""
    return renormalization_residual(
        f_series, u_series, lambda z: z, np.ones_like, weight, dt, grid
    )


# ---------------------------------------------------------------------------
# cut-off family
#
# T is the C² concave interpolant
#     T(z) = z                         z ≤ 1
#     T(z) = z - s³(2 - s),  s=(z-1)/2  1 ≤ z ≤ 3
#     T(z) = 2                          z ≥ 3
# so T'(z) = 1 - 3s² + 2s³ falls smoothly from 1 to 0.

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(24)


def _T(y):
    y = np.asarray(y, dtype=float)
    s = np.clip((y - 1.0) / 2.0, 0.0, 1.0)
    mid = y - s ** 3 * (2.0 - s)
    return np.where(y <= 1.0, y, np.where(y >= 3.0, 2.0, mid))


def _T_prime(y):
    y = np.asarray(y, dtype=float)
    s = np.clip((y - 1.0) / 2.0, 0.0, 1.0)
    return 1.0 - 3.0 * s ** 2 + 2.0 * s ** 3


def _T_second(y):
    y = np.asarray(y, dtype=float)
    s = np.clip((y - 1.0) / 2.0, 0.0, 1.0)
    return -1.5 * s * (1.0 - s)


def _J_quad(s: np.ndarray) -> np.ndarray:
    """``∫_1^{1+2s} s'³(2-s')/σ² dσ`` by 24-point Gauss-Legendre.

    The integrand is a positive rational function analytic on a neighbourhood
    of [0, 1], so the rule is exact to round-off and has no cancellation.
    """
    t = 0.5 * s[:, None] * (_GL_NODES + 1.0)
    integrand = 2.0 * t ** 3 * (2.0 - t) / (1.0 + 2.0 * t) ** 2
    return 0.5 * s * (integrand @ _GL_WEIGHTS)


_J_ONE = float(_J_quad(np.array([1.0]))[0])


def _J(s):
    """``_J_quad`` for s in [0, 1], integrating only the interior points."""
    s = np.asarray(s, dtype=float)
    out = np.where(s >= 1.0, _J_ONE, 0.0)
    inner = (s > 0.0) & (s < 1.0)
    if np.any(inner):
        out[inner] = _J_quad(s[inner])
    return out


def cutoff_T(z, k: float):
    """``T_k(z) = k T(z/k)``: identity below ``k``, constant ``2k`` above ``3k``."""
    z = np.asarray(z, dtype=float)
    return np.where(z <= k, z, k * _T(z / k))


def cutoff_T_prime(z, k: float):
    return _T_prime(np.asarray(z, dtype=float) / k)


def cutoff_T_second(z, k: float):
    return _T_second(np.asarray(z, dtype=float) / k) / k


def beta_k(k: float) -> float:
    """``log k + ∫_k^{3k} T_k(s)/s² ds + 2/3``."""
    return math.log(k) + math.log(3.0) - _J_ONE + 2.0 / 3.0


def _zlogz(z):
    z = np.asarray(z, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(z > 0, z * np.log(np.where(z > 0, z, 1.0)), 0.0)


def _integral_quad(z: float, k: float) -> float:
    val, _ = integrate.quad(
        lambda s: float(cutoff_T(s, k)) / s ** 2, k, z,
        epsabs=1e-13, epsrel=1e-13, limit=200, points=[3 * k] if z > 3 * k else None,
    )
    return val


def cutoff_L(z, k: float, method: str = "exact"):
    """``L_k(z)``: ``z log z`` up to ``k``, then ``z log k + z ∫_k^z T_k(s)/s² ds``.

    ``method='exact'`` evaluates the integral branch in closed form (it equals
    ``z log z - z J`` with a positive remainder ``J`` integrated to round-off);
    ``method='quad'`` uses adaptive quadrature and is meant for cross-checks.
    """
    z = np.asarray(z, dtype=float)
    if np.any(z < 0):
        raise ValidationError("cutoff_L needs z ≥ 0")
    if method == "quad":
        flat = [
            float(_zlogz(x)) if x <= k else x * math.log(k) + x * _integral_quad(x, k)
            for x in z.ravel()
        ]
        return np.array(flat).reshape(z.shape)
    if method != "exact":
        raise ValueError(f"unknown method {method!r}")
    y = z / k
    s = np.clip((y - 1.0) / 2.0, 0.0, 1.0)
    mid = _zlogz(z) - z * _J(s)
    far = beta_k(k) * z - 2.0 * k
    return np.where(y <= 1.0, _zlogz(z), np.where(y >= 3.0, far, mid))


def cutoff_L_prime(z, k: float):
    z = np.asarray(z, dtype=float)
    y = z / k
    s = np.clip((y - 1.0) / 2.0, 0.0, 1.0)
    with np.errstate(divide="ignore"):
        logz = np.log(np.where(z > 0, z, np.nan))
        mid = logz - _J(s) + cutoff_T(z, k) / np.where(z > 0, z, 1.0)
        low = logz + 1.0
    return np.where(y <= 1.0, low, np.where(y >= 3.0, beta_k(k), mid))


def cutoff_b(z, k: float):
    """``b_k(z) = L_k(z) - β_k z``; equal to ``-2k`` for ``z ≥ 3k``."""
    z = np.asarray(z, dtype=float)
    out = cutoff_L(z, k) - beta_k(k) * z
    return np.where(z >= 3 * k, -2.0 * k, out)


def cutoff_b_prime(z, k: float):
    z = np.asarray(z, dtype=float)
    return np.where(z >= 3 * k, 0.0, cutoff_L_prime(z, k) - beta_k(k))
