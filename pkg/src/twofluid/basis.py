"""Dirichlet Laplacian eigenbasis on the box and projection to/from it.

Modes are the continuous eigenfunctions sampled at the nodes.  On the
vertex-centred grid the sampled sines are exactly orthogonal under the
trapezoid rule (discrete sine transform of type I), so the only loss of
accuracy is the usual truncation error of the discrete operators acting on
them.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .core import Grid, ValidationError, VectorField

__all__ = ["GalerkinBasis", "SpectralCoeffs", "build_basis", "project", "reconstruct"]


@dataclass(eq=False)
class GalerkinBasis:
    """First ``k`` sine modes of the box ordered by eigenvalue.

    Attributes
    ----------
    eigenvalues : (k,) array
        ``sum_a (m_a pi / L_a)**2``, nondecreasing.
    indices : (k, dim) int array
        Multi-index ``m`` of each mode.
    table : (k, *grid.shape) array
        Mode values at the nodes, unit L2 norm under grid quadrature.
    grad_table : (dim, k, *grid.shape) array
        Exact partial derivatives of each mode at the nodes.
    """

    grid: Grid
    k: int
    eigenvalues: np.ndarray
    indices: np.ndarray
    table: np.ndarray
    grad_table: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def flat(self) -> np.ndarray:
        return self.table.reshape(self.k, -1)

    @cached_property
    def weighted_flat(self) -> np.ndarray:
        return self.flat * self.grid.weights.reshape(1, -1)

    @cached_property
    def stiffness(self) -> np.ndarray:
        """``S[a, b, i, j] = ∫ ∂_a ψ_i ∂_b ψ_j`` under grid quadrature."""
        g = self.grad_table.reshape(self.grid.dim, self.k, -1)
        w = self.grid.weights.reshape(-1)
        return np.einsum("aix,bjx,x->abij", g, g, w)


@dataclass
class SpectralCoeffs:
    """Coefficients ``c[i, a]`` of velocity component ``a`` on mode ``i``."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise ValidationError("coefficients must be a (k, dim) array")

    @classmethod
    def zeros(cls, basis: GalerkinBasis) -> "SpectralCoeffs":
        return cls(np.zeros((basis.k, basis.grid.dim)))


def build_basis(grid: Grid, k: int) -> GalerkinBasis:
    """Tensor-product sine modes, eigenvalue-sorted, ties broken by multi-index."""
    interior = int(np.prod([p - 1 for p in grid.points]))
    if k < 1 or k > interior:
        raise ValidationError(f"k={k} must lie in [1, {interior}] (interior node count)")

    candidates = []
    for m in itertools.product(*(range(1, p) for p in grid.points)):
        lam = sum((mi * np.pi / L) ** 2 for mi, L in zip(m, grid.extent))
        candidates.append((lam, m))
    candidates.sort()
    chosen = candidates[:k]

    eigenvalues = np.array([lam for lam, _ in chosen])
    indices = np.array([m for _, m in chosen], dtype=int)

    table = np.empty((k,) + grid.shape)
    grad = np.empty((grid.dim, k) + grid.shape)
    for i, m in enumerate(indices):
        sines, cosines = [], []
        for a, (mi, L) in enumerate(zip(m, grid.extent)):
            x = grid.axis_nodes(a)
            s = np.sin(mi * np.pi * x / L)
            s[0] = s[-1] = 0.0
            sines.append(s)
            cosines.append((mi * np.pi / L) * np.cos(mi * np.pi * x / L))
        mode = _outer(sines)
        norm = np.sqrt(grid.integrate(mode ** 2))
        table[i] = mode / norm
        for a in range(grid.dim):
            factors = list(sines)
            factors[a] = cosines[a]
            grad[a, i] = _outer(factors) / norm
    return GalerkinBasis(grid, k, eigenvalues, indices, table, grad)


def _outer(factors):
    out = factors[0]
    for f in factors[1:]:
        out = np.multiply.outer(out, f)
    return out


def project(f: VectorField, basis: GalerkinBasis) -> SpectralCoeffs:
    """``c[i, a] = ∫ f_a ψ_i`` under grid quadrature."""
    if f.grid != basis.grid:
        raise ValidationError("field and basis live on different grids")
    comps = f.components.reshape(basis.grid.dim, -1)
    return SpectralCoeffs(basis.weighted_flat @ comps.T)


def reconstruct(c: SpectralCoeffs, basis: GalerkinBasis) -> VectorField:
    """Nodal values of ``sum_i c[i, a] ψ_i``; boundary values are exactly zero."""
    if c.values.shape != (basis.k, basis.grid.dim):
        raise ValidationError(
            f"coefficient shape {c.values.shape} does not match {(basis.k, basis.grid.dim)}"
        )
    comps = (c.values.T @ basis.flat).reshape((basis.grid.dim,) + basis.grid.shape)
    comps[:, basis.grid.boundary_mask] = 0.0
    return VectorField(basis.grid, comps)
