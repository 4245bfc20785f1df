"""Grid, field and parameter types shared by every module.

Nodes are vertex-centred: an axis with ``points`` cells of width
``extent / points`` carries ``points + 1`` nodes, the first and last of
which lie on the boundary.  Integrals use the trapezoid rule, whose weights
are also the control-volume sizes of the transport scheme.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

__all__ = [
    "ValidationError",
    "Grid",
    "ScalarField",
    "VectorField",
    "FluidState",
    "ModelParams",
    "Verdict",
    "validate_params",
    "total_mass",
]

MIN_CELLS = 8


class ValidationError(ValueError):
    """Raised when an object or parameter set breaks a documented invariant."""


@dataclass(frozen=True)
class Grid:
    """Uniform box grid ``(0, L_1) x ... x (0, L_d)`` with ``d`` in {1, 2}."""

    extent: tuple
    points: tuple

    def __post_init__(self):
        extent = tuple(float(v) for v in np.atleast_1d(self.extent))
        points = tuple(int(v) for v in np.atleast_1d(self.points))
        if len(extent) != len(points):
            raise ValidationError("extent and points must have one entry per axis")
        if len(extent) not in (1, 2):
            raise ValidationError(f"dimension must be 1 or 2, got {len(extent)}")
        if any(not np.isfinite(L) or L <= 0 for L in extent):
            raise ValidationError(f"extents must be positive, got {extent}")
        if any(p < MIN_CELLS for p in points):
            raise ValidationError(f"need at least {MIN_CELLS} cells per axis, got {points}")
        object.__setattr__(self, "extent", extent)
        object.__setattr__(self, "points", points)

    @property
    def dim(self) -> int:
        return len(self.extent)

    @property
    def spacing(self) -> tuple:
        return tuple(L / p for L, p in zip(self.extent, self.points))

    @property
    def shape(self) -> tuple:
        """Node-array shape (cells + 1 per axis)."""
        return tuple(p + 1 for p in self.points)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def volume(self) -> float:
        return float(np.prod(self.extent))

    def axis_nodes(self, axis: int) -> np.ndarray:
        return np.linspace(0.0, self.extent[axis], self.points[axis] + 1)

    @cached_property
    def coords(self) -> tuple:
        """Broadcastable node coordinates, one array per axis (``indexing='ij'``)."""
        axes = [self.axis_nodes(a) for a in range(self.dim)]
        return tuple(np.meshgrid(*axes, indexing="ij"))

    @cached_property
    def weights(self) -> np.ndarray:
        """Trapezoid weights; also the dual-cell volumes of the transport scheme."""
        w = np.ones(self.shape)
        for a, h in enumerate(self.spacing):
            wa = np.full(self.shape[a], h)
            wa[0] = wa[-1] = 0.5 * h
            shape = [1] * self.dim
            shape[a] = -1
            w = w * wa.reshape(shape)
        return w

    @cached_property
    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        for a in range(self.dim):
            idx = [slice(None)] * self.dim
            idx[a] = 0
            mask[tuple(idx)] = True
            idx[a] = -1
            mask[tuple(idx)] = True
        return mask

    def distance_to_boundary(self) -> np.ndarray:
        d = np.full(self.shape, np.inf)
        for a, x in enumerate(self.coords):
            d = np.minimum(d, np.minimum(x, self.extent[a] - x))
        return d

    def integrate(self, values: np.ndarray) -> float:
        return float(np.sum(self.weights * values))


@dataclass
class ScalarField:
    """Nodal scalar.  ``density=True`` enforces nonnegativity at construction."""

    grid: Grid
    values: np.ndarray
    density: bool = False

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.size != self.grid.size:
            raise ValidationError(
                f"expected {self.grid.size} nodal values, got {values.size}"
            )
        self.values = values.reshape(self.grid.shape)
        if self.density and np.any(self.values < 0):
            raise ValidationError(
                f"density field has negative value {self.values.min():.3e}"
            )

    @classmethod
    def constant(cls, grid: Grid, value: float, density: bool = False) -> "ScalarField":
        return cls(grid, np.full(grid.shape, float(value)), density=density)

    def copy(self) -> "ScalarField":
        return ScalarField(self.grid, self.values.copy(), density=self.density)


@dataclass
class VectorField:
    """Nodal vector field, components stacked along the first axis."""

    grid: Grid
    components: np.ndarray

    def __post_init__(self):
        comps = np.asarray(self.components, dtype=float)
        if comps.shape != (self.grid.dim,) + self.grid.shape:
            raise ValidationError(
                f"vector field needs shape {(self.grid.dim,) + self.grid.shape}, "
                f"got {comps.shape}"
            )
        self.components = comps

    @classmethod
    def zeros(cls, grid: Grid) -> "VectorField":
        return cls(grid, np.zeros((grid.dim,) + grid.shape))

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.components))) if self.components.size else 0.0

    def vanishes_on_boundary(self) -> bool:
        return bool(np.all(self.components[:, self.grid.boundary_mask] == 0.0))

    def copy(self) -> "VectorField":
        return VectorField(self.grid, self.components.copy())


@dataclass
class FluidState:
    """Densities ``rho``, ``n`` and velocity ``u`` at one instant.

    The velocity must vanish on boundary nodes unless ``dirichlet=False``
    (only used when probing operators with fields that are not admissible
    velocities, e.g. a linear shear).
    """

    rho: ScalarField
    n: ScalarField
    u: VectorField
    time: float = 0.0
    dirichlet: bool = field(default=True, repr=False)

    def __post_init__(self):
        if not (self.rho.grid == self.n.grid == self.u.grid):
            raise ValidationError("rho, n and u must share one grid")
        if self.time < 0:
            raise ValidationError("time must be nonnegative")
        if np.any(self.rho.values < 0) or np.any(self.n.values < 0):
            raise ValidationError("densities must be nonnegative")
        self.rho.density = True
        self.n.density = True
        if self.dirichlet and not self.u.vanishes_on_boundary():
            raise ValidationError("velocity must vanish on boundary nodes")

    @property
    def grid(self) -> Grid:
        return self.rho.grid

    @property
    def d(self) -> np.ndarray:
        """Total density ``rho + n`` as a raw array."""
        return self.rho.values + self.n.values

    @classmethod
    def from_arrays(cls, grid: Grid, rho, n, u=None, time: float = 0.0,
                    dirichlet: bool = True) -> "FluidState":
        rho = np.broadcast_to(np.asarray(rho, dtype=float), grid.shape).copy()
        n = np.broadcast_to(np.asarray(n, dtype=float), grid.shape).copy()
        vel = VectorField.zeros(grid) if u is None else VectorField(grid, u)
        return cls(ScalarField(grid, rho, density=True),
                   ScalarField(grid, n, density=True), vel, time, dirichlet)

    def copy(self) -> "FluidState":
        return FluidState(self.rho.copy(), self.n.copy(), self.u.copy(),
                          self.time, self.dirichlet)


@dataclass(frozen=True)
class ModelParams:
    """Physical and approximation parameters.

    ``lam`` is the second viscosity (``lambda`` is reserved in Python).
    """

    mu: float = 1.0
    lam: float = 0.0
    gamma: float = 2.0
    alpha: float = 2.0
    beta: float = 5.0
    epsilon: float = 0.0
    delta: float = 0.0
    c0: Optional[float] = None

    def __post_init__(self):
        if not self.mu > 0:
            raise ValidationError("μ>0 fails")
        if not 2 * self.mu + self.lam >= 0:
            raise ValidationError("2μ+λ≥0 fails")
        if not self.gamma >= 1:
            raise ValidationError("γ≥1 fails")
        if not self.alpha >= 1:
            raise ValidationError("α≥1 fails")
        if not self.epsilon >= 0:
            raise ValidationError("ε≥0 fails")
        if not self.delta >= 0:
            raise ValidationError("δ≥0 fails")
        if self.c0 is not None and not self.c0 >= 1:
            raise ValidationError("c0≥1 fails")
        if self.delta > 0 and not self.beta > max(4.0, self.alpha, self.gamma):
            raise ValidationError("β>max{4,α,γ} fails")

    def replace(self, **changes) -> "ModelParams":
        from dataclasses import replace
        return replace(self, **changes)


@dataclass(frozen=True)
class Verdict:
    accepted: bool
    reason: Optional[str] = None

    def __bool__(self) -> bool:
        return self.accepted


def _window_checks(gamma: float, alpha: float) -> Sequence:
    return (
        ("γ>9/5", gamma > 9 / 5),
        ("α>9/5", alpha > 9 / 5),
        ("3γ/4<α", 3 * gamma / 4 < alpha),
        ("γ−1<α", gamma - 1 < alpha),
        ("3(γ+1)/5<α", 3 * (gamma + 1) / 5 < alpha),
        ("α<4γ/3", alpha < 4 * gamma / 3),
        ("α<γ+1", alpha < gamma + 1),
        ("α<5γ/3−1", alpha < 5 * gamma / 3 - 1),
    )


def validate_params(p: ModelParams, mode: str) -> Verdict:
    """Classify ``p`` against the existence windows.

    ``mode='comparability'`` needs α ≥ 1, γ > 9/5 and a comparability
    constant; ``mode='window'`` needs α, γ > 9/5 with α strictly inside
    ``(max{3γ/4, γ−1, 3(γ+1)/5}, min{4γ/3, γ+1, 5γ/3−1})``.  The rejection
    reason names the first violated inequality.
    """
    if mode == "comparability":
        checks = (
            ("α≥1", p.alpha >= 1),
            ("γ>9/5", p.gamma > 9 / 5),
            ("c0 present", p.c0 is not None),
        )
    elif mode == "window":
        checks = _window_checks(p.gamma, p.alpha)
    else:
        raise ValueError(f"unknown validation mode {mode!r}")
    for name, ok in checks:
        if not ok:
            return Verdict(False, f"{name} fails")
    return Verdict(True)


def total_mass(f) -> float:
    """Trapezoid quadrature of a :class:`ScalarField` over the box."""
    return f.grid.integrate(f.values)
