"""Periodic structured discretization of the parameter torus.

The chart is [0, 2pi) x [0, 2pi) with a flat background metric, so background
covariant derivatives are plain chart partials and the background volume
element is constant.  All index arithmetic wraps periodically in both
directions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .errors import ImmersionViolation, TypeMismatch

TWO_PI = 2.0 * np.pi

DEFAULT_IMMERSION_FLOOR = 1e-8


@dataclass(frozen=True)
class ParamGrid:
    """Doubly periodic n_u x n_v node grid on the torus chart."""

    n_u: int
    n_v: int
    stencil_order: int = 4

    def __post_init__(self):
        for n in (self.n_u, self.n_v):
            if n < 8 or n % 2:
                raise ValueError(f"grid sides must be even and >= 8, got {n}")
        if self.stencil_order not in K.STENCILS:
            raise ValueError(f"stencil_order must be one of {sorted(K.STENCILS)}")

    @property
    def spacing(self) -> tuple[float, float]:
        return TWO_PI / self.n_u, TWO_PI / self.n_v

    @property
    def cell_weight(self) -> float:
        su, sv = self.spacing
        return su * sv

    def nodes(self) -> tuple[np.ndarray, np.ndarray]:
        """Meshgrid (indexing 'ij') of node coordinates in chart radians."""
        u = np.arange(self.n_u) * self.spacing[0]
        v = np.arange(self.n_v) * self.spacing[1]
        return np.meshgrid(u, v, indexing="ij")


@dataclass
class TensorField:
    """Per-node dense (i,j,m)-tensor: i tangent, j cotangent, m ambient slots."""

    grid: ParamGrid
    itype: tuple[int, int, int]
    values: np.ndarray
    d: int = 0

    def __post_init__(self):
        i, j, m = self.itype
        if min(i, j, m) < 0:
            raise TypeMismatch(f"negative slot counts in type {self.itype}")
        if m > 0 and self.d < 3:
            raise TypeMismatch("ambient slots require d >= 3")
        expect = (self.grid.n_u, self.grid.n_v) + (2,) * (i + j) + (self.d,) * m
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != expect:
            raise TypeMismatch(
                f"values shape {self.values.shape} does not match type "
                f"{self.itype} on a {self.grid.n_u}x{self.grid.n_v} grid"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("tensor field contains non-finite values")

    @classmethod
    def scalar(cls, grid: ParamGrid, values) -> "TensorField":
        return cls(grid, (0, 0, 0), values)

    @classmethod
    def ambient(cls, grid: ParamGrid, values, d: int) -> "TensorField":
        return cls(grid, (0, 0, 1), values, d=d)

    def same_layout(self, other: "TensorField") -> bool:
        return (
            self.grid == other.grid
            and self.itype == other.itype
            and self.d == other.d
        )

    def copy(self) -> "TensorField":
        return TensorField(self.grid, self.itype, self.values.copy(), d=self.d)


@dataclass
class GridImmersion:
    """Discretized map f: T^2 -> R^d; the central state object."""

    grid: ParamGrid
    d: int
    positions: np.ndarray
    check: bool = True
    immersion_floor: float = DEFAULT_IMMERSION_FLOOR

    def __post_init__(self):
        if self.d < 3:
            raise ValueError("ambient dimension must be >= 3")
        self.positions = np.asarray(self.positions, dtype=float)
        expect = (self.grid.n_u, self.grid.n_v, self.d)
        if self.positions.shape != expect:
            raise ValueError(
                f"positions shape {self.positions.shape}, expected {expect}"
            )
        if not np.all(np.isfinite(self.positions)):
            raise ValueError("positions contain non-finite values")
        if self.check:
            sv = self.min_singular_value()
            if not sv > self.immersion_floor:
                raise ImmersionViolation(
                    f"min Jacobian singular value {sv:.3e} <= floor "
                    f"{self.immersion_floor:.1e}"
                )

    def min_singular_value(self) -> float:
        su, sv = self.grid.spacing
        Df = K.jacobian(np, self.positions, su, sv, self.grid.stencil_order)
        g = K.metric_from_jacobian(np, Df)
        det = K.det2(np, g)
        if np.any(det <= 0):
            return 0.0
        return float(np.sqrt(K.min_singular_value_sq(np, g, det).min()))

    def field(self) -> TensorField:
        """Positions as a (0,0,1) tensor field."""
        return TensorField.ambient(self.grid, self.positions, self.d)

    def translated(self, c) -> "GridImmersion":
        c = np.asarray(c, dtype=float)
        return GridImmersion(self.grid, self.d, self.positions + c, check=False)

    def scaled(self, lam: float) -> "GridImmersion":
        return GridImmersion(self.grid, self.d, lam * self.positions)


def partial_derivative(f: TensorField, direction: str) -> TensorField:
    """Chart partial of a tensor field (the flat background derivative).

    Componentwise periodic central difference; the output has the same type.
    """
    axis = {"u": 0, "v": 1}[direction]
    vals = K.diff_axis(
        np, f.values, axis, f.grid.spacing[axis], f.grid.stencil_order
    )
    return TensorField(f.grid, f.itype, vals, d=f.d)


def integrate(field: TensorField, density: TensorField) -> float:
    """Periodic trapezoid rule of field * density against the flat chart area."""
    if field.grid != density.grid:
        raise TypeMismatch("integrate requires both fields on the same grid")
    if field.itype != (0, 0, 0) or density.itype != (0, 0, 0):
        raise TypeMismatch("integrate takes scalar (0,0,0) fields")
    return float(K.integrate(np, field.values * density.values, field.grid.cell_weight))


def grid_shift(field: TensorField, offset: tuple[int, int]) -> TensorField:
    """Exact periodic node translation; represents right composition with the
    corresponding grid translation of the torus."""
    a, b = offset
    vals = np.roll(field.values, shift=(a, b), axis=(0, 1))
    return TensorField(field.grid, field.itype, vals, d=field.d)


def shift_immersion(f: GridImmersion, offset: tuple[int, int]) -> GridImmersion:
    a, b = offset
    pos = np.roll(f.positions, shift=(a, b), axis=(0, 1))
    return GridImmersion(f.grid, f.d, pos, check=False)


def constant_field(grid: ParamGrid, vector) -> TensorField:
    vec = np.atleast_1d(np.asarray(vector, dtype=float))
    d = vec.shape[0]
    vals = np.broadcast_to(vec, (grid.n_u, grid.n_v, d)).copy()
    return TensorField.ambient(grid, vals, d)
