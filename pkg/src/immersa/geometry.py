"""Induced geometry of an immersion and covariant calculus on tensor fields.

With the flat background chart, the difference tensor between the induced and
background connections coincides with the Christoffel symbols of the pullback
metric, and the background derivative is the plain chart partial.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .errors import ImmersionViolation, OrderTooHigh, TypeMismatch
from .paramgrid import GridImmersion, ParamGrid, TensorField

DET_FLOOR = 1e-14
DEFAULT_MAX_ORDER = 4


@dataclass
class InducedGeometry:
    """Cached per-node geometry of one immersion (immutable by convention)."""

    grid: ParamGrid
    d: int
    Df: np.ndarray      # (n,n,2,d)   chart partials of f
    g: np.ndarray       # (n,n,2,2)   pullback metric
    g_inv: np.ndarray   # (n,n,2,2)
    det: np.ndarray     # (n,n)
    rho: np.ndarray     # (n,n)       vol / background vol = sqrt(det g)
    dg: np.ndarray      # (n,n,2,2,2) chart partials of g
    gamma: np.ndarray   # (n,n,2,2,2) Christoffel symbols of the second kind
    ddf: np.ndarray     # (n,n,2,2,d) second chart partials of f
    S: np.ndarray       # (n,n,2,2,d) second fundamental form
    H: np.ndarray       # (n,n,d)     mean curvature vector

    @property
    def min_singular_value(self) -> float:
        return float(np.sqrt(K.min_singular_value_sq(np, self.g, self.det).min()))

    def rho_field(self) -> TensorField:
        return TensorField.scalar(self.grid, self.rho)

    def H_field(self) -> TensorField:
        return TensorField.ambient(self.grid, self.H, self.d)

    def S_field(self) -> TensorField:
        return TensorField(self.grid, (0, 2, 1), self.S, d=self.d)

    def Tf_field(self) -> TensorField:
        return TensorField(self.grid, (0, 1, 1), self.Df, d=self.d)

    def total_volume(self) -> float:
        return float(K.integrate(np, self.rho, self.grid.cell_weight))


def induced_geometry(
    f: GridImmersion, immersion_floor: float | None = None
) -> InducedGeometry:
    """Compute g, g^{-1}, rho, Gamma, S and H for one immersion.

    Raises ImmersionViolation if the Jacobian smallest singular value drops to
    the floor, i.e. the immersion left the open set the theory works on.
    """
    floor = f.immersion_floor if immersion_floor is None else immersion_floor
    su, sv = f.grid.spacing
    parts = K.geometry_parts(np, f.positions, su, sv, f.grid.stencil_order)
    det = parts["det"]
    if np.any(det <= DET_FLOOR):
        raise ImmersionViolation("metric determinant at or below the floor")
    min_sv = float(np.sqrt(K.min_singular_value_sq(np, parts["g"], det).min()))
    if not min_sv > floor:
        raise ImmersionViolation(
            f"min Jacobian singular value {min_sv:.3e} <= floor {floor:.1e}"
        )
    return InducedGeometry(grid=f.grid, d=f.d, **parts)


def induced_metric(f: GridImmersion, immersion_floor: float | None = None) -> np.ndarray:
    """First fundamental form g_{ab} = <d_a f, d_b f> as an (n,n,2,2) array."""
    return induced_geometry(f, immersion_floor).g


def christoffel(geom: InducedGeometry) -> np.ndarray:
    """Christoffel symbols of the second kind from the cached g and dg."""
    return K.christoffel_from_parts(np, geom.g_inv, geom.dg)


def covariant_derivative(geom: InducedGeometry, field: TensorField) -> TensorField:
    """One covariant derivative: (i,j,m) -> (i,j+1,m).

    The new cotangent slot is appended after the existing cotangent slots.
    For ambient-only fields this is exactly the chart partial.
    """
    if field.grid != geom.grid:
        raise TypeMismatch("field lives on a different grid than the geometry")
    i, j, m = field.itype
    su, sv = geom.grid.spacing
    vals = K.cov_deriv(
        np, field.values, geom.gamma, field.itype, su, sv, geom.grid.stencil_order
    )
    return TensorField(geom.grid, (i, j + 1, m), vals, d=field.d)


def iterated_covariant_derivative(
    geom: InducedGeometry,
    field: TensorField,
    order: int,
    max_order: int = DEFAULT_MAX_ORDER,
) -> TensorField:
    """j-fold composition of the covariant derivative; order 0 is the identity."""
    if order < 0:
        raise OrderTooHigh("derivative order must be non-negative")
    if order > max_order:
        raise OrderTooHigh(f"order {order} exceeds max_order {max_order}")
    out = field
    for _ in range(order):
        out = covariant_derivative(geom, out)
    return out


def second_fundamental_form(f: GridImmersion, geom: InducedGeometry) -> TensorField:
    """S_{ab} = d_a d_b f - Gamma^c_{ab} d_c f, normal-valued and symmetric.

    The cached direct form; the generic route (covariant derivative of Tf as a
    (0,1,1) field) agrees with it to rounding and is exercised by the tests.
    """
    if f.grid != geom.grid:
        raise TypeMismatch("immersion and geometry grids differ")
    return geom.S_field()


def mean_curvature(geom: InducedGeometry) -> TensorField:
    """Vector-valued mean curvature H = g^{ab} S_{ab}."""
    return geom.H_field()


def fiber_inner(geom: InducedGeometry, A: TensorField, B: TensorField) -> TensorField:
    """Pointwise fiber inner product g(A, B) for identically typed fields."""
    if not A.same_layout(B):
        raise TypeMismatch("fiber_inner requires identically typed fields")
    if A.grid != geom.grid:
        raise TypeMismatch("fields live on a different grid than the geometry")
    vals = K.fiber_inner(np, A.values, B.values, geom.g, geom.g_inv, A.itype)
    return TensorField.scalar(geom.grid, vals)


def fiber_norm_sq(geom: InducedGeometry, A: TensorField) -> np.ndarray:
    return K.fiber_inner(np, A.values, A.values, geom.g, geom.g_inv, A.itype)


def background_norm_sq(A: TensorField) -> np.ndarray:
    """|A|^2 with every slot contracted by the flat chart metric."""
    vals = A.values
    nslots = sum(A.itype)
    if not nslots:
        return vals * vals
    sq = vals * vals
    return sq.reshape(sq.shape[:2] + (-1,)).sum(axis=-1)
