"""The curvature-weighted order-k metric, its flat background companion and
the L^p / Sobolev norm family on tensor fields."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .errors import OrderTooHigh, TypeMismatch
from .geometry import (
    DEFAULT_MAX_ORDER,
    InducedGeometry,
    fiber_norm_sq,
    iterated_covariant_derivative,
)
from .paramgrid import DEFAULT_IMMERSION_FLOOR, GridImmersion, TensorField


@dataclass(frozen=True)
class MetricConfig:
    """Order, curvature-weight exponent and numerical knobs defining the metric.

    ``included_orders`` are the intermediate derivative orders whose terms
    carry the |H|^weight_exponent factor; the L2 term and the top order-k term
    are always present with unit weight.
    """

    k: int = 3
    weight_exponent: float = 4.0
    included_orders: frozenset[int] = frozenset({1, 2})
    immersion_floor: float = DEFAULT_IMMERSION_FLOOR
    d: int = 3
    max_order: int = DEFAULT_MAX_ORDER

    def __post_init__(self):
        if self.k < 3:
            raise ValueError("metric order k must be >= 3")
        if self.k > self.max_order:
            raise OrderTooHigh(
                f"metric order {self.k} exceeds max_order {self.max_order}"
            )
        if self.weight_exponent < 0:
            raise ValueError("weight exponent must be >= 0")
        included = frozenset(int(o) for o in self.included_orders)
        object.__setattr__(self, "included_orders", included)
        if not included <= set(range(1, self.k)):
            raise ValueError(
                f"included_orders {sorted(included)} must lie in 1..k-1"
            )
        if self.immersion_floor <= 0:
            raise ValueError("immersion floor must be positive")
        if self.d < 3:
            raise ValueError("ambient dimension must be >= 3")

    def replace(self, **kw) -> "MetricConfig":
        from dataclasses import replace

        return replace(self, **kw)


def metric_eval(
    f: GridImmersion,
    geom: InducedGeometry,
    h1: TensorField,
    h2: TensorField,
    cfg: MetricConfig,
) -> float:
    """Curvature-weighted order-k inner product of two tangent fields at f.

    G(h1,h2) = int h1.h2 + |H|^w * sum_{l in included} g(grad^l h1, grad^l h2)
               + g(grad^k h1, grad^k h2) vol.
    """
    for h in (h1, h2):
        if h.itype != (0, 0, 1) or h.d != f.d:
            raise TypeMismatch("metric arguments must be (0,0,1) fields over f")
        if h.grid != f.grid:
            raise TypeMismatch("metric arguments must live on f's grid")
    if geom.grid != f.grid:
        raise TypeMismatch("geometry grid differs from the immersion grid")
    su, sv = f.grid.spacing
    parts = {
        "gamma": geom.gamma,
        "g": geom.g,
        "g_inv": geom.g_inv,
        "H": geom.H,
        "rho": geom.rho,
    }
    return float(
        K.metric_eval_parts(
            np,
            parts,
            h1.values,
            h2.values,
            su,
            sv,
            f.grid.stencil_order,
            cfg.k,
            cfg.weight_exponent,
            cfg.included_orders,
        )
    )


def background_metric_eval(h1: TensorField, h2: TensorField, k: int) -> float:
    """Flat background H^k inner product, independent of any immersion."""
    if not h1.same_layout(h2):
        raise TypeMismatch("background metric requires identically typed fields")
    if h1.itype != (0, 0, 1):
        raise TypeMismatch("background metric takes (0,0,1) fields")
    if k > DEFAULT_MAX_ORDER + 1:
        raise OrderTooHigh(f"background order {k} exceeds max_order + 1")
    su, sv = h1.grid.spacing
    return float(
        K.background_metric_eval(
            np, h1.values, h2.values, k, su, sv, h1.grid.stencil_order
        )
    )


def lp_norm(geom: InducedGeometry, field: TensorField, p) -> float:
    """L^p(g) norm: (int |field|_g^p vol)^{1/p}; p = inf takes the node max."""
    if field.grid != geom.grid:
        raise TypeMismatch("field lives on a different grid than the geometry")
    nsq = np.maximum(fiber_norm_sq(geom, field), 0.0)
    if p == np.inf or p == "inf":
        return float(np.sqrt(nsq.max()))
    p = float(p)
    if p < 1:
        raise ValueError("p must be >= 1 or inf")
    integrand = nsq ** (p / 2.0) * geom.rho
    total = K.integrate(np, integrand, geom.grid.cell_weight)
    return float(total ** (1.0 / p))


def sobolev_seminorm(
    geom: InducedGeometry,
    field: TensorField,
    l: int,
    p,
    max_order: int = DEFAULT_MAX_ORDER,
) -> float:
    """Homogeneous W^{l,p}(g) seminorm: the L^p norm of the l-th derivative."""
    der = iterated_covariant_derivative(geom, field, l, max_order=max_order)
    return lp_norm(geom, der, p)


def domination_ratio(
    f: GridImmersion, geom: InducedGeometry, h: TensorField, cfg: MetricConfig
) -> float:
    """Diagnostic ratio background/weighted metric for one tangent field.

    Finiteness of this ratio on metric balls is the domination hypothesis of
    the completeness criterion; it is reported, never asserted against a
    specific constant.
    """
    num = background_metric_eval(h, h, cfg.k)
    den = metric_eval(f, geom, h, h, cfg)
    return num / den if den > 0 else np.inf
