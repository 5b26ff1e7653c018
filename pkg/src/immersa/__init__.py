"""Numerical engine for curvature-weighted Sobolev geometry of immersed tori."""

from .paramgrid import (
    GridImmersion,
    ParamGrid,
    TensorField,
    grid_shift,
    integrate,
    partial_derivative,
    shift_immersion,
)
from .geometry import (
    InducedGeometry,
    covariant_derivative,
    fiber_inner,
    induced_geometry,
    induced_metric,
    iterated_covariant_derivative,
    mean_curvature,
    second_fundamental_form,
)
from .sobolev_metric import (
    MetricConfig,
    background_metric_eval,
    lp_norm,
    metric_eval,
    sobolev_seminorm,
)

__all__ = [
    "GridImmersion",
    "ParamGrid",
    "TensorField",
    "InducedGeometry",
    "MetricConfig",
    "grid_shift",
    "shift_immersion",
    "integrate",
    "partial_derivative",
    "covariant_derivative",
    "iterated_covariant_derivative",
    "induced_geometry",
    "induced_metric",
    "second_fundamental_form",
    "mean_curvature",
    "fiber_inner",
    "metric_eval",
    "background_metric_eval",
    "lp_norm",
    "sobolev_seminorm",
]

__version__ = "0.1.0"
