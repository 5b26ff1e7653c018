"""First variations of the induced geometry, of the weighted metric and of
the discrete path energy, in a deformation direction fdot.

Every formula here is the exact derivative of the corresponding discrete
computation (stencils are linear, all other operations are pointwise algebra),
so finite differences of the production pipeline match these outputs to
truncation error of the difference quotient alone.  That exactness is what the
oracle suite pins down.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .errors import OrderTooHigh, TypeMismatch
from .geometry import InducedGeometry, induced_geometry
from .paramgrid import GridImmersion, TensorField
from .sobolev_metric import MetricConfig


@dataclass
class VariationBundle:
    """Directional derivatives of the cached geometry in one direction."""

    dt_g: np.ndarray        # (n,n,2,2)
    dt_g_inv: np.ndarray    # (n,n,2,2)
    nabla_dt_g: np.ndarray  # (n,n,2,2,2)  covariant derivative of dt_g
    dt_gamma: np.ndarray    # (n,n,2,2,2)
    dt_S: np.ndarray        # (n,n,2,2,d)
    dt_H: np.ndarray        # (n,n,d)
    dt_rho: np.ndarray      # (n,n)


def _check_direction(f: GridImmersion, fdot: TensorField):
    if fdot.itype != (0, 0, 1) or fdot.d != f.d or fdot.grid != f.grid:
        raise TypeMismatch("deformation direction must be a (0,0,1) field over f")


def variation_metric(
    f: GridImmersion, geom: InducedGeometry, fdot: TensorField
) -> tuple[np.ndarray, np.ndarray]:
    """dt g_{ab} = <d_a fdot, d_b f> + <d_b fdot, d_a f>, and the sandwich
    formula dt g^{-1} = -g^{-1} (dt g) g^{-1}."""
    _check_direction(f, fdot)
    su, sv = f.grid.spacing
    Dfd = K.jacobian(np, fdot.values, su, sv, f.grid.stencil_order)
    cross = np.einsum("uvak,uvbk->uvab", Dfd, geom.Df)
    dt_g = cross + np.einsum("uvab->uvba", cross)
    dt_g_inv = -np.einsum("uvab,uvbc,uvcd->uvad", geom.g_inv, dt_g, geom.g_inv)
    return dt_g, dt_g_inv


def variation_gamma(
    f: GridImmersion,
    geom: InducedGeometry,
    fdot: TensorField,
    dt_g: np.ndarray | None = None,
    dt_g_inv: np.ndarray | None = None,
) -> np.ndarray:
    """Exact derivative of the discrete Christoffel symbols.

    The Christoffel map is bilinear in (g^{-1}, dg), so the variation is the
    sum of the two one-sided substitutions.  This agrees identically with the
    covariant form 1/2 g^{ad}(nabla_b dt_g_{cd} + nabla_c dt_g_{bd}
    - nabla_d dt_g_{bc}); the agreement is exercised by the tests.
    """
    if dt_g is None or dt_g_inv is None:
        dt_g, dt_g_inv = variation_metric(f, geom, fdot)
    su, sv = f.grid.spacing
    d_dt_g = K.metric_partials(np, dt_g, su, sv, f.grid.stencil_order)
    return K.christoffel_from_parts(np, dt_g_inv, geom.dg) + K.christoffel_from_parts(
        np, geom.g_inv, d_dt_g
    )


def variation_S_H(
    f: GridImmersion,
    geom: InducedGeometry,
    fdot: TensorField,
    dt_gamma: np.ndarray,
    dt_g_inv: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """dt S = grad^2 fdot + (dt Gamma) correction of Tf; dt H by the trace rule.

    dt S_{ab} = d_a d_b fdot - Gamma^c_{ab} d_c fdot - dt(Gamma^c_{ab}) d_c f
    dt H = (dt g^{-1})^{ab} S_{ab} + g^{ab} dt S_{ab}
    """
    _check_direction(f, fdot)
    if dt_g_inv is None:
        _, dt_g_inv = variation_metric(f, geom, fdot)
    su, sv = f.grid.spacing
    order = f.grid.stencil_order
    Dfd = K.jacobian(np, fdot.values, su, sv, order)
    ddfd = np.stack(
        [K.diff_axis(np, Dfd, 0, su, order), K.diff_axis(np, Dfd, 1, sv, order)],
        axis=2,
    )
    dt_S = (
        ddfd
        - np.einsum("uvcab,uvck->uvabk", geom.gamma, Dfd)
        - np.einsum("uvcab,uvck->uvabk", dt_gamma, geom.Df)
    )
    dt_H = np.einsum("uvab,uvabk->uvk", dt_g_inv, geom.S) + np.einsum(
        "uvab,uvabk->uvk", geom.g_inv, dt_S
    )
    return dt_S, dt_H


def variation_volume(
    f: GridImmersion,
    geom: InducedGeometry,
    fdot: TensorField,
    dt_g: np.ndarray | None = None,
) -> tuple[TensorField, float]:
    """Pointwise dt rho = g(Tf, grad fdot) rho and the total volume derivative.

    g(Tf, grad fdot) = 1/2 tr(g^{-1} dt_g), so this is also the exact
    derivative of the discrete density sqrt(det g).
    """
    if dt_g is None:
        dt_g, _ = variation_metric(f, geom, fdot)
    half_trace = 0.5 * np.einsum("uvab,uvab->uv", geom.g_inv, dt_g)
    dt_rho = half_trace * geom.rho
    dt_total = float(K.integrate(np, dt_rho, f.grid.cell_weight))
    return TensorField.scalar(f.grid, dt_rho), dt_total


def variation_bundle(
    f: GridImmersion, geom: InducedGeometry, fdot: TensorField
) -> VariationBundle:
    """Assemble every first-variation quantity for one direction."""
    dt_g, dt_g_inv = variation_metric(f, geom, fdot)
    dt_gamma = variation_gamma(f, geom, fdot, dt_g, dt_g_inv)
    dt_S, dt_H = variation_S_H(f, geom, fdot, dt_gamma, dt_g_inv)
    dt_rho_field, _ = variation_volume(f, geom, fdot, dt_g)
    su, sv = f.grid.spacing
    nabla_dt_g = K.cov_deriv(
        np, dt_g, geom.gamma, (0, 2, 0), su, sv, f.grid.stencil_order
    )
    return VariationBundle(
        dt_g=dt_g,
        dt_g_inv=dt_g_inv,
        nabla_dt_g=nabla_dt_g,
        dt_gamma=dt_gamma,
        dt_S=dt_S,
        dt_H=dt_H,
        dt_rho=dt_rho_field.values,
    )


def variation_covderiv(
    f: GridImmersion,
    geom: InducedGeometry,
    fdot: TensorField,
    h: TensorField,
    order: int,
    max_order: int = 4,
    dt_gamma: np.ndarray | None = None,
) -> TensorField:
    """Derivative of grad^order h with respect to the footpoint, h held fixed.

    Recursion: dt(grad X) = grad(dt X) + (dt Gamma)-corrections of X, which is
    exact for the discrete operator since the stencil part is f-independent
    and the Gamma contractions obey the pointwise Leibniz rule.
    """
    if order < 0 or order > max_order:
        raise OrderTooHigh(f"order {order} outside 0..{max_order}")
    if dt_gamma is None:
        dt_gamma = variation_gamma(f, geom, fdot)
    su, sv = f.grid.spacing
    so = f.grid.stencil_order
    i, j, m = h.itype
    a = h.values
    dt = np.zeros_like(a)
    for level in range(order):
        itype = (i, j + level, m)
        pos = 2 + i + j + level
        dt_new = K.cov_deriv(np, dt, geom.gamma, itype, su, sv, so)
        if i + j + level:
            corr = K.gamma_corrections(np, a, dt_gamma, itype)
            dt_new = dt_new + np.moveaxis(corr, -1, pos)
        dt = dt_new
        a = K.cov_deriv(np, a, geom.gamma, itype, su, sv, so)
    return TensorField(h.grid, (i, j + order, m), dt, d=h.d)


def metric_footpoint_derivative(
    f: GridImmersion,
    geom: InducedGeometry,
    h1: TensorField,
    h2: TensorField,
    fdot: TensorField,
    cfg: MetricConfig,
) -> float:
    """d/dt G_{f + t fdot}(h1, h2) at t = 0 with h1, h2 held fixed."""
    _check_direction(f, fdot)
    su, sv = f.grid.spacing
    so = f.grid.stencil_order
    bundle = variation_bundle(f, geom, fdot)
    w_exp = cfg.weight_exponent

    hsq = (geom.H * geom.H).sum(axis=-1)
    weight = K.curvature_weight(np, geom.H, w_exp)
    h_dot_hdot = (geom.H * bundle.dt_H).sum(axis=-1)
    if w_exp == 0:
        dt_weight = np.zeros_like(hsq)
    elif w_exp == 2:
        dt_weight = 2.0 * h_dot_hdot
    else:
        # d/dt (hsq)^(w/2) = w hsq^(w/2 - 1) <H, dt H>; for w >= 2 this
        # extends by zero where H vanishes.
        with np.errstate(divide="ignore", invalid="ignore"):
            grown = hsq ** (w_exp / 2.0 - 1.0)
        grown = np.where(hsq > 0, grown, 0.0)
        dt_weight = w_exp * grown * h_dot_hdot

    a1, a2 = h1.values, h2.values
    d1 = np.zeros_like(a1)
    d2 = np.zeros_like(a2)
    t0 = (a1 * a2).sum(axis=-1)
    integrand = t0.copy()
    dt_integrand = np.zeros_like(t0)
    for level in range(1, cfg.k + 1):
        itype = (0, level - 1, 1)
        pos = 2 + level - 1
        d1_new = K.cov_deriv(np, d1, geom.gamma, itype, su, sv, so)
        d2_new = K.cov_deriv(np, d2, geom.gamma, itype, su, sv, so)
        if level > 1:
            d1_new = d1_new + np.moveaxis(
                K.gamma_corrections(np, a1, bundle.dt_gamma, itype), -1, pos
            )
            d2_new = d2_new + np.moveaxis(
                K.gamma_corrections(np, a2, bundle.dt_gamma, itype), -1, pos
            )
        d1, d2 = d1_new, d2_new
        a1 = K.cov_deriv(np, a1, geom.gamma, itype, su, sv, so)
        a2 = K.cov_deriv(np, a2, geom.gamma, itype, su, sv, so)
        lvl_type = (0, level, 1)
        if level in cfg.included_orders or level == cfg.k:
            F = K.fiber_inner(np, a1, a2, geom.g, geom.g_inv, lvl_type)
            dF = (
                K.fiber_inner_variation(
                    np, a1, a2, geom.g, geom.g_inv, bundle.dt_g, bundle.dt_g_inv, lvl_type
                )
                + K.fiber_inner(np, d1, a2, geom.g, geom.g_inv, lvl_type)
                + K.fiber_inner(np, a1, d2, geom.g, geom.g_inv, lvl_type)
            )
            if level in cfg.included_orders:
                integrand += weight * F
                dt_integrand += dt_weight * F + weight * dF
            if level == cfg.k:
                integrand += F
                dt_integrand += dF
    total = dt_integrand * geom.rho + integrand * bundle.dt_rho
    return float(K.integrate(np, total, f.grid.cell_weight))


def _interior_direction(path, direction) -> np.ndarray:
    """Normalize a direction to shape (T+1, n, n, d) with zero endpoints."""
    pos = path.positions
    T = pos.shape[0] - 1
    direction = np.asarray(direction, dtype=float)
    if direction.shape == pos.shape:
        if np.any(direction[0]) or np.any(direction[-1]):
            raise TypeMismatch("direction must vanish on the path endpoints")
        return direction
    if direction.shape == (T - 1,) + pos.shape[1:]:
        full = np.zeros_like(pos)
        full[1:T] = direction
        return full
    raise TypeMismatch(
        f"direction shape {direction.shape} matches neither interior nor full path"
    )


def directional_energy_derivative(path, direction, cfg: MetricConfig) -> float:
    """Exact derivative of the discrete path energy along a direction field.

    Assembled per time interval from the variation formulas: the quadratic
    dependence on the velocity contributes 2 G(d(diff), diff), the footpoint
    dependence of the midpoint geometry contributes the metric variation.
    """
    from .sobolev_metric import metric_eval

    full = _interior_direction(path, direction)
    pos = path.positions
    T = pos.shape[0] - 1
    grid, d = path.grid, path.d
    total = 0.0
    for t in range(T):
        mid = GridImmersion(
            grid, d, 0.5 * (pos[t] + pos[t + 1]), check=False,
            immersion_floor=cfg.immersion_floor,
        )
        geom = induced_geometry(mid, cfg.immersion_floor)
        diff = TensorField.ambient(grid, pos[t + 1] - pos[t], d)
        ddiff = TensorField.ambient(grid, full[t + 1] - full[t], d)
        dmid = TensorField.ambient(grid, 0.5 * (full[t] + full[t + 1]), d)
        total += 2.0 * metric_eval(mid, geom, ddiff, diff, cfg)
        total += metric_footpoint_derivative(mid, geom, diff, diff, dmid, cfg)
    return float(total * T)


def energy_gradient(path, cfg: MetricConfig, engine: str = "analytic") -> np.ndarray:
    """Euclidean gradient of the discrete path energy over interior nodes.

    engine="analytic" differentiates the energy kernel algorithmically;
    engine="finite_difference" is the O(DOF)-cost central-difference oracle.
    Returns an array of shape (T-1, n_u, n_v, d).
    """
    return path_gradient_raw(path.positions, path.grid, cfg, engine)


def path_gradient_raw(pos: np.ndarray, grid, cfg: MetricConfig, engine: str) -> np.ndarray:
    if engine == "analytic":
        from .autodiff import path_energy_gradient

        return path_energy_gradient(pos, grid, cfg)
    if engine in ("finite_difference", "fd"):
        return _fd_energy_gradient(pos, grid, cfg)
    raise ValueError(f"unknown gradient engine {engine!r}")


def _fd_energy_gradient(pos: np.ndarray, grid, cfg: MetricConfig) -> np.ndarray:
    """Central differences per interior DOF.

    Only the two time intervals touching the perturbed slice depend on it, so
    the difference quotient is taken over those terms alone; the remaining
    terms would cancel exactly and only add rounding noise.
    """
    su, sv = grid.spacing
    order = grid.stencil_order
    scale = max(1.0, float(np.max(np.abs(pos))))
    eps = 1e-5 * scale
    T = pos.shape[0] - 1

    def local_energy(p, s):
        total = 0.0
        for t in (s - 1, s):
            mid = 0.5 * (p[t] + p[t + 1])
            df = p[t + 1] - p[t]
            total += K.metric_eval(
                np, mid, df, df, su, sv, order,
                cfg.k, cfg.weight_exponent, cfg.included_orders,
            )
        return total * T

    grad = np.zeros((T - 1,) + pos.shape[1:])
    work = pos.copy()
    for idx in np.ndindex(grad.shape):
        slice_idx = (idx[0] + 1,) + idx[1:]
        orig = work[slice_idx]
        work[slice_idx] = orig + eps
        e_plus = local_energy(work, idx[0] + 1)
        work[slice_idx] = orig - eps
        e_minus = local_energy(work, idx[0] + 1)
        work[slice_idx] = orig
        grad[idx] = (e_plus - e_minus) / (2.0 * eps)
    return grad
