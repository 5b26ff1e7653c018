"""Discrete path energy, geodesic boundary-value solver, completeness
diagnostics and quotient-distance matching with endpoint reparametrization.

A path is a time-indexed family of immersions on a common grid.  The energy
uses midpoint geometry with forward-difference velocities; minimizing it over
the interior slices with fixed endpoints realizes the geodesic boundary-value
problem variationally.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import ndimage

from . import _kernels as K
from . import variations as V
from .errors import (
    ImmersionViolation,
    InfeasibleInitialization,
    TypeMismatch,
    WarpDegenerate,
)
from .geometry import InducedGeometry, background_norm_sq, induced_geometry
from .paramgrid import GridImmersion, ParamGrid, TensorField
from .sobolev_metric import MetricConfig, background_metric_eval, metric_eval

TWO_PI = 2.0 * np.pi


@dataclass
class SolveOptions:
    max_iters: int = 500
    grad_tol: float = 1e-6
    engine: str = "analytic"
    memory: int = 10
    warp_rounds: int = 3
    warp_iters: int = 25


@dataclass
class DiscretePath:
    """T+1 immersions on a common grid with cached energy and diagnostics."""

    slices: tuple[GridImmersion, ...]
    energy: float | None = None
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.slices) < 2:
            raise ValueError("a path needs at least two slices")
        grid, d = self.slices[0].grid, self.slices[0].d
        for s in self.slices:
            if s.grid != grid or s.d != d:
                raise TypeMismatch("all slices must share grid and ambient dim")

    @classmethod
    def from_positions(
        cls, grid: ParamGrid, d: int, positions: np.ndarray, check: bool = True, **kw
    ) -> "DiscretePath":
        slices = tuple(
            GridImmersion(grid, d, positions[t], check=check)
            for t in range(positions.shape[0])
        )
        return cls(slices=slices, **kw)

    @property
    def grid(self) -> ParamGrid:
        return self.slices[0].grid

    @property
    def d(self) -> int:
        return self.slices[0].d

    @property
    def T(self) -> int:
        return len(self.slices) - 1

    @property
    def dtau(self) -> float:
        return 1.0 / self.T

    @property
    def positions(self) -> np.ndarray:
        return np.stack([s.positions for s in self.slices])

    def reversed(self) -> "DiscretePath":
        return DiscretePath(slices=tuple(reversed(self.slices)))


def _check_midpoints(positions: np.ndarray, grid: ParamGrid, floor: float):
    su, sv = grid.spacing
    for t in range(positions.shape[0] - 1):
        mid = 0.5 * (positions[t] + positions[t + 1])
        Df = K.jacobian(np, mid, su, sv, grid.stencil_order)
        g = K.metric_from_jacobian(np, Df)
        det = K.det2(np, g)
        if np.any(det <= 0):
            raise ImmersionViolation(f"degenerate midpoint at interval {t}")
        sv_min = np.sqrt(K.min_singular_value_sq(np, g, det).min())
        if not sv_min > floor:
            raise ImmersionViolation(
                f"midpoint of interval {t} fails the immersion check "
                f"({sv_min:.3e} <= {floor:.1e})"
            )


def path_energy(path: DiscretePath, cfg: MetricConfig) -> float:
    """Sum over intervals of G at the midpoint of the step difference, / dtau."""
    pos = path.positions
    _check_midpoints(pos, path.grid, cfg.immersion_floor)
    su, sv = path.grid.spacing
    return float(
        K.path_energy(
            np, pos, su, sv, path.grid.stencil_order,
            cfg.k, cfg.weight_exponent, cfg.included_orders,
        )
    )


def path_length(path: DiscretePath, cfg: MetricConfig) -> float:
    """G-length: sum over intervals of the metric norm of the step difference."""
    pos = path.positions
    _check_midpoints(pos, path.grid, cfg.immersion_floor)
    grid = path.grid
    total = 0.0
    for t in range(path.T):
        mid = GridImmersion(
            grid, path.d, 0.5 * (pos[t] + pos[t + 1]), check=False
        )
        geom = induced_geometry(mid, cfg.immersion_floor)
        diff = TensorField.ambient(grid, pos[t + 1] - pos[t], path.d)
        total += np.sqrt(max(metric_eval(mid, geom, diff, diff, cfg), 0.0))
    return float(total)


def _min_sv_of(positions_slice: np.ndarray, grid: ParamGrid) -> float:
    su, sv = grid.spacing
    Df = K.jacobian(np, positions_slice, su, sv, grid.stencil_order)
    g = K.metric_from_jacobian(np, Df)
    det = K.det2(np, g)
    if np.any(det <= 0):
        return 0.0
    return float(np.sqrt(K.min_singular_value_sq(np, g, det).min()))


def _path_feasible(positions: np.ndarray, grid: ParamGrid, floor: float) -> bool:
    mids = 0.5 * (positions[:-1] + positions[1:])
    stack = np.concatenate([positions, mids])
    su, sv = grid.spacing
    order = grid.stencil_order
    Df = np.stack(
        [K.diff_axis(np, stack, 1, su, order), K.diff_axis(np, stack, 2, sv, order)],
        axis=3,
    )
    g = np.einsum("tuvak,tuvbk->tuvab", Df, Df)
    det = g[..., 0, 0] * g[..., 1, 1] - g[..., 0, 1] * g[..., 1, 0]
    if np.any(det <= 0):
        return False
    sv_sq = K.min_singular_value_sq(np, g, det)
    return bool(np.sqrt(sv_sq.min()) > floor)


def _spectral_h0(grid: ParamGrid, d: int, T: int, cfg: MetricConfig, geom0) -> Callable:
    """Initial inverse-Hessian for the path solver.

    Flat-chart Fourier symbol of the quadratic part of the energy: per slice,
    per component, divide by 4T rho_bar dA (1 + w_bar sum kappa^{2l} +
    kappa^{2k}).  A fixed SPD operator, so this is an admissible L-BFGS
    initial Hessian; it removes the kappa^{2k} conditioning of the problem.
    """
    n_u, n_v = grid.n_u, grid.n_v
    pu = np.fft.fftfreq(n_u, d=1.0 / n_u)
    pv = np.fft.rfftfreq(n_v, d=1.0 / n_v)
    su, sv = grid.spacing

    def symbol(freqs, h):
        # imaginary part of the stencil's Fourier symbol; vanishes at Nyquist
        sig = np.zeros_like(freqs)
        for off, w in K.STENCILS[grid.stencil_order]:
            sig = sig + 2.0 * w * np.sin(off * freqs * h) / h
        return sig

    kappa_sq = symbol(pu, su)[:, None] ** 2 + symbol(pv, sv)[None, :] ** 2
    hsq = (geom0.H * geom0.H).sum(axis=-1)
    w_bar = float(np.mean(hsq ** (cfg.weight_exponent / 2.0)))
    m = np.ones_like(kappa_sq)
    for l in sorted(cfg.included_orders):
        m = m + w_bar * kappa_sq**l
    m = m + kappa_sq**cfg.k
    rho_bar = float(np.mean(geom0.rho))
    denom = 4.0 * T * rho_bar * grid.cell_weight * m

    def apply(vec: np.ndarray) -> np.ndarray:
        v = vec.reshape((T - 1, n_u, n_v, d))
        vhat = np.fft.rfft2(v, axes=(1, 2))
        out = np.fft.irfft2(vhat / denom[None, :, :, None], s=(n_u, n_v), axes=(1, 2))
        return out.reshape(vec.shape)

    return apply


def _initial_path(f0: GridImmersion, f1: GridImmersion, T: int, floor: float) -> np.ndarray:
    """Linear interpolation; on failure interpolate shape and scale separately."""
    taus = np.linspace(0.0, 1.0, T + 1)
    lin = np.stack([(1 - s) * f0.positions + s * f1.positions for s in taus])
    if _path_feasible(lin, f0.grid, floor):
        return lin
    v0 = np.sqrt(induced_geometry(f0, floor).total_volume())
    v1 = np.sqrt(induced_geometry(f1, floor).total_volume())
    shape0, shape1 = f0.positions / v0, f1.positions / v1
    alt = np.stack(
        [((1 - s) * shape0 + s * shape1) * ((1 - s) * v0 + s * v1) for s in taus]
    )
    if _path_feasible(alt, f0.grid, floor):
        return alt
    raise InfeasibleInitialization(
        "both straight-line and scale-normalized interpolations leave the "
        "set of immersions"
    )


def solve_geodesic_bvp(
    f0: GridImmersion,
    f1: GridImmersion,
    T: int,
    cfg: MetricConfig,
    opts: SolveOptions | None = None,
    init: np.ndarray | None = None,
) -> DiscretePath:
    """Minimize the discrete path energy over interior slices, endpoints fixed.

    Accepted iterates never violate the immersion check (the line search
    backtracks on violation), and their energies are non-increasing.
    """
    opts = opts or SolveOptions()
    if f0.grid != f1.grid or f0.d != f1.d:
        raise TypeMismatch("endpoints must share grid and ambient dimension")
    if T < 2:
        raise ValueError("T must be >= 2")
    grid, d = f0.grid, f0.d
    floor = cfg.immersion_floor

    if np.array_equal(f0.positions, f1.positions):
        pos = np.stack([f0.positions] * (T + 1))
        path = DiscretePath.from_positions(grid, d, pos, check=False)
        path.slices = (f0,) + path.slices[1:-1] + (f1,)
        path.energy = 0.0
        path.diagnostics = {
            "converged": True, "iterations": 0, "grad_sup": 0.0,
            "status": "identical_endpoints", "history": [(0, 0.0, 0.0, 0.0)],
        }
        return path

    pos0 = init if init is not None else _initial_path(f0, f1, T, floor)
    if init is not None and not _path_feasible(pos0, grid, floor):
        raise InfeasibleInitialization("provided initial path is infeasible")

    su, sv = grid.spacing
    order = grid.stencil_order

    def assemble(interior):
        return np.concatenate(
            [f0.positions[None], interior.reshape((T - 1,) + f0.positions.shape),
             f1.positions[None]]
        )

    def energy_np(interior):
        return K.path_energy(
            np, assemble(interior), su, sv, order,
            cfg.k, cfg.weight_exponent, cfg.included_orders,
        )

    if opts.engine == "analytic":
        from .autodiff import path_energy_value

        def fun(interior):
            return path_energy_value(assemble(interior), grid, cfg)

        def grad(interior):
            return V.path_gradient_raw(assemble(interior), grid, cfg, "analytic").ravel()

    elif opts.engine in ("finite_difference", "fd"):
        fun = energy_np

        def grad(interior):
            return V.path_gradient_raw(
                assemble(interior), grid, cfg, "finite_difference"
            ).ravel()

    else:
        raise ValueError(f"unknown engine {opts.engine!r}")

    def feasible(interior):
        return _path_feasible(assemble(interior), grid, floor)

    from .optim import lbfgs

    h0 = _spectral_h0(grid, d, T, cfg, induced_geometry(f0, floor))
    res = lbfgs(
        pos0[1:T].ravel(),
        fun,
        grad,
        feasible=feasible,
        max_iters=opts.max_iters,
        grad_tol=opts.grad_tol,
        memory=opts.memory,
        h0_apply=h0,
    )
    final = assemble(res.x)
    path = DiscretePath.from_positions(grid, d, final, check=False)
    path.slices = (f0,) + path.slices[1:-1] + (f1,)
    path.energy = path_energy(path, cfg)
    path.diagnostics = {
        "converged": res.converged,
        "iterations": res.iterations,
        "grad_sup": res.grad_sup,
        "status": res.status,
        "history": res.history,
    }
    return path


def completeness_diagnostics(path: DiscretePath, cfg: MetricConfig) -> list[dict]:
    """Per-step report of the quantities the completeness criterion controls.

    For each interval: the background/weighted metric ratio of the velocity,
    density bounds, the smallest Jacobian singular value, flat-chart norms of
    g, g^{-1}, S, Gamma, and of the chart derivative of S, and the step
    quantities entering the volume Lipschitz bound.
    """
    pos = path.positions
    grid = path.grid
    su, sv = grid.spacing
    order = grid.stencil_order
    rows = []
    for t in range(path.T):
        mid = GridImmersion(grid, path.d, 0.5 * (pos[t] + pos[t + 1]), check=False)
        geom = induced_geometry(mid, cfg.immersion_floor)
        diff = TensorField.ambient(grid, pos[t + 1] - pos[t], path.d)
        fdot = TensorField.ambient(grid, (pos[t + 1] - pos[t]) * path.T, path.d)
        G = metric_eval(mid, geom, fdot, fdot, cfg)
        Gbar = background_metric_eval(fdot, fdot, cfg.k)
        grad_speed = _grad_speed_norm(geom, fdot)
        g_linf = float(np.sqrt(background_norm_sq(TensorField(grid, (0, 2, 0), geom.g)).max()))
        ginv_linf = float(
            np.sqrt(background_norm_sq(TensorField(grid, (2, 0, 0), geom.g_inv)).max())
        )
        S_field = geom.S_field()
        gamma_field = TensorField(grid, (1, 2, 0), geom.gamma)
        S_l4 = _bg_lp(S_field, 4, grid)
        gamma_l4 = _bg_lp(gamma_field, 4, grid)
        dS = np.stack(
            [K.diff_axis(np, geom.S, 0, su, order), K.diff_axis(np, geom.S, 1, sv, order)],
            axis=2,
        )
        nablabar_S_l2 = float(
            np.sqrt(K.integrate(np, (dS * dS).reshape(dS.shape[:2] + (-1,)).sum(-1),
                                grid.cell_weight))
        )
        rows.append(
            {
                "step": t,
                "energy_density": G * path.dtau,
                "bg_ratio": Gbar / G if G > 0 else np.inf,
                "min_rho": float(geom.rho.min()),
                "max_rho": float(geom.rho.max()),
                "min_sv": geom.min_singular_value,
                "grad_speed_l2": grad_speed,
                "g_linf": g_linf,
                "g_inv_linf": ginv_linf,
                "S_l4": S_l4,
                "gamma_l4": gamma_l4,
                "nablabar_S_l2": nablabar_S_l2,
                "sqrt_vol_start": float(
                    np.sqrt(induced_geometry(path.slices[t], cfg.immersion_floor).total_volume())
                ),
                "sqrt_vol_end": float(
                    np.sqrt(induced_geometry(path.slices[t + 1], cfg.immersion_floor).total_volume())
                ),
            }
        )
    return rows


def lipschitz_growth_constants(path: DiscretePath, cfg: MetricConfig) -> dict:
    """Fitted growth constants of log(1 + norm) against G-path-length.

    Monitored diagnostic: the theory bounds these quantities on metric balls
    with unquantified ball-dependent constants, so the fit is reported and
    never asserted.
    """
    rows = completeness_diagnostics(path, cfg)
    lengths = np.array([np.sqrt(max(r["energy_density"], 0.0) * path.dtau) for r in rows])
    cum = np.concatenate([[0.0], np.cumsum(lengths)])
    out = {}
    for key in ("g_linf", "S_l4", "gamma_l4"):
        series = np.array([rows[0][key]] + [r[key] for r in rows])
        logs = np.log1p(series)
        denom = np.maximum(cum, 1e-30)
        ratios = np.abs(logs - logs[0])[1:] / denom[1:]
        out[key] = float(ratios.max()) if len(ratios) else 0.0
    return out


def _grad_speed_norm(geom: InducedGeometry, fdot: TensorField) -> float:
    """L2(g) norm of the covariant derivative of the velocity field."""
    grid = geom.grid
    su, sv = grid.spacing
    dfd = K.cov_deriv(np, fdot.values, geom.gamma, (0, 0, 1), su, sv, grid.stencil_order)
    nsq = K.fiber_inner(np, dfd, dfd, geom.g, geom.g_inv, (0, 1, 1))
    return float(np.sqrt(K.integrate(np, nsq * geom.rho, grid.cell_weight)))


def _bg_lp(field: TensorField, p: float, grid: ParamGrid) -> float:
    nsq = background_norm_sq(field)
    return float(K.integrate(np, nsq ** (p / 2.0), grid.cell_weight) ** (1.0 / p))


# ---------------------------------------------------------------------------
# Quotient distance: alternate between path solves and warp descent.
# ---------------------------------------------------------------------------


@dataclass
class WarpField:
    """Periodic chart displacement (du, dv) per node; phi = id + displacement."""

    grid: ParamGrid
    displacement: np.ndarray  # (n_u, n_v, 2)
    interpolation_order: int = 3

    def __post_init__(self):
        expect = (self.grid.n_u, self.grid.n_v, 2)
        self.displacement = np.asarray(self.displacement, dtype=float)
        if self.displacement.shape != expect:
            raise TypeMismatch(f"displacement shape must be {expect}")

    @classmethod
    def identity(cls, grid: ParamGrid) -> "WarpField":
        return cls(grid, np.zeros((grid.n_u, grid.n_v, 2)))

    def jacobian_det(self) -> np.ndarray:
        su, sv = self.grid.spacing
        order = self.grid.stencil_order
        ddu = K.diff_axis(np, self.displacement[..., 0], 0, su, order)
        ddv = K.diff_axis(np, self.displacement[..., 0], 1, sv, order)
        deu = K.diff_axis(np, self.displacement[..., 1], 0, su, order)
        dev = K.diff_axis(np, self.displacement[..., 1], 1, sv, order)
        return (1.0 + ddu) * (1.0 + dev) - ddv * deu

    def orientation_ok(self) -> bool:
        return bool(np.all(self.jacobian_det() > 0))


def warp_apply(f: GridImmersion, warp: WarpField) -> GridImmersion:
    """Resample f at the warped nodes by periodic bicubic interpolation."""
    if f.grid != warp.grid:
        raise TypeMismatch("warp and immersion grids differ")
    if not np.any(warp.displacement):
        return GridImmersion(f.grid, f.d, f.positions.copy(), check=False)
    if not warp.orientation_ok():
        raise WarpDegenerate("warp Jacobian determinant not positive at nodes")
    grid = f.grid
    su, sv = grid.spacing
    iu = np.arange(grid.n_u)[:, None] + warp.displacement[..., 0] / su
    iv = np.arange(grid.n_v)[None, :] + warp.displacement[..., 1] / sv
    coords = np.stack([iu, iv])
    out = np.empty_like(f.positions)
    for c in range(f.d):
        out[..., c] = ndimage.map_coordinates(
            f.positions[..., c], coords, order=warp.interpolation_order,
            mode="grid-wrap",
        )
    return GridImmersion(grid, f.d, out, check=False)


def _last_interval_energy(
    prev_slice: np.ndarray, endpoint: GridImmersion, T: int, cfg: MetricConfig
) -> float:
    grid = endpoint.grid
    su, sv = grid.spacing
    mid = 0.5 * (prev_slice + endpoint.positions)
    if _min_sv_of(mid, grid) <= cfg.immersion_floor:
        return np.inf
    if _min_sv_of(endpoint.positions, grid) <= cfg.immersion_floor:
        return np.inf
    df = endpoint.positions - prev_slice
    val = K.metric_eval(
        np, mid, df, df, su, sv, grid.stencil_order,
        cfg.k, cfg.weight_exponent, cfg.included_orders,
    )
    return float(val * T)


def quotient_distance(
    f0: GridImmersion,
    f1: GridImmersion,
    T: int,
    cfg: MetricConfig,
    opts: SolveOptions | None = None,
) -> tuple[float, WarpField, DiscretePath]:
    """Estimate the shape-space distance by alternating minimization.

    (i) geodesic solve toward the warped endpoint, (ii) descent over the warp
    displacement holding the interior, accepting only energy decreases, so the
    final estimate never exceeds the identity-warp (parametrized) estimate.
    """
    opts = opts or SolveOptions()
    grid = f0.grid
    warp = WarpField.identity(grid)
    path = solve_geodesic_bvp(f0, f1, T, cfg, opts)
    best_energy = path.energy
    identity_energy = best_energy
    accepted_min_rho = [
        min(r["min_rho"] for r in completeness_diagnostics(path, cfg))
    ]
    status = "ok"
    if np.array_equal(f0.positions, f1.positions):
        path.diagnostics["quotient"] = {
            "identity_energy": identity_energy,
            "energy": best_energy,
            "rounds": 0,
            "status": status,
            "accepted_min_rho": accepted_min_rho,
        }
        return 0.0, warp, path

    rounds_done = 0
    for _ in range(opts.warp_rounds):
        prev = path.positions[-2]
        e_base = _last_interval_energy(prev, warp_apply(f1, warp), T, cfg)
        disp, e_new, warp_status = _warp_descent(
            prev, f1, warp.displacement, T, cfg, opts.warp_iters
        )
        rounds_done += 1
        if warp_status == "degenerate":
            status = "warp_degenerate"
            break
        if not e_new < e_base - 1e-14:
            break
        warp = WarpField(grid, disp)
        endpoint = warp_apply(f1, warp)
        candidate = solve_geodesic_bvp(
            f0, endpoint, T, cfg, opts, init=path.positions.copy()
        )
        if candidate.energy < best_energy:
            path = candidate
            best_energy = candidate.energy
            accepted_min_rho.append(
                min(r["min_rho"] for r in completeness_diagnostics(path, cfg))
            )
        else:
            break
    path.diagnostics["quotient"] = {
        "identity_energy": identity_energy,
        "energy": best_energy,
        "rounds": rounds_done,
        "status": status,
        "accepted_min_rho": accepted_min_rho,
    }
    return float(np.sqrt(max(best_energy, 0.0))), warp, path


def _warp_descent(prev_slice, f1, disp0, T, cfg, max_iters):
    """Gradient descent on the warp displacement DOF of the final interval."""
    grid = f1.grid
    eps = 1e-6 * TWO_PI

    def endpoint(disp):
        w = WarpField(grid, disp)
        if not w.orientation_ok():
            return None
        return warp_apply(f1, w)

    def energy(disp):
        ep = endpoint(disp)
        if ep is None:
            return np.inf
        return _last_interval_energy(prev_slice, ep, T, cfg)

    disp = disp0.copy()
    e = energy(disp)
    if not np.isfinite(e):
        return disp0, np.inf, "degenerate"
    for _ in range(max_iters):
        grad = np.zeros_like(disp)
        for idx in np.ndindex(disp.shape):
            orig = disp[idx]
            disp[idx] = orig + eps
            ep = energy(disp)
            disp[idx] = orig - eps
            em = energy(disp)
            disp[idx] = orig
            if not (np.isfinite(ep) and np.isfinite(em)):
                return disp, e, "degenerate"
            grad[idx] = (ep - em) / (2 * eps)
        gnorm = np.abs(grad).max()
        if gnorm < 1e-10:
            break
        step = 0.1 * TWO_PI / grid.n_u / max(gnorm, 1e-30)
        improved = False
        for _ in range(30):
            trial = disp - step * grad
            e_new = energy(trial)
            if np.isfinite(e_new) and e_new < e - 1e-15:
                disp, e = trial, e_new
                improved = True
                break
            step *= 0.5
        if not improved:
            break
    return disp, e, "ok"
