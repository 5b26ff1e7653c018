"""Finite-truncation testbed on sequences bounded away from zero.

The open set is {x : min_i |x_i| > 0} inside R^n, carrying the weighted metric
G_x(h,h) = sum_i (1 + 1/x_i^2) h_i^2.  The flat metric is dominated with
constant one, the componentwise log map is 1-Lipschitz, and the geodesic
problem decouples into independent 1D problems whose distance is the
arc-length primitive of sqrt(1 + 1/z^2).  Everything here is exact in finite
dimensions; boundary-value solves are restricted to the positive orthant.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.linalg import solveh_banded

from .errors import DomainViolation
from .optim import lbfgs


@dataclass
class SeqPoint:
    x: np.ndarray
    n: int = 0

    def __post_init__(self):
        self.x = np.atleast_1d(np.asarray(self.x, dtype=float))
        if self.n == 0:
            self.n = self.x.shape[0]
        if self.x.shape != (self.n,):
            raise ValueError(f"expected {self.n} coordinates, got {self.x.shape}")
        if self.n < 1:
            raise ValueError("dimension must be >= 1")
        if np.min(np.abs(self.x)) <= 0.0:
            raise DomainViolation("sequence point has a zero coordinate")


def _coords(x) -> np.ndarray:
    arr = x.x if isinstance(x, SeqPoint) else np.atleast_1d(np.asarray(x, dtype=float))
    if np.min(np.abs(arr)) <= 0.0:
        raise DomainViolation("coordinate hit zero")
    return arr


def seq_metric(x, h) -> float:
    """G_x(h,h) = sum_i (1 + 1/x_i^2) h_i^2; dominates the flat metric."""
    xa = _coords(x)
    ha = np.atleast_1d(np.asarray(h, dtype=float))
    return float(((1.0 + 1.0 / xa**2) * ha**2).sum())


def seq_F(x) -> np.ndarray:
    """Componentwise log of absolute values; 1-Lipschitz for the metric."""
    return np.log(np.abs(_coords(x)))


def seq_path_energy(path: np.ndarray, T: int | None = None) -> float:
    """Midpoint-rule energy of a discrete path, rows = time slices.

    Separable: equals the sum of the per-coordinate 1D energies.
    """
    arr = np.asarray(path, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    steps = arr.shape[0] - 1
    if T is None:
        T = steps
    if steps != T:
        raise ValueError(f"path has {steps} steps, expected T={T}")
    mid = 0.5 * (arr[:-1] + arr[1:])
    if np.min(np.abs(mid)) <= 0.0:
        raise DomainViolation("a path midpoint hit zero")
    diff = arr[1:] - arr[:-1]
    return float((((1.0 + 1.0 / mid**2) * diff**2).sum()) * T)


def seq_path_length(path: np.ndarray) -> float:
    arr = np.asarray(path, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    mid = 0.5 * (arr[:-1] + arr[1:])
    if np.min(np.abs(mid)) <= 0.0:
        raise DomainViolation("a path midpoint hit zero")
    diff = arr[1:] - arr[:-1]
    per_step = np.sqrt(((1.0 + 1.0 / mid**2) * diff**2).sum(axis=1))
    return float(per_step.sum())


def seq_geodesic_1d(a: float, b: float) -> float:
    """Exact 1D distance |Phi(b) - Phi(a)| with Phi' = sqrt(1 + 1/z^2),
    evaluated by adaptive quadrature."""
    if a <= 0 or b <= 0:
        raise DomainViolation("1D distance needs positive endpoints")
    if a == b:
        return 0.0
    lo, hi = min(a, b), max(a, b)
    val, _ = quad(lambda z: np.sqrt(1.0 + 1.0 / (z * z)), lo, hi, epsabs=1e-13, epsrel=1e-13)
    return float(val)


def seq_geodesic_bvp(x0, x1, T: int, grad_tol: float = 1e-10, max_iters: int = 2000):
    """Minimize the discrete energy per coordinate (the problems decouple).

    Returns the (T+1, n) path; DomainViolation during the line search is the
    open-set guard and triggers backtracking inside the optimizer.
    """
    a = _coords(x0)
    b = _coords(x1)
    if a.shape != b.shape:
        raise ValueError("endpoint dimensions differ")
    if np.any(a < 0) or np.any(b < 0):
        raise DomainViolation("boundary-value solves are restricted to the positive orthant")
    if T < 2:
        raise ValueError("T must be >= 2")
    n = a.shape[0]
    taus = np.linspace(0.0, 1.0, T + 1)
    path = np.empty((T + 1, n))
    for i in range(n):
        path[:, i] = _solve_1d(a[i], b[i], taus, T, grad_tol, max_iters)
    return path


def _solve_1d(a, b, taus, T, grad_tol, max_iters):
    if a == b:
        return np.full(T + 1, a)

    def full(z):
        return np.concatenate([[a], z, [b]])

    def fun(z):
        return seq_path_energy(full(z), T)

    def grad(z):
        p = full(z)
        mid = 0.5 * (p[:-1] + p[1:])
        diff = p[1:] - p[:-1]
        w = 1.0 + 1.0 / mid**2
        dw = -2.0 / mid**3  # d w / d mid
        g = np.zeros(T + 1)
        # interval t contributes w_t diff_t^2; d/dp_t and d/dp_{t+1}
        g[:-1] += (-2.0 * w * diff + 0.5 * dw * diff**2) * T
        g[1:] += (2.0 * w * diff + 0.5 * dw * diff**2) * T
        return g[1:-1]

    def feasible(z):
        p = full(z)
        mid = 0.5 * (p[:-1] + p[1:])
        return bool(np.all(p > 0) and np.all(mid > 0))

    z0 = (1 - taus[1:-1]) * a + taus[1:-1] * b
    # initial Hessian: second-difference operator of the quadratic model, so
    # the T^2 conditioning of the time discretization never enters L-BFGS
    w_bar = float(np.mean(1.0 + 1.0 / (0.5 * (z0[0] + z0[-1])) ** 2))
    bands = np.ones((2, T - 1))
    bands[0, :] = -1.0
    bands[1, :] = 2.0
    bands *= 2.0 * T * w_bar
    bands[0, 0] = 0.0

    def h0(v):
        return solveh_banded(bands, v)

    res = lbfgs(
        z0, fun, grad, feasible=feasible, max_iters=max_iters,
        grad_tol=grad_tol, h0_apply=h0,
    )
    return full(res.x)
