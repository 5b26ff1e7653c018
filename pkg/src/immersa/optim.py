"""Limited-memory quasi-Newton minimizer with Armijo backtracking.

Shared by the geodesic boundary-value solver, the warp descent and the
sequence-space solver.  Feasibility is enforced inside the line search: a
trial point outside the admissible open set is rejected and the step halved,
so accepted iterates always satisfy the guard and the energy decreases
monotonically by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

ARMIJO_C1 = 1e-4
MAX_BACKTRACKS = 60


@dataclass
class OptimResult:
    x: np.ndarray
    fun: float
    grad_sup: float
    iterations: int
    converged: bool
    status: str
    history: list = field(default_factory=list)  # (iter, fun, grad_sup, step)


def lbfgs(
    x0: np.ndarray,
    fun: Callable[[np.ndarray], float],
    grad: Callable[[np.ndarray], np.ndarray],
    feasible: Callable[[np.ndarray], bool] | None = None,
    max_iters: int = 500,
    grad_tol: float = 1e-6,
    memory: int = 10,
    h0_apply: Callable[[np.ndarray], np.ndarray] | None = None,
) -> OptimResult:
    x = np.asarray(x0, dtype=float).copy()
    if feasible is not None and not feasible(x):
        raise ValueError("infeasible starting point")
    f = float(fun(x))
    g = np.asarray(grad(x))
    history: list[tuple[int, float, float, float]] = []
    s_list: list[np.ndarray] = []
    y_list: list[np.ndarray] = []
    rho_list: list[float] = []
    status = "max_iters"
    it = 0
    gsup = float(np.abs(g).max()) if g.size else 0.0
    history.append((0, f, gsup, 0.0))
    while it < max_iters:
        gsup = float(np.abs(g).max())
        if gsup <= grad_tol:
            status = "converged"
            break
        d = -_two_loop(g, s_list, y_list, rho_list, h0_apply)
        slope = float((g * d).sum())
        if slope >= 0:
            # quasi-Newton direction lost descent; fall back to steepest descent
            d = -g
            slope = -float((g * g).sum())
        step = 1.0 if (s_list or h0_apply is not None) else min(1.0, 1.0 / max(gsup, 1e-12))
        accepted = False
        for _ in range(MAX_BACKTRACKS):
            x_new = x + step * d
            if feasible is None or feasible(x_new):
                f_new = float(fun(x_new))
                if np.isfinite(f_new) and f_new <= f + ARMIJO_C1 * step * slope:
                    accepted = True
                    break
            step *= 0.5
        if not accepted:
            status = "line_search_failed"
            break
        g_new = np.asarray(grad(x_new))
        s = x_new - x
        y = g_new - g
        sy = float((s * y).sum())
        if sy > 1e-12 * float(np.sqrt((s * s).sum() * (y * y).sum()) + 1e-300):
            s_list.append(s)
            y_list.append(y)
            rho_list.append(1.0 / sy)
            if len(s_list) > memory:
                s_list.pop(0)
                y_list.pop(0)
                rho_list.pop(0)
        # else: curvature condition failed, skip the pair
        x, f, g = x_new, f_new, g_new
        it += 1
        history.append((it, f, float(np.abs(g).max()), step))
    gsup = float(np.abs(g).max()) if g.size else 0.0
    if gsup <= grad_tol:
        status = "converged"
    return OptimResult(
        x=x,
        fun=f,
        grad_sup=gsup,
        iterations=it,
        converged=(status == "converged"),
        status=status,
        history=history,
    )


def _two_loop(g, s_list, y_list, rho_list, h0_apply=None):
    q = g.copy()
    alphas = []
    for s, y, r in zip(reversed(s_list), reversed(y_list), reversed(rho_list)):
        a = r * float((s * q).sum())
        alphas.append(a)
        q -= a * y
    if h0_apply is not None:
        q = h0_apply(q)
    elif s_list:
        s, y = s_list[-1], y_list[-1]
        gamma = float((s * y).sum()) / max(float((y * y).sum()), 1e-300)
        q *= gamma
    for (s, y, r), a in zip(zip(s_list, y_list, rho_list), reversed(alphas)):
        b = r * float((y * q).sum())
        q += (a - b) * s
    return q
