"""Analytic energy gradients by algorithmic differentiation of the kernels.

The energy evaluated here is the same kernel the production path uses, traced
with jax.numpy instead of numpy, so its gradient is the exact derivative of
the discrete functional (to rounding).  The finite-difference engine and the
assembled variation formulas serve as independent oracles for it.

The per-interval metric evaluation is vmapped over time steps, which keeps the
traced graph size independent of T and the jit cost low.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

import jax

jax.config.update("jax_enable_x64", True)

import jax.numpy as jnp  # noqa: E402

from . import _kernels as K  # noqa: E402


def _interval_sum(su, sv, order, k, weight_exp, included):
    def one(mid, diff):
        return K.metric_eval(jnp, mid, diff, diff, su, sv, order, k, weight_exp, included)

    batched = jax.vmap(one)

    def total(pos):
        T = pos.shape[0] - 1
        mids = 0.5 * (pos[:-1] + pos[1:])
        diffs = pos[1:] - pos[:-1]
        return batched(mids, diffs).sum() * T

    return total


@lru_cache(maxsize=32)
def _compiled(su, sv, order, k, weight_exp, included):
    total = _interval_sum(su, sv, order, k, weight_exp, included)

    def energy(interior, f0, fT):
        pos = jnp.concatenate([f0[None], interior, fT[None]], axis=0)
        return total(pos)

    return {
        "energy": jax.jit(total),
        "grad": jax.jit(jax.grad(energy)),
        "value_and_grad": jax.jit(jax.value_and_grad(energy)),
    }


def _key(grid, cfg):
    su, sv = grid.spacing
    return (
        su,
        sv,
        grid.stencil_order,
        cfg.k,
        cfg.weight_exponent,
        tuple(sorted(cfg.included_orders)),
    )


def path_energy_gradient(positions: np.ndarray, grid, cfg) -> np.ndarray:
    """Gradient of the discrete path energy over the interior slices."""
    fns = _compiled(*_key(grid, cfg))
    T = positions.shape[0] - 1
    out = fns["grad"](
        jnp.asarray(positions[1:T]),
        jnp.asarray(positions[0]),
        jnp.asarray(positions[T]),
    )
    return np.asarray(out)


def path_energy_value_and_gradient(positions: np.ndarray, grid, cfg):
    fns = _compiled(*_key(grid, cfg))
    T = positions.shape[0] - 1
    val, g = fns["value_and_grad"](
        jnp.asarray(positions[1:T]),
        jnp.asarray(positions[0]),
        jnp.asarray(positions[T]),
    )
    return float(val), np.asarray(g)


def path_energy_value(positions: np.ndarray, grid, cfg) -> float:
    """Energy via the jitted jax path; agrees with the numpy kernel to rounding."""
    fns = _compiled(*_key(grid, cfg))
    return float(fns["energy"](jnp.asarray(positions)))
