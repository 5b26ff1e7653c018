"""Backend-agnostic array kernels for the discrete geometry pipeline.

Every function takes the array namespace ``xp`` (numpy or jax.numpy) as its
first argument and works on raw ndarrays.  The domain modules wrap these with
typed objects and validation; the gradient engine differentiates the very same
code path, so production values and derivatives always refer to one discrete
computation.

Array layout conventions:
  immersion positions      (n_u, n_v, d)
  (i,j,m) tensor field     (n_u, n_v, [2]*i, [2]*j, [d]*m)
      tangent slots first, then cotangent slots, then ambient slots;
      covariant differentiation appends its new cotangent slot after the
      existing cotangent slots (position 2+i+j).
  metric g                 (n_u, n_v, 2, 2)       g[...,a,b]
  Christoffel gamma        (n_u, n_v, 2, 2, 2)    gamma[...,a,b,c] = G^a_{bc}
  metric partials dg       (n_u, n_v, 2, 2, 2)    dg[...,c,a,b] = d_c g_{ab}
"""

from __future__ import annotations

import string

# Antisymmetric central-difference weights: pairs (offset, weight) so that
# d f_i ~ sum_m w_m (f_{i+m} - f_{i-m}) / h.  The paired form subtracts equal
# values exactly, which makes derivatives of constants and all shift /
# translation equivariance properties hold bitwise.
STENCILS = {
    2: ((1, 0.5),),
    4: ((1, 8.0 / 12.0), (2, -1.0 / 12.0)),
    6: ((1, 45.0 / 60.0), (2, -9.0 / 60.0), (3, 1.0 / 60.0)),
}

_LETTERS = string.ascii_lowercase


def diff_axis(xp, vals, axis, spacing, order):
    """Periodic central difference along a grid axis (0 = u, 1 = v)."""
    acc = None
    for off, w in STENCILS[order]:
        pair = xp.roll(vals, -off, axis=axis) - xp.roll(vals, off, axis=axis)
        acc = w * pair if acc is None else acc + w * pair
    return acc / spacing


def partial_stack(xp, vals, su, sv, order, pos):
    """Stack (d_u vals, d_v vals) as a new axis inserted at ``pos``."""
    du = diff_axis(xp, vals, 0, su, order)
    dv = diff_axis(xp, vals, 1, sv, order)
    return xp.moveaxis(xp.stack([du, dv], axis=-1), -1, pos)


def jacobian(xp, f, su, sv, order):
    """Chart partials of an immersion: Df[...,a,k] = d_a f^k."""
    return xp.stack(
        [diff_axis(xp, f, 0, su, order), diff_axis(xp, f, 1, sv, order)], axis=2
    )


def metric_from_jacobian(xp, Df):
    return xp.einsum("uvak,uvbk->uvab", Df, Df)


def det2(xp, g):
    return g[..., 0, 0] * g[..., 1, 1] - g[..., 0, 1] * g[..., 1, 0]


def inv2(xp, g, det):
    row0 = xp.stack([g[..., 1, 1], -g[..., 0, 1]], axis=-1)
    row1 = xp.stack([-g[..., 1, 0], g[..., 0, 0]], axis=-1)
    return xp.stack([row0, row1], axis=-2) / det[..., None, None]


def min_singular_value_sq(xp, g, det):
    """Smaller eigenvalue of g = smallest squared singular value of Df."""
    tr = g[..., 0, 0] + g[..., 1, 1]
    disc = xp.sqrt(xp.maximum(tr * tr - 4.0 * det, 0.0))
    return 2.0 * det / (tr + disc)


def metric_partials(xp, g, su, sv, order):
    """dg[...,c,a,b] = d_c g_{ab}."""
    return xp.stack(
        [diff_axis(xp, g, 0, su, order), diff_axis(xp, g, 1, sv, order)], axis=2
    )


def christoffel_from_parts(xp, g_inv, dg):
    """G^a_{bc} = 1/2 g^{ad} (d_b g_{dc} + d_c g_{db} - d_d g_{bc}).

    Linear in both arguments, so the exact footpoint variation is obtained by
    the sum of (dt g^{-1}, dg) and (g^{-1}, dt dg) contributions.
    """
    comb = (
        xp.einsum("uvbdc->uvdbc", dg)
        + xp.einsum("uvcdb->uvdbc", dg)
        - xp.einsum("uvdbc->uvdbc", dg)
    )
    return 0.5 * xp.einsum("uvad,uvdbc->uvabc", g_inv, comb)


def geometry_parts(xp, f, su, sv, order):
    """Full induced geometry of an immersion as a dict of raw arrays."""
    Df = jacobian(xp, f, su, sv, order)
    g = metric_from_jacobian(xp, Df)
    det = det2(xp, g)
    g_inv = inv2(xp, g, det)
    rho = xp.sqrt(det)
    dg = metric_partials(xp, g, su, sv, order)
    gamma = christoffel_from_parts(xp, g_inv, dg)
    # ddf[...,a,b,k] = d_a d_b f^k ; exact symmetry in (a,b) since the two
    # stencils commute.
    ddf = xp.stack(
        [diff_axis(xp, Df, 0, su, order), diff_axis(xp, Df, 1, sv, order)], axis=2
    )
    S = ddf - xp.einsum("uvcab,uvck->uvabk", gamma, Df)
    H = xp.einsum("uvab,uvabk->uvk", g_inv, S)
    return {
        "Df": Df,
        "g": g,
        "det": det,
        "g_inv": g_inv,
        "rho": rho,
        "dg": dg,
        "gamma": gamma,
        "ddf": ddf,
        "S": S,
        "H": H,
    }


def _slot_letters(i, j, m):
    n = i + j + m
    return _LETTERS[:n]


def gamma_corrections(xp, vals, gamma, itype):
    """Connection correction terms of the covariant derivative.

    Returns the sum over slots of +Gamma on tangent and -Gamma on cotangent
    slots, with the new derivative index appended as the LAST axis.  Linear in
    ``gamma``, so calling it with dt(Gamma) yields the exact variation term.
    """
    i, j, m = itype
    slots = _slot_letters(i, j, m)
    out = None
    for n in range(i + j):
        tangent = n < i
        repl = list(slots)
        repl[n] = "y"
        src = "uv" + "".join(repl)
        dst = "uv" + slots + "z"
        if tangent:
            term = xp.einsum(f"uv{slots[n]}zy,{src}->{dst}", gamma, vals)
        else:
            term = -xp.einsum(f"uvyz{slots[n]},{src}->{dst}", gamma, vals)
        out = term if out is None else out + term
    return out


def cov_deriv(xp, vals, gamma, itype, su, sv, order):
    """Covariant derivative: (i,j,m) -> (i,j+1,m), new slot after cotangents."""
    i, j, m = itype
    pos = 2 + i + j
    out = partial_stack(xp, vals, su, sv, order, pos)
    if i + j:
        corr = gamma_corrections(xp, vals, gamma, itype)
        out = out + xp.moveaxis(corr, -1, pos)
    return out


def contract_slot(xp, vals, mat, axis):
    """Contract one slot axis with a per-node 2x2 matrix (g or g_inv)."""
    moved = xp.moveaxis(vals, axis, -1)
    res = xp.einsum("uvab,uv...b->uv...a", mat, moved)
    return xp.moveaxis(res, -1, axis)


def fiber_inner(xp, A, B, g, g_inv, itype):
    """Pointwise fiber inner product g(A, B) for two (i,j,m) fields.

    Tangent slots contract with g, cotangent slots with g^{-1}, ambient slots
    with the Euclidean product.
    """
    i, j, m = itype
    Bt = B
    for n in range(i):
        Bt = contract_slot(xp, Bt, g, 2 + n)
    for n in range(j):
        Bt = contract_slot(xp, Bt, g_inv, 2 + i + n)
    prod = A * Bt
    nslots = i + j + m
    shape = prod.shape[:2] + (-1,)
    return prod.reshape(shape).sum(axis=-1) if nslots else prod


def fiber_inner_variation(xp, A, B, g, g_inv, dt_g, dt_g_inv, itype):
    """Exact footpoint variation of fiber_inner with A, B held fixed.

    One metric factor at a time is replaced by its variation.
    """
    i, j, m = itype
    out = None
    for n in range(i + j):
        Bt = B
        for t in range(i):
            mat = dt_g if t == n else g
            Bt = contract_slot(xp, Bt, mat, 2 + t)
        for c in range(j):
            mat = dt_g_inv if i + c == n else g_inv
            Bt = contract_slot(xp, Bt, mat, 2 + i + c)
        prod = A * Bt
        term = prod.reshape(prod.shape[:2] + (-1,)).sum(axis=-1)
        out = term if out is None else out + term
    if out is None:
        zeros = xp.zeros(A.shape[:2])
        return zeros
    return out


def integrate(xp, scalars, weight):
    """Periodic trapezoid rule: weight = spacing_u * spacing_v."""
    return scalars.sum() * weight


def curvature_weight(xp, H, exponent):
    hsq = (H * H).sum(axis=-1)
    if exponent == 0:
        return xp.ones_like(hsq)
    half = exponent / 2.0
    if half == int(half):
        return hsq ** int(half)
    return hsq**half


def metric_terms(xp, parts, h1, h2, k, included_orders, su, sv, order):
    """Per-node integrand pieces of the curvature-weighted order-k metric.

    Returns (t0, weighted_terms, top_term) where t0 is the Euclidean product
    h1.h2, weighted_terms the list of fiber inner products of included
    intermediate orders, and top_term the order-k fiber inner product.
    """
    gamma, g, g_inv = parts["gamma"], parts["g"], parts["g_inv"]
    t0 = (h1 * h2).sum(axis=-1)
    a, b = h1, h2
    weighted, top = [], None
    for level in range(1, k + 1):
        itype = (0, level - 1, 1)
        a = cov_deriv(xp, a, gamma, itype, su, sv, order)
        b = cov_deriv(xp, b, gamma, itype, su, sv, order)
        if level in included_orders:
            weighted.append(fiber_inner(xp, a, b, g, g_inv, (0, level, 1)))
        if level == k:
            top = fiber_inner(xp, a, b, g, g_inv, (0, level, 1))
    return t0, weighted, top


def metric_eval(xp, f, h1, h2, su, sv, order, k, weight_exp, included_orders):
    """G^k_f(h1, h2) for raw position / field arrays."""
    parts = geometry_parts(xp, f, su, sv, order)
    return metric_eval_parts(
        xp, parts, h1, h2, su, sv, order, k, weight_exp, included_orders
    )


def metric_eval_parts(xp, parts, h1, h2, su, sv, order, k, weight_exp, included):
    t0, weighted, top = metric_terms(xp, parts, h1, h2, k, included, su, sv, order)
    w = curvature_weight(xp, parts["H"], weight_exp)
    integrand = t0 + top
    for term in weighted:
        integrand = integrand + w * term
    return integrate(xp, integrand * parts["rho"], su * sv)


def path_energy(xp, positions, su, sv, order, k, weight_exp, included_orders):
    """Discrete path energy: sum_t G_{mid}(df_t, df_t) / dtau, dtau = 1/T."""
    T = positions.shape[0] - 1
    total = 0.0
    for t in range(T):
        mid = 0.5 * (positions[t] + positions[t + 1])
        df = positions[t + 1] - positions[t]
        total = total + metric_eval(
            xp, mid, df, df, su, sv, order, k, weight_exp, included_orders
        )
    return total * T


def background_metric_eval(xp, h1, h2, k, su, sv, order):
    """Flat background H^k inner product: L2 term plus k-fold chart partials."""
    t0 = (h1 * h2).sum(axis=-1)
    a, b = h1, h2
    for level in range(k):
        pos = 2 + level
        a = partial_stack(xp, a, su, sv, order, pos)
        b = partial_stack(xp, b, su, sv, order, pos)
    prod = a * b
    tk = prod.reshape(prod.shape[:2] + (-1,)).sum(axis=-1)
    return integrate(xp, t0 + tk, su * sv)
