"""Empirical ratio estimation for the intrinsic Sobolev-type inequalities.

Each ratio function returns left-side / right-side of one inequality for a
concrete field on a concrete surface; sampled maxima over seeded ensembles
give lower bounds on the (non-constructive) constants.  All ratios are
invariant under h -> lambda h, and the basic one is invariant under surface
scaling as well, matching the immersion-independence of the constants.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import BadExponents, DegenerateSample
from .geometry import InducedGeometry, induced_geometry, iterated_covariant_derivative
from .paramgrid import GridImmersion, TensorField
from .sobolev_metric import lp_norm
from .surfaces import trig_polynomial

DENOM_FLOOR = 1e-30

INEQUALITY_IDS = ("mss", "l4h1", "mult_embed", "hamilton", "linf_embed", "interp")

# default probe exponents per inequality
DEFAULT_PROBES = {
    "mss": {},
    "l4h1": {},
    "mult_embed": {"p": 4.0, "m": 4.0, "alpha": 0.5},
    "hamilton": {"p": 2.0, "q": 2.0, "r": 1.0},
    "linf_embed": {"q": 2.0},
    "interp": {"q": 1, "q_prime": 2},
}


def _weighted_lp(geom: InducedGeometry, h: TensorField, p, weight: np.ndarray) -> float:
    """L^p(g) norm of weight * h for a per-node scalar weight."""
    vals = h.values * weight.reshape(weight.shape + (1,) * (h.values.ndim - 2))
    return lp_norm(geom, TensorField(h.grid, h.itype, vals, d=h.d), p)


def _h_norm(geom: InducedGeometry) -> np.ndarray:
    return np.sqrt((geom.H * geom.H).sum(axis=-1))


def _guard(numerator: float, denominator: float) -> float:
    if numerator == 0.0:
        return 0.0
    if denominator <= DENOM_FLOOR:
        raise DegenerateSample(f"denominator {denominator:.3e} below floor")
    return numerator / denominator


def mss_ratio(geom: InducedGeometry, h: TensorField, grad: TensorField | None = None) -> float:
    """|h|_{L2} / (|grad h|_{L1} + | |H| h |_{L1})."""
    grad = grad if grad is not None else iterated_covariant_derivative(geom, h, 1)
    num = lp_norm(geom, h, 2)
    den = lp_norm(geom, grad, 1) + _weighted_lp(geom, h, 1, _h_norm(geom))
    return _guard(num, den)


def l4h1_ratio(geom: InducedGeometry, h: TensorField, grad: TensorField | None = None) -> float:
    """|h|_{L4} / (|h|_{L2} + |sqrt|H| h|_{L2} + |grad h|_{L2})."""
    grad = grad if grad is not None else iterated_covariant_derivative(geom, h, 1)
    num = lp_norm(geom, h, 4)
    den = (
        lp_norm(geom, h, 2)
        + _weighted_lp(geom, h, 2, np.sqrt(_h_norm(geom)))
        + lp_norm(geom, grad, 2)
    )
    return _guard(num, den)


def mult_embed_ratio(
    geom: InducedGeometry,
    h: TensorField,
    p: float,
    m: float,
    alpha: float,
    grad: TensorField | None = None,
) -> float:
    """|h|_{Linf} / (|h|_{Lm}^{1-a} (|grad h|_{Lp} + ||H| h|_{Lp})^a)."""
    if not p > 2:
        raise BadExponents(f"multiplicative embedding needs p > 2, got {p}")
    if not 0 < alpha < 1:
        raise BadExponents(f"alpha must be in (0,1), got {alpha}")
    relation = (0.5 - 1.0 / p) * m + 1.0
    if abs(1.0 / alpha - relation) > 1e-12:
        raise BadExponents(
            f"exponent relation violated: 1/alpha = {1.0 / alpha}, "
            f"(1/2 - 1/p) m + 1 = {relation}"
        )
    grad = grad if grad is not None else iterated_covariant_derivative(geom, h, 1)
    num = lp_norm(geom, h, np.inf)
    den = lp_norm(geom, h, m) ** (1.0 - alpha) * (
        lp_norm(geom, grad, p) + _weighted_lp(geom, h, p, _h_norm(geom))
    ) ** alpha
    return _guard(num, den)


def hamilton_ratio(
    geom: InducedGeometry,
    h: TensorField,
    p: float,
    q: float,
    r: float,
    grad: TensorField | None = None,
    grad2: TensorField | None = None,
) -> float:
    """|grad h|^2_{L2r} / (|grad^2 h|_{Lp} |h|_{Lq})."""
    if abs(1.0 / p + 1.0 / q - 1.0 / r) > 1e-12:
        raise BadExponents(
            f"interpolation relation violated: 1/p + 1/q = {1.0/p + 1.0/q}, 1/r = {1.0/r}"
        )
    grad = grad if grad is not None else iterated_covariant_derivative(geom, h, 1)
    grad2 = grad2 if grad2 is not None else iterated_covariant_derivative(geom, grad, 1)
    num = lp_norm(geom, grad, 2 * r) ** 2
    den = lp_norm(geom, grad2, p) * lp_norm(geom, h, q)
    return _guard(num, den)


def linf_embed_ratio(
    geom: InducedGeometry,
    h: TensorField,
    q: float,
    grad2: TensorField | None = None,
) -> float:
    """|h|_{Linf} / (Vol^{(q-1)/q} (|grad^2 h|_{Lq} + ||H|^2 h|_{Lq}))."""
    if not q > 1:
        raise BadExponents(f"embedding needs q > 1, got {q}")
    grad2 = grad2 if grad2 is not None else iterated_covariant_derivative(geom, h, 2)
    vol = geom.total_volume()
    num = lp_norm(geom, h, np.inf)
    den = vol ** ((q - 1.0) / q) * (
        lp_norm(geom, grad2, q) + _weighted_lp(geom, h, q, _h_norm(geom) ** 2)
    )
    return _guard(num, den)


def interp_ratio(
    geom: InducedGeometry,
    h: TensorField,
    q: int,
    q_prime: int,
    max_order: int = 4,
) -> float:
    """|h|^2 in the homogeneous H^q seminorm over (L2 + homogeneous H^q')."""
    if not 0 <= q <= q_prime:
        raise BadExponents(f"needs 0 <= q <= q_prime, got {q}, {q_prime}")
    dq = iterated_covariant_derivative(geom, h, q, max_order=max_order)
    dqp = iterated_covariant_derivative(geom, h, q_prime, max_order=max_order)
    num = lp_norm(geom, dq, 2) ** 2
    den = lp_norm(geom, h, 2) ** 2 + lp_norm(geom, dqp, 2) ** 2
    return _guard(num, den)


def evaluate_ratio(
    inequality_id: str,
    geom: InducedGeometry,
    h: TensorField,
    probe: dict | None = None,
) -> float:
    probe = dict(DEFAULT_PROBES[inequality_id], **(probe or {}))
    if inequality_id == "mss":
        return mss_ratio(geom, h)
    if inequality_id == "l4h1":
        return l4h1_ratio(geom, h)
    if inequality_id == "mult_embed":
        return mult_embed_ratio(geom, h, probe["p"], probe["m"], probe["alpha"])
    if inequality_id == "hamilton":
        return hamilton_ratio(geom, h, probe["p"], probe["q"], probe["r"])
    if inequality_id == "linf_embed":
        return linf_embed_ratio(geom, h, probe["q"])
    if inequality_id == "interp":
        return interp_ratio(geom, h, probe["q"], probe["q_prime"])
    raise ValueError(f"unknown inequality id {inequality_id!r}")


@dataclass
class RatioReport:
    inequality_id: str
    surface_id: str
    sample_count: int
    max_ratio: float
    quantiles: dict
    grid_sizes: list
    ratio_drift: float
    per_size: dict = field(default_factory=dict)  # size -> (max, q50, q90)


def sample_coefficients(rng, max_freq: int, count: int) -> list[np.ndarray]:
    """Draw the spectral coefficients for `count` scalar sample fields."""
    k = 2 * max_freq + 1
    return [rng.standard_normal((2, k, k)) for _ in range(count)]


def field_from_coefficients(grid, coeffs: np.ndarray, max_freq: int) -> TensorField:
    """Evaluate one coefficient draw on a grid (same continuum field any size)."""
    k = max_freq
    freqs = np.arange(-k, k + 1)
    u, v = grid.nodes()
    c = coeffs[0] - 1j * coeffs[1]
    eu = np.exp(1j * np.outer(freqs, u[:, 0]))
    ev = np.exp(1j * np.outer(freqs, v[0, :]))
    vals = np.real(np.einsum("pq,pu,qv->uv", c, eu, ev))
    return TensorField.scalar(grid, vals)


def worker_count() -> int:
    raw = os.environ.get("IMMERSA_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def ensemble_scan(
    surface_family,
    inequality_id: str,
    sizes: list[int],
    samples: int = 200,
    seed: int = 0,
    probe: dict | None = None,
    surface_id: str | None = None,
) -> RatioReport:
    """Deterministic ratio scan of one inequality over grid sizes.

    ``surface_family`` maps a grid size to a GridImmersion.  The sampler's
    frequency cap is min(sizes)//4 so every size evaluates the same continuum
    fields and the drift measures refinement stability alone.  Reduction order
    is fixed by sample index, so fixed seeds reproduce results bitwise even
    with IMMERSA_THREADS > 1.
    """
    if samples < 1:
        raise ValueError("need at least one sample")
    sizes = list(sizes)
    max_freq = max(1, min(sizes) // 4)
    rng = np.random.default_rng(seed)
    coeffs = sample_coefficients(rng, max_freq, samples)
    per_size = {}
    all_ratios = []
    for n in sizes:
        f = surface_family(n)
        geom = induced_geometry(f)

        def one(c):
            h = field_from_coefficients(f.grid, c, max_freq)
            return evaluate_ratio(inequality_id, geom, h, probe)

        workers = worker_count()
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as ex:
                ratios = list(ex.map(one, coeffs))
        else:
            ratios = [one(c) for c in coeffs]
        ratios = np.array(ratios)
        per_size[n] = {
            "max": float(ratios.max()),
            "q50": float(np.quantile(ratios, 0.5)),
            "q90": float(np.quantile(ratios, 0.9)),
        }
        all_ratios.append(ratios)
    maxima = [per_size[n]["max"] for n in sizes]
    drift = 0.0
    for a, b in zip(maxima, maxima[1:]):
        drift = max(drift, abs(b - a) / a if a > 0 else np.inf)
    pooled = np.concatenate(all_ratios)
    return RatioReport(
        inequality_id=inequality_id,
        surface_id=surface_id or getattr(surface_family, "__name__", "surface"),
        sample_count=samples,
        max_ratio=float(pooled.max()),
        quantiles={
            0.5: float(np.quantile(pooled, 0.5)),
            0.9: float(np.quantile(pooled, 0.9)),
            1.0: float(pooled.max()),
        },
        grid_sizes=sizes,
        ratio_drift=float(drift),
        per_size=per_size,
    )
