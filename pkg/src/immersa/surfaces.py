"""Deterministic test-surface generators for immersed tori."""

from __future__ import annotations

import re

import numpy as np

from .errors import BadSpec
from .paramgrid import GridImmersion, ParamGrid


def _grid(n: int, stencil_order: int) -> ParamGrid:
    return ParamGrid(int(n), int(n), stencil_order=stencil_order)


def clifford(n: int, stencil_order: int = 4) -> GridImmersion:
    """Flat torus (cos u, sin u, cos v, sin v) in R^4; induced metric is the
    identity and |H| = sqrt(2) everywhere."""
    grid = _grid(n, stencil_order)
    u, v = grid.nodes()
    pos = np.stack([np.cos(u), np.sin(u), np.cos(v), np.sin(v)], axis=-1)
    return GridImmersion(grid, 4, pos)


def round_torus(n: int, R: float = 2.0, r: float = 1.0, stencil_order: int = 4) -> GridImmersion:
    """Torus of revolution in R^3 with major radius R and tube radius r < R."""
    if not r < R:
        raise BadSpec(f"round torus needs r < R, got R={R}, r={r}")
    if min(R, r) <= 0:
        raise BadSpec("torus radii must be positive")
    grid = _grid(n, stencil_order)
    u, v = grid.nodes()
    w = R + r * np.cos(v)
    pos = np.stack([w * np.cos(u), w * np.sin(u), r * np.sin(v)], axis=-1)
    return GridImmersion(grid, 3, pos)


def bumpy_torus(
    n: int,
    R: float = 2.0,
    r: float = 1.0,
    amplitude: float = 0.1,
    freq: int = 3,
    seed: int = 0,
    stencil_order: int = 4,
) -> GridImmersion:
    """Round torus with a seeded band-limited radial bump along the tube normal.

    The bump spectrum depends only on (freq, seed), so different grid sizes
    sample the same continuum surface; refinement studies rely on this.
    """
    if not r < R:
        raise BadSpec(f"bumpy torus needs r < R, got R={R}, r={r}")
    if amplitude < 0 or freq < 1:
        raise BadSpec("bumpy torus needs amplitude >= 0 and freq >= 1")
    grid = _grid(n, stencil_order)
    u, v = grid.nodes()
    bump = trig_polynomial(u, v, freq, np.random.default_rng(seed))
    scale = np.max(np.abs(bump))
    if scale > 0:
        bump = bump / scale
    w = R + (r + amplitude * bump) * np.cos(v)
    pos = np.stack([w * np.cos(u), w * np.sin(u), (r + amplitude * bump) * np.sin(v)], axis=-1)
    return GridImmersion(grid, 3, pos)


def scaled(inner: GridImmersion, lam: float) -> GridImmersion:
    if lam == 1.0:
        return GridImmersion(inner.grid, inner.d, inner.positions.copy(), check=False)
    if lam <= 0:
        raise BadSpec("scale factor must be positive")
    return inner.scaled(lam)


def trig_polynomial(u, v, max_freq: int, rng) -> np.ndarray:
    """Band-limited random trigonometric polynomial with unit-normal coefficients.

    Frequencies (p, q) run over |p|, |q| <= max_freq; cosine and sine
    coefficients are iid standard normal, drawn in a fixed order so the same
    rng state yields the same continuum function on any grid.
    """
    k = int(max_freq)
    freqs = np.arange(-k, k + 1)
    a = rng.standard_normal((2 * k + 1, 2 * k + 1))
    b = rng.standard_normal((2 * k + 1, 2 * k + 1))
    c = a - 1j * b
    eu = np.exp(1j * np.outer(freqs, u[:, 0]))
    ev = np.exp(1j * np.outer(freqs, v[0, :]))
    return np.real(np.einsum("pq,pu,qv->uv", c, eu, ev))


_SPEC_RE = re.compile(r"^\s*([a-z_]+)\s*\(([^()]*)\)\s*$")


def generate_surface(spec: str, stencil_order: int = 4) -> GridImmersion:
    """Build a surface from a textual spec.

    Supported forms: clifford(n), round_torus(n,R,r),
    bumpy_torus(n,R,r,amplitude,freq,seed) and scaled(<inner spec>, lam).
    """
    spec = spec.strip()
    if spec.startswith("scaled"):
        inner, lam = _split_scaled(spec)
        return scaled(generate_surface(inner, stencil_order), lam)
    m = _SPEC_RE.match(spec)
    if not m:
        raise BadSpec(f"cannot parse surface spec {spec!r}")
    name, argstr = m.group(1), m.group(2)
    args = [a.strip() for a in argstr.split(",")] if argstr.strip() else []
    try:
        if name == "clifford":
            return clifford(int(args[0]), stencil_order)
        if name == "round_torus":
            n = int(args[0])
            R = float(args[1]) if len(args) > 1 else 2.0
            r = float(args[2]) if len(args) > 2 else 1.0
            return round_torus(n, R, r, stencil_order)
        if name == "bumpy_torus":
            n = int(args[0])
            R = float(args[1]) if len(args) > 1 else 2.0
            r = float(args[2]) if len(args) > 2 else 1.0
            amp = float(args[3]) if len(args) > 3 else 0.1
            freq = int(args[4]) if len(args) > 4 else 3
            seed = int(args[5]) if len(args) > 5 else 0
            return bumpy_torus(n, R, r, amp, freq, seed, stencil_order)
    except BadSpec:
        raise
    except (ValueError, IndexError) as exc:
        raise BadSpec(f"bad arguments in surface spec {spec!r}: {exc}") from exc
    raise BadSpec(f"unknown surface generator {name!r}")


def _split_scaled(spec: str) -> tuple[str, float]:
    body = spec[len("scaled"):].strip()
    if not (body.startswith("(") and body.endswith(")")):
        raise BadSpec(f"cannot parse surface spec {spec!r}")
    body = body[1:-1]
    depth = 0
    for idx in range(len(body) - 1, -1, -1):
        ch = body[idx]
        if ch == ")":
            depth += 1
        elif ch == "(":
            depth -= 1
        elif ch == "," and depth == 0:
            inner, lam_str = body[:idx], body[idx + 1 :]
            try:
                return inner.strip(), float(lam_str)
            except ValueError as exc:
                raise BadSpec(f"bad scale factor in {spec!r}") from exc
    raise BadSpec(f"scaled(...) needs an inner spec and a factor: {spec!r}")
