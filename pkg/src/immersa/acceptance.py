"""Acceptance suite: ten property-based criteria at desk scale.

Each criterion pins its tolerances as constants here and reports one pass or
fail line.  `immersa selftest` runs the whole list; the pytest suite wraps the
same functions one test per criterion.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .geometry import induced_geometry, iterated_covariant_derivative
from .paramgrid import GridImmersion, TensorField, constant_field, grid_shift, shift_immersion
from .sobolev_metric import MetricConfig, metric_eval
from .surfaces import bumpy_torus, clifford, round_torus, scaled, trig_polynomial
from . import variations as V
from . import _kernels as K


@dataclass
class CriterionResult:
    index: int
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] criterion {self.index:2d}: {self.name} -- {self.detail}"


def _rand_ambient(grid, d, rng, max_freq=3, amp=1.0) -> TensorField:
    u, v = grid.nodes()
    comps = [trig_polynomial(u, v, max_freq, rng) for _ in range(d)]
    vals = np.stack(comps, -1)
    scale = np.abs(vals).max()
    if scale > 0:
        vals = vals * (amp / scale)
    return TensorField.ambient(grid, vals, d)


def criterion_1() -> CriterionResult:
    """Variation formulas match central finite differences."""
    TOL = 1e-5
    EPS = 1e-4
    rng = np.random.default_rng(101)
    worst = 0.0
    for pair in range(10):
        f = bumpy_torus(16, amplitude=0.1, freq=3, seed=pair)
        geom = induced_geometry(f)
        fdot = _rand_ambient(f.grid, 3, rng)
        dt_g, dt_g_inv = V.variation_metric(f, geom, fdot)
        dt_gamma = V.variation_gamma(f, geom, fdot, dt_g, dt_g_inv)
        dt_S, dt_H = V.variation_S_H(f, geom, fdot, dt_gamma, dt_g_inv)
        _, dt_vol = V.variation_volume(f, geom, fdot, dt_g)

        for eps in (EPS, EPS / 2.0):
            gp = induced_geometry(
                GridImmersion(f.grid, 3, f.positions + eps * fdot.values, check=False)
            )
            gm = induced_geometry(
                GridImmersion(f.grid, 3, f.positions - eps * fdot.values, check=False)
            )
            checks = [
                (dt_g, (gp.g - gm.g) / (2 * eps)),
                (dt_g_inv, (gp.g_inv - gm.g_inv) / (2 * eps)),
                (dt_gamma, (gp.gamma - gm.gamma) / (2 * eps)),
                (dt_S, (gp.S - gm.S) / (2 * eps)),
                (dt_H, (gp.H - gm.H) / (2 * eps)),
                (
                    np.array(dt_vol),
                    np.array(
                        (gp.total_volume() - gm.total_volume()) / (2 * eps)
                    ),
                ),
            ]
            errs = [
                float(np.abs(a - b).max() / max(np.abs(b).max(), 1e-300))
                for a, b in checks
            ]
            if max(errs) < TOL:
                break
        worst = max(worst, max(errs))
        if max(errs) >= TOL:
            return CriterionResult(
                1, "variation formula oracle suite", False,
                f"pair {pair}: max relative error {max(errs):.2e} >= {TOL:.0e}",
            )
    return CriterionResult(
        1, "variation formula oracle suite", True,
        f"10 bumpy-torus pairs, worst relative error {worst:.2e} < {TOL:.0e}",
    )


def criterion_2() -> CriterionResult:
    """Analytic gradient engine vs finite differences and directional derivative."""
    TOL_FD = 1e-5
    TOL_DIR = 1e-10
    rng = np.random.default_rng(202)
    f = bumpy_torus(8, amplitude=0.08, freq=2, seed=11)
    grid = f.grid
    T = 4
    u, v = grid.nodes()
    slices = [f.positions]
    for t in range(1, T + 1):
        pert = np.stack([trig_polynomial(u, v, 2, rng) for _ in range(3)], -1)
        pert *= 0.02 / max(1.0, np.abs(pert).max())
        slices.append(f.positions * (1 + 0.02 * t) + pert)
    from .geodesic import DiscretePath

    path = DiscretePath.from_positions(grid, 3, np.stack(slices))
    cfg = MetricConfig(d=3)
    g_an = V.energy_gradient(path, cfg, engine="analytic")
    g_fd = V.energy_gradient(path, cfg, engine="finite_difference")
    rel = float(np.abs(g_an - g_fd).max() / np.abs(g_fd).max())
    if rel >= TOL_FD:
        return CriterionResult(
            2, "gradient engine consistency", False,
            f"analytic vs fd relative error {rel:.2e} >= {TOL_FD:.0e}",
        )
    worst_dir = 0.0
    for _ in range(5):
        d = rng.standard_normal(g_an.shape)
        dd = V.directional_energy_derivative(path, d, cfg)
        inner = float((g_an * d).sum())
        worst_dir = max(worst_dir, abs(dd - inner) / max(abs(dd), 1e-300))
    ok = worst_dir < TOL_DIR
    return CriterionResult(
        2, "gradient engine consistency", ok,
        f"fd agreement {rel:.2e} < {TOL_FD:.0e}, directional agreement "
        f"{worst_dir:.2e} {'<' if ok else '>='} {TOL_DIR:.0e}",
    )


def criterion_3() -> CriterionResult:
    """Metric axioms: symmetry, bilinearity, positivity, shift invariance."""
    TOL_ROUND = 1e-12
    rng = np.random.default_rng(303)
    f = bumpy_torus(64, amplitude=0.1, freq=3, seed=21)
    geom = induced_geometry(f)
    cfg = MetricConfig(d=3)
    h1 = _rand_ambient(f.grid, 3, rng, max_freq=6)
    h2 = _rand_ambient(f.grid, 3, rng, max_freq=6)
    h3 = _rand_ambient(f.grid, 3, rng, max_freq=6)
    g12 = metric_eval(f, geom, h1, h2, cfg)
    g21 = metric_eval(f, geom, h2, h1, cfg)
    sym = abs(g12 - g21) / max(abs(g12), 1e-300)
    a, b = 0.7, -1.3
    comb = TensorField.ambient(f.grid, a * h1.values + b * h2.values, 3)
    lin = metric_eval(f, geom, comb, h3, cfg)
    lin_ref = a * metric_eval(f, geom, h1, h3, cfg) + b * metric_eval(f, geom, h2, h3, cfg)
    bil = abs(lin - lin_ref) / max(abs(lin_ref), 1e-300)
    if sym >= TOL_ROUND or bil >= 1e-11:
        return CriterionResult(
            3, "metric axioms and shift invariance", False,
            f"symmetry {sym:.2e}, bilinearity {bil:.2e}",
        )
    n_pos = 100
    for _ in range(n_pos):
        h = _rand_ambient(f.grid, 3, rng, max_freq=6, amp=rng.uniform(0.1, 3.0))
        if not metric_eval(f, geom, h, h, cfg) > 0:
            return CriterionResult(
                3, "metric axioms and shift invariance", False,
                "found nonpositive G(h,h) for a nonzero field",
            )
    worst_shift = 0.0
    base = metric_eval(f, geom, h1, h1, cfg)
    for off in [(1, 0), (0, 1), (7, 13), (32, 32)]:
        fs = shift_immersion(f, off)
        hs = grid_shift(h1, off)
        gs = induced_geometry(fs)
        val = metric_eval(fs, gs, hs, hs, cfg)
        worst_shift = max(worst_shift, abs(val - base) / abs(base))
    ok = worst_shift < TOL_ROUND
    return CriterionResult(
        3, "metric axioms and shift invariance", ok,
        f"symmetry {sym:.1e}, bilinearity {bil:.1e}, positivity {n_pos}/{n_pos}, "
        f"shift invariance {worst_shift:.2e} {'<' if ok else '>='} {TOL_ROUND:.0e}",
    )


def criterion_4() -> CriterionResult:
    """Clifford and round-torus geometry against closed forms."""
    TOL_G = 1e-5
    TOL_H = 1e-4
    MIN_ORDER = 3.5
    TOL_VOL = 1e-5
    TOL_H_ROUND = 1e-3
    errs = {}
    g_errs = {}
    for n in (32, 64):
        geom = induced_geometry(clifford(n))
        g_errs[n] = float(np.abs(geom.g - np.eye(2)).max())
        if n == 64:
            errs["g"] = g_errs[n]
            hnorm = np.sqrt((geom.H**2).sum(-1))
            errs["H"] = float(np.abs(hnorm - np.sqrt(2.0)).max())
    order = float(np.log2(g_errs[32] / g_errs[64]))
    R, r = 2.0, 1.0
    ground = induced_geometry(round_torus(64, R, r))
    vol_rel = abs(ground.total_volume() - 4 * np.pi**2 * R * r) / (4 * np.pi**2 * R * r)
    _, v = round_torus(64, R, r).grid.nodes()
    hnorm = np.sqrt((ground.H**2).sum(-1))
    closed = np.abs(1.0 / r + np.cos(v) / (R + r * np.cos(v)))
    h_round = float(np.abs(hnorm - closed).max())
    ok = (
        errs["g"] <= TOL_G
        and errs["H"] <= TOL_H
        and order >= MIN_ORDER
        and vol_rel <= TOL_VOL
        and h_round <= TOL_H_ROUND
    )
    return CriterionResult(
        4, "analytic-surface geometry", ok,
        f"|g-I| {errs['g']:.2e} <= {TOL_G:.0e}, ||H|-sqrt2| {errs['H']:.2e} <= "
        f"{TOL_H:.0e}, order {order:.2f} >= {MIN_ORDER}, Vol rel {vol_rel:.2e} <= "
        f"{TOL_VOL:.0e}, |H| round {h_round:.2e} <= {TOL_H_ROUND:.0e}",
    )


def criterion_5() -> CriterionResult:
    """Constant-field identity G(c,c) = |c|^2 Vol on every generator."""
    TOL = 1e-10
    surfaces = [
        ("clifford", clifford(64)),
        ("round", round_torus(64, 2, 1)),
        ("bumpy", bumpy_torus(64, amplitude=0.12, freq=3, seed=5)),
        ("scaled", scaled(round_torus(64, 2, 1), 0.7)),
    ]
    worst = 0.0
    for name, f in surfaces:
        geom = induced_geometry(f)
        cfg = MetricConfig(d=f.d)
        c = np.linspace(0.5, 1.5, f.d)
        cf = constant_field(f.grid, c)
        G = metric_eval(f, geom, cf, cf, cfg)
        target = float(c @ c) * geom.total_volume()
        rel = abs(G - target) / target
        worst = max(worst, rel)
        if rel > TOL:
            return CriterionResult(
                5, "constant-field identity", False,
                f"{name}: relative error {rel:.2e} > {TOL:.0e}",
            )
    return CriterionResult(
        5, "constant-field identity", True,
        f"4 generator surfaces, worst relative error {worst:.2e} <= {TOL:.0e}",
    )


def criterion_6() -> CriterionResult:
    """Volume square-root Lipschitz bound along random paths."""
    STEP_SLACK = 1e-8
    END_SLACK = 1e-6
    rng = np.random.default_rng(606)
    n, T = 64, 6
    base = bumpy_torus(n, amplitude=0.1, freq=2, seed=3)
    grid = base.grid
    u, v = grid.nodes()
    worst_step = -np.inf
    worst_end = -np.inf
    for trial in range(50):
        disp = np.stack([trig_polynomial(u, v, 2, rng) for _ in range(3)], -1)
        disp *= 0.15 / np.abs(disp).max()
        speed = rng.uniform(0.5, 1.5)
        pos = np.stack(
            [base.positions + speed * (t / T) * disp for t in range(T + 1)]
        )
        sholder = [
            np.sqrt(induced_geometry(GridImmersion(grid, 3, pos[t], check=False)).total_volume())
            for t in range(T + 1)
        ]
        rhs_total = 0.0
        for t in range(T):
            mid = GridImmersion(grid, 3, 0.5 * (pos[t] + pos[t + 1]), check=False)
            gm = induced_geometry(mid)
            fdot = TensorField.ambient(grid, (pos[t + 1] - pos[t]) * T, 3)
            su, sv = grid.spacing
            dfd = K.cov_deriv(np, fdot.values, gm.gamma, (0, 0, 1), su, sv, grid.stencil_order)
            nsq = K.fiber_inner(np, dfd, dfd, gm.g, gm.g_inv, (0, 1, 1))
            grad_norm = float(np.sqrt(K.integrate(np, nsq * gm.rho, grid.cell_weight)))
            lhs = abs(sholder[t + 1] - sholder[t])
            rhs = grad_norm / (np.sqrt(2.0) * T)
            worst_step = max(worst_step, lhs - rhs)
            rhs_total += rhs
        end_lhs = abs(sholder[-1] - sholder[0])
        worst_end = max(worst_end, end_lhs - rhs_total)
    ok = worst_step <= STEP_SLACK and worst_end <= END_SLACK
    return CriterionResult(
        6, "volume square-root Lipschitz bound", ok,
        f"50 paths: worst per-step margin {worst_step:.2e} <= {STEP_SLACK:.0e}, "
        f"worst end-to-end margin {worst_end:.2e} <= {END_SLACK:.0e}",
    )


def criterion_7() -> CriterionResult:
    """Geodesic solver on the translation problem."""
    from .geodesic import SolveOptions, solve_geodesic_bvp
    from .geometry import induced_geometry as geo

    TOL_E = 1e-6
    GRAD_TOL = 1e-6
    BUDGET_S = 60.0
    SYM_TOL = 0.05
    f0 = round_torus(16, 2, 1)
    vol = geo(f0).total_volume()
    c = np.array([0.3, 0.2, 0.1])
    f1 = f0.translated(c)
    T = 8
    rng = np.random.default_rng(707)
    init = np.stack(
        [(1 - t / T) * f0.positions + (t / T) * f1.positions for t in range(T + 1)]
    )
    pert = rng.standard_normal(init.shape) * (0.01 * np.linalg.norm(c))
    pert[0] = 0.0
    pert[T] = 0.0
    opts = SolveOptions(max_iters=1500, grad_tol=GRAD_TOL)
    t0 = time.time()
    path = solve_geodesic_bvp(f0, f1, T, MetricConfig(d=3), opts, init=init + pert)
    elapsed = time.time() - t0
    bound = float(c @ c) * vol
    hist = [h[1] for h in path.diagnostics["history"]]
    monotone = all(b <= a for a, b in zip(hist, hist[1:]))
    back = solve_geodesic_bvp(f1, f0, T, MetricConfig(d=3), opts)
    sym = abs(back.energy - path.energy) / path.energy
    ok = (
        elapsed < BUDGET_S
        and path.energy <= bound * (1 + TOL_E)
        and path.diagnostics["grad_sup"] <= GRAD_TOL
        and monotone
        and sym <= SYM_TOL
    )
    return CriterionResult(
        7, "geodesic solver translation test", ok,
        f"{elapsed:.1f}s (< {BUDGET_S:.0f}s), energy {path.energy:.6f} <= "
        f"{bound:.6f}*(1+{TOL_E:.0e}), grad {path.diagnostics['grad_sup']:.1e} <= "
        f"{GRAD_TOL:.0e}, monotone {monotone}, fwd/bwd gap {sym:.2%} <= {SYM_TOL:.0%}",
    )


def criterion_8() -> CriterionResult:
    """Quotient matching on a grid-shift pair, with the open-set guard."""
    from .geodesic import SolveOptions, completeness_diagnostics, quotient_distance

    f0 = bumpy_torus(12, amplitude=0.08, freq=2, seed=2)
    f1 = shift_immersion(f0, (2, 3))
    cfg = MetricConfig(d=3)
    opts = SolveOptions(max_iters=150, grad_tol=1e-4, warp_rounds=2, warp_iters=6)
    dist, warp, path = quotient_distance(f0, f1, 4, cfg, opts)
    q = path.diagnostics["quotient"]
    quotient_le_identity = q["energy"] <= q["identity_energy"] + 1e-10
    min_rho = min(q["accepted_min_rho"])
    rho_ok = min_rho > 1e-3
    sv_ok = all(
        r["min_sv"] > cfg.immersion_floor for r in completeness_diagnostics(path, cfg)
    )
    ok = quotient_le_identity and rho_ok and sv_ok
    return CriterionResult(
        8, "quotient matching and open-set guard", ok,
        f"quotient {q['energy']:.4f} <= identity {q['identity_energy']:.4f}: "
        f"{quotient_le_identity}, min rho {min_rho:.3f} > 0, "
        f"immersion guard held {sv_ok}",
    )


def criterion_9() -> CriterionResult:
    """Inequality lab: invariances, refinement drift, determinism."""
    from .inequalities import (
        INEQUALITY_IDS,
        ensemble_scan,
        evaluate_ratio,
        field_from_coefficients,
        mss_ratio,
        sample_coefficients,
    )

    TOL_H = 1e-12
    TOL_F = 1e-8
    DRIFT = 0.25
    rng = np.random.default_rng(909)
    f = bumpy_torus(32, amplitude=0.1, freq=3, seed=8)
    geom = induced_geometry(f)
    coeff = sample_coefficients(rng, 8, 1)[0]
    h = field_from_coefficients(f.grid, coeff, 8)
    for iid in INEQUALITY_IDS:
        r1 = evaluate_ratio(iid, geom, h)
        h2 = TensorField.scalar(f.grid, 4.25 * h.values)
        r2 = evaluate_ratio(iid, geom, h2)
        if abs(r1 - r2) / max(r1, 1e-300) >= TOL_H:
            return CriterionResult(
                9, "inequality lab", False, f"{iid}: h-scale invariance violated"
            )
    lam = 0.55
    gs = induced_geometry(f.scaled(lam))
    fscale = abs(mss_ratio(gs, h) - mss_ratio(geom, h)) / mss_ratio(geom, h)
    if fscale >= TOL_F:
        return CriterionResult(
            9, "inequality lab", False, f"mss f-scale invariance {fscale:.2e}"
        )
    families = {
        "clifford": lambda n: clifford(n),
        "round": lambda n: round_torus(n, 2, 1),
        "bumpy": lambda n: bumpy_torus(n, amplitude=0.1, freq=3, seed=8),
    }
    worst_drift = 0.0
    for sid, fam in families.items():
        for iid in INEQUALITY_IDS:
            rep = ensemble_scan(fam, iid, [32, 48], samples=200, seed=909, surface_id=sid)
            worst_drift = max(worst_drift, rep.ratio_drift)
            if rep.ratio_drift >= DRIFT:
                return CriterionResult(
                    9, "inequality lab", False,
                    f"{iid}/{sid}: drift {rep.ratio_drift:.1%} >= {DRIFT:.0%}",
                )
    rep1 = ensemble_scan(families["bumpy"], "mss", [32], samples=50, seed=42, surface_id="bumpy")
    rep2 = ensemble_scan(families["bumpy"], "mss", [32], samples=50, seed=42, surface_id="bumpy")
    det = rep1.max_ratio == rep2.max_ratio
    ok = det and worst_drift < DRIFT
    return CriterionResult(
        9, "inequality lab", ok,
        f"h-scale < {TOL_H:.0e}, f-scale {fscale:.1e} < {TOL_F:.0e}, worst drift "
        f"{worst_drift:.1%} < {DRIFT:.0%}, deterministic {det}",
    )


def criterion_10() -> CriterionResult:
    """Sequence-space testbed: domination, Lipschitz map, BVP vs quadrature."""
    from .seq_model import (
        SeqPoint,
        seq_F,
        seq_geodesic_1d,
        seq_geodesic_bvp,
        seq_metric,
        seq_path_energy,
        seq_path_length,
    )

    # adaptive-quadrature oracle values, frozen before the solver was built
    D12 = 1.2220161770866342
    D13 = 2.301987534577569
    TOL_BVP = 1e-3
    rng = np.random.default_rng(1010)
    for _ in range(100):
        nn = rng.integers(1, 6)
        x = SeqPoint(np.exp(rng.standard_normal(nn)))
        h = rng.standard_normal(nn)
        if seq_metric(x, h) < float(h @ h) - 1e-15:
            return CriterionResult(
                10, "sequence-space testbed", False, "domination G >= flat violated"
            )
    worst_slack = 0.0
    for _ in range(100):
        nn, T = int(rng.integers(1, 4)), 24
        pts = np.exp(rng.standard_normal((T + 1, nn)) * 0.25)
        L_mid = seq_path_length(pts)
        fine = _refine_linear(pts, 32)
        L_fine = seq_path_length(fine)
        dF = float(np.abs(seq_F(SeqPoint(pts[-1])) - seq_F(SeqPoint(pts[0]))).max())
        slack = max(L_fine - L_mid, 0.0)
        if dF > L_mid + slack + 1e-9:
            return CriterionResult(
                10, "sequence-space testbed", False,
                f"Lipschitz violated: dF {dF:.6f} > length {L_mid:.6f} + slack {slack:.2e}",
            )
        worst_slack = max(worst_slack, dF - L_mid)
    oracle = seq_geodesic_1d(1.0, 2.0)
    if abs(oracle - D12) > 1e-12:
        return CriterionResult(
            10, "sequence-space testbed", False, "quadrature oracle drifted"
        )
    path = seq_geodesic_bvp([1.0, 1.0], [2.0, 3.0], 256)
    E = seq_path_energy(path, 256)
    target = D12**2 + D13**2
    rel = abs(E - target) / target
    ok = rel <= TOL_BVP
    return CriterionResult(
        10, "sequence-space testbed", ok,
        f"domination exact on 100 samples, Lipschitz within quadrature slack "
        f"(worst margin {worst_slack:.2e}), BVP energy rel {rel:.2e} <= {TOL_BVP:.0e}",
    )


def _refine_linear(pts: np.ndarray, sub: int) -> np.ndarray:
    out = [pts[0]]
    for a, b in zip(pts[:-1], pts[1:]):
        for s in range(1, sub + 1):
            out.append(a + (b - a) * s / sub)
    return np.stack(out)


ALL_CRITERIA = [
    criterion_1,
    criterion_2,
    criterion_3,
    criterion_4,
    criterion_5,
    criterion_6,
    criterion_7,
    criterion_8,
    criterion_9,
    criterion_10,
]


def run_all(verbose: bool = True) -> list[CriterionResult]:
    results = []
    for fn in ALL_CRITERIA:
        t0 = time.time()
        res = fn()
        if verbose:
            print(res.line() + f"  ({time.time() - t0:.1f}s)", flush=True)
        results.append(res)
    if verbose:
        n_pass = sum(r.passed for r in results)
        print(f"{n_pass}/{len(results)} acceptance criteria passed", flush=True)
    return results
