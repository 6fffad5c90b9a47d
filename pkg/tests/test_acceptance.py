"""The thirteen acceptance criteria, each at its stated tolerance."""

import math
import time

import numpy as np

from anosov_lab.cohomology import coboundary, livsic_solve
from anosov_lab.lp_calculus import (ConeSymbol, Grid2Field, GridSpec, annulus_symbol, band_filter,
                                    build_lp_filters, disjoint_support_product_check, local_exponents,
                                    random_trig_field, scale_comparison_check)
from anosov_lab.mls_stretch import conformal_linearization_experiment, stability_experiment
from anosov_lab.orbits import (SYSTOLE, Bump, ConformalFactor, enumerate_periodic_orbits, orbit_period,
                               perturbed_geodesic_length, trace_recursion_counts, xray)
from anosov_lab.source_lab import (WaveFamily, block_decay_probe, make_radial_pair, source_estimate_sweep,
                                   stable_dual_direction)
from anosov_lab.systems import (cat_map_system, fuchsian_bolza, lyapunov_data, perturbed_cat_map,
                                projector_lie_residual, suspension_flow)
from anosov_lab.thresholds import (SubadditiveSpec, foliation_threshold, forward_threshold,
                                   sobolev_threshold_integral, subadditive_limit)

CAT = cat_map_system()
LOG_LAM = math.log((3 + math.sqrt(5)) / 2)
RHO_STEP = 1 / 64


def test_01_livsic_exact_recovery(criterion):
    spec = GridSpec(64)
    t0 = time.perf_counter()
    errs = []
    for seed in range(100):
        u = random_trig_field(spec, 8, np.random.default_rng(seed))
        res = livsic_solve(coboundary(u, CAT), system=CAT)
        d = res.u.values.real - u.values.real
        errs.append(float(np.max(np.abs(d - d.mean()))))
    dt = time.perf_counter() - t0
    ok = max(errs) <= 1e-10 and dt <= 10
    assert criterion(1, ok, f"max sup error {max(errs):.2e}, {dt:.1f} s")


def test_02_orbit_counts(criterion):
    t0 = time.perf_counter()
    orbs = enumerate_periodic_orbits(CAT, 10)
    counts = [sum(o.period for o in orbs if n % o.period == 0) for n in range(1, 11)]
    rec = trace_recursion_counts(10)
    A = CAT.matrix
    det = [abs(round(np.linalg.det(np.linalg.matrix_power(A, n) - np.eye(2)))) for n in range(1, 11)]
    dt = time.perf_counter() - t0
    ok = counts == [rec[n] for n in range(1, 11)] == det and counts[:5] == [1, 5, 16, 45, 121] and dt <= 5
    assert criterion(2, ok, f"counts {counts}, {dt:.2f} s")


def test_03_lyapunov_exactness(criterion):
    pts = np.random.default_rng(3).random((5, 2))
    lm = lyapunov_data(CAT, pts, T=200)
    flow = suspension_flow(CAT, Grid2Field.constant(GridSpec(64), 1.0))
    lf = lyapunov_data(flow, pts, T=200)
    em = max(abs(v - LOG_LAM) for v in (lm.lambda_u_min, lm.lambda_u_max, lm.lambda_s_min, lm.lambda_s_max))
    ef = max(abs(v - LOG_LAM) for v in (lf.lambda_u_min, lf.lambda_u_max, lf.lambda_s_min, lf.lambda_s_max))
    ok = em <= 1e-8 and ef <= 1e-6 and lf.per_unit_time
    assert criterion(3, ok, f"map error {em:.1e}, flow error {ef:.1e}")


def test_04_threshold_closed_form(criterion):
    half = forward_threshold(CAT, LOG_LAM / 2, P=12)
    triv = forward_threshold(CAT, None, P=12)
    ok = abs(half.omega_plus - 0.5) <= RHO_STEP and triv.omega_plus == 0.0 and triv.omega_minus == 0.0
    assert criterion(4, ok, f"omega_plus {half.omega_plus:.6f}; trivial ({triv.omega_plus}, {triv.omega_minus})")


def test_05_doubling_vs_orbit_maximum(criterion):
    spec = SubadditiveSpec("birkhoff", lambda x1, x2: np.cos(2 * np.pi * x1))
    rep = subadditive_limit(spec, CAT, m_max=10, P=12)
    rel = abs(rep.doubling[-1] - rep.orbit_max) / abs(rep.orbit_max)
    ok = rep.T[-1] == 2**10 and rel <= 0.01 and rep.spot_check_max_violation <= 1e-9
    assert criterion(5, ok, f"doubling {rep.doubling[-1]:.6f} vs orbit max {rep.orbit_max:.6f}, "
                            f"spot checks {rep.spot_check_max_violation:.1e}")


def test_06_source_estimate_dichotomy(criterion):
    t0 = time.perf_counter()
    pair = make_radial_pair(CAT, math.radians(20))
    spec = GridSpec(256)
    hs = [2.0**-k for k in range(5, 10)]
    stab = {}
    for rho in (0.25, 0.5, 1.0):
        r = source_estimate_sweep(CAT, pair, rho, h_list=hs, n_samples=50, spec=spec)
        stab[rho] = r.stability
    slopes = {}
    for rho in (0.5, 1.25):
        r = source_estimate_sweep(CAT, pair, rho, h_list=hs, n_samples=50, weight=CAT.log_lambda, spec=spec)
        slopes[rho] = r.slope
    dt = time.perf_counter() - t0
    ok = all(s < 2 for s in stab.values()) and slopes[0.5] >= 0.25 and slopes[1.25] <= 0.1 and dt <= 300
    detail = ", ".join(f"stab({k})={v:.2f}" for k, v in stab.items())
    assert criterion(6, ok, f"{detail}; slope(0.5)={slopes[0.5]:.3f}, slope(1.25)={slopes[1.25]:.3f}, {dt:.0f} s")


def test_07_block_decay(criterion):
    es, _ = stable_dual_direction(CAT)
    h = 2.0**-6
    Ts = list(range(2, 9))
    fam = WaveFamily.along(es, 0.6 * CAT.lam_u ** max(Ts) / h)
    _, _, s_half = block_decay_probe(CAT, fam, 0.5, Ts, h=h)
    _, _, s_zero = block_decay_probe(CAT, fam, 0.0, Ts, h=h)
    target = -0.5 * LOG_LAM
    ok = abs(s_half - target) <= 0.2 * abs(target) and abs(s_zero) <= 0.02
    assert criterion(7, ok, f"rate {s_half:.4f} vs {target:.4f}; flat slope {s_zero:.1e}")


def test_08_coboundary_invisibility(criterion):
    spec = GridSpec(32)
    rng = np.random.default_rng(8)
    orbs = enumerate_periodic_orbits(CAT, 10)
    one = Grid2Field.constant(spec, 1.0)
    w = coboundary(random_trig_field(spec, 3, rng), CAT)
    r2 = one + w * (0.3 / w.sup())
    f1, f2 = suspension_flow(CAT, one), suspension_flow(CAT, r2)
    dper = max(abs(orbit_period(f1, o) - orbit_period(f2, o)) for o in orbs)
    short = [o for o in orbs if o.period <= 4]
    s64 = GridSpec(64)
    worst = 0.0
    for _ in range(1000):
        F = coboundary(random_trig_field(s64, 6, rng), CAT)
        worst = max(worst, max(abs(xray(F, o, CAT)) for o in short))
    ok = dper <= 1e-12 and worst <= 1e-11
    assert criterion(8, ok, f"max period change {dper:.1e} over {len(orbs)} orbits; xray {worst:.1e}")


def test_09_conformal_linearization(criterion):
    t0 = time.perf_counter()
    G = fuchsian_bolza()
    eps = [1e-2, 5e-3, 2.5e-3]
    bump = conformal_linearization_experiment(G, ConformalFactor(bumps=(Bump(0.05 + 0.02j, 1.2, 1.0),)), eps, ["a"])[0]
    const = conformal_linearization_experiment(G, ConformalFactor(constant=1.0), eps, ["a"])[0]
    L = perturbed_geodesic_length(G, "a", ConformalFactor())
    ref = 2 * math.acosh(1 + math.sqrt(2))
    dt = time.perf_counter() - t0
    ok = (1.8 <= bump.slope <= 2.2 and abs(const.slope - 2.0) <= 0.01 and abs(L - ref) <= 1e-6
          and abs(SYSTOLE - ref) <= 1e-12 and dt <= 120)
    assert criterion(9, ok, f"bump slope {bump.slope:.4f}, constant slope {const.slope:.4f}, "
                            f"systole error {abs(L - ref):.1e}, {dt:.1f} s")


def test_10_stability_scale_invariance(criterion):
    spec = GridSpec(32)
    r0 = Grid2Field.from_function(spec, lambda x1, x2: 1 + 0.1 * np.cos(2 * np.pi * x1))
    base = []
    for i in range(20):
        g = random_trig_field(spec, 4, np.random.default_rng(100 + i))
        base.append(g * (1.0 / g.sup()))
    orbs = enumerate_periodic_orbits(CAT, 8)
    reps = [stability_experiment(r0, [g * a for g in base], 8, CAT, orbits=orbs) for a in (1e-3, 1e-2)]
    rat = [{r["sample"]: r["ratio"] for r in rep.rows} for rep in reps]
    common = sorted(set(rat[0]) & set(rat[1]))
    spread = max(abs(rat[0][i] - rat[1][i]) / max(rat[0][i], rat[1][i]) for i in common)
    finite = all(math.isfinite(v) for d in rat for v in d.values())
    ok = len(common) == 20 and finite and spread <= 0.01
    assert criterion(10, ok, f"{len(common)} samples, max ratio {reps[0].max_ratio:.3f}, spread {spread:.1e}")


def test_11_foliation_thresholds(criterion):
    spec = GridSpec(64)
    pts = np.vstack([o.points[:1] for o in enumerate_periodic_orbits(CAT, 4)])
    flow = suspension_flow(CAT, Grid2Field.constant(spec, 1.0))
    lyap = lyapunov_data(flow, pts, T=200)
    b_vol = foliation_threshold(lyap, volume_preserving_3d=True)
    b_gen = foliation_threshold(lyap)
    lin = max(projector_lie_residual(flow, d) for d in (1e-2, 1e-3, 1e-4))
    pert = suspension_flow(perturbed_cat_map(CAT, 0.01), Grid2Field.constant(spec, 1.0))
    pr = [projector_lie_residual(pert, d) for d in (1e-2, 1e-3, 1e-4)]
    ok = (abs(b_vol - 2.0) <= 1e-12 and abs(b_gen - 2.0) <= 1e-8 and lin <= 1e-10
          and pr[0] > pr[1] > pr[2])
    assert criterion(11, ok, f"bounds {b_vol:.12f} / {b_gen:.10f}; linear residual {lin:.1e}; "
                             f"perturbed {', '.join(f'{v:.1e}' for v in pr)}")


def test_12_l2_threshold_gap(criterion):
    w = Grid2Field.from_function(GridSpec(256), lambda x1, x2: np.cos(2 * np.pi * x1))
    s_cos = sobolev_threshold_integral(CAT, w).omega
    f_cos = forward_threshold(CAT, w, P=12).omega_plus
    s_c = sobolev_threshold_integral(CAT, 0.3).omega
    f_c = forward_threshold(CAT, 0.3, P=12).omega_plus
    ok = s_cos <= f_cos and f_cos - s_cos > RHO_STEP and abs(s_c - f_c) <= RHO_STEP
    assert criterion(12, ok, f"cos: L2 {s_cos:.4f} < sup {f_cos:.4f}; constant: {s_c:.4f} vs {f_c:.4f}")


def _fixed_poly(n, K, A):
    return Grid2Field.from_function(
        GridSpec(n), lambda x1, x2: sum(a * np.cos(2 * np.pi * (k[0] * x1 + k[1] * x2)) for a, k in zip(A, K)))


def test_13_norm_machinery(criterion):
    rng = np.random.default_rng(13)
    spec = GridSpec(256)
    bank = build_lp_filters(spec)
    f = random_trig_field(spec, 120, rng)
    rec = sum(band_filter(f, bank, j).values for j in range(len(bank)))
    rec_err = np.linalg.norm(rec - f.values) / np.linalg.norm(f.values)

    K = rng.integers(-20, 21, (30, 2))
    A = rng.standard_normal(30) / (1 + np.hypot(*K.T))
    b = ConeSymbol(r_lo=1.0, r_hi=4.0)
    intervals = []
    for n in (128, 256):
        g = _fixed_poly(n, K, A)
        r = [scale_comparison_check(g, 0.25, 0.75, h, b)["ratio"] for h in (2**-2, 2**-3, 2**-4, 2**-5)]
        intervals.append((min(r), max(r)))
    move = max(abs(intervals[1][i] - intervals[0][i]) / intervals[0][i] for i in (0, 1))

    a = annulus_symbol()
    c = Grid2Field.from_function(spec, lambda x1, x2: np.exp(np.cos(2 * np.pi * x1)))
    hs = [2.0**-k for k in range(3, 7)]
    res = [disjoint_support_product_check(a, a, 2**-3, h, f, amplitude=c) for h in hs]
    assert all(d for _, d in res[1:])
    exps = local_exponents(hs, [r for r, _ in res])
    ok = rec_err <= 1e-10 and move < 0.10 and exps[-1] >= 4
    assert criterion(13, ok, f"reconstruction {rec_err:.1e}; interval {intervals[0][0]:.3f}..{intervals[0][1]:.3f} "
                             f"moves {move:.1e}; local exponent at h=2^-6 {exps[-1]:.1f}")
