"""
Regularity thresholds for weighted hyperbolic dynamics.

The forward threshold is the least rho >= 0 for which, along every periodic
orbit, the weight growth rate minus rho times the unstable expansion rate is
nonpositive.  Cross-checks: a doubling estimator over a dense grid, a
direct-integral (L^2-type) threshold, and foliation bounds from Lyapunov data.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .cohomology import CocycleWeight
from .lp_calculus import ConeSymbol, Grid2Field, lattice_points
from .orbits import enumerate_periodic_orbits
from .systems import AnosovFlow, splitting_at


class ThresholdGridError(ValueError):
    pass


class SubadditivityError(ValueError):
    pass


class HorizonError(ValueError):
    pass


RHO_STEP = 1.0 / 64


def _parts(system):
    if isinstance(system, AnosovFlow):
        return system.base, system.roof_at
    return system, lambda pts: np.ones(len(np.atleast_2d(pts)))


def _as_weight(weight):
    if weight is None:
        return CocycleWeight.trivial()
    if isinstance(weight, CocycleWeight):
        return weight
    return CocycleWeight("scalar", weight)


# ---------------------------------------------------------------------------
# periodic-orbit thresholds
# ---------------------------------------------------------------------------


@dataclass
class ThresholdReport:
    omega_plus: float
    omega_minus: float
    method: str
    horizon: int
    rho_step: float
    omega_plus_grid: float
    omega_minus_grid: float
    per_orbit: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    def to_json(self):
        d = {k: getattr(self, k) for k in ("omega_plus", "omega_minus", "method", "horizon", "rho_step",
                                            "omega_plus_grid", "omega_minus_grid", "diagnostics")}
        return json.dumps(d, sort_keys=True, indent=2)

    def orbit_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["orbit_id", "period", "length", "weight_rate", "unstable_rate", "stable_rate"])
        for row in self.per_orbit:
            w.writerow([row["orbit_id"], row["period"], repr(row["length"]), repr(row["a"]),
                        repr(row["b_u"]), repr(row["b_s"])])
        return buf.getvalue()


def _expansion_along(m, pts, vec, metric=None):
    """log of |D f^n v| along the closed orbit pts, measured in metric G(x)."""
    v = np.asarray(vec, dtype=float)
    tot = 0.0
    n = len(pts)
    for i in range(n):
        x = pts[i:i + 1]
        w = m.derivative(x)[0] @ v
        y = pts[(i + 1) % n:(i + 1) % n + 1]
        if metric is None:
            tot += math.log(np.linalg.norm(w) / np.linalg.norm(v))
        else:
            Gx, Gy = metric(x[0]), metric(y[0])
            tot += 0.5 * math.log(float(w @ Gy @ w) / float(v @ Gx @ v))
        v = w
    return tot


def orbit_rates(system, weight, orbits, metric=None):
    m, roof = _parts(system)
    weight = _as_weight(weight)
    rows = []
    for o in orbits:
        pts = o.points
        r = roof(pts)
        ell = float(np.sum(r))
        v = weight.values_at(pts)
        a = float(np.sum(r * v)) / ell
        if metric is None and not m.is_perturbed:
            bu = o.period * m.log_lambda / ell
            bs = o.period * (m.log_lambda - math.log(abs(m.lam_u * m.lam_s))) / ell
        else:
            bu = _expansion_along(m, pts, m.e_u, metric) / ell
            # stable contraction as a positive rate, via the reversed orbit
            bs = -_expansion_along(m, pts, m.e_s, metric) / ell
        rows.append({"orbit_id": o.orbit_id, "period": o.period, "length": ell, "a": a, "b_u": bu, "b_s": bs})
    return rows


def _bisect_threshold(rate, rho_step, rho_max):
    """Least rho >= 0 with rate(rho) <= 0, on a grid then refined by bisection."""
    if rate(0.0) <= 0:
        return 0.0, 0.0
    k = 1
    while k * rho_step <= rho_max + 1e-12:
        if rate(k * rho_step) <= 0:
            break
        k += 1
    else:
        raise ThresholdGridError(f"grid too narrow: rate still positive at rho = {rho_max}")
    lo, hi = (k - 1) * rho_step, k * rho_step
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if rate(mid) <= 0:
            hi = mid
        else:
            lo = mid
    return hi, k * rho_step


def forward_threshold(system, weight=None, P=12, rho_step=RHO_STEP, rho_max=8.0, orbits=None, metric=None):
    """
    omega_+ = least rho with max_gamma (a_gamma - rho b_gamma) <= 0, where
    a_gamma is the orbit average of the weight and b_gamma the unstable rate.
    omega_- uses the reversed weight and the stable rates.
    """
    if P < 4:
        raise ValueError("P must be >= 4")
    m, _ = _parts(system)
    orbits = orbits if orbits is not None else enumerate_periodic_orbits(m, P).orbits
    rows = orbit_rates(system, weight, orbits, metric)
    a = np.array([r["a"] for r in rows])
    bu = np.array([r["b_u"] for r in rows])
    bs = np.array([r["b_s"] for r in rows])
    wp, wpg = _bisect_threshold(lambda rho: float(np.max(a - rho * bu)), rho_step, rho_max)
    wm, wmg = _bisect_threshold(lambda rho: float(np.max(-a - rho * bs)), rho_step, rho_max)
    diag = {"max_weight_rate": float(a.max()), "min_weight_rate": float(a.min()), "n_orbits": len(rows),
            "argmax_orbit": rows[int(np.argmax(a / bu))]["orbit_id"]}
    return ThresholdReport(wp, wm, "periodic-orbit-max", P, rho_step, wpg, wmg, rows, diag)


def metric_independence_check(system, weight, P=10, metric=None, rho_step=RHO_STEP):
    """Thresholds under the flat metric and under a smooth alternative metric."""
    if metric is None:
        def metric(x):
            c, s = math.cos(2 * math.pi * x[0]), math.sin(2 * math.pi * x[1])
            return np.array([[2.0 + 0.5 * c, 0.3 * s], [0.3 * s, 1.0 + 0.25 * s * s]])
    r0 = forward_threshold(system, weight, P, rho_step)
    r1 = forward_threshold(system, weight, P, rho_step, metric=metric)
    return r0.omega_plus, r1.omega_plus


# ---------------------------------------------------------------------------
# doubling estimator
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SubadditiveSpec:
    kind: str = "birkhoff"  # birkhoff | cocycle
    potential: object = 0.0  # float, Grid2Field or callable(x1, x2) for birkhoff
    lipschitz: float = 0.0


@dataclass
class ConvergenceReport:
    T: list
    doubling: list
    orbit_max: float
    gap: float
    spot_check_max_violation: float


def _lattice_perm(A, n):
    i = np.arange(n)
    I, J = np.meshgrid(i, i, indexing="ij")
    return ((A[0, 0] * I + A[0, 1] * J) % n).ravel() * n + ((A[1, 0] * I + A[1, 1] * J) % n).ravel()


def _potential_on_lattice(pot, n):
    x1, x2 = lattice_points(n)
    if callable(pot) and not hasattr(pot, "values"):
        return np.asarray(pot(x1, x2), dtype=float).ravel()
    if hasattr(pot, "values"):
        if pot.n != n:
            raise ValueError("potential grid mismatch")
        return pot.values.real.ravel()
    return np.full(n * n, float(pot))


def subadditive_limit(spec, system, m_max=10, P=12, n=256, n_checks=200, seed=0, orbits=None):
    """
    sup_x g(x, 2^m) / 2^m over the lattice (1/n)Z^2 for m = 1..m_max, by
    doubling g(x, 2T) = g(x, T) + g(A^T x, T) on the exact lattice
    permutation, next to the periodic-orbit maximum up to period P.
    """
    m, _ = _parts(system)
    if m.is_perturbed:
        raise ValueError("doubling on the lattice needs a linear base")
    A = m.matrix
    perm = _lattice_perm(A, n)
    rng = np.random.default_rng(seed)
    if spec.kind == "birkhoff":
        g1 = _potential_on_lattice(spec.potential, n)

        def direct(idx, T):
            s, cur = 0.0, idx
            for _ in range(T):
                s += g1[cur]
                cur = perm[cur]
            return s, cur
        viol = 0.0
        for _ in range(n_checks):
            idx = int(rng.integers(n * n))
            T1, T2 = int(rng.integers(1, 20)), int(rng.integers(1, 20))
            a, y = direct(idx, T1)
            b, _ = direct(y, T2)
            c, _ = direct(idx, T1 + T2)
            viol = max(viol, c - (a + b))
        if viol > 1e-9:
            raise SubadditivityError(f"family not subadditive (violation {viol:.3e})")
        g, p = g1.copy(), perm.copy()
        Ts, vals = [], []
        for k in range(1, m_max + 1):
            g = g + g[p]
            p = p[p]
            Ts.append(2**k)
            vals.append(float(np.max(g)) / 2**k)
        orbits = orbits if orbits is not None else enumerate_periodic_orbits(m, P).orbits
        pot = spec.potential
        om = -math.inf
        for o in orbits:
            pts = o.points
            if hasattr(pot, "evaluate"):
                v = pot.evaluate(pts).real
            elif callable(pot):
                v = np.asarray(pot(pts[:, 0], pts[:, 1]), dtype=float)
            else:
                v = np.full(len(pts), float(pot))
            om = max(om, float(np.mean(v)))
    elif spec.kind == "cocycle":
        # g(x, T) = log ||D f^T(x)||; constant for a linear base
        Af = A.astype(float)
        Ts, vals = [], []
        M = Af.copy()
        viol = 0.0
        for _ in range(n_checks):
            T1, T2 = int(rng.integers(1, 15)), int(rng.integers(1, 15))
            lhs = math.log(np.linalg.norm(np.linalg.matrix_power(Af, T1 + T2), 2))
            rhs = math.log(np.linalg.norm(np.linalg.matrix_power(Af, T1), 2)) + \
                math.log(np.linalg.norm(np.linalg.matrix_power(Af, T2), 2))
            viol = max(viol, lhs - rhs)
        if viol > 1e-9:
            raise SubadditivityError(f"family not subadditive (violation {viol:.3e})")
        logscale = 0.0
        for k in range(1, m_max + 1):
            M = M @ M
            logscale *= 2
            nrm = np.linalg.norm(M, 2)
            M = M / nrm
            logscale += math.log(nrm)
            Ts.append(2**k)
            vals.append(logscale / 2**k)
        om = m.log_lambda
    else:
        raise ValueError(f"unknown family kind {spec.kind!r}")
    return ConvergenceReport(Ts, vals, om, vals[-1] - om, viol)


# ---------------------------------------------------------------------------
# foliation thresholds and cone comparison
# ---------------------------------------------------------------------------


def foliation_threshold(lyap, volume_preserving_3d=False):
    num = lyap.lambda_u_max + lyap.lambda_s_max
    if lyap.lambda_u_min == 0 or lyap.lambda_s_min == 0:
        raise ZeroDivisionError("zero Lyapunov exponent in the denominator")
    bound = max(num / lyap.lambda_u_min, num / lyap.lambda_s_min)
    return min(bound, 2.0) if volume_preserving_3d else bound


def _angle_between_lines(u, v):
    c = abs(float(u @ v)) / (np.linalg.norm(u) * np.linalg.norm(v))
    return math.acos(min(1.0, c))


def cone_expansion_equivalence_check(system, cone, T=10, n_points=16, n_dirs=41, seed=0):
    """
    Ratio Lambda(phi_{-T} x, T) * ||D f^T|_{E_u}|| over sampled x and T = 1..T,
    with Lambda(y, T) = sup over cone covectors of |xi| / |(D_y f^T)^T xi|.
    Returns (min, max) of the ratio.
    """
    m, roof = _parts(system)
    if isinstance(system, AnosovFlow) and system.roof_constant is None:
        raise ValueError("cone check needs a constant roof")
    if not cone.is_conic:
        raise ValueError("cone symbol needs a direction")
    axis = np.asarray(cone.direction)
    rng = np.random.default_rng(seed)
    pts = rng.random((n_points, 2))
    ratios = []
    for y0 in pts:
        fr = splitting_at(m, y0)
        es_star = fr.eta_s
        eu_star = fr.eta_u
        if _angle_between_lines(axis, es_star) >= cone.half_angle:
            raise ValueError("cone does not contain E*_s")
        if _angle_between_lines(axis, eu_star) <= cone.half_angle:
            raise ValueError("cone meets E*_u")
        th0 = math.atan2(axis[1], axis[0])
        thetas = th0 + np.linspace(-cone.half_angle, cone.half_angle, n_dirs)
        xis = np.column_stack([np.cos(thetas), np.sin(thetas)])
        D = np.eye(2)
        y = np.atleast_2d(y0)
        v = fr.e_u.copy()
        for t in range(1, T + 1):
            D = m.derivative(y)[0] @ D
            v = m.derivative(y)[0] @ v
            y = m(y)
            Lam = np.max(np.linalg.norm(xis, axis=1) / np.linalg.norm(xis @ D, axis=1))
            exp_u = np.linalg.norm(v) / np.linalg.norm(fr.e_u)
            ratios.append(Lam * exp_u)
    r = np.array(ratios)
    return float(r.min()), float(r.max())


def stable_covector_ratio(system, T=10, x=(0.1, 0.2)):
    """The same ratio for xi exactly on E*_s (one direction)."""
    m, _ = _parts(system)
    fr = splitting_at(m, x)
    D = np.eye(2)
    y = np.atleast_2d(np.asarray(x, float))
    v = fr.e_u.copy()
    out = []
    for _ in range(T):
        J = m.derivative(y)[0]
        D = J @ D
        v = J @ v
        y = m(y)
        xi = fr.eta_s
        out.append(np.linalg.norm(xi) / np.linalg.norm(xi @ D) * np.linalg.norm(v) / np.linalg.norm(fr.e_u))
    return out


def stable_cone(system, half_angle, r_lo=0.0):
    m, _ = _parts(system)
    fr = splitting_at(m, (0.0, 0.0))
    return ConeSymbol(tuple(fr.eta_s / np.linalg.norm(fr.eta_s)), half_angle, r_lo=r_lo)


# ---------------------------------------------------------------------------
# direct-integral threshold
# ---------------------------------------------------------------------------


@dataclass
class SobolevThreshold:
    omega: float
    pressure: float
    fit_residual: float
    T: list
    log_integrals: list


def sobolev_threshold_integral(system, v, rho_step=RHO_STEP, T_max=6, n=None, rho_max=8.0, fit_tol=0.05):
    """
    Zero of rho -> lim (1/T) log int exp(S_T v) ||D phi_{-T}|_{E_u}||^rho, with
    the integral evaluated on the lattice (1/n)Z^2 and the growth rate from a
    linear fit over T = 1..T_max.  Linear base only (constant expansion).
    """
    m, _ = _parts(system)
    if m.is_perturbed:
        raise ValueError("direct-integral threshold implemented for a linear base")
    if isinstance(system, AnosovFlow) and system.roof_constant != 1.0:
        raise ValueError("direct-integral threshold needs a unit roof")
    w = _as_weight(v)
    if n is None:
        n = w.field.n if isinstance(w.field, Grid2Field) else 1024
    vals = w.lattice_values(n).ravel() if not w.is_constant else np.full(n * n, float(w.field))
    perm_inv = np.argsort(_lattice_perm(m.matrix, n))
    S = np.zeros(n * n)
    cur = vals.copy()
    logs = []
    Ts = list(range(1, T_max + 1))
    for _ in Ts:
        cur = cur[perm_inv]  # v o A^{-t}
        S = S + cur
        mx = float(S.max())
        logs.append(mx + math.log(float(np.mean(np.exp(S - mx)))))
    logs = np.array(logs)
    slope, icpt = np.polyfit(Ts, logs, 1)
    resid = float(np.max(np.abs(logs - (slope * np.array(Ts) + icpt))))
    if resid > fit_tol:
        raise HorizonError(f"horizon too short: linear-fit residual {resid:.3e}")
    lam = m.log_lambda

    def rate(rho):
        return slope - rho * lam

    omega, _ = _bisect_threshold(rate, rho_step, rho_max)
    return SobolevThreshold(omega, float(slope), resid, Ts, logs.tolist())
