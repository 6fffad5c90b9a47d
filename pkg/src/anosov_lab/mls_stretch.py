"""
Geodesic-stretch experiments.

Suspension side: a roof change r -> r' over a common base is a time change
with stretch a = r'/r, and every claim about orbit integrals is exact up to
round-off.  Surface side: first-order length formula for conformal
perturbations of the Bolza metric.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.special import beta as beta_fn

from .cohomology import (
    ObstructionError,
    coboundary,
    coboundary_free_part,
    livsic_solve,
    quotient_seminorm_lower,
)
from .lp_calculus import ConfigurationError, Grid2Field, smoothstep
from .orbits import (
    ConformalFactor,
    Discretization,
    axis_integral,
    enumerate_periodic_orbits,
    geodesic_length_word,
    orbit_period,
    perturbed_geodesic_length,
)
from .systems import suspension_flow


class ReparameterizationError(ValueError):
    pass


def _real_at(f, pts):
    return np.real(f.evaluate(np.atleast_2d(pts)))


@dataclass
class StretchField:
    """
    a = r'/r, constant along each vertical segment of the r-suspension.
    Kept as the pair of roofs so that point values are exact quotients of
    spectrally evaluated roofs.
    """

    r: Grid2Field
    r_prime: Grid2Field
    reference_id: str = ""
    target_id: str = ""

    def __call__(self, pts):
        return _real_at(self.r_prime, pts) / _real_at(self.r, pts)

    def grid_values(self):
        return self.r_prime.values.real / self.r.values.real

    def minus_one(self):
        """a - 1 as a callable (for orbit averages)."""
        return lambda x1, x2: self(np.column_stack([x1, x2])) - 1.0


def _positive(f, name):
    v = f.values
    if np.max(np.abs(np.imag(v))) > 1e-12 or float(np.min(v.real)) <= 0:
        raise ConfigurationError(f"{name} must be real and strictly positive")


def stretch_from_roofs(r, r_prime, base=None):
    _positive(r, "r")
    _positive(r_prime, "r'")
    sid = base.system_id if base is not None else ""
    return StretchField(r, r_prime, f"{sid}/r", f"{sid}/r'")


def stretch_orbit_integral(a, orbit):
    """int over the r-orbit of a: sum of r(x_i) a(x_i)."""
    pts = orbit.points
    return float(np.sum(_real_at(a.r, pts) * a(pts)))


def compose(a1, a2):
    """Stretch of r -> r'' from r -> r' and r' -> r''."""
    if a1.r_prime is not a2.r and not np.array_equal(a1.r_prime.values, a2.r.values):
        raise ConfigurationError("stretches do not chain: target of the first is not the source of the second")
    return StretchField(a1.r, a2.r_prime, a1.reference_id, a2.target_id)


# ---------------------------------------------------------------------------
# spectra
# ---------------------------------------------------------------------------


@dataclass
class MLSComparison:
    rows: list = field(default_factory=list)  # orbit_id, steps, L_r, L_r2, rel_change, avg_a_minus_1, residual

    def max_residual(self):
        return max((abs(r["residual"]) for r in self.rows), default=0.0)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        cols = ["orbit_id", "period_steps", "length_system_a", "length_system_b", "ratio", "avg_a_minus_1", "residual"]
        w.writerow(cols)
        for r in self.rows:
            w.writerow([r["orbit_id"], r["steps"], repr(r["L_r"]), repr(r["L_r2"]), repr(r["L_r2"] / r["L_r"]),
                        repr(r["avg_a_minus_1"]), repr(r["residual"])])
        return buf.getvalue()


def mls_compare(flow_r, flow_r2, P, orbits=None):
    """
    Per orbit: L_{r'}/L_r - 1 against the r-orbit average of a - 1.  In the
    roof model these agree identically; the residual column is round-off.
    """
    if flow_r.base.system_id != flow_r2.base.system_id:
        raise ConfigurationError("flows must share the base map")
    orbits = orbits or enumerate_periodic_orbits(flow_r.base, P)
    a = stretch_from_roofs(flow_r.roof, flow_r2.roof, flow_r.base)
    out = MLSComparison()
    for o in orbits:
        if o.period > P:
            continue
        L1 = orbit_period(flow_r, o)
        L2 = orbit_period(flow_r2, o)
        avg = (stretch_orbit_integral(a, o) - L1) / L1
        rel = L2 / L1 - 1.0
        out.rows.append({"orbit_id": o.orbit_id, "steps": o.period, "L_r": L1, "L_r2": L2,
                         "avg_a_minus_1": avg, "residual": rel - avg})
    return out


def spectrum_rigidity_check(r, r_prime, base, P, tol=1e-10, orbits=None):
    """
    (spectra agree up to P, quotient seminorm of a - 1 below tol).
    The two booleans coincide: a is cohomologous to 1 iff the periods match.
    """
    orbits = orbits or enumerate_periodic_orbits(base, P)
    f1 = suspension_flow(base, r)
    f2 = suspension_flow(base, r_prime)
    gap = max(abs(orbit_period(f1, o) - orbit_period(f2, o)) for o in orbits)
    a = stretch_from_roofs(r, r_prime, base)
    s = quotient_seminorm_lower(a.minus_one(), orbits, f1)
    return gap <= tol, s <= tol, gap, s


# ---------------------------------------------------------------------------
# reparameterization
# ---------------------------------------------------------------------------


def _eta(s, order=6):
    return smoothstep(s, order)


def _deta(s, order=6):
    s = np.clip(np.asarray(s, float), 0.0, 1.0)
    return s**order * (1 - s) ** order / beta_fn(order + 1, order + 1)


@dataclass
class GluedFunction:
    """
    u(x, s) = (1 - eta(s)) g(x) + eta(s) g(A x) on the normalized mapping
    torus (s in [0, 1]); eta is flat to order 6 at both ends, so u is C^6
    across the gluing (x, 1) ~ (A x, 0).
    """

    g: Grid2Field
    matrix: np.ndarray
    order: int = 6

    def _gg(self, x):
        x = np.atleast_2d(x)
        ax = np.mod(x @ np.asarray(self.matrix, float).T, 1.0)
        return _real_at(self.g, x), _real_at(self.g, ax)

    def value(self, x, s):
        g0, g1 = self._gg(x)
        e = _eta(s, self.order)
        return (1 - e) * g0 + e * g1

    def dvalue_ds(self, x, s):
        g0, g1 = self._gg(x)
        return _deta(s, self.order) * (g1 - g0)


def glued_test_function(g, matrix, order=6):
    return GluedFunction(g, np.asarray(matrix), order)


class _OrbitTime:
    """Time parametrization of a closed r-orbit: segment i is [T_i, T_i + r_i)."""

    def __init__(self, a, orbit, u):
        self.pts = orbit.points
        self.r = _real_at(a.r, self.pts)
        self.avals = a(self.pts)
        self.T = np.concatenate([[0.0], np.cumsum(self.r)])
        self.L = float(self.T[-1])
        self.u = u
        self.p = len(self.r)

    def seg(self, t):
        t = t % self.L
        i = int(np.searchsorted(self.T, t, side="right") - 1)
        return min(i, self.p - 1)

    def u_at(self, t):
        if not isinstance(self.u, GluedFunction):
            return 0.0 if self.u is None else float(self.u)
        i = self.seg(t)
        s = (t % self.L - self.T[i]) / self.r[i]
        return float(self.u.value(self.pts[i:i + 1], np.array([s]))[0])

    def xu(self, t_arr, i):
        """Xu along segment i (t inside it)."""
        if not isinstance(self.u, GluedFunction):
            return np.zeros_like(t_arr)
        s = (t_arr - self.T[i]) / self.r[i]
        x = np.repeat(self.pts[i:i + 1], len(t_arr), axis=0)
        return self.u.dvalue_ds(x, s) / self.r[i]

    def shifted_segment(self, t):
        """Segment index (mod p) of the point at time t + u(t)."""
        return self.seg(t + self.u_at(t))


def reparam_invariance_check(a, u, orbits, n_nodes=16):
    """
    max over orbits of |int a - int a'|, a' = (1 + Xu) a o Upsilon_u, where
    Upsilon_u moves a point by time u along its orbit.  The integral of a'
    is computed by Gauss-Legendre on the pieces cut out by the segment
    boundaries of t and of t + u(t) (located with brentq).

    u: None, a constant, or a GluedFunction.
    """
    nodes, weights = np.polynomial.legendre.leggauss(n_nodes)
    worst = 0.0
    for o in orbits:
        ot = _OrbitTime(a, o, u)
        ref = float(np.sum(ot.r * ot.avals))

        def g(t):
            return t + ot.u_at(t)

        # the positivity of 1 + Xu on the sampled segments
        for i in range(ot.p):
            tt = ot.T[i] + ot.r[i] * (0.5 * (nodes + 1))
            if np.min(1 + ot.xu(tt, i)) <= 0:
                raise ReparameterizationError("1 + Xu <= 0: not a reparameterization")
        # breakpoints: source segment ends and preimages of target boundaries
        cuts = set(float(x) for x in ot.T)
        g0, gL = g(0.0), g(ot.L)
        for m in range(int(math.floor(g0 / ot.L)) - 1, int(math.ceil(gL / ot.L)) + 1):
            for Tk in ot.T[:-1]:
                c = Tk + m * ot.L
                if g0 < c < gL:
                    # bracket within one source segment
                    lo = 0.0
                    hi = ot.L
                    for i in range(ot.p):
                        if g(ot.T[i]) <= c <= g(ot.T[i + 1]):
                            lo, hi = ot.T[i], ot.T[i + 1]
                            break
                    cuts.add(float(brentq(lambda t: g(t) - c, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)))
        cuts = np.array(sorted(cuts))
        total = 0.0
        for ta, tb in zip(cuts[:-1], cuts[1:]):
            if tb - ta <= 0:
                continue
            mid = 0.5 * (ta + tb)
            i = ot.seg(mid)
            k = ot.shifted_segment(mid)
            tt = mid + 0.5 * (tb - ta) * nodes
            vals = (1 + ot.xu(tt, i)) * ot.avals[k]
            total += 0.5 * (tb - ta) * float(np.sum(weights * vals))
        worst = max(worst, abs(total - ref))
    return worst


# ---------------------------------------------------------------------------
# stability
# ---------------------------------------------------------------------------


@dataclass
class StabilityReport:
    rows: list = field(default_factory=list)  # sample, residual_norm, s_lower, ratio
    flagged: list = field(default_factory=list)
    skipped: list = field(default_factory=list)
    P: int = 0
    nu: float = 0.0

    @property
    def max_ratio(self):
        r = [row["ratio"] for row in self.rows]
        return max(r) if r else None

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["sample", "residual_norm", "s_lower", "ratio"])
        for r in self.rows:
            w.writerow([r["sample"], repr(r["residual_norm"]), repr(r["s_lower"]), repr(r["ratio"])])
        return buf.getvalue()

    def summary(self):
        return {"P": self.P, "nu": self.nu, "max_ratio": self.max_ratio, "n_samples": len(self.rows),
                "flagged": self.flagged, "skipped": self.skipped}

    def to_json(self):
        return json.dumps(self.summary(), sort_keys=True, indent=2)


def solenoidal_part(dr, base):
    """
    dr minus its best coboundary: w solves w o A - w = dr - N(dr), and the
    representative dr - (w o A - w) is returned with w.
    """
    N = coboundary_free_part(dr, base)
    res = livsic_solve(dr - N, system=base, cross_check=False, tol=1e-8)
    rep = dr - coboundary(res.u, base)
    return rep, res.u


def stability_experiment(r0, family, P, base, orbits=None, skip_tol=1e-12):
    """
    For each roof perturbation dr: s_lower = quotient seminorm (over orbits
    up to P) of a - 1 = dr / r0, and the sup norm of the coboundary-free
    representative of dr.  Both are positively homogeneous of degree one
    in dr, so their ratio does not see the amplitude.
    """
    _positive(r0, "r0")
    orbits = orbits or enumerate_periodic_orbits(base, P)
    flow = suspension_flow(base, r0)
    rep = StabilityReport(P=P, nu=0.0)
    for i, dr in enumerate(family):
        try:
            rep_dr, _ = solenoidal_part(dr, base)
        except ObstructionError as e:
            rep.flagged.append({"sample": i, "reason": str(e)})
            continue
        a_minus_1 = (lambda d: (lambda x1, x2: _real_at(d, np.column_stack([x1, x2]))
                                / _real_at(r0, np.column_stack([x1, x2]))))(dr)
        s_lower = quotient_seminorm_lower(a_minus_1, orbits, flow)
        resid = float(np.max(np.abs(rep_dr.values)))
        if s_lower <= skip_tol:
            rep.skipped.append(i)
            continue
        rep.rows.append({"sample": i, "residual_norm": resid, "s_lower": s_lower, "ratio": resid / s_lower})
    return rep


# ---------------------------------------------------------------------------
# conformal surface
# ---------------------------------------------------------------------------


@dataclass
class LinearizationFit:
    word: str
    eps: list
    R: list
    slope: float | None
    L0: float

    def to_dict(self):
        return {"word": self.word, "eps": self.eps, "R": self.R, "slope": self.slope, "L0": self.L0}


def _geometric(eps_list):
    e = np.asarray(eps_list, float)
    if len(e) < 3 or np.any(e <= 0):
        return False
    q = e[1:] / e[:-1]
    return bool(np.allclose(q, q[0], rtol=1e-9))


def conformal_linearization_experiment(group, sigma, eps_list, words, disc=None):
    """
    R(eps) = L_{eps sigma}(c)/L_0(c) - 1 - (1/L_0) int_{gamma_0} eps sigma, and the
    slope of log|R| against log eps (expected 2).
    """
    if not isinstance(sigma, ConformalFactor):
        raise ConfigurationError("sigma must be a ConformalFactor")
    if not _geometric(eps_list):
        raise ConfigurationError("eps_list needs at least 3 positive values in geometric progression")
    disc = disc or Discretization()
    fits = []
    for w in words:
        L0 = geodesic_length_word(group, w)
        Rs = []
        for eps in eps_list:
            s = sigma.scaled(eps)
            L = perturbed_geodesic_length(group, w, s, disc)
            I, _ = axis_integral(group, w, s, disc.n_points)
            Rs.append(L / L0 - 1.0 - I / L0)
        R = np.abs(np.array(Rs))
        slope = None
        if np.all(R > 0):
            slope = float(np.polyfit(np.log(eps_list), np.log(R), 1)[0])
        fits.append(LinearizationFit(w, list(map(float, eps_list)), Rs, slope, L0))
    return fits
