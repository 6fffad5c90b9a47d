"""
Ratio sweeps for the radial source estimate and for standard propagation,
using cone multipliers and the exact propagator of the cat-map suspension.

All sweeps run on the slice (return map) of the unit-roof suspension.  The
time-one backward propagator is L u = (e^v u) o A^{-1}; on coefficients it
reads (L u)^(k) = (e^v u)^(B k), B = A^T, with frequencies leaving the grid
dropped (no aliasing).  The discrete derivation is D u = u - L u.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .cohomology import CocycleWeight
from .lp_calculus import (
    ConeSymbol,
    ConfigurationError,
    CutoffSpec,
    Grid2Field,
    GridSpec,
    MappingTorusField,
    build_lp_filters,
    hz_norm,
    hz_norm_coeffs,
    lattice_compose,
    plane_wave,
    lattice_k,
    symbol_table,
    xi_grid,
)
from .systems import AnosovFlow, AnosovMap, splitting_at


class SaturationError(ValueError):
    pass


def _map_of(system):
    return system.base if isinstance(system, AnosovFlow) else system


def _weight(weight):
    if weight is None:
        return CocycleWeight.trivial()
    if isinstance(weight, CocycleWeight):
        return weight
    return CocycleWeight("scalar", weight)


def _angle_of(v):
    return math.atan2(v[1], v[0])


def _line_angle(u, v):
    c = abs(float(np.dot(u, v))) / (np.linalg.norm(u) * np.linalg.norm(v))
    return math.acos(min(1.0, c))


# ---------------------------------------------------------------------------
# propagators
# ---------------------------------------------------------------------------


def propagator_apply(system, t, f, weight=None, allow_interpolation=False):
    """
    e^{-tX} f = exp(int_0^t v o phi_{-tau}) f o phi_{-t}.

    Mapping-torus fields go through the exact slice propagator.  A slice
    field (Grid2Field) is moved by whole return times: t must be an integer
    and the lattice permutation is exact.
    """
    w = _weight(weight)
    if isinstance(f, MappingTorusField):
        if not isinstance(system, AnosovFlow):
            raise ConfigurationError("mapping-torus fields need a flow")
        fld = None if (w.kind == "phase" or (w.is_constant and float(w.field) == 0.0)) else (
            float(w.field) if w.is_constant else w.field)
        return system.propagate(f, t, fld)
    m = _map_of(system)
    if abs(t - round(t)) > 1e-12:
        if not allow_interpolation:
            raise ConfigurationError("t must be a whole number of return times on a slice")
        raise NotImplementedError("interpolated slice propagation")
    t = int(round(t))
    vals = f.values
    logw = np.zeros(vals.shape)
    wv = w.lattice_values(f.n)
    A = m.matrix
    for _ in range(abs(t)):
        if t > 0:
            # one step back along the flow: (x) <- A^{-1} x
            logw = lattice_compose(logw + wv, A, -1)
            vals = lattice_compose(vals, A, -1)
        else:
            vals = lattice_compose(vals, A, 1)
            logw = lattice_compose(logw, A, 1) - wv
    if np.any(logw != 0):
        vals = vals * np.exp(logw)
    return f.with_values(vals)


@dataclass
class SpectralPropagator:
    """Frequency-domain L with truncation at the grid boundary."""

    n: int
    matrix: np.ndarray
    weight: CocycleWeight

    def __post_init__(self):
        k = lattice_k(self.n)
        K1, K2 = np.meshgrid(k, k, indexing="ij")
        B = np.asarray(self.matrix, dtype=np.int64).T
        t1 = B[0, 0] * K1 + B[0, 1] * K2
        t2 = B[1, 0] * K1 + B[1, 1] * K2
        half = self.n // 2
        self.inside = (t1 >= -half) & (t1 < half) & (t2 >= -half) & (t2 < half)
        self.src = (np.where(self.inside, t1 % self.n, 0), np.where(self.inside, t2 % self.n, 0))
        self.const = self.weight.kind == "scalar" and self.weight.is_constant
        self.c = float(self.weight.field) if self.const else None

    def apply_coeffs(self, c):
        if not self.const:
            w = np.exp(self.weight.lattice_values(self.n))
            c = np.fft.fft2(np.fft.ifft2(c) * w)
            scale = 1.0
        else:
            scale = math.exp(self.c)
        out = np.where(self.inside, c[self.src], 0.0)
        return scale * out

    def __call__(self, u):
        return Grid2Field(u.spec, coeffs=self.apply_coeffs(u.coeffs))

    def D(self, u):
        return Grid2Field(u.spec, coeffs=u.coeffs - self.apply_coeffs(u.coeffs))


# ---------------------------------------------------------------------------
# radial pair
# ---------------------------------------------------------------------------


@dataclass
class RadialPair:
    A_op: ConeSymbol
    B_op: ConeSymbol
    h0: float
    T: int
    max_B_deficit: float = 0.0


def stable_dual_direction(system):
    m = _map_of(system)
    fr = splitting_at(m, (0.0, 0.0))
    v = fr.eta_s / np.linalg.norm(fr.eta_s)
    return v, fr.eta_u / np.linalg.norm(fr.eta_u)


def sample_cone(sym, n, rng, r_max=None):
    """Random covectors in the support of a cone symbol with r_lo < |xi| < r_max."""
    d = np.asarray(sym.direction)
    th0 = _angle_of(d)
    th = th0 + rng.uniform(-sym.half_angle, sym.half_angle, n)
    sign = rng.choice([-1.0, 1.0], n)
    hi = r_max if r_max is not None else (sym.r_hi if math.isfinite(sym.r_hi) else 4 * max(sym.r_lo, 1.0))
    r = rng.uniform(max(sym.r_lo, 1e-9), hi, n)
    return (sign * r)[:, None] * np.column_stack([np.cos(th), np.sin(th)])


def transport(xi, matrix, t):
    """Frequency image of xi after backward time t (xi -> B^t xi)."""
    B = np.asarray(matrix, dtype=float).T
    M = np.linalg.matrix_power(B, t) if t >= 0 else np.linalg.matrix_power(np.linalg.inv(B), -t)
    return xi @ M.T


def make_radial_pair(system, half_angle, h0=1.0, T=None, n_samples=100, seed=0, r_lo=4.0, widen=1.5,
                     T_max=12):
    """
    A: cone of aperture half_angle about E*_s with |h0 xi| > r_lo.
    B: aperture widen*half_angle, |h0 xi| > r_lo/2, required to be 1 along
    B^t(supp A), t = 0..T (validated on samples).  T defaults to the
    smallest horizon after which the transported samples sit inside the
    plateau of A itself, so later times add nothing new.
    """
    m = _map_of(system)
    es, eu = stable_dual_direction(m)
    if half_angle <= 0:
        raise ValueError("half_angle must be positive")
    gap = _line_angle(es, eu)
    if widen * half_angle >= gap:
        raise SaturationError(
            f"half_angle {math.degrees(half_angle):.1f} deg: the enlarged cone reaches E*_u "
            f"({math.degrees(gap):.1f} deg away); use a smaller half_angle")
    A_op = ConeSymbol(tuple(es), half_angle, r_lo=r_lo / h0)
    B_op = ConeSymbol(tuple(es), widen * half_angle, r_lo=r_lo / (2 * h0))
    rng = np.random.default_rng(seed)
    xs = sample_cone(A_op, n_samples, rng)
    # certified horizon: samples come back inside supp A with larger radius
    if T is None:
        T = T_max
        for t in range(1, T_max + 1):
            y = transport(xs, m.matrix, t)
            if np.all(A_op(y[:, 0], y[:, 1]) > 0.999):
                T = t
                break
    worst = 0.0
    for t in range(0, T + 1):
        y = transport(xs, m.matrix, t)
        worst = max(worst, float(np.max(1.0 - B_op(y[:, 0], y[:, 1]))))
    if worst > 1e-12:
        raise SaturationError(f"B is not 1 on the backward saturation of supp A (deficit {worst:.3e}); "
                              "use a smaller half_angle or a larger B")
    return RadialPair(A_op, B_op, h0, T, worst)


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------


@dataclass
class SweepReport:
    rho: float
    N: int
    T: int
    rows: list = field(default_factory=list)  # dicts: sample, h, lhs, rhs, ratio
    slope: float | None = None
    slope_ci: tuple | None = None
    stability: float | None = None
    predicted_slope: float | None = None
    skipped: int = 0

    def by_h(self, stat="max"):
        hs = sorted({r["h"] for r in self.rows}, reverse=True)
        f = np.max if stat == "max" else np.median
        return hs, [float(f([r["ratio"] for r in self.rows if r["h"] == h])) for h in hs]

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["sample", "h", "lhs", "rhs", "ratio"])
        for r in self.rows:
            w.writerow([r["sample"], repr(r["h"]), repr(r["lhs"]), repr(r["rhs"]), repr(r["ratio"])])
        return buf.getvalue()

    def summary(self):
        return {"rho": self.rho, "N": self.N, "T": self.T, "slope": self.slope,
                "slope_ci": list(self.slope_ci) if self.slope_ci else None, "stability": self.stability,
                "predicted_slope": self.predicted_slope, "skipped": self.skipped, "n_rows": len(self.rows)}

    def to_json(self):
        return json.dumps(self.summary(), sort_keys=True, indent=2)


def cone_lattice_points(spec, direction, half_angle, r_lo, r_hi):
    """Integer frequencies k with |2 pi k| in [r_lo, r_hi] within half_angle of the line."""
    n = spec.n_side
    x1, x2 = xi_grid(n)
    r = np.hypot(x1, x2)
    d = np.asarray(direction, float)
    with np.errstate(invalid="ignore", divide="ignore"):
        c = np.abs(x1 * d[0] + x2 * d[1]) / r
    ang = np.arccos(np.clip(np.nan_to_num(c), 0, 1))
    mask = (r >= r_lo) & (r <= r_hi) & (ang <= half_angle)
    k = lattice_k(n)
    idx = np.argwhere(mask)
    return np.column_stack([k[idx[:, 0]], k[idx[:, 1]]])


def chain_seeds(spec, pair, r_range=(8.0, 40.0), matrix=None):
    """
    Lattice frequencies m0 on the plateau of B whose one-step preimage
    B^{-1} m0 lies outside supp B: a chain started there has no D-defect
    inside B at its lower end.
    """
    n = spec.n_side
    x1, x2 = xi_grid(n)
    h0 = pair.h0
    Bt = np.asarray(matrix, dtype=float).T
    Binv = np.linalg.inv(Bt)
    r = np.hypot(x1, x2)
    on = (pair.B_op(h0 * x1, h0 * x2) == 1.0) & (r >= r_range[0]) & (r <= r_range[1])
    y1 = Binv[0, 0] * x1 + Binv[0, 1] * x2
    y2 = Binv[1, 0] * x1 + Binv[1, 1] * x2
    off = pair.B_op(h0 * y1, h0 * y2) == 0.0
    k = lattice_k(n)
    idx = np.argwhere(on & off)
    return np.column_stack([k[idx[:, 0]], k[idx[:, 1]]])


def invariant_chain(spec, m0, amp, c, xi_max, matrix):
    """
    Real field with coefficient amp * e^{-c t} at B^t m0 while |2 pi B^t m0| <= xi_max.
    L u = u along the chain, so D u lives only at its two ends.
    """
    n = spec.n_side
    B = np.asarray(matrix, dtype=np.int64).T
    coef = np.zeros((n, n), dtype=complex)
    k = np.asarray(m0, dtype=np.int64)
    t = 0
    while 2 * np.pi * np.hypot(*k) <= xi_max:
        if np.any(np.abs(k) >= n // 2):
            raise ConfigurationError(f"chain frequency {tuple(k)} not resolvable at n_side = {n}")
        a = amp * math.exp(-c * t)
        coef[k[0] % n, k[1] % n] += a
        coef[-k[0] % n, -k[1] % n] += np.conj(a)
        k = B @ k
        t += 1
    return Grid2Field(spec, coeffs=coef)


def chain_family(spec, pair, h, c, matrix, n_samples, rng, n_chains=2):
    """Seeded family at scale h: sums of invariant chains cut at |xi| = 1.5/h."""
    seeds = chain_seeds(spec, pair, matrix=matrix)
    if len(seeds) == 0:
        raise ConfigurationError("no admissible chain seeds for this cone pair")
    out = []
    for _ in range(n_samples):
        f = Grid2Field(spec, coeffs=np.zeros((spec.n_side,) * 2, dtype=complex))
        for p in rng.choice(len(seeds), size=n_chains):
            a = rng.standard_normal() + 1j * rng.standard_normal()
            f = f + invariant_chain(spec, seeds[p], a, c, 1.5 / h, matrix)
        out.append(f)
    return out


def _fit(hs, vals):
    x = np.log2(1.0 / np.asarray(hs))
    y = np.log2(np.asarray(vals))
    if len(x) < 2:
        return None, None
    A = np.column_stack([x, np.ones_like(x)])
    coef, res, _, _ = np.linalg.lstsq(A, y, rcond=None)
    dof = max(len(x) - 2, 1)
    s2 = float(np.sum((y - A @ coef) ** 2)) / dof
    se = math.sqrt(s2 / float(np.sum((x - x.mean()) ** 2)))
    return float(coef[0]), (float(coef[0] - 2 * se), float(coef[0] + 2 * se))


def source_estimate_sweep(system, pair, rho, N=4, h_list=None, n_samples=50, weight=None, seed=0,
                          spec=None, omega=None, family=None):
    """
    Estimate ratios ||A u||_{C^rho} / (||B D u||_{C^rho} + ||u||_{C^-N}) for
    families resolved at each dyadic h.  The default family is made of
    chains that are invariant under L, started on the edge of B and cut at
    |xi| = 1.5/h.  Above the threshold the ratio stays bounded; below it the
    cut-off defect shrinks like h^{omega - rho} and the ratio grows.
    The median of log2(ratio) is fitted against log2(1/h).
    ``family`` may map h -> list of Grid2Field instead.
    """
    m = _map_of(system)
    spec = spec or GridSpec(256)
    h_list = h_list or [2.0**-k for k in range(5, 10)]
    w = _weight(weight)
    if not (w.kind == "scalar" and w.is_constant):
        raise ConfigurationError("source sweep implemented for constant weights")
    c = float(w.field)
    L = SpectralPropagator(spec.n_side, m.matrix, w)
    n = spec.n_side
    x1, x2 = xi_grid(n)
    Atab = pair.A_op(pair.h0 * x1, pair.h0 * x2)
    Btab = pair.B_op(pair.h0 * x1, pair.h0 * x2)
    bank = build_lp_filters(spec)
    rng = np.random.default_rng(seed)
    rep = SweepReport(rho, N, pair.T)
    for h in h_list:
        fields = family[h] if family is not None else chain_family(spec, pair, h, c, m.matrix, n_samples, rng)
        for i, u in enumerate(fields):
            Du = L.D(u)
            lhs = hz_norm_coeffs(u.coeffs * Atab, rho, bank)
            rhs = hz_norm_coeffs(Du.coeffs * Btab, rho, bank) + hz_norm_coeffs(u.coeffs, -N, bank)
            if rhs == 0:
                rep.skipped += 1
                continue
            rep.rows.append({"sample": i, "h": float(h), "lhs": lhs, "rhs": rhs, "ratio": lhs / rhs})
    if rep.rows:
        hs, med = rep.by_h("median")
        _, mx = rep.by_h("max")
        rep.slope, rep.slope_ci = _fit(hs, med)
        rep.stability = float(max(mx) / min(mx))
    if omega is not None:
        rep.predicted_slope = max(0.0, omega - rho)
    return rep


def propagation_pair(system, A_center_angle=None, half_angle=math.radians(8), T=3, r_lo=4.0):
    """
    A: cone midway between E*_s and E*_u.  D: a cone about B^T applied to the
    A axis that contains the time-T image of supp A.  B_op covers the images
    for t = 0..T.
    """
    m = _map_of(system)
    es, eu = stable_dual_direction(m)
    if A_center_angle is None:
        # bisector of the two lines
        d = es + eu if float(es @ eu) >= 0 else es - eu
    else:
        d = np.array([math.cos(A_center_angle), math.sin(A_center_angle)])
    d = d / np.linalg.norm(d)
    A_op = ConeSymbol(tuple(d), half_angle, r_lo=r_lo)
    D_op = _covering_cone(A_op, m.matrix, [T], r_lo)
    B_op = _covering_cone(A_op, m.matrix, list(range(T + 1)), r_lo)
    return A_op, B_op, D_op


def _covering_cone(A_op, matrix, times, r_lo, pad=1.3, width=0.25):
    """Cone whose plateau holds B^t(supp A) for t in ``times``."""
    d = np.asarray(A_op.direction)
    th0 = _angle_of(d)
    ths = th0 + np.linspace(-A_op.half_angle, A_op.half_angle, 65)
    rays = np.column_stack([np.cos(ths), np.sin(ths)])
    imgs = np.vstack([transport(rays, matrix, t) for t in times])
    radii = np.linalg.norm(imgs, axis=1)
    imgs = imgs / radii[:, None]
    # principal direction of the image lines
    M = imgs.T @ imgs
    vals, vecs = np.linalg.eigh(M)
    ax = vecs[:, -1]
    spread = max(_line_angle(ax, v) for v in imgs)
    half = min(pad * spread / (1 - width) + 1e-3, math.pi / 2 - 1e-6)
    r_min = r_lo * float(np.min(radii))
    return ConeSymbol(tuple(ax), half, r_lo=r_min / (1 + width) ** 2, width=width)


def validate_coverage(A_op, D_op, B_op, matrix, T, n_samples=200, seed=0):
    rng = np.random.default_rng(seed)
    xs = sample_cone(A_op, n_samples, rng)
    yT = transport(xs, matrix, T)
    defD = float(np.max(1.0 - D_op(yT[:, 0], yT[:, 1])))
    defB = 0.0
    for t in range(T + 1):
        y = transport(xs, matrix, t)
        defB = max(defB, float(np.max(1.0 - B_op(y[:, 0], y[:, 1]))))
    return defD, defB


def propagation_sweep(system, A_op, B_op, D_op, s, T, family=None, N=4, n_samples=50, seed=0, spec=None,
                      weight=None):
    """
    Ratios ||A u||_{C^s} / (||B D u||_{C^s} + ||D_op u||_{C^s} + ||u||_{C^-N}).
    The coverage of B^T(supp A) by D_op (and of the path by B_op) is checked
    on transported samples first.
    """
    m = _map_of(system)
    defD, defB = validate_coverage(A_op, D_op, B_op, m.matrix, T)
    if defD > 1e-9:
        raise SaturationError(f"D does not cover the time-{T} image of supp A (deficit {defD:.3e})")
    if defB > 1e-9:
        raise SaturationError(f"B does not cover the transport path (deficit {defB:.3e})")
    spec = spec or GridSpec(128)
    n = spec.n_side
    L = SpectralPropagator(n, m.matrix, _weight(weight))
    rng = np.random.default_rng(seed)
    if family is None:
        from .lp_calculus import random_trig_field

        family = [random_trig_field(spec, n // 2 - 1, rng, decay=1.5) for _ in range(n_samples)]
    tabA = symbol_table(A_op, n)
    tabB = symbol_table(B_op, n)
    tabD = symbol_table(D_op, n)
    ratios = []
    for u in family:
        Du = L.D(u)
        lhs = hz_norm(Grid2Field(spec, coeffs=u.coeffs * tabA), s)
        rhs = (hz_norm(Grid2Field(spec, coeffs=Du.coeffs * tabB), s)
               + hz_norm(Grid2Field(spec, coeffs=u.coeffs * tabD), s) + hz_norm(u, -N))
        ratios.append(lhs / rhs if rhs > 0 else 0.0)
    r = np.array(ratios)
    return {"max": float(r.max()), "median": float(np.median(r)), "min": float(r.min()),
            "ratios": r.tolist(), "coverage_deficit": (defD, defB)}


def telescoping_residual(u, L, T, sym=None):
    """
    A' u - [A' L^T u + sum_{t<T} A' L^t D u], with D = I - L.
    """
    n = u.n
    tab = symbol_table(sym, n) if sym is not None else np.ones((n, n))
    c = u.coeffs
    Dc = c - L.apply_coeffs(c)
    acc = np.zeros_like(c)
    cur = Dc
    for _ in range(T):
        acc += tab * cur
        cur = L.apply_coeffs(cur)
    LT = c
    for _ in range(T):
        LT = L.apply_coeffs(LT)
    lhs = tab * c
    rhs = tab * LT + acc
    return float(np.max(np.abs(np.fft.ifft2(lhs - rhs)))) * n * n


# ---------------------------------------------------------------------------
# block decay
# ---------------------------------------------------------------------------


def stable_plane_waves(spec, direction, k_min=1, ratio=1.0):
    """
    Real plane waves cos(2 pi k.x) with k the lattice point nearest r*direction.
    Radii run from k_min to the grid edge; ratio > 1 spaces them geometrically.
    """
    n = spec.n_side
    d = np.asarray(direction, float)
    d = d / np.linalg.norm(d)
    out = []
    seen = set()
    r = float(k_min)
    while True:
        k = np.round(r * d).astype(int)
        if np.any(np.abs(k) >= n // 2):
            break
        key = (int(k[0]), int(k[1]))
        if key not in seen and key != (0, 0):
            seen.add(key)
            out.append(key)
        r = max(r + 1.0, r * ratio)
    return [Grid2Field(spec, values=plane_wave(spec, k).values.real) for k in out]


@dataclass
class WaveFamily:
    """
    Real plane waves cos(2 pi k.x), k in ``ks``.  Their band components are
    phi_j(|xi|) cos(2 pi k.x), so every norm the probe needs is closed form
    and no grid is materialized.
    """

    ks: np.ndarray

    @classmethod
    def along(cls, direction, r_max, r_min=1.0):
        d = np.asarray(direction, float)
        d = d / np.linalg.norm(d)
        seen = []
        last = None
        for r in np.arange(r_min, r_max + 1.0):
            k = tuple(int(v) for v in np.round(r * d))
            if k != last and k != (0, 0):
                seen.append(k)
                last = k
        return cls(np.array(seen, dtype=np.int64))

    def xi(self):
        return 2 * np.pi * self.ks.astype(float)

    def hz_norms(self, s, cutoff=None):
        cutoff = cutoff or CutoffSpec()
        r = np.hypot(*self.xi().T)
        J = int(math.ceil(math.log2(max(r.max(), 2.0)))) + 2
        return np.max([2.0 ** (j * s) * cutoff.phi(j, r) for j in range(J + 1)], axis=0)


def block_decay_probe(system, u_family, rho, T_list, h=1.0, cone=None, cutoff=None, weight=None):
    """
    For each T: max over the family of
    ||e^{-T X} P_h^T u||_inf / (h^rho ||u||_{C^rho}),
    with P_h^T = cone(h xi) * chi(2 |h xi| Lambda_T), chi = 1 - psi(2 .),
    Lambda_T = lam^{-T} the contraction rate of the E*_s cone.
    Returns (T_list, values, fitted slope of log values in T).
    """
    m = _map_of(system)
    cutoff = cutoff or CutoffSpec()
    if cone is None:
        es, _ = stable_dual_direction(m)
        cone = ConeSymbol(tuple(es), math.radians(20), r_lo=0.0)
    w = _weight(weight)
    const_w = w.kind == "scalar" and w.is_constant
    if isinstance(u_family, WaveFamily):
        if not const_w:
            raise ConfigurationError("wave families need a constant weight")
        x = h * u_family.xi()
        r = np.hypot(x[:, 0], x[:, 1])
        ctab = cone(x[:, 0], x[:, 1])
        norms = u_family.hz_norms(rho, cutoff)
        vals = []
        for T in T_list:
            p = ctab * (1.0 - cutoff.psi(4 * r * abs(m.lam_u) ** (-T)))
            vals.append(float(np.max(p / norms)) * math.exp(float(w.field) * T) / h**rho)
        return _decay_fit(T_list, vals)
    if isinstance(u_family, Grid2Field):
        u_family = [u_family]
    spec = u_family[0].spec
    x1, x2 = xi_grid(spec.n_side)
    r = np.hypot(h * x1, h * x2)
    ctab = cone(h * x1, h * x2)
    bank = build_lp_filters(spec)
    norms = [hz_norm_coeffs(u.coeffs, rho, bank) for u in u_family]
    supports = [np.nonzero(u.coeffs) for u in u_family]
    sups = [u.sup() for u in u_family]
    vals = []
    for T in T_list:
        tab = ctab * (1.0 - cutoff.psi(4 * r * abs(m.lam_u) ** (-T)))
        best = 0.0
        for u, nu, sup_u, supp in zip(u_family, norms, sups, supports):
            t_on = tab[supp]
            if nu == 0 or not np.any(t_on):
                continue
            if const_w and np.ptp(t_on) == 0:
                # P u = t u, and the propagator is a permutation times e^{cT}
                s_T = float(t_on[0]) * sup_u * math.exp(float(w.field) * T)
            else:
                Pu = Grid2Field(spec, coeffs=u.coeffs * tab)
                s_T = propagator_apply(m, T, Pu, w).sup()
            best = max(best, s_T / (h**rho * nu))
        vals.append(best)
    return _decay_fit(T_list, vals)


def _decay_fit(T_list, vals):
    v = np.array(vals)
    good = v > 0
    slope = float(np.polyfit(np.asarray(T_list)[good], np.log(v[good]), 1)[0]) if good.sum() >= 2 else None
    return list(T_list), vals, slope
