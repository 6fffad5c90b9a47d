"""
Cohomological equations u o A - u = F on T^2 and X u = f on the mapping torus,
the U(1)-twisted transport equation, and band-decay regularity profiles.

Fourier convention: (u o A)^(k) = u^(B^{-1} k) with B = A^T, so the map
equation reads u^(B^{-1}k) - u^(k) = F^(k) and is solved along B-orbits of
lattice frequencies.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .lp_calculus import (
    CAT,
    CutoffSpec,
    Grid2Field,
    MappingTorusField,
    _bank_cached,
    _chart_arrays,
    build_lp_filters,
    lattice_compose,
    lattice_k,
    lattice_points,
)
from .orbits import orbit_sum, xray


class ObstructionError(ValueError):
    """The data has nonzero periodic-orbit sums (or nonzero mean)."""


class TopologyError(ValueError):
    """The U(1) cocycle has nonzero winding."""


class ProfileError(ValueError):
    pass


def _matrix_of(system):
    if system is None:
        return CAT
    m = getattr(system, "base", system)
    return np.asarray(m.matrix, dtype=np.int64)


@dataclass(frozen=True)
class CocycleWeight:
    """
    Weight of the derivation X - v (scalar kind) or of the unitary transfer
    u -> e^{i theta} u o A (phase kind).  The backward propagator carries the
    factor exp(int_0^t v o phi_{-tau}), so v == c grows like e^{ct}.
    ``field`` is a float (constant) or a real Grid2Field.
    """

    kind: str = "scalar"
    field: object = 0.0

    def __post_init__(self):
        if self.kind not in ("scalar", "phase"):
            raise ValueError("kind must be 'scalar' or 'phase'")
        if isinstance(self.field, Grid2Field) and np.max(np.abs(self.field.values.imag)) > 1e-12:
            raise ValueError("weight field must be real")

    @classmethod
    def trivial(cls):
        return cls("scalar", 0.0)

    @property
    def is_constant(self):
        return not isinstance(self.field, Grid2Field)

    def values_at(self, pts):
        if self.kind == "phase":
            return np.zeros(len(pts))
        if isinstance(self.field, Grid2Field):
            return self.field.evaluate(pts).real
        return np.full(len(pts), float(self.field))

    def lattice_values(self, n):
        if self.kind == "phase":
            return np.zeros((n, n))
        if isinstance(self.field, Grid2Field):
            if self.field.n != n:
                raise ValueError("weight grid does not match")
            return self.field.values.real
        return np.full((n, n), float(self.field))

    def negated(self):
        if isinstance(self.field, Grid2Field):
            return CocycleWeight(self.kind, self.field * -1.0)
        return CocycleWeight(self.kind, -float(self.field))


# ---------------------------------------------------------------------------
# obstruction
# ---------------------------------------------------------------------------


def obstruction_check(F, orbits):
    """max over primitive orbits of |sum of F over the orbit|."""
    best = 0.0
    for o in orbits:
        best = max(best, abs(orbit_sum(F, o)))
    return best


def quotient_seminorm_lower(f, orbits, system=None):
    """max |orbit average|: a lower bound for inf_u ||f + X u||_inf."""
    return max((abs(xray(f, o, system)) for o in orbits), default=0.0)


# ---------------------------------------------------------------------------
# map equation
# ---------------------------------------------------------------------------


@dataclass
class LivsicResult:
    u: Grid2Field
    residual: float
    max_steps: int
    backward_gap: float | None = None


def _grid_index(k, n):
    """Index in FFT order of integer frequencies k (any shape [..., 2]), or -1 outside the grid."""
    inside = np.all((k >= -(n // 2)) & (k < n // 2), axis=-1)
    i = np.where(inside, k[..., 0] % n, -1)
    j = np.where(inside, k[..., 1] % n, -1)
    return i, j, inside


def _orbit_sum_table(coeffs, M, n, k_max, max_steps=500):
    """
    S(k) = sum_{j>=1} c(M^j k) over the part of the orbit inside the grid
    and the ball |.| <= k_max.  Iteration stops once every orbit has left the
    ball for good (unstable coordinate beyond k_max).
    """
    k = lattice_k(n)
    K1, K2 = np.meshgrid(k, k, indexing="ij")
    cur = np.stack([K1, K2], axis=-1).astype(np.int64)
    Mf = M.astype(float)
    vals, vecs = np.linalg.eig(Mf)
    iu = int(np.argmax(np.abs(vals)))
    # coordinate along the expanding eigenvector of M
    w = np.linalg.inv(vecs)[iu].real
    v1, v2 = vecs[:, 0].real, vecs[:, 1].real
    sin_angle = abs(v1[0] * v2[1] - v1[1] * v2[0]) / (np.linalg.norm(v1) * np.linalg.norm(v2))
    out = np.zeros((n, n), dtype=complex)
    alive = np.ones((n, n), dtype=bool)
    alive[0, 0] = False
    steps = 0
    while alive.any():
        steps += 1
        if steps > max_steps:
            raise RuntimeError("orbit sums did not terminate")
        cur = cur @ M.T
        i, j, inside = _grid_index(cur, n)
        r2 = (cur[..., 0] ** 2 + cur[..., 1] ** 2).astype(float)
        use = alive & inside & (r2 <= k_max**2)
        out[use] += coeffs[i[use], j[use]]
        # |k| >= |unstable coordinate| * sin(angle between eigenlines)
        alive &= np.abs(cur @ w) * sin_angle <= k_max + 1e-9
    return out, steps


def livsic_solve(F, K_max=None, system=None, cross_check=True, tol=1e-9):
    """
    Solve u o A - u = F with zero-mean u by u^(k) = sum_{j>=1} F^(B^j k).

    For band-limited F whose orbit sums vanish the sum is finite and exact;
    the backward series -sum_{j>=0} F^(B^{-j} k) must then agree.
    """
    A = _matrix_of(system)
    n = F.n
    c = F.coeffs
    if abs(c[0, 0]) > 1e-12:
        raise ObstructionError(f"F has nonzero mean {c[0, 0]:.3e}: the fixed-point/measure obstruction fails")
    K_max = float(K_max) if K_max is not None else n * math.sqrt(2) / 2
    B = A.T
    uhat, steps = _orbit_sum_table(c, B, n, K_max)
    gap = None
    if cross_check:
        Binv = np.round(np.linalg.inv(B.astype(float))).astype(np.int64)
        back, _ = _orbit_sum_table(c, Binv, n, K_max)
        back = -(back + c)
        back[0, 0] = 0
        gap = float(np.max(np.abs(back - uhat)))
    uhat[0, 0] = 0.0
    u = Grid2Field(F.spec, coeffs=uhat)
    if np.max(np.abs(F.values.imag)) == 0:
        u = Grid2Field(F.spec, values=u.values.real)
    res = float(np.max(np.abs(lattice_compose(u.values, A) - u.values - F.values)))
    if res > tol:
        raise ObstructionError(f"residual {res:.3e} > {tol:g}: periodic-orbit obstruction violated "
                               "or F not band-limited")
    return LivsicResult(u, res, steps, gap)


def coboundary(u, system=None):
    """u o A - u on the lattice."""
    return u.with_values(lattice_compose(u.values, _matrix_of(system)) - u.values)


def orbit_key(ks, B):
    """
    Canonical element of the B-orbit of each integer frequency: the orbit
    point of least norm in eigen-coordinates (ties broken lexicographically).
    """
    ks = np.atleast_2d(np.asarray(ks, dtype=np.int64))
    vals, vecs = np.linalg.eig(B.astype(float))
    Pinv = np.linalg.inv(vecs).real
    lam = float(np.max(np.abs(vals)))
    iu = int(np.argmax(np.abs(vals)))
    coords = ks @ Pinv.T
    a = np.abs(coords[:, iu])
    b = np.abs(coords[:, 1 - iu])
    # minimiser of a^2 lam^{2j} + b^2 lam^{-2j}
    with np.errstate(divide="ignore"):
        jstar = np.where((a > 0) & (b > 0), np.log(np.where(b > 0, b, 1) / np.where(a > 0, a, 1))
                         / (2 * math.log(lam)), 0.0)
    j0 = np.floor(jstar).astype(np.int64)
    Binv = np.round(np.linalg.inv(B.astype(float))).astype(np.int64)
    best_q = np.full(len(ks), np.inf)
    best = ks.copy()
    for off in (-1, 0, 1, 2):
        v = ks.copy()
        for j in np.unique(j0 + off):
            sel = (j0 + off) == j
            Mj = np.linalg.matrix_power(B, int(j)) if j >= 0 else np.linalg.matrix_power(Binv, int(-j))
            v[sel] = ks[sel] @ Mj.T
        e = v @ Pinv.T
        q = np.einsum("ij,ij->i", e, e)
        better = (q < best_q - 1e-9) | ((np.abs(q - best_q) <= 1e-9) &
                                        ((v[:, 0] < best[:, 0]) | ((v[:, 0] == best[:, 0]) & (v[:, 1] < best[:, 1]))))
        best = np.where(better[:, None], v, best)
        best_q = np.where(better, q, best_q)
    return best


def coboundary_free_part(F, system=None):
    """
    N(F): for every B-orbit of frequencies, the sum of F^ over the orbit is
    placed at the orbit's canonical element.  F - N(F) has zero orbit sums,
    so it is a coboundary; N is linear and vanishes on coboundaries of
    band-limited functions.
    """
    A = _matrix_of(system)
    B = A.T.astype(np.int64)
    n = F.n
    c = F.coeffs
    nz = np.argwhere(np.abs(c) > 0)
    k = lattice_k(n)
    ks = np.column_stack([k[nz[:, 0]], k[nz[:, 1]]])
    out = np.zeros((n, n), dtype=complex)
    if len(ks):
        keys = orbit_key(ks, B)
        i, j, inside = _grid_index(keys, n)
        # orbits whose canonical element is off the grid are left untouched
        i = np.where(inside, i, nz[:, 0])
        j = np.where(inside, j, nz[:, 1])
        np.add.at(out, (i, j), c[nz[:, 0], nz[:, 1]])
    N = Grid2Field(F.spec, coeffs=out)
    if np.max(np.abs(F.values.imag)) == 0:
        N = Grid2Field(F.spec, values=N.values.real)
    return N


# ---------------------------------------------------------------------------
# suspension equation
# ---------------------------------------------------------------------------


QUAD_POINTS = 12


@lru_cache(maxsize=16)
def cumulative_weights(n_s, m=QUAD_POINTS):
    """
    W[j, i] with int_{s_j}^{s_{j+1}} g ds ~ sum_i W[j, i] g(s_i), s_i = i/n_s,
    i = 0..n_s.  Each cell uses the m nodes nearest to it (one-sided near the
    ends); weights are exact rationals from integrating the Lagrange basis.
    """
    m = min(m, n_s + 1)
    W = np.zeros((n_s, n_s + 1))
    for j in range(n_s):
        start = min(max(j - m // 2 + 1, 0), n_s + 1 - m)
        nodes = list(range(start, start + m))
        for a, ia in enumerate(nodes):
            # Lagrange basis polynomial coefficients (in units of the node spacing)
            poly = [Fraction(1)]
            den = Fraction(1)
            for ib in nodes:
                if ib == ia:
                    continue
                poly = [Fraction(0)] + poly
                for p in range(len(poly) - 1):
                    poly[p] -= ib * poly[p + 1]
                den *= ia - ib
            integral = sum(cf * (Fraction(j + 1) ** (p + 1) - Fraction(j) ** (p + 1)) / (p + 1)
                           for p, cf in enumerate(poly))
            W[j, ia] = float(integral / den) / n_s
    return W


def _with_top(f):
    top = lattice_compose(f.slices[0], f.matrix)
    return np.concatenate([f.slices, top[None]], axis=0)


def s_antiderivative(f):
    """Slices of int_0^s f(x, sigma) d sigma at s = j/n_s, j = 0..n_s."""
    W = cumulative_weights(f.spec.n_s)
    g = _with_top(f)
    cells = np.tensordot(W, g, axes=(1, 0))
    out = np.zeros_like(g)
    out[1:] = np.cumsum(cells, axis=0)
    return out


@dataclass
class SuspensionLivsicResult:
    u: MappingTorusField
    base: LivsicResult
    twist_defect: float


def suspension_livsic_solve(f, K_max=None, tol=1e-9):
    """
    Solve d_s u = f on the mapping torus (unit roof).  Writing
    u = u0 + int_0^s f, the gluing u(x,1) = u(Ax,0) forces
    u0 o A - u0 = F with F = int_0^1 f ds.
    """
    cum = s_antiderivative(f)
    F = Grid2Field(f.spec, values=cum[-1])
    if np.max(np.abs(f.slices.imag)) == 0:
        F = F.with_values(F.values.real)
    base = livsic_solve(F, K_max, system=_FakeSys(f.matrix), tol=tol)
    u0 = base.u.values
    slices = u0[None] + cum[:-1]
    u = MappingTorusField(f.spec, slices, f.matrix)
    top = u0 + cum[-1]
    defect = u.twist_defect(top)
    if defect > tol:
        raise ObstructionError(f"twisted boundary defect {defect:.3e} > {tol:g}")
    return SuspensionLivsicResult(u, base, defect)


class _FakeSys:
    def __init__(self, matrix):
        self.matrix = np.asarray(matrix, dtype=np.int64)


# ---------------------------------------------------------------------------
# U(1) twisted equation
# ---------------------------------------------------------------------------


@dataclass
class TwistedResult:
    u: Grid2Field
    theta: Grid2Field
    residual: float


def unwrap_phase(c):
    """
    Continuous lift theta of c = e^{i theta} on the lattice, based at the
    origin with theta(0) in (-pi, pi].  Returns theta and the winding numbers
    along both coordinate cycles.
    """
    z = np.asarray(c, dtype=complex)
    base = np.angle(z[0, 0])
    d1 = np.angle(np.roll(z, -1, axis=0) / z)
    d2 = np.angle(np.roll(z, -1, axis=1) / z)
    col = base + np.concatenate([[0.0], np.cumsum(d1[:-1, 0])])
    theta = col[:, None] + np.concatenate([np.zeros((z.shape[0], 1)), np.cumsum(d2[:, :-1], axis=1)], axis=1)
    w1 = int(np.round(np.sum(d1[:, 0]) / (2 * np.pi)))
    w2 = int(np.round(np.sum(d2[0, :]) / (2 * np.pi)))
    return theta, (w1, w2)


def twisted_transport_solve(c, K_max=None, system=None, tol=1e-9):
    """Solve u o A = c u with |u| = 1, through theta = -i log c."""
    if np.max(np.abs(np.abs(c.values) - 1)) > 1e-10:
        raise ValueError("c must be unimodular")
    theta, wind = unwrap_phase(c.values)
    if wind != (0, 0):
        raise TopologyError(f"topologically obstructed: winding numbers {wind}")
    if abs(theta[0, 0]) > 1e-10:
        raise ObstructionError(f"fixed-point obstruction: c(0) = e^(i {theta[0, 0]:.4f}) != 1")
    th = Grid2Field(c.spec, values=theta)
    res = livsic_solve(th, K_max, system, tol=tol)
    phi = res.u.values.real
    u = Grid2Field(c.spec, values=np.exp(1j * phi))
    A = _matrix_of(system)
    resid = float(np.max(np.abs(lattice_compose(u.values, A) - c.values * u.values)))
    return TwistedResult(u, th, resid)


# ---------------------------------------------------------------------------
# regularity profiles
# ---------------------------------------------------------------------------


@dataclass
class ProfileReport:
    band_sups: np.ndarray
    alpha_hat: float | None
    band_range: tuple
    single_band: bool = False
    alpha_gap: float | None = None
    notes: list = field(default_factory=list)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["j", "b_j"])
        for j, b in enumerate(self.band_sups):
            w.writerow([j, repr(float(b))])
        return buf.getvalue()


def _band_sups_any(u):
    if isinstance(u, Grid2Field):
        return build_lp_filters(u.spec).band_sups(u.values)
    if isinstance(u, MappingTorusField):
        one, _, _, _ = _chart_arrays(u)
        bank = _bank_cached(one.shape, CutoffSpec())
        return bank.band_sups(one)
    raise TypeError("expected Grid2Field or MappingTorusField")


def regularity_profile(u, paired=None, floor=1e-13):
    """
    Band sup norms and the least-squares slope of -log2 b_j over bands
    2 .. J-2.  Bands below ``floor`` times the largest are left out of the fit.
    """
    b = np.asarray(_band_sups_any(u), dtype=float)
    J = len(b) - 1
    lo, hi = 2, J - 2
    if hi - lo + 1 < 3:
        raise ProfileError("fewer than 3 resolvable bands")
    top = float(np.max(b)) if b.size else 0.0
    live = np.nonzero(b > floor * max(top, 1e-300))[0]
    single = len(live) <= 1 or (np.sort(b)[-2] < 1e-6 * top if len(b) > 1 else True)
    js = np.arange(lo, hi + 1)
    sel = js[b[js] > floor * max(top, 1e-300)]
    alpha = None
    notes = []
    if single:
        notes.append("single band: exponent undefined")
    elif len(sel) >= 3:
        alpha = float(-np.polyfit(sel, np.log2(b[sel]), 1)[0])
    else:
        notes.append("too few nonzero bands in the fit range")
    rep = ProfileReport(b, alpha, (lo, hi), single, None, notes)
    if paired is not None:
        other = regularity_profile(paired, floor=floor)
        if alpha is not None and other.alpha_hat is not None:
            rep.alpha_gap = other.alpha_hat - alpha
    return rep


def solution_support(F, system=None, K_max=None):
    """Exact frequency support of the Livsic solution: grid points whose forward B-orbit meets supp F."""
    A = _matrix_of(system)
    n = F.n
    mask = (np.abs(F.coeffs) > 0).astype(complex)
    K_max = float(K_max) if K_max is not None else n * math.sqrt(2) / 2
    hits, _ = _orbit_sum_table(mask, A.T, n, K_max)
    return np.abs(hits) > 0


def weierstrass_field(spec, alpha, J, axis=0):
    """sum_{j<=J} 2^{-alpha j} cos(2 pi 2^j x_axis)."""
    x1, x2 = lattice_points(spec.n_side)
    x = x1 if axis == 0 else x2
    vals = sum(2.0 ** (-alpha * j) * np.cos(2 * np.pi * 2**j * x) for j in range(J + 1))
    return Grid2Field(spec, values=vals)

