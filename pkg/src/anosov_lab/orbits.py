"""
Periodic orbits, X-ray transforms and marked length spectra.

Periodic points of a linear cat map A are the rationals x = (A^n - I)^{-1} m
mod Z^2.  They are stored as integer numerators over the common denominator
D = |det(A^n - I)|, which makes orbit identification exact.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .lp_calculus import Grid2Field, MappingTorusField
from .systems import AnosovFlow

ORBIT_BUDGET = 500_000


class OrbitBudgetError(ValueError):
    pass


class SystemMismatchError(ValueError):
    pass


# ---------------------------------------------------------------------------
# enumeration
# ---------------------------------------------------------------------------


@dataclass
class PeriodicOrbit:
    system_id: str
    period: int
    numerators: np.ndarray  # (period, 2) integers mod denom, in dynamical order
    denom: int
    primitive: bool = True

    @property
    def points(self):
        return self.numerators / self.denom

    @property
    def representative(self):
        p = self.numerators[0]
        return (Fraction(int(p[0]), self.denom), Fraction(int(p[1]), self.denom))

    @property
    def orbit_id(self):
        # labelled by the lexicographically smallest point, so independent of the start
        p = min(map(tuple, self.numerators.tolist()))
        return f"p{self.period}:{int(p[0])}/{self.denom},{int(p[1])}/{self.denom}"

    def rotated(self, shift):
        """Same orbit with a different starting point."""
        return PeriodicOrbit(self.system_id, self.period, np.roll(self.numerators, -shift, axis=0),
                             self.denom, self.primitive)


@dataclass
class OrbitSet:
    system_id: str
    P: int
    orbits: list
    point_counts: dict  # n -> number of points fixed by A^n
    primitive_counts: dict  # n -> number of primitive orbits of period n

    def __iter__(self):
        return iter(self.orbits)

    def __len__(self):
        return len(self.orbits)

    def by_period(self, n):
        return [o for o in self.orbits if o.period == n]


def _ext_gcd(a, b):
    if b == 0:
        return (abs(a), 1 if a >= 0 else -1, 0)
    g, x, y = _ext_gcd(b, a % b)
    return g, y, x - (a // b) * y


def fixed_point_numerators(M):
    """
    Solutions x of M x in Z^2 for an integer matrix M with det != 0.

    Returns (numerators, D) with x = numerators / D, D = |det M|.  The
    quotient Z^2 / M Z^2 is enumerated through the column Hermite form
    M U = [[g, 0], [c, det/g]].
    """
    M = [[int(M[0][0]), int(M[0][1])], [int(M[1][0]), int(M[1][1])]]
    det = M[0][0] * M[1][1] - M[0][1] * M[1][0]
    if det == 0:
        raise ValueError("singular matrix")
    g, a, b = _ext_gcd(M[0][0], M[0][1])
    y = det // g
    gi, yi = abs(g), abs(y)
    i = np.arange(gi, dtype=np.int64)
    j = np.arange(yi, dtype=np.int64)
    I, J = np.meshgrid(i, j, indexing="ij")
    m1, m2 = I.ravel(), J.ravel()
    D = abs(det)
    sgn = 1 if det > 0 else -1
    # x = adj(M) m / det
    n1 = sgn * (M[1][1] * m1 - M[0][1] * m2)
    n2 = sgn * (-M[1][0] * m1 + M[0][0] * m2)
    num = np.column_stack([n1 % D, n2 % D])
    return num, D


def _matrix_power(A, n):
    out = [[1, 0], [0, 1]]
    B = [[int(A[0][0]), int(A[0][1])], [int(A[1][0]), int(A[1][1])]]
    for _ in range(n):
        out = [[out[0][0] * B[0][0] + out[0][1] * B[1][0], out[0][0] * B[0][1] + out[0][1] * B[1][1]],
               [out[1][0] * B[0][0] + out[1][1] * B[1][0], out[1][0] * B[0][1] + out[1][1] * B[1][1]]]
    return out


def period_point_count(A, n):
    M = _matrix_power(A, n)
    return abs((M[0][0] - 1) * (M[1][1] - 1) - M[0][1] * M[1][0])


def enumerate_periodic_orbits(system, P, budget=ORBIT_BUDGET):
    if isinstance(system, AnosovFlow):
        system = system.base
    if system.is_perturbed:
        raise ValueError("enumeration needs a linear map; use conjugacy_solve for perturbed maps")
    if P < 1:
        raise ValueError("P must be >= 1")
    A = system.matrix.tolist()
    total = sum(period_point_count(A, n) for n in range(1, P + 1))
    if total > budget:
        raise OrbitBudgetError(f"{total} periodic points up to period {P} exceed the orbit budget {budget}")
    orbits = []
    counts = {}
    prim = {}
    Ai = np.asarray(A, dtype=np.int64)
    for n in range(1, P + 1):
        An = _matrix_power(A, n)
        M = [[An[0][0] - 1, An[0][1]], [An[1][0], An[1][1] - 1]]
        num, D = fixed_point_numerators(M)
        counts[n] = len(num)
        # minimal period and lexicographic orbit minimum, vectorized
        cur = num.copy()
        minimal = np.full(len(num), n)
        best = num[:, 0] * D + num[:, 1]
        found = np.zeros(len(num), dtype=bool)
        for k in range(1, n + 1):
            cur = (cur @ Ai.T) % D
            back = np.all(cur == num, axis=1) & ~found
            minimal[back] = k
            found |= back
            if k < n:
                best = np.minimum(best, cur[:, 0] * D + cur[:, 1])
        keep = (minimal == n) & ((num[:, 0] * D + num[:, 1]) == best)
        reps = num[keep]
        prim[n] = len(reps)
        for r in reps[np.lexsort((reps[:, 1], reps[:, 0]))]:
            pts = [r]
            for _ in range(n - 1):
                pts.append((Ai @ pts[-1]) % D)
            orbits.append(PeriodicOrbit(system.system_id, n, np.array(pts, dtype=np.int64), D))
    return OrbitSet(system.system_id, P, orbits, counts, prim)


def trace_recursion_counts(P, t1=3):
    """tr(A^n) - 2 via t_{n+1} = t1 t_n - t_{n-1} (det A = 1)."""
    t = [2, t1]
    while len(t) <= P:
        t.append(t1 * t[-1] - t[-2])
    return {n: abs(t[n] - 2) for n in range(1, P + 1)}


# ---------------------------------------------------------------------------
# X-ray and spectra
# ---------------------------------------------------------------------------


def _evaluate(f, pts):
    if isinstance(f, Grid2Field):
        return f.evaluate(pts)
    if callable(f):
        return np.asarray(f(pts[:, 0], pts[:, 1]))
    return np.full(len(pts), complex(f))


def _check_system(orbit, system):
    if system is not None and orbit.system_id != system.system_id:
        raise SystemMismatchError(f"orbit belongs to {orbit.system_id}, not {system.system_id}")


def _s_average(f, pts, matrix):
    """Mean over s in [0,1] along vertical segments above pts (trapezoid incl. glued top)."""
    vals = np.array([f.slice(j).evaluate(pts) for j in range(f.spec.n_s)])
    top_pts = np.mod(pts @ np.asarray(matrix, float).T, 1.0)
    top = f.slice(0).evaluate(top_pts)
    return (vals[1:].sum(axis=0) + 0.5 * (vals[0] + top)) / f.spec.n_s


def xray(f, orbit, system=None):
    """
    Normalized orbit integral.  Maps: Birkhoff average.  For a flow the
    vertical segment over x_i takes time r(x_i), so the average is
    sum r(x_i) <f>(x_i) / sum r(x_i).
    """
    _check_system(orbit, system)
    pts = orbit.points
    if isinstance(system, AnosovFlow):
        r = system.roof_at(pts)
        vals = _s_average(f, pts, system.base.matrix) if isinstance(f, MappingTorusField) else _evaluate(f, pts)
        return float(np.real(np.sum(r * vals) / np.sum(r)))
    if isinstance(f, MappingTorusField):
        raise SystemMismatchError("mapping torus field needs a flow system")
    return float(np.real(np.mean(_evaluate(f, pts))))


def orbit_sum(f, orbit):
    return complex(np.sum(_evaluate(f, orbit.points)))


def orbit_period(flow, orbit):
    """Closed-orbit period: Birkhoff sum of the roof."""
    _check_system(orbit, flow)
    return float(np.sum(flow.roof_at(orbit.points)))


@dataclass
class SpectrumTable:
    lengths: dict  # orbit_id -> length in system a
    steps: dict  # orbit_id -> base period
    lengths_b: dict | None = None

    def __post_init__(self):
        for d in (self.lengths, self.lengths_b or {}):
            if any(v <= 0 for v in d.values()):
                raise ValueError("lengths must be positive")

    def with_second(self, other):
        return SpectrumTable(self.lengths, self.steps, dict(other.lengths))

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["orbit_id", "period_steps", "length_system_a", "length_system_b", "ratio"])
        for k in self.lengths:
            a = self.lengths[k]
            b = self.lengths_b.get(k) if self.lengths_b else None
            w.writerow([k, self.steps[k], repr(a), "" if b is None else repr(b), "" if b is None else repr(b / a)])
        return buf.getvalue()


def marked_spectrum(flow, P, orbits=None):
    orbits = orbits or enumerate_periodic_orbits(flow.base, P)
    lengths = {o.orbit_id: orbit_period(flow, o) for o in orbits if o.period <= P}
    steps = {o.orbit_id: o.period for o in orbits if o.period <= P}
    return SpectrumTable(lengths, steps)


# ---------------------------------------------------------------------------
# Bolza words
# ---------------------------------------------------------------------------


def invert_word(w):
    return "".join(ch.swapcase() for ch in reversed(w))


def cyclic_reduce(w):
    out = []
    for ch in w:
        if out and out[-1] == ch.swapcase():
            out.pop()
        else:
            out.append(ch)
    while len(out) > 1 and out[0] == out[-1].swapcase():
        out = out[1:-1]
    return "".join(out)


def _min_rotation(w):
    return min(w[i:] + w[:i] for i in range(len(w))) if w else w


def canonical_word(w):
    """Lexicographically minimal rotation, identified with the inverse class."""
    r = cyclic_reduce(w)
    return min(_min_rotation(r), _min_rotation(invert_word(r)))


@dataclass
class WordClass:
    word: str
    trace: float
    length: float

    @property
    def key(self):
        return canonical_word(self.word)


def word_class(group, word):
    if not word:
        raise ValueError("empty word")
    M = group.word_matrix(cyclic_reduce(word) or word)
    tr = float(np.trace(M))
    if abs(tr) <= 2 + 1e-12:
        raise ValueError(f"word {word!r} is not hyperbolic (|tr| = {abs(tr):.6g})")
    return WordClass(word, tr, 2 * math.acosh(abs(tr) / 2))


def geodesic_length_word(group, word):
    return word_class(group, word).length


# ---------------------------------------------------------------------------
# conformal factors on the Bolza surface
# ---------------------------------------------------------------------------


SYSTOLE = 2 * math.acosh(1 + math.sqrt(2))
INRADIUS = SYSTOLE / 2


class EquivarianceError(ValueError):
    pass


class DescentError(RuntimeError):
    def __init__(self, msg, grad_norm=None):
        super().__init__(msg)
        self.grad_norm = grad_norm


def _bump_profile(r):
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    inside = r < 1
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - r[inside] ** 2))
    return out


def disc_distance(z, w):
    q = np.abs((z - w) / (1 - np.conj(w) * z))
    return 2 * np.arctanh(np.minimum(q, 1 - 1e-16))


@dataclass(frozen=True)
class Bump:
    center: complex  # in the disc
    radius: float  # hyperbolic support radius
    amplitude: float = 1.0


@dataclass(frozen=True)
class ConformalFactor:
    """
    sigma = constant + sum of bumps, each supported in a hyperbolic ball
    inside the inscribed disc of the fundamental octagon, then extended by
    the group action.  The metric is e^{2 sigma} g0.
    """

    constant: float = 0.0
    bumps: tuple = ()

    def __post_init__(self):
        for b in self.bumps:
            d0 = float(disc_distance(np.array([complex(b.center)]), 0.0)[0])
            if d0 + b.radius >= INRADIUS:
                raise EquivarianceError(
                    f"bump at {b.center} with radius {b.radius} leaves the inscribed disc (radius {INRADIUS:.4f})")

    def scaled(self, eps):
        return ConformalFactor(eps * self.constant, tuple(Bump(b.center, b.radius, eps * b.amplitude) for b in self.bumps))

    @property
    def is_zero(self):
        return self.constant == 0 and all(b.amplitude == 0 for b in self.bumps)

    def on_domain(self, z):
        out = np.full(z.shape, float(self.constant))
        for b in self.bumps:
            out += b.amplitude * _bump_profile(disc_distance(z, complex(b.center)) / b.radius)
        return out


def fold_to_octagon(group, z, max_steps=200):
    """Reduce disc points into the Dirichlet domain at 0 by greedy side pairings."""
    z = np.asarray(z, dtype=complex).copy()
    gens = [group.disc[c] for c in "abcdABCD"]
    for _ in range(max_steps):
        best = np.abs(z)
        new = z.copy()
        for g in gens:
            w = (g[0, 0] * z + g[0, 1]) / (g[1, 0] * z + g[1, 1])
            better = np.abs(w) < best - 1e-14
            new = np.where(better, w, new)
            best = np.where(better, np.abs(w), best)
        if np.all(new == z):
            return z
        z = new
    raise RuntimeError("folding did not terminate")


def sigma_on_disc(group, sigma, z):
    if not sigma.bumps:
        return np.full(np.shape(z), float(sigma.constant))
    return sigma.on_domain(fold_to_octagon(group, z))


def _uhp_to_disc(z):
    return (z - 1j) / (z + 1j)


@dataclass(frozen=True)
class Discretization:
    n_points: int = 512
    tol: float = 1e-10
    max_iter: int = 50
    fd_step: float = 1e-6


@dataclass
class AxisChart:
    """Fermi chart z = P(e^t (tanh y + i sech y)) about the axis of a word."""

    P: np.ndarray
    L: float

    def points(self, t, y):
        w = np.exp(t) * (np.tanh(y) + 1j / np.cosh(y))
        P = self.P
        return (P[0, 0] * w + P[0, 1]) / (P[1, 0] * w + P[1, 1])


def axis_chart(group, word):
    M = group.word_matrix(cyclic_reduce(word))
    tr = np.trace(M)
    if abs(tr) <= 2:
        raise ValueError("word is not hyperbolic")
    vals, vecs = np.linalg.eig(M)
    order = np.argsort(-np.abs(vals))
    v1, v2 = vecs[:, order[0]].real, vecs[:, order[1]].real
    P = np.column_stack([v1, v2])
    d = np.linalg.det(P)
    if d < 0:
        P[:, 1] = -P[:, 1]
        d = -d
    P = P / math.sqrt(d)
    return AxisChart(P, 2 * math.acosh(abs(tr) / 2))


def _segment_lengths(t, y):
    dt = np.diff(np.append(t, t[0] + (t[1] - t[0]) * len(t)))
    y2 = np.roll(y, -1)
    c = np.cosh(y) * np.cosh(y2) * np.cosh(dt) - np.sinh(y) * np.sinh(y2)
    c = np.maximum(c, 1.0)
    d = np.arccosh(c)
    # derivatives of d wrt y_i (left end) and y_{i+1} (right end)
    s = np.sqrt(np.maximum(c * c - 1.0, 1e-300))
    dl = (np.sinh(y) * np.cosh(y2) * np.cosh(dt) - np.cosh(y) * np.sinh(y2)) / s
    dr = (np.cosh(y) * np.sinh(y2) * np.cosh(dt) - np.sinh(y) * np.cosh(y2)) / s
    return d, dl, dr


def perturbed_geodesic_length(group, word, sigma, disc=None, return_state=False):
    """
    Length of the shortest closed polyline in the class of ``word`` for the
    metric e^{2 sigma} g0.

    Vertices sit at Fermi coordinates (t_i, y_i) about the g0-axis of the
    word, t_i = i L0 / n fixed; the g0-length of each segment is exact and the
    conformal weight is the average of e^sigma at its ends.
    """
    disc = disc or Discretization()
    if disc.n_points < 64:
        raise ValueError("n_points must be >= 64")
    if not isinstance(sigma, ConformalFactor):
        raise EquivarianceError("sigma must be a ConformalFactor (equivariant bump expansion)")
    chart = axis_chart(group, word)
    n = disc.n_points
    t = np.arange(n) * chart.L / n

    def sig(y):
        return sigma_on_disc(group, sigma, _uhp_to_disc(chart.points(t, y)))

    def fun(y):
        d, dl, dr = _segment_lengths(t, y)
        e = np.exp(sig(y))
        w = 0.5 * (e + np.roll(e, -1))
        val = float(np.sum(d * w))
        h = disc.fd_step
        if sigma.bumps:
            dsig = (sig(y + h) - sig(y - h)) / (2 * h)
        else:
            dsig = np.zeros(n)
        de = e * dsig
        g = dl * w + np.roll(dr * w, 1) + 0.5 * de * (d + np.roll(d, 1))
        return val, g

    y = np.zeros(n)
    val, g = fun(y)
    if sigma.bumps:
        y, val, g = _newton_cyclic(fun, y, val, g, disc)
    if return_state:
        return val, {"y": y, "t": t, "chart": chart}
    return val


def _newton_cyclic(fun, y, val, g, disc, colors=4):
    """
    Damped Newton descent.  The objective couples only neighbouring vertices,
    so the Hessian is cyclic tridiagonal; it is assembled from ``colors``
    finite differences of the analytic gradient.
    """
    n = len(y)
    h = 1e-5
    for it in range(disc.max_iter):
        gn = float(np.max(np.abs(g)))
        if gn <= disc.tol:
            return y, val, g
        H = np.zeros((n, n))
        for c in range(colors):
            e = np.zeros(n)
            e[c::colors] = h
            _, gp = fun(y + e)
            _, gm = fun(y - e)
            col = (gp - gm) / (2 * h)
            for j in range(c, n, colors):
                for i in (j - 1, j, (j + 1) % n):
                    H[i % n, j] = col[i % n]
        H = 0.5 * (H + H.T)
        try:
            step = -np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            step = -g
        a = 1.0
        while a > 1e-8:
            v_new, g_new = fun(y + a * step)
            if v_new <= val + 1e-4 * a * float(g @ step) or v_new <= val:
                break
            a *= 0.5
        if a <= 1e-8:
            if gn < 1e-7:
                return y, val, g
            raise DescentError(f"line search failed (gradient {gn:.3e})", gn)
        y, val, g = y + a * step, v_new, g_new
    raise DescentError(f"descent did not converge (gradient {float(np.max(np.abs(g))):.3e})",
                       float(np.max(np.abs(g))))


def axis_integral(group, word, sigma, n_nodes=512):
    """(Periodic trapezoid) integral of sigma along the g0 closed geodesic of ``word``."""
    chart = axis_chart(group, word)
    t = np.arange(n_nodes) * chart.L / n_nodes
    z = _uhp_to_disc(chart.points(t, np.zeros(n_nodes)))
    return float(np.sum(sigma_on_disc(group, sigma, z)) * chart.L / n_nodes), chart.L
