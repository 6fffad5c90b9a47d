"""
Littlewood-Paley calculus on the torus T^2 and on the cat-map mapping torus.

Frequencies follow the convention xi = 2*pi*k for a lattice index k, so the
band phi_j lives where |xi| is of size 2^j.  Every operator here is a Fourier
multiplier (possibly composed with multiplication by a smooth amplitude), and
"Op_h(a)" means multiplying the coefficient at k by a(h * 2*pi*k).
"""

from __future__ import annotations

import functools
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import betainc


class ConfigurationError(ValueError):
    """Raised when a grid, bank or symbol is not usable for the request."""


# ---------------------------------------------------------------------------
# grids and fields
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GridSpec:
    n_side: int
    n_s: int = 16

    def __post_init__(self):
        n = self.n_side
        if not isinstance(n, (int, np.integer)) or n < 8 or (n & (n - 1)):
            raise ConfigurationError(f"n_side must be a power of two >= 8, got {n!r}")
        if not isinstance(self.n_s, (int, np.integer)) or self.n_s < 4:
            raise ConfigurationError(f"n_s must be an integer >= 4, got {self.n_s!r}")

    def to_dict(self):
        return {"n_side": int(self.n_side), "n_s": int(self.n_s)}


def lattice_k(n):
    """Integer frequencies in FFT order, -n/2 .. n/2-1."""
    return np.fft.fftfreq(n, d=1.0 / n).round().astype(np.int64)


def lattice_points(n):
    """Uniform grid x_i = i/n on T^2, arrays of shape (n, n) each."""
    t = np.arange(n) / n
    return np.meshgrid(t, t, indexing="ij")


class Grid2Field:
    """
    Periodic scalar field on T^2 sampled on an n x n grid.

    Values and Fourier coefficients are kept lazily in sync; coefficients are
    normalized so that values[x] = sum_k coeffs[k] exp(2 pi i <k, x>).
    """

    def __init__(self, spec, values=None, coeffs=None):
        if values is None and coeffs is None:
            raise ValueError("need values or coeffs")
        self.spec = spec
        n = spec.n_side
        self._values = None
        self._coeffs = None
        if values is not None:
            values = np.asarray(values)
            if values.shape != (n, n):
                raise ValueError(f"values shape {values.shape} != {(n, n)}")
            self._values = values.astype(complex) if not np.iscomplexobj(values) else values.copy()
        if coeffs is not None:
            coeffs = np.asarray(coeffs, dtype=complex)
            if coeffs.shape != (n, n):
                raise ValueError(f"coeffs shape {coeffs.shape} != {(n, n)}")
            self._coeffs = coeffs.copy()

    @classmethod
    def from_function(cls, spec, func):
        x1, x2 = lattice_points(spec.n_side)
        return cls(spec, values=func(x1, x2))

    @classmethod
    def constant(cls, spec, c=1.0):
        n = spec.n_side
        return cls(spec, values=np.full((n, n), c, dtype=complex))

    @property
    def n(self):
        return self.spec.n_side

    @property
    def values(self):
        if self._values is None:
            self._values = np.fft.ifft2(self._coeffs) * self.n**2
        return self._values

    @property
    def coeffs(self):
        if self._coeffs is None:
            self._coeffs = np.fft.fft2(self._values) / self.n**2
        return self._coeffs

    @property
    def real(self):
        return self.values.real

    def sup(self):
        return float(np.max(np.abs(self.values)))

    def mean(self):
        return complex(self.coeffs[0, 0])

    def with_values(self, values):
        return Grid2Field(self.spec, values=values)

    def with_coeffs(self, coeffs):
        return Grid2Field(self.spec, coeffs=coeffs)

    def __add__(self, other):
        if isinstance(other, Grid2Field):
            return self.with_values(self.values + other.values)
        return self.with_values(self.values + other)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Grid2Field):
            return self.with_values(self.values - other.values)
        return self.with_values(self.values - other)

    def __mul__(self, other):
        if isinstance(other, Grid2Field):
            return self.with_values(self.values * other.values)
        return self.with_values(self.values * other)

    __rmul__ = __mul__

    def __neg__(self):
        return self.with_values(-self.values)

    def evaluate(self, points, chunk=4096):
        """Spectral (trigonometric) evaluation at arbitrary points of shape (m, 2)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        c = self.coeffs
        k = lattice_k(self.n)
        nz = np.nonzero(np.abs(c) > 0)
        amp = c[nz]
        k1 = k[nz[0]].astype(float)
        k2 = k[nz[1]].astype(float)
        out = np.empty(len(pts), dtype=complex)
        for start in range(0, len(pts), chunk):
            p = pts[start:start + chunk]
            phase = 2j * np.pi * (np.outer(p[:, 0], k1) + np.outer(p[:, 1], k2))
            out[start:start + chunk] = np.exp(phase) @ amp
        return out


def random_trig_field(spec, k_max, rng, decay=0.0, real=True):
    """Random trigonometric polynomial with frequencies |k|_inf <= k_max, zero mean."""
    n = spec.n_side
    if 2 * k_max >= n:
        raise ConfigurationError("k_max must stay below the Nyquist index")
    k = lattice_k(n)
    K1, K2 = np.meshgrid(k, k, indexing="ij")
    mask = (np.abs(K1) <= k_max) & (np.abs(K2) <= k_max)
    mask[0, 0] = False
    c = np.zeros((n, n), dtype=complex)
    size = int(mask.sum())
    c[mask] = rng.standard_normal(size) + 1j * rng.standard_normal(size)
    if decay:
        r = np.hypot(K1, K2)
        c[mask] *= r[mask] ** (-decay)
    f = Grid2Field(spec, coeffs=c)
    if real:
        f = Grid2Field(spec, values=f.values.real)
    return f


# ---------------------------------------------------------------------------
# the cutoff psi and band functions
# ---------------------------------------------------------------------------


def smoothstep(y, order=6):
    """Normalized integral of the kernel y^p (1-y)^p; 0 for y<=0 and 1 for y>=1."""
    y = np.clip(np.asarray(y, dtype=float), 0.0, 1.0)
    return betainc(order + 1, order + 1, y)


@dataclass(frozen=True)
class CutoffSpec:
    """
    psi(t) = 1 for |t| <= t0, 0 for |t| >= t1, monotone in between.

    The transition starts at t0 = 3/2 so that phi_j is exactly 1 on the
    shell 2^j <= |xi| <= 1.5 * 2^j (band centers are clean).
    """

    t0: float = 1.5
    t1: float = 2.0
    order: int = 6

    def __post_init__(self):
        if not (1.0 <= self.t0 < self.t1 <= 2.0):
            raise ConfigurationError("need 1 <= t0 < t1 <= 2")
        if self.order < 1:
            raise ConfigurationError("kernel order must be positive")

    def psi(self, t):
        t = np.abs(np.asarray(t, dtype=float))
        return 1.0 - smoothstep((t - self.t0) / (self.t1 - self.t0), self.order)

    def phi(self, j, r):
        r = np.asarray(r, dtype=float)
        if j == 0:
            return self.psi(r)
        return self.psi(r / 2.0**j) - self.psi(r / 2.0 ** (j - 1))

    def to_dict(self):
        return {"t0": self.t0, "t1": self.t1, "order": self.order}


def _radius(shape):
    """|xi| on the FFT lattice of a unit-period grid of the given shape."""
    ks = [2 * np.pi * lattice_k(m) for m in shape]
    grids = np.meshgrid(*ks, indexing="ij")
    return np.sqrt(sum(g**2 for g in grids))


def xi_grid(n):
    """(xi_1, xi_2) arrays for the n x n lattice."""
    k = 2 * np.pi * lattice_k(n)
    return np.meshgrid(k, k, indexing="ij")


class LPFilterBank:
    """Dyadic multiplier tables phi_0 .. phi_J sampled on a frequency lattice."""

    def __init__(self, shape, cutoff=None):
        self.shape = tuple(int(m) for m in shape)
        self.cutoff = cutoff or CutoffSpec()
        r = _radius(self.shape)
        r_max = float(r.max())
        j_max = max(1, int(math.ceil(math.log2(r_max / self.cutoff.t0))))
        if r_max < 2.0:
            raise ConfigurationError("grid too small to hold the j=1 band")
        self.j_max = j_max
        self.tables = [self.cutoff.phi(j, r) for j in range(j_max + 1)]

    def __len__(self):
        return len(self.tables)

    def describe(self):
        return {"shape": list(self.shape), "cutoff": self.cutoff.to_dict(), "j_max": self.j_max}

    def to_json(self):
        return json.dumps(self.describe(), sort_keys=True)

    def reconstruction_error(self):
        total = np.sum(self.tables, axis=0)
        return float(np.max(np.abs(total - 1.0)))

    def band_arrays(self, coeffs):
        """Real-space band components of an array given by its unnormalized FFT."""
        axes = tuple(range(len(self.shape)))
        return [np.fft.ifftn(coeffs * t, axes=axes) for t in self.tables]

    def band_sups(self, values):
        axes = tuple(range(len(self.shape)))
        c = np.fft.fftn(values, axes=axes)
        return np.array([np.max(np.abs(np.fft.ifftn(c * t, axes=axes))) for t in self.tables])


@functools.lru_cache(maxsize=32)
def _bank_cached(shape, cutoff):
    return LPFilterBank(shape, cutoff)


def build_lp_filters(spec, cutoff=None):
    """Filter bank for the n_side x n_side torus lattice."""
    cutoff = cutoff or CutoffSpec()
    return _bank_cached((spec.n_side, spec.n_side), cutoff)


def band_filter(f, bank, j):
    return Grid2Field(f.spec, coeffs=f.coeffs * bank.tables[j])


def band_sups(f, bank=None):
    bank = bank or build_lp_filters(f.spec)
    return bank.band_sups(f.values)


def hz_norm(f, s, bank=None):
    """Hölder-Zygmund norm sup_j 2^{js} ||phi_j(D) f||_inf."""
    b = band_sups(f, bank)
    w = 2.0 ** (s * np.arange(len(b)))
    return float(np.max(w * b))


def hz_norm_coeffs(coeffs, s, bank):
    """hz_norm from Grid2Field-normalized coefficients; bands with no mass are skipped."""
    scale = coeffs.size
    nz = np.abs(coeffs) > 0
    best = 0.0
    for j, t in enumerate(bank.tables):
        m = nz & (t > 0)
        if not m.any():
            continue
        sup = float(np.max(np.abs(np.fft.ifft2(coeffs * t)))) * scale
        best = max(best, 2.0 ** (s * j) * sup)
    return best


# ---------------------------------------------------------------------------
# mapping torus fields and the two-chart norm
# ---------------------------------------------------------------------------


# cat map used for the mapping torus gluing (x, 1) ~ (A x, 0)
CAT = np.array([[2, 1], [1, 1]], dtype=np.int64)


def lattice_compose(values, matrix, power=1):
    """Return the lattice samples of f o M^power for an integer unimodular M."""
    n = values.shape[0]
    M = np.linalg.matrix_power(np.asarray(matrix, dtype=np.int64), power) if power >= 0 else \
        np.linalg.matrix_power(_int_inverse(matrix), -power)
    i = np.arange(n)
    I, J = np.meshgrid(i, i, indexing="ij")
    ti = (M[0, 0] * I + M[0, 1] * J) % n
    tj = (M[1, 0] * I + M[1, 1] * J) % n
    return values[ti, tj]


def _int_inverse(M):
    M = np.asarray(M, dtype=np.int64)
    det = int(round(np.linalg.det(M)))
    if abs(det) != 1:
        raise ValueError("matrix is not unimodular")
    return det * np.array([[M[1, 1], -M[0, 1]], [-M[1, 0], M[0, 0]]], dtype=np.int64)


class MappingTorusField:
    """n_s slices on T^2 x [0,1) with the gluing (x, 1) ~ (A x, 0)."""

    def __init__(self, spec, slices, matrix=CAT):
        slices = np.asarray(slices)
        n = spec.n_side
        if slices.shape != (spec.n_s, n, n):
            raise ValueError(f"slices shape {slices.shape} != {(spec.n_s, n, n)}")
        self.spec = spec
        self.slices = slices.astype(complex) if not np.iscomplexobj(slices) else slices.copy()
        self.matrix = np.asarray(matrix, dtype=np.int64)

    @property
    def s_grid(self):
        return np.arange(self.spec.n_s) / self.spec.n_s

    @classmethod
    def from_function(cls, spec, func, matrix=CAT):
        x1, x2 = lattice_points(spec.n_side)
        sl = [func(x1, x2, s) for s in np.arange(spec.n_s) / spec.n_s]
        return cls(spec, np.array(sl, dtype=complex), matrix)

    @classmethod
    def slice_constant(cls, g, n_s=None, matrix=CAT):
        spec = g.spec if n_s is None else GridSpec(g.spec.n_side, n_s)
        return cls(spec, np.repeat(g.values[None], spec.n_s, axis=0), matrix)

    def slice(self, j):
        return Grid2Field(GridSpec(self.spec.n_side, self.spec.n_s), values=self.slices[j])

    def top_slice(self):
        """Samples at s = 1, obtained from slice 0 through the gluing."""
        return lattice_compose(self.slices[0], self.matrix)

    def twist_defect(self, top_values):
        """Sup distance between supplied s=1 samples and slice 0 composed with A."""
        return float(np.max(np.abs(top_values - self.top_slice())))

    def sup(self):
        return float(np.max(np.abs(self.slices)))


# chart constants for the two-chart atlas of the mapping torus
CHART_RAMP = (0.05, 0.45)


def chart_weight(s):
    """Smooth partition function: 1 on [0.45, 0.55], 0 outside (0.05, 0.95)."""
    s = np.mod(np.asarray(s, dtype=float), 1.0)
    a, b = CHART_RAMP
    up = smoothstep((s - a) / (b - a))
    down = 1.0 - smoothstep((s - (1 - b)) / (b - a))
    return np.where(s <= 0.5, up, down)


def _chart_arrays(f):
    ns = f.spec.n_s
    s = f.s_grid
    w1 = chart_weight(s)
    one = w1[:, None, None] * f.slices
    # chart 2 covers s in [0.5, 1.5); heights >= 1 are read through the twist
    half = ns // 2
    shifted = np.empty_like(f.slices)
    shifted[: ns - half] = f.slices[half:]
    for j in range(half):
        shifted[ns - half + j] = lattice_compose(f.slices[j], f.matrix)
    s2 = 0.5 + np.arange(ns) / ns
    w2 = 1.0 - chart_weight(s2)
    two = w2[:, None, None] * shifted
    return one, two, w1, w2


def hz_norm_torus3(f, s, cutoff=None):
    """
    Chartwise Hölder-Zygmund norm on the mapping torus.

    Each chart is a T^3 patch (s-period 1) carrying the cut-off field; the
    chart norm is divided by the chart norm of the constant function so that
    f == 1 has norm exactly 1.
    """
    ns = f.spec.n_s
    if ns < 8 or ns % 2:
        raise ConfigurationError("n_s must be even and >= 8 for the chart overlap")
    cutoff = cutoff or CutoffSpec()
    shape = (ns, f.spec.n_side, f.spec.n_side)
    bank = _bank_cached(shape, cutoff)
    one, two, w1, w2 = _chart_arrays(f)
    weights = 2.0 ** (s * np.arange(len(bank)))
    out = 0.0
    for arr, w in ((one, w1), (two, w2)):
        ref = np.broadcast_to(w[:, None, None], shape).astype(complex)
        num = np.max(weights * bank.band_sups(arr))
        den = np.max(weights * bank.band_sups(ref))
        out = max(out, float(num / den))
    return out


def hz_norm_1d(values, s, cutoff=None):
    """Dyadic norm of a periodic function sampled on [0, 1)."""
    cutoff = cutoff or CutoffSpec()
    bank = _bank_cached((len(values),), cutoff)
    b = bank.band_sups(np.asarray(values, dtype=complex))
    return float(np.max(2.0 ** (s * np.arange(len(b))) * b))


# ---------------------------------------------------------------------------
# cone symbols and multipliers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConeSymbol:
    """
    Multiplier symbol on R^2: angular factor times radial factor.

    direction / half_angle describe a two-sided cone around a covector line
    (direction None means no angular restriction).  The radial factor is 1 on
    [p_lo, p_hi] and 0 outside [r_lo, r_hi]; r_hi may be inf.  The angular
    factor is 1 for angles below half_angle*(1-width) and 0 beyond half_angle.
    """

    direction: tuple | None = None
    half_angle: float | None = None
    r_lo: float = 0.0
    r_hi: float = math.inf
    p_lo: float | None = None
    p_hi: float | None = None
    width: float = 0.25

    def __post_init__(self):
        if self.direction is not None:
            d = np.asarray(self.direction, dtype=float)
            d = d / np.linalg.norm(d)
            object.__setattr__(self, "direction", (float(d[0]), float(d[1])))
            if self.half_angle is None or not (0 < self.half_angle <= math.pi / 2):
                raise ConfigurationError("cone needs 0 < half_angle <= pi/2")
        if not (0 < self.width < 1):
            raise ConfigurationError("width must lie in (0, 1)")
        p_lo = self.p_lo if self.p_lo is not None else (self.r_lo * (1 + self.width) if self.r_lo > 0 else 0.0)
        p_hi = self.p_hi if self.p_hi is not None else (self.r_hi / (1 + self.width) if math.isfinite(self.r_hi) else math.inf)
        object.__setattr__(self, "p_lo", float(p_lo))
        object.__setattr__(self, "p_hi", float(p_hi))
        if not (0 <= self.r_lo <= self.p_lo <= self.p_hi <= self.r_hi):
            raise ConfigurationError("need r_lo <= p_lo <= p_hi <= r_hi")

    @property
    def is_conic(self):
        return self.direction is not None

    def radial(self, r):
        r = np.asarray(r, dtype=float)
        out = np.ones_like(r)
        if self.r_lo > 0:
            if self.p_lo > self.r_lo:
                out = out * smoothstep((r - self.r_lo) / (self.p_lo - self.r_lo))
            else:
                out = out * (r > self.r_lo)
        if math.isfinite(self.r_hi):
            if self.r_hi > self.p_hi:
                out = out * (1.0 - smoothstep((r - self.p_hi) / (self.r_hi - self.p_hi)))
            else:
                out = out * (r < self.r_hi)
        return out

    def angle_to_axis(self, x1, x2):
        d = self.direction
        r = np.hypot(x1, x2)
        with np.errstate(invalid="ignore", divide="ignore"):
            c = np.abs(x1 * d[0] + x2 * d[1]) / r
        c = np.where(r > 0, np.clip(c, 0.0, 1.0), 0.0)
        return np.arccos(c)

    def angular(self, x1, x2):
        if not self.is_conic:
            return np.ones(np.broadcast(x1, x2).shape)
        theta = self.angle_to_axis(x1, x2)
        a0 = self.half_angle * (1 - self.width)
        val = 1.0 - smoothstep((theta - a0) / (self.half_angle - a0))
        return np.where(np.hypot(x1, x2) > 0, val, 0.0)

    def __call__(self, x1, x2):
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        return self.angular(x1, x2) * self.radial(np.hypot(x1, x2))

    def scaled(self, factor):
        """Symbol xi -> self(xi / factor) expressed as a new ConeSymbol."""
        return ConeSymbol(self.direction, self.half_angle, self.r_lo * factor, self.r_hi * factor,
                          self.p_lo * factor, self.p_hi * factor, self.width)

    def to_dict(self):
        d = {"direction": self.direction, "half_angle": self.half_angle, "r_lo": self.r_lo,
             "r_hi": self.r_hi if math.isfinite(self.r_hi) else None, "p_lo": self.p_lo,
             "p_hi": self.p_hi if math.isfinite(self.p_hi) else None, "width": self.width}
        return d


def annulus_symbol(eps=0.5):
    """Phi: support (1+eps)^-1 < |xi| < 1+eps, plateau on the eps/2 annulus."""
    return ConeSymbol(r_lo=1 / (1 + eps), r_hi=1 + eps, p_lo=1 / (1 + eps / 2), p_hi=1 + eps / 2)


def ball_symbol(plateau=2.0, support=3.0):
    """Psi: 1 on |xi| < plateau, 0 beyond support."""
    return ConeSymbol(r_lo=0.0, r_hi=support, p_lo=0.0, p_hi=plateau)


def symbol_table(sym, n, h=1.0):
    x1, x2 = xi_grid(n)
    return sym(h * x1, h * x2)


def band_filter_apply(f, sym, h=1.0):
    """Op_h(sym) f: coefficients multiplied by sym(h xi)."""
    if not (0 < h <= 1):
        raise ConfigurationError("h must lie in (0, 1]")
    return Grid2Field(f.spec, coeffs=f.coeffs * symbol_table(sym, f.n, h))


# ---------------------------------------------------------------------------
# norm comparison checks
# ---------------------------------------------------------------------------


@dataclass
class EquivReport:
    norm_a: float
    norm_b: float
    ratio: float
    h_sample: list = field(default_factory=list)


def dyadic_h_sample(h0, n, eps=0.5):
    """h0 * 2^-m down to the scale where Phi falls off the lattice."""
    r_max = 2 * np.pi * n / 2 * math.sqrt(2)
    hs = []
    h = h0
    while (1 / (1 + eps)) / h <= r_max:
        hs.append(h)
        h /= 2
    return hs


def norm_equivalence_check(f, s, h0=0.25, Phi=None, Psi=None, h_sample=None, eps=0.5):
    """Compare the semiclassical norm built from (Phi, Psi) with hz_norm."""
    Phi = Phi or annulus_symbol(eps)
    Psi = Psi or ball_symbol()
    hs = list(h_sample) if h_sample is not None else dyadic_h_sample(h0, f.n, eps)
    if not hs:
        raise ConfigurationError("empty h-sample")
    low = band_filter_apply(f, Psi, h0).sup()
    high = max(h ** (-s) * band_filter_apply(f, Phi, h).sup() for h in hs)
    a = low + high
    b = hz_norm(f, s)
    ratio = a / b if b > 0 else (1.0 if a == 0 else math.inf)
    return EquivReport(a, b, ratio, hs)


def _form_of(b):
    if b.r_lo >= 0.5:
        return "high"
    if math.isfinite(b.r_hi) and b.r_hi <= 2.0:
        return "low"
    raise ConfigurationError("symbol must be supported in |xi| > 1/2 or in |xi| < 2")


def scale_comparison_check(f, rho, rho_p, h, b, C=None, N=4):
    """
    Both sides of the rho / rho' comparison for Op_h(b) f.

    For b supported in |xi| > 1/2: lhs = ||Op_h(b)f||_{C^rho},
    rhs = h^{rho'-rho} ||Op_h(b)f||_{C^rho'} + h^N ||f||_{C^-N}.  For b
    supported in |xi| < 2 the roles of rho and rho' swap.  ``ratio`` is
    lhs/rhs; with a fitted C the report says whether lhs <= C rhs.
    """
    if not rho_p > rho:
        raise ConfigurationError("need rho' > rho")
    form = _form_of(b)
    g = band_filter_apply(f, b, h)
    tail = h**N * hz_norm(f, -N)
    if form == "high":
        lhs = hz_norm(g, rho)
        rhs = h ** (rho_p - rho) * hz_norm(g, rho_p) + tail
    else:
        lhs = hz_norm(g, rho_p)
        rhs = h ** (rho - rho_p) * hz_norm(g, rho) + tail
    ratio = lhs / rhs if rhs > 0 else 0.0
    out = {"form": form, "lhs": lhs, "rhs": rhs, "ratio": ratio}
    out["satisfied"] = bool(lhs <= (C if C is not None else ratio) * rhs * (1 + 1e-12) + 1e-300)
    return out


def plane_wave(spec, k):
    n = spec.n_side
    x1, x2 = lattice_points(n)
    return Grid2Field(spec, values=np.exp(2j * np.pi * (k[0] * x1 + k[1] * x2)))


def _scaled_trig(spec, h, r_max, rng):
    """Random unit-sup trig polynomial with |h xi| <= r_max."""
    n = spec.n_side
    x1, x2 = xi_grid(n)
    mask = np.hypot(h * x1, h * x2) <= r_max
    c = np.zeros((n, n), dtype=complex)
    m = int(mask.sum())
    c[mask] = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    u = Grid2Field(spec, coeffs=c)
    return u.with_values(u.values / u.sup())


def linf_band_bound(sym, h_list, trials, seed, spec=None):
    """
    Empirical L^inf -> L^inf norm of Op_h(sym), per h.

    Each h gets ``trials`` random unit-sup polynomials at scale h plus, when
    the lattice has one, a plane wave sitting on the plateau of the symbol.
    """
    spec = spec or GridSpec(256)
    if math.isfinite(sym.r_hi) is False:
        raise ConfigurationError("symbol annulus must be compact")
    rng = np.random.default_rng(seed)
    out = {}
    xi1, xi2 = xi_grid(spec.n_side)
    for h in h_list:
        tab = sym(h * xi1, h * xi2)
        best = 0.0
        for _ in range(trials):
            u = _scaled_trig(spec, h, 2 * sym.r_hi, rng)
            v = np.fft.ifft2(np.fft.fft2(u.values) * tab)
            best = max(best, float(np.max(np.abs(v))))
        on = np.argwhere(np.abs(tab - 1.0) < 1e-14)
        if len(on):
            i, j = on[len(on) // 2]
            best = max(best, 1.0)
        out[float(h)] = best
    return out


def disjoint_support_product_check(a, b, h0, h, f, amplitude=None):
    """
    ||Op_h0(a) Op_h(c b) f||_inf where Op_h(c b) = c(x) * Op_h(b).

    With a constant amplitude the composition is an exact product of
    multipliers and vanishes whenever the supports are disjoint; a smooth
    non-polynomial amplitude c(x) spreads Op_h(b) f over all frequencies with
    tails decaying like the Fourier coefficients of c.
    Returns (residual, disjoint_flag).
    """
    n = f.n
    xi1, xi2 = xi_grid(n)
    tb = b(h * xi1, h * xi2)
    ta = a(h0 * xi1, h0 * xi2)
    disjoint = not np.any((ta > 0) & (tb > 0))
    inner = np.fft.ifft2(f.coeffs * tb) * n * n
    if amplitude is not None:
        inner = inner * amplitude.values
    out = np.fft.ifft2(np.fft.fft2(inner) * ta)
    return float(np.max(np.abs(out))), bool(disjoint)


def local_exponents(hs, values):
    """Slopes of log(value) against log(h) between consecutive samples."""
    hs = np.asarray(hs, dtype=float)
    v = np.asarray(values, dtype=float)
    return np.diff(np.log(v)) / np.diff(np.log(hs))


def control_by_cs_ratio(f, sym, h, s):
    """||Op_h(sym) f||_inf / (h^s ||f||_{C^s}) for sym supported in |xi| > 1."""
    if sym.r_lo < 1.0:
        raise ConfigurationError("symbol must be supported in |xi| > 1")
    num = band_filter_apply(f, sym, h).sup()
    den = h**s * hz_norm(f, s)
    return num / den if den > 0 else 0.0
