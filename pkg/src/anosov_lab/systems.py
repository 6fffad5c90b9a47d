"""
Concrete Anosov systems: cat maps, trigonometric perturbations of them,
suspension flows over the mapping torus, and the Bolza surface group.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .lp_calculus import (
    ConfigurationError,
    Grid2Field,
    MappingTorusField,
    lattice_compose,
    lattice_points,
)


class NotHyperbolicError(ValueError):
    pass


class ConeConditionError(ValueError):
    def __init__(self, msg, point=None):
        super().__init__(msg)
        self.point = point


class ConvergenceError(RuntimeError):
    def __init__(self, msg, residual=None):
        super().__init__(msg)
        self.residual = residual


# ---------------------------------------------------------------------------
# perturbations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrigTerm:
    """amp * sin(2 pi <k, x> + phase), a vector-valued term."""

    amp: tuple
    k: tuple
    phase: float = 0.0


@dataclass(frozen=True)
class TrigPerturbation:
    terms: tuple = ()

    @classmethod
    def sin_x2(cls):
        """The vector field (sin 2 pi x2, 0)."""
        return cls((TrigTerm((1.0, 0.0), (0, 1)),))

    def __call__(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = np.zeros_like(x)
        for t in self.terms:
            arg = 2 * np.pi * (x @ np.asarray(t.k, dtype=float)) + t.phase
            out += np.sin(arg)[:, None] * np.asarray(t.amp)[None, :]
        return out

    def jacobian(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = np.zeros((len(x), 2, 2))
        for t in self.terms:
            k = np.asarray(t.k, dtype=float)
            arg = 2 * np.pi * (x @ k) + t.phase
            c = 2 * np.pi * np.cos(arg)
            out += c[:, None, None] * np.outer(t.amp, k)[None]
        return out

    def lipschitz_jacobian(self):
        """Upper bound for the Lipschitz constant of x -> Dp(x) (operator norm)."""
        tot = 0.0
        for t in self.terms:
            k = np.asarray(t.k, dtype=float)
            tot += (2 * np.pi) ** 2 * np.linalg.norm(t.amp) * np.linalg.norm(k) ** 2
        return tot

    def to_dict(self):
        return [{"amp": list(t.amp), "k": list(t.k), "phase": t.phase} for t in self.terms]


# ---------------------------------------------------------------------------
# maps
# ---------------------------------------------------------------------------


def _eigendata(M):
    tr = float(np.trace(M))
    det = float(round(np.linalg.det(M)))
    disc = tr * tr - 4 * det
    lam_u = (tr + math.copysign(math.sqrt(disc), tr)) / 2
    lam_s = det / lam_u

    def vec(lam):
        a, b = M[0, 0] - lam, M[0, 1]
        v = np.array([b, -a]) if abs(b) > 1e-300 or abs(a) > 1e-300 else np.array([1.0, 0.0])
        if abs(v[0]) < 1e-300 and abs(v[1]) < 1e-300:
            v = np.array([M[1, 1] - lam, -M[1, 0]])
        v = v / np.linalg.norm(v)
        return v if (v[0] > 0 or (v[0] == 0 and v[1] > 0)) else -v

    return lam_u, lam_s, vec(lam_u), vec(lam_s)


@dataclass(frozen=True)
class ConeCertificate:
    gamma: float
    min_expansion: float
    margin: float
    grid: int

    @property
    def log_expansion(self):
        return math.log(self.min_expansion)


@dataclass(eq=False)
class AnosovMap:
    """x -> A x + eps p(x) mod Z^2."""

    matrix: np.ndarray
    eps: float = 0.0
    perturbation: TrigPerturbation | None = None
    certificate: ConeCertificate | None = None
    name: str = ""

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=np.int64)
        M = self.matrix.astype(float)
        self.lam_u, self.lam_s, self.e_u, self.e_s = _eigendata(M)
        if not self.name:
            self.name = "cat" + "".join(str(int(v)) for v in self.matrix.ravel())
            if self.is_perturbed:
                self.name += f"+eps{self.eps:g}"

    @property
    def kind(self):
        return "perturbed" if self.is_perturbed else "linear"

    @property
    def is_perturbed(self):
        return self.eps != 0 and self.perturbation is not None and len(self.perturbation.terms) > 0

    @property
    def log_lambda(self):
        return math.log(abs(self.lam_u))

    @property
    def system_id(self):
        return self.name

    @property
    def eigenbasis(self):
        return np.column_stack([self.e_u, self.e_s])

    def __call__(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        y = x @ self.matrix.T.astype(float)
        if self.is_perturbed:
            y = y + self.eps * self.perturbation(x)
        return np.mod(y, 1.0)

    def lift(self, x):
        """Same map without reduction mod 1 (for derivative checks)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        y = x @ self.matrix.T.astype(float)
        if self.is_perturbed:
            y = y + self.eps * self.perturbation(x)
        return y

    def derivative(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        D = np.broadcast_to(self.matrix.astype(float), (len(x), 2, 2)).copy()
        if self.is_perturbed:
            D += self.eps * self.perturbation.jacobian(x)
        return D

    def inverse(self, x, tol=1e-15, max_iter=200):
        """Preimage under the map via y = A^-1 (x - eps p(y))."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        Ainv = np.linalg.inv(self.matrix.astype(float))
        y = np.mod(x @ Ainv.T, 1.0)
        if not self.is_perturbed:
            return y
        for _ in range(max_iter):
            y_new = (x - self.eps * self.perturbation(y)) @ Ainv.T
            # pick the lift closest to the previous iterate
            y_new = y + _wrap(y_new - y)
            err = np.max(np.abs(_wrap(y_new - y)))
            y = y_new
            if err < tol:
                break
        return np.mod(y, 1.0)

    def orbit(self, x, n):
        pts = [np.atleast_2d(np.asarray(x, dtype=float))]
        for _ in range(n):
            pts.append(self(pts[-1]))
        return np.stack(pts)

    def to_dict(self):
        d = {"matrix": self.matrix.tolist(), "eps": self.eps, "kind": self.kind}
        if self.perturbation is not None:
            d["perturbation"] = self.perturbation.to_dict()
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


def _wrap(d):
    return d - np.round(d)


def cat_map_system(matrix=((2, 1), (1, 1))):
    M = np.asarray(matrix)
    if M.shape != (2, 2) or not np.all(M == np.round(M)):
        raise ValueError("need an integer 2x2 matrix")
    M = M.astype(np.int64)
    det = int(round(np.linalg.det(M)))
    if abs(det) != 1:
        raise ValueError(f"|det| must be 1, got {det}")
    if abs(int(np.trace(M))) <= 2:
        raise NotHyperbolicError(f"|trace| = {abs(int(np.trace(M)))} <= 2: not hyperbolic")
    return AnosovMap(M)


CONE_GAMMAS = (0.05, 0.1, 0.2, 0.4, 0.8)


def certify_cones(base, eps, pert, grid=64, gammas=CONE_GAMMAS):
    """
    Cone-field certificate in eigen-coordinates of the linear part.

    For each gamma the unstable cone {|b| <= gamma |a|} (coordinates along
    e_u, e_s) must map strictly inside itself with u-expansion > 1 at all grid
    points, with entries padded by a Lipschitz margin covering the cells
    between grid points.  Returns the certificate with the best expansion.
    """
    P = base.eigenbasis
    Pinv = np.linalg.inv(P)
    x1, x2 = lattice_points(grid)
    pts = np.column_stack([x1.ravel(), x2.ravel()])
    Dp = pert.jacobian(pts)
    M = np.einsum("ij,njk,kl->nil", Pinv, base.matrix.astype(float)[None] + eps * Dp, P)
    cond = np.linalg.norm(P, 2) * np.linalg.norm(Pinv, 2)
    margin = eps * pert.lipschitz_jacobian() * cond * (math.sqrt(2) / 2) / grid
    m11 = np.abs(M[:, 0, 0]) - margin
    m12 = np.abs(M[:, 0, 1]) + margin
    m21 = np.abs(M[:, 1, 0]) + margin
    m22 = np.abs(M[:, 1, 1]) + margin
    best = None
    worst = None
    for g in gammas:
        den = m11 - g * m12
        num = m21 + g * m22
        with np.errstate(divide="ignore", invalid="ignore"):
            slope = np.where(den > 0, num / den, np.inf)
        ok = (den > 1.0) & (slope < g)
        if np.all(ok):
            cert = ConeCertificate(g, float(np.min(den)), float(margin), grid)
            if best is None or cert.min_expansion > best.min_expansion:
                best = cert
        else:
            bad = int(np.argmin(np.where(ok, np.inf, den - 1.0 + (g - slope))))
            worst = pts[bad]
    if best is None:
        raise ConeConditionError(f"cone condition fails at grid point {tuple(np.round(worst, 6))}",
                                 tuple(worst))
    return best


def perturbed_cat_map(base, eps, bump=None, grid=64):
    if base.is_perturbed:
        raise ValueError("base must be linear")
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    if eps == 0:
        return base
    bump = bump or TrigPerturbation.sin_x2()
    cert = certify_cones(base, eps, bump, grid)
    return AnosovMap(base.matrix, eps, bump, cert)


# ---------------------------------------------------------------------------
# suspension flows
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class AnosovFlow:
    """Vertical flow on the mapping torus of ``base`` with return time ``roof``."""

    base: AnosovMap
    roof: Grid2Field

    @property
    def system_id(self):
        return self.base.system_id

    @property
    def roof_constant(self):
        v = self.roof.values.real
        return float(v.flat[0]) if np.ptp(v) == 0 else None

    def roof_at(self, pts):
        c = self.roof_constant
        if c is not None:
            return np.full(len(np.atleast_2d(pts)), c)
        return self.roof.evaluate(pts).real

    def slice_step(self, n_s):
        c = self.roof_constant
        if c is None:
            raise ConfigurationError("exact slice propagation needs a constant roof")
        return c / n_s

    def propagate(self, f, t, weight=None):
        """
        (e^{-tX} f) = exp(int_0^t v o phi_{-tau}) * f o phi_{-t} on slices.

        Exact for a linear base with constant roof and t a multiple of the
        slice step: lattice permutation at each pass through the gluing.
        weight: None, a float (constant v) or a MappingTorusField.
        """
        if self.base.is_perturbed:
            raise ConfigurationError("exact propagation needs a linear base")
        ns = f.spec.n_s
        step = self.slice_step(ns)
        m = t / step
        if abs(m - round(m)) > 1e-9:
            raise ConfigurationError("t is not a multiple of the slice step; interpolation not permitted")
        m = int(round(m))
        sl = f.slices.copy()
        A = self.base.matrix
        logw = np.zeros(sl.shape) if weight is not None and not np.isscalar(weight) else None
        wsl = weight.slices if logw is not None else None
        for _ in range(abs(m)):
            if m > 0:
                new = np.empty_like(sl)
                new[1:] = sl[:-1]
                new[0] = lattice_compose(sl[-1], A, -1)
                if logw is not None:
                    lw = np.empty_like(logw)
                    lw[1:] = logw[:-1]
                    lw[0] = lattice_compose(logw[-1], A, -1)
                    prev = np.empty_like(wsl)
                    prev[1:] = wsl[:-1]
                    prev[0] = lattice_compose(wsl[-1], A, -1)
                    logw = lw + step * 0.5 * (wsl + prev)
            else:
                new = np.empty_like(sl)
                new[:-1] = sl[1:]
                new[-1] = lattice_compose(sl[0], A, 1)
                if logw is not None:
                    lw = np.empty_like(logw)
                    lw[:-1] = logw[1:]
                    lw[-1] = lattice_compose(logw[0], A, 1)
                    nxt = np.empty_like(wsl)
                    nxt[:-1] = wsl[1:]
                    nxt[-1] = lattice_compose(wsl[0], A, 1)
                    logw = lw - step * 0.5 * (wsl + nxt)
            sl = new
        if weight is None:
            out = sl
        elif np.isscalar(weight):
            out = sl * math.exp(weight * t)
        else:
            out = sl * np.exp(logw)
        return MappingTorusField(f.spec, out, A)


def suspension_flow(base, roof):
    if np.iscomplexobj(roof.values) and np.max(np.abs(roof.values.imag)) > 1e-12:
        raise ValueError("roof must be real")
    if float(np.min(roof.values.real)) <= 0:
        raise ValueError("roof must be strictly positive")
    return AnosovFlow(base, roof)


def constant_roof(spec, c=1.0):
    return Grid2Field.constant(spec, c)


# ---------------------------------------------------------------------------
# splitting
# ---------------------------------------------------------------------------


@dataclass
class SplittingFrame:
    x: np.ndarray
    e_u: np.ndarray
    e_s: np.ndarray
    eta_u: np.ndarray
    eta_s: np.ndarray
    residual: float = 0.0
    flow: bool = False

    @property
    def eta_0(self):
        return np.array([0.0, 0.0, 1.0]) if self.flow else None

    def projector_u(self):
        """Projection onto E_u along E_s (eta_s vanishes on E_s)."""
        return np.outer(self.e_u, self.eta_s) / float(self.eta_s @ self.e_u)

    def projector_s(self):
        return np.outer(self.e_s, self.eta_u) / float(self.eta_u @ self.e_s)


def _perp(v):
    return np.array([-v[1], v[0]])


def _orient(v):
    v = v / np.linalg.norm(v)
    return v if (v[0] > 0 or (v[0] == 0 and v[1] > 0)) else -v


def _frame(x, eu, es, res, flow):
    eu, es = _orient(eu), _orient(es)
    # E*_s annihilates E_s, E*_u annihilates E_u
    eta_s = _perp(es)
    eta_s = eta_s / (eta_s @ eu)
    eta_u = _perp(eu)
    eta_u = eta_u / (eta_u @ es)
    return SplittingFrame(np.asarray(x, float), eu, es, eta_u, eta_s, res, flow)


def splitting_at(system, x, n_iter=40, tol=1e-10):
    flow = isinstance(system, AnosovFlow)
    m = system.base if flow else system
    if n_iter < 1:
        raise ValueError("n_iter must be >= 1")
    x = np.asarray(x, dtype=float).ravel()[:2]
    if not m.is_perturbed:
        return _frame(x, m.e_u, m.e_s, 0.0, flow)
    eu, ru = _unstable_direction(m, x, n_iter)
    es, rs = _stable_direction(m, x, n_iter)
    res = max(ru, rs)
    if res > tol:
        raise ConvergenceError(f"splitting did not converge: residual {res:.3e}", res)
    return _frame(x, eu, es, res, flow)


def _push_unstable(m, x, n):
    back = [np.atleast_2d(x)]
    for _ in range(n):
        back.append(m.inverse(back[-1]))
    v = m.e_u.copy()
    for y in reversed(back[1:]):
        v = m.derivative(y)[0] @ v
        v = v / np.linalg.norm(v)
    return v


def _pull_stable(m, x, n):
    fwd = [np.atleast_2d(x)]
    for _ in range(n):
        fwd.append(m(fwd[-1]))
    v = m.e_s.copy()
    for y in reversed(fwd[:-1]):
        v = np.linalg.solve(m.derivative(y)[0], v)
        v = v / np.linalg.norm(v)
    return v


def _sin_angle(a, b):
    return abs(a[0] * b[1] - a[1] * b[0]) / (np.linalg.norm(a) * np.linalg.norm(b))


def _unstable_direction(m, x, n):
    v = _push_unstable(m, x, n)
    return v, _sin_angle(v, _push_unstable(m, x, max(n - 2, 0)))


def _stable_direction(m, x, n):
    v = _pull_stable(m, x, n)
    return v, _sin_angle(v, _pull_stable(m, x, max(n - 2, 0)))


def splitting_grid(m, n, n_iter=40):
    """E_u, E_s at all lattice points (vectorized power iteration)."""
    x1, x2 = lattice_points(n)
    pts = np.column_stack([x1.ravel(), x2.ravel()])
    if not m.is_perturbed:
        k = len(pts)
        return pts, np.tile(m.e_u, (k, 1)), np.tile(m.e_s, (k, 1))
    back = [pts]
    for _ in range(n_iter):
        back.append(m.inverse(back[-1]))
    v = np.tile(m.e_u, (len(pts), 1))
    for y in reversed(back[1:]):
        v = np.einsum("nij,nj->ni", m.derivative(y), v)
        v /= np.linalg.norm(v, axis=1)[:, None]
    fwd = [pts]
    for _ in range(n_iter):
        fwd.append(m(fwd[-1]))
    w = np.tile(m.e_s, (len(pts), 1))
    for y in reversed(fwd[:-1]):
        w = np.linalg.solve(m.derivative(y), w[..., None])[..., 0]
        w /= np.linalg.norm(w, axis=1)[:, None]
    s = np.sign(v[:, :1] * m.e_u[0] + v[:, 1:] * m.e_u[1])
    t = np.sign(w[:, :1] * m.e_s[0] + w[:, 1:] * m.e_s[1])
    return pts, v * s, w * t


def projector_field(m, pts, n_iter=40):
    """pi_{E_u} at each point, shape (k, 2, 2)."""
    out = []
    for p in np.atleast_2d(pts):
        out.append(splitting_at(m, p, n_iter).projector_u())
    return np.array(out)


def fd_derivative(m, pts, delta):
    """Central finite-difference Jacobian of the lifted map with step delta."""
    pts = np.atleast_2d(pts)
    J = np.empty((len(pts), 2, 2))
    for i in range(2):
        e = np.zeros(2)
        e[i] = delta
        J[:, :, i] = (m.lift(pts + e) - m.lift(pts - e)) / (2 * delta)
    return J


def projector_lie_residual(system, delta, n_points=64, seed=0, n_iter=40):
    """
    Pullback defect of pi_{E_u} across one pass of the flow through the gluing.

    The flow derivative there is the map derivative, approximated by central
    differences with step delta; the defect is
    max |Df^{-1} pi(f x) Df - pi(x)|, exact zero for invariant projectors,
    and O(delta^2) with the finite-difference cocycle.
    """
    m = system.base if isinstance(system, AnosovFlow) else system
    rng = np.random.default_rng(seed)
    pts = rng.random((n_points, 2))
    pi_x = projector_field(m, pts, n_iter)
    pi_fx = projector_field(m, m(pts), n_iter)
    J = fd_derivative(m, pts, delta)
    pull = np.linalg.solve(J, pi_fx @ J)
    return float(np.max(np.abs(pull - pi_x)))


# ---------------------------------------------------------------------------
# conjugacy
# ---------------------------------------------------------------------------


@dataclass
class ConjugacyField:
    n: int
    h: np.ndarray  # shape (n, n, 2), displacement at lattice points
    defect: float
    iterations: int

    def sup(self):
        return float(np.max(np.linalg.norm(self.h, axis=-1)))

    def H(self, idx):
        """Image of lattice points (integer index pairs) under id + h."""
        idx = np.atleast_2d(idx)
        return np.mod(idx / self.n + self.h[idx[:, 0], idx[:, 1]], 1.0)


def _perm_indices(A, n, power):
    i = np.arange(n)
    I, J = np.meshgrid(i, i, indexing="ij")
    M = np.linalg.matrix_power(A, power) if power >= 0 else np.linalg.matrix_power(
        np.round(np.linalg.inv(A)).astype(np.int64), -power)
    return (M[0, 0] * I + M[0, 1] * J) % n, (M[1, 0] * I + M[1, 1] * J) % n


def conjugacy_solve(base, perturbed, tol=1e-8, n=64, max_iter=200):
    """
    Solve h(A x) - A h(x) = eps p(x + h(x)) on the lattice (1/n)Z^2.

    The linear operator h -> h o A - A h is inverted on the eigen components:
    h_u = -sum_{k>=0} lam_u^{-k-1} g_u o A^k and h_s = sum_{k>=0} lam_s^k g_s o A^{-k-1}.
    Lattice points are permuted by A so these sums are evaluated exactly.
    """
    if base.is_perturbed:
        raise ValueError("base must be linear")
    if not np.array_equal(base.matrix, perturbed.matrix):
        raise ValueError("perturbed map must share the linear part of base")
    A = base.matrix
    P = base.eigenbasis
    Pinv = np.linalg.inv(P)
    lu, ls = base.lam_u, base.lam_s
    n_terms = max(20, int(math.ceil(37 * math.log(10) / math.log(abs(lu)))))
    fwd = [_perm_indices(A, n, k) for k in range(n_terms)]
    bwd = [_perm_indices(A, n, -(k + 1)) for k in range(n_terms)]
    x1, x2 = lattice_points(n)
    X = np.stack([x1, x2], axis=-1)
    AX = np.mod(X @ A.T.astype(float), 1.0)
    h = np.zeros((n, n, 2))

    def defect_of(h):
        Hx = X + h
        lhs = np.mod(AX + h[fwd[1][0], fwd[1][1]], 1.0)
        rhs = perturbed(Hx.reshape(-1, 2)).reshape(n, n, 2)
        return float(np.max(np.abs(_wrap(lhs - rhs))))

    if not perturbed.is_perturbed:
        return ConjugacyField(n, h, 0.0, 0)
    defect = defect_of(h)
    history = [defect]
    worse = 0
    for it in range(1, max_iter + 1):
        g = perturbed.eps * perturbed.perturbation((X + h).reshape(-1, 2)).reshape(n, n, 2)
        gc = g @ Pinv.T
        gu, gs = gc[..., 0], gc[..., 1]
        hu = np.zeros((n, n))
        hs = np.zeros((n, n))
        for k in range(n_terms):
            hu -= lu ** (-k - 1) * gu[fwd[k][0], fwd[k][1]]
            hs += ls**k * gs[bwd[k][0], bwd[k][1]]
        h = np.stack([hu, hs], axis=-1) @ P.T
        defect = defect_of(h)
        worse = worse + 1 if defect > history[-1] else 0
        history.append(defect)
        if worse >= 5:
            raise ConvergenceError(f"conjugacy iteration diverging (defect {defect:.3e})", defect)
        if defect <= tol:
            return ConjugacyField(n, h, defect, it)
    raise ConvergenceError(f"no convergence in {max_iter} iterations (defect {defect:.3e})", defect)


def lattice_period(A, n, idx):
    """Minimal period of lattice point idx/n under A."""
    i0 = np.asarray(idx, dtype=np.int64)
    cur = i0.copy()
    for q in range(1, 10 * n * n + 1):
        cur = (A @ cur) % n
        if np.array_equal(cur, i0):
            return q
    raise RuntimeError("period not found")


# ---------------------------------------------------------------------------
# Lyapunov exponents
# ---------------------------------------------------------------------------


@dataclass
class LyapunovReport:
    lambda_u_min: float
    lambda_u_max: float
    lambda_s_min: float
    lambda_s_max: float
    n_orbits: int
    T: int
    per_unit_time: bool = False
    short_horizon: bool = False
    per_orbit: list = field(default_factory=list)

    def to_dict(self):
        return {k: getattr(self, k) for k in ("lambda_u_min", "lambda_u_max", "lambda_s_min",
                                              "lambda_s_max", "n_orbits", "T", "per_unit_time",
                                              "short_horizon")}


def _qr_exponents(m, x0, T):
    fr = splitting_at(m, x0) if m.is_perturbed else None
    e_u = fr.e_u if fr is not None else m.e_u
    e_s = fr.e_s if fr is not None else m.e_s
    Q = np.column_stack([e_u, e_s])
    Q, _ = np.linalg.qr(Q)
    if Q[:, 0] @ e_u < 0:
        Q = -Q
    x = np.atleast_2d(x0)
    s1 = s2 = 0.0
    for _ in range(T):
        D = m.derivative(x)[0]
        Q, R = np.linalg.qr(D @ Q)
        s1 += math.log(abs(R[0, 0]))
        s2 += math.log(abs(R[1, 1]))
        x = m(x)
    return s1 / T, -s2 / T


def lyapunov_data(system, orbit_sample, T=200):
    """
    Per-orbit exponents via re-orthonormalized cocycle products, started from
    the splitting frame so the first column tracks E_u from step one.  Stable
    rates are reported as positive numbers.  For flows the per-step rates are
    divided by the mean roof along the orbit.
    """
    pts = np.atleast_2d(np.asarray(orbit_sample, dtype=float))
    if len(pts) == 0:
        raise ValueError("orbit sample is empty")
    flow = isinstance(system, AnosovFlow)
    m = system.base if flow else system
    rows = []
    for p in pts:
        lu, ls = _qr_exponents(m, p, T)
        if flow:
            orb = m.orbit(p, T - 1)[:, 0, :]
            tau = float(np.mean(system.roof_at(orb)))
            lu, ls = lu / tau, ls / tau
        rows.append((lu, ls))
    rows = np.array(rows)
    return LyapunovReport(float(rows[:, 0].min()), float(rows[:, 0].max()), float(rows[:, 1].min()),
                          float(rows[:, 1].max()), len(pts), T, flow, T < 10, rows.tolist())


# ---------------------------------------------------------------------------
# Bolza surface
# ---------------------------------------------------------------------------


BOLZA_A = 1 + math.sqrt(2)
BOLZA_B = math.sqrt(2 + 2 * math.sqrt(2))
# a b c d, inverses as upper case
LETTERS = "abcd"
BOLZA_RELATION = "aBcDAbCd"
CAYLEY = np.array([[1, -1j], [1, 1j]])  # maps the upper half plane to the disc


def _su11_generator(k):
    w = np.exp(1j * k * np.pi / 4)
    return np.array([[BOLZA_A, BOLZA_B * w], [BOLZA_B * np.conj(w), BOLZA_A]], dtype=complex)


@dataclass
class FuchsianGroup:
    """Bolza side pairings as SU(1,1) disc maps and SL(2,R) half-plane maps."""

    disc: dict
    real: dict
    relation: str
    relation_residual: float

    @property
    def generators(self):
        return [self.real[c] for c in "abcdABCD"]

    def word_matrix(self, word, model="real"):
        table = self.real if model == "real" else self.disc
        M = np.eye(2, dtype=float if model == "real" else complex)
        for ch in word:
            if ch not in table:
                raise ValueError(f"unknown letter {ch!r}")
            M = M @ table[ch]
        return M


def _word_product(table, word):
    M = np.eye(2, dtype=complex)
    for ch in word:
        M = M @ table[ch]
    return M


def fuchsian_bolza():
    disc = {}
    for k, ch in enumerate(LETTERS):
        g = _su11_generator(k)
        disc[ch] = g
        disc[ch.upper()] = np.linalg.inv(g)
    P = np.linalg.inv(CAYLEY)
    real = {}
    for ch, g in disc.items():
        r = P @ g @ CAYLEY
        if np.max(np.abs(r.imag)) > 1e-12:
            raise RuntimeError("Cayley conjugate is not real")
        real[ch] = r.real
    R = _word_product(disc, BOLZA_RELATION)
    res = float(min(np.max(np.abs(R - np.eye(2))), np.max(np.abs(R + np.eye(2)))))
    if res > 1e-10:
        raise RuntimeError(f"Bolza relation residual {res:.3e}")
    return FuchsianGroup(disc, real, BOLZA_RELATION, res)
