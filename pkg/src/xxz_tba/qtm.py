"""Finite-Trotter quantum transfer matrix: Bethe roots and fusion eigenvalues.

Eigenvalues of the fusion hierarchy are evaluated from the dressed vacuum
form in the log domain (complex logs, log-sum-exp over the terms) so that
N up to ~40 and |Re v| of a few tens never overflow.  ``log_t`` returns the
complex log of T_n(u, v); ``t_eigenvalue`` exponentiates it.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .errors import DegeneracyError, DomainError, PoleError, SolverError
from .report import CheckReport
from .rational_ts import RationalP0, TSSequences, sequences_for

log = logging.getLogger(__name__)

NEWTON_TOL = 1e-12
POLE_EPS = 1e-4


@dataclass(frozen=True)
class TrotterParams:
    N: int
    u: float
    theta: float
    beta: float | None = None
    J: float | None = None

    def __post_init__(self):
        if self.N <= 0 or self.N % 2:
            raise DomainError(f"Trotter number must be even and positive, got {self.N}")
        if not 0 < self.theta <= math.pi / 2 + 1e-15:
            raise DomainError("theta must lie in (0, pi/2]")
        if abs(self.u) > 0.5:
            warnings.warn(f"|u| = {abs(self.u):.3g} is large; zero-location conjectures were only observed for |u| <~ 0.1")

    @classmethod
    def from_physical(cls, p0, beta, J, N):
        p0 = RationalP0.parse(p0)
        theta = p0.theta
        return cls(N, trotter_coupling(beta, J, theta, N), theta, beta, J)

    @classmethod
    def from_p0(cls, p0, N, u):
        return cls(N, u, RationalP0.parse(p0).theta)

    @property
    def p0(self) -> float:
        return math.pi / self.theta


def trotter_coupling(beta, J, theta, N):
    """u_N = -beta J sin(theta) / (theta N)."""
    return -beta * J * math.sin(theta) / (theta * N)


@dataclass(frozen=True)
class BetheState:
    """Bethe roots of one QTM eigenstate.

    ``quantum_numbers`` are the (half-)integers I_j of the real roots in the
    logarithmic Bethe equations; ``fixed_roots`` are roots pinned by symmetry
    (0 and i p0 for the rank-3 state) that carry no equation of their own.
    """

    tp: TrotterParams
    roots: np.ndarray
    quantum_numbers: np.ndarray
    rank: int
    fixed_roots: tuple = ()
    residual: float = 0.0
    iterations: int = 0

    @property
    def m(self) -> int:
        return len(self.roots)

    @property
    def real_roots(self):
        """The free (non-pinned) roots, all real."""
        mask = np.ones(len(self.roots), bool)
        for c in self.fixed_roots:
            mask &= ~np.isclose(self.roots, c, atol=1e-14)
        return self.roots[mask].real


# --- elementary functions -------------------------------------------------

def _log_sinh(z):
    return np.log(np.sinh(z))


def log_phi(v, tp: TrotterParams):
    v = np.asarray(v, complex)
    return (tp.N // 2) * (_log_sinh(tp.theta * v / 2) - math.log(math.sin(tp.theta)))


def phi(v, tp: TrotterParams):
    """(sinh(theta v / 2) / sin theta)^(N/2)."""
    v = np.asarray(v, complex)
    return (np.sinh(tp.theta * v / 2) / math.sin(tp.theta)) ** (tp.N // 2)


def log_q(v, roots, theta):
    v = np.asarray(v, complex)
    roots = np.asarray(roots, complex)
    if roots.size == 0:
        return np.zeros(v.shape, complex)
    return _log_sinh(theta * (v[..., None] - roots) / 2).sum(axis=-1)


def q_function(v, bs, theta=None):
    """Product over roots of sinh(theta (v - w_j) / 2); 1 when there are no roots."""
    roots = bs.roots if isinstance(bs, BetheState) else np.asarray(bs, complex)
    theta = bs.tp.theta if theta is None else theta
    v = np.asarray(v, complex)
    if len(roots) == 0:
        return np.ones(v.shape, complex)
    return np.prod(np.sinh(theta * (v[..., None] - roots) / 2), axis=-1)


def logsumexp_complex(terms, axis=0):
    terms = np.asarray(terms, complex)
    re = terms.real
    s = np.max(re, axis=axis, keepdims=True)
    s = np.where(np.isfinite(s), s, 0.0)
    total = np.exp(terms - s).sum(axis=axis, keepdims=True)
    with np.errstate(divide="ignore"):
        out = np.log(total) + s
    return np.squeeze(out, axis=axis)


def rel_diff(log_a, log_b):
    """|A - B| / max(|A|, |B|) with A = exp(log_a), B = exp(log_b)."""
    log_a = np.asarray(log_a, complex)
    log_b = np.asarray(log_b, complex)
    s = np.maximum(log_a.real, log_b.real)
    s = np.where(np.isfinite(s), s, 0.0)
    a = np.exp(log_a - s)
    b = np.exp(log_b - s)
    den = np.maximum(abs(a), abs(b))
    return np.where(den > 0, abs(a - b) / np.where(den > 0, den, 1.0), 0.0)


# --- dressed vacuum form --------------------------------------------------

def _near_pole(v, shifts, roots, theta, p0):
    if len(roots) == 0:
        return np.zeros(np.shape(v), bool)
    bad = np.zeros(np.shape(v), bool)
    for s in shifts:
        w = (v[..., None] + 1j * s - roots) / (2j * p0)
        # distance to the lattice 2 i p0 Z of zeros of sinh(theta w / 2)
        d = np.abs(w - np.round(w.real) - 1j * np.round(w.imag)) * 2 * p0
        bad |= (d < 1e-7).any(axis=-1)
    return bad


def _log_t_raw(n, v, roots, tp):
    d = n + 1
    u = tp.u
    j = np.arange(1, d + 1)
    vv = v[None, :]
    jj = j[:, None]
    terms = (
        log_phi(vv - 1j * (u + d + 2 - 2 * jj), tp)
        + log_phi(vv + 1j * (u - d + 2 * jj), tp)
        + log_q(vv + 1j * d, roots, tp.theta)
        + log_q(vv - 1j * d, roots, tp.theta)
        - log_q(vv + 1j * (2 * jj - d), roots, tp.theta)
        - log_q(vv + 1j * (2 * jj - d - 2), roots, tp.theta)
    )
    return logsumexp_complex(terms, axis=0)


def log_t(n, v, bs: BetheState):
    """Complex log of the fusion eigenvalue T_n(u, v) (auxiliary dimension n + 1).

    T_{-1} = 0 (log = -inf).  Points where a denominator Q-factor vanishes
    are evaluated at v +- i eps, v +- 2 i eps and Richardson-extrapolated;
    the poles of individual terms cancel in the sum.
    """
    v = np.atleast_1d(np.asarray(v, complex))
    if n < -1:
        raise DomainError("fusion index must be >= -1")
    if n == -1:
        return np.full(v.shape, -np.inf + 0j)
    tp = bs.tp
    roots = np.asarray(bs.roots, complex)
    d = n + 1
    shifts = sorted({2 * j - d for j in range(1, d + 1)} | {2 * j - d - 2 for j in range(1, d + 1)})
    bad = _near_pole(v, shifts, roots, tp.theta, tp.p0)
    out = np.empty(v.shape, complex)
    good = ~bad
    if good.any():
        out[good] = _log_t_raw(n, v[good], roots, tp)
    if bad.any():
        vb = v[bad]
        e = POLE_EPS
        vals = [np.exp(_log_t_raw(n, vb + 1j * s * e, roots, tp)) for s in (1, -1, 2, -2)]
        a1 = (vals[0] + vals[1]) / 2
        a2 = (vals[2] + vals[3]) / 2
        est = (4 * a1 - a2) / 3
        with np.errstate(divide="ignore"):
            out[bad] = np.log(est)
    return out


def t_eigenvalue(n, v, bs: BetheState):
    """T_n(u, v) from the dressed vacuum form; T_{-1} = 0, T_0 = phi phi."""
    return np.exp(log_t(n, v, bs))


# --- Bethe equations ------------------------------------------------------

def _g(w, c, theta):
    """2 arctan(tanh(theta w / 2) cot(theta c / 2)); continuous log-phase of
    sinh(theta(w + ic)/2) / sinh(theta(w - ic)/2) = -exp(-i g)."""
    cot = math.cos(theta * c / 2) / math.sin(theta * c / 2)
    return 2 * np.arctan(np.tanh(theta * np.asarray(w) / 2) * cot)


def _dg(w, c, theta):
    cot = math.cos(theta * c / 2) / math.sin(theta * c / 2)
    t = np.tanh(theta * np.asarray(w) / 2)
    return theta * (1 - t * t) * cot / (1 + (t * cot) ** 2)


def _g_shifted(w, theta):
    """g_2(w - i p0) for real w: tanh is replaced by coth."""
    cot = math.cos(theta) / math.sin(theta)
    return 2 * np.arctan(cot / np.tanh(theta * np.asarray(w) / 2))


def _dg_shifted(w, theta):
    cot = math.cos(theta) / math.sin(theta)
    x = theta * np.asarray(w) / 2
    c = 1 / np.tanh(x)
    return -theta * cot / np.sinh(x) ** 2 / (1 + (c * cot) ** 2)


class _Counting:
    """Counting function Z(w) of the real roots, with optional fixed roots.

    Z increases with w for u < 0 and decreases for u > 0.
    """

    def __init__(self, tp, fixed_roots=()):
        self.tp = tp
        self.fixed = list(fixed_roots)
        for c in self.fixed:
            if not (abs(c) < 1e-14 or abs(c - 1j * tp.p0) < 1e-12):
                raise DomainError("only 0 and i p0 are supported as fixed roots")

    def driving(self, w):
        tp = self.tp
        return tp.N / 2 * (_g(w, tp.u + 2, tp.theta) - _g(w, tp.u, tp.theta))

    def d_driving(self, w):
        tp = self.tp
        return tp.N / 2 * (_dg(w, tp.u + 2, tp.theta) - _dg(w, tp.u, tp.theta))

    def fixed_part(self, w):
        th = self.tp.theta
        out = np.zeros_like(np.asarray(w, float))
        for c in self.fixed:
            out = out + (_g(w, 2, th) if abs(c) < 1e-14 else _g_shifted(w, th))
        return out

    def d_fixed_part(self, w):
        th = self.tp.theta
        out = np.zeros_like(np.asarray(w, float))
        for c in self.fixed:
            out = out + (_dg(w, 2, th) if abs(c) < 1e-14 else _dg_shifted(w, th))
        return out

    def residual(self, x, I, lam=1.0):
        th = self.tp.theta
        diff = x[:, None] - x[None, :]
        inter = _g(diff, 2, th).sum(axis=1)
        return self.driving(x) - lam * (inter + self.fixed_part(x)) - 2 * np.pi * I

    def jacobian(self, x, lam=1.0):
        th = self.tp.theta
        diff = x[:, None] - x[None, :]
        dg = _dg(diff, 2, th)
        jac = lam * dg
        np.fill_diagonal(jac, 0.0)
        diag = self.d_driving(x) - lam * (dg.sum(axis=1) - np.diag(dg) + self.d_fixed_part(x))
        jac[np.diag_indices_from(jac)] = diag
        return jac


def _newton(cnt, x, I, lam, tol=NEWTON_TOL, maxiter=60):
    hist = []
    for it in range(maxiter):
        F = cnt.residual(x, I, lam)
        err = np.max(np.abs(F)) if F.size else 0.0
        hist.append(err)
        if err < tol:
            return x, err, it
        step = np.linalg.solve(cnt.jacobian(x, lam), -F)
        # backtrack on the residual norm
        t = 1.0
        while t > 1e-4:
            xn = x + t * step
            if np.max(np.abs(cnt.residual(xn, I, lam))) < err or t < 2e-4:
                break
            t /= 2
        x = xn
    raise SolverError(f"Bethe-equation Newton did not converge (residual {hist[-1]:.3e})", hist)


def ground_quantum_numbers(m):
    return np.arange(m) - (m - 1) / 2.0


def _homotopy_solve(cnt, I, steps=8):
    """Continuation in the root-root interaction strength from 0 to 1.

    When the bare driving term cannot reach the outer quantum numbers the
    targets are scaled down at the start and restored along the path.
    """
    I = np.asarray(I, float)
    sgn = 1.0 if cnt.driving(1e3) > cnt.driving(-1e3) else -1.0
    reach = 0.9 * min(abs(cnt.driving(1e3)), abs(cnt.driving(-1e3)))
    top = 2 * np.pi * np.max(np.abs(I)) if I.size else 0.0
    s0 = 1.0 if top <= reach else reach / top
    x = np.empty(len(I))
    for idx, Ij in enumerate(I):
        target = 2 * np.pi * Ij * s0

        def f(w):
            return sgn * (cnt.driving(w) - target)

        lo, hi = -1.0, 1.0
        while f(lo) > 0:
            lo *= 2
            if lo < -1e4:
                raise SolverError("cannot bracket a decoupled root")
        while f(hi) < 0:
            hi *= 2
            if hi > 1e4:
                raise SolverError("cannot bracket a decoupled root")
        x[idx] = optimize.brentq(f, lo, hi, xtol=1e-14)
    for lam in np.linspace(0, 1, steps + 1)[1:]:
        scale = s0 + (1 - s0) * lam
        x, _, _ = _newton(cnt, x, I * scale, lam, tol=1e-10 if lam < 1 else NEWTON_TOL)
    return x


def _check_distinct(x):
    if len(x) > 1:
        s = np.sort(x)
        if np.min(np.diff(s)) < 1e-10:
            raise DegeneracyError("Bethe roots collided")


def solve_bae(tp: TrotterParams, m=None, rank=1, seed=None, quantum_numbers=None) -> BetheState:
    """Solve the Bethe equations for the rank-1, 2 or 3 eigenstate.

    Rank 1 fills the sector m = N/2 with centred quantum numbers; rank 2 does
    the same with m = N/2 - 1.  Rank 3 takes the rank-1 roots, drops the
    outermost pair and pins roots at 0 and i p0.  ``seed`` may be a
    previously solved :class:`BetheState` (e.g. at a nearby u) to warm start.
    """
    N = tp.N
    if rank not in (1, 2, 3):
        raise DomainError("rank must be 1, 2 or 3")
    default_m = N // 2 - 1 if rank == 2 else N // 2
    m = default_m if m is None else m
    if not 0 <= m <= N // 2:
        raise DomainError(f"sector m={m} outside [0, N/2]")
    if m == 0:
        return BetheState(tp, np.zeros(0, complex), np.zeros(0), rank)

    if rank in (1, 2):
        fixed = ()
        I = ground_quantum_numbers(m) if quantum_numbers is None else np.asarray(quantum_numbers, float)
        cnt = _Counting(tp, fixed)
        if seed is not None and len(seed.real_roots) == len(I) and seed.tp.u * tp.u > 0:
            x, _, _ = _newton(cnt, np.sort(seed.real_roots), I, 1.0)
        else:
            x = _homotopy_solve(cnt, I)
    else:
        if m != N // 2 or N < 4:
            raise DomainError("rank-3 state lives in the m = N/2 sector with N >= 4")
        fixed = (0j, 1j * tp.p0)
        cnt = _Counting(tp, fixed)
        if seed is not None and seed.rank == 3:
            x0 = np.sort(seed.real_roots[np.abs(seed.real_roots) > 1e-14])
            I = seed.quantum_numbers
        else:
            ground = solve_bae(tp, N // 2, 1)
            x0 = np.sort(ground.real_roots)[1:-1]
            x0 = x0[np.abs(x0) > 1e-14] if len(x0) % 2 else x0
            if len(x0) % 2:
                raise DegeneracyError("unexpected odd root pattern for the rank-3 seed")
            # quantum numbers read off the seed; rounded onto the allowed lattice
            raw = (cnt.driving(x0) - (_g(x0[:, None] - x0[None, :], 2, tp.theta).sum(1) + cnt.fixed_part(x0))) / (2 * np.pi)
            off = 0.5 * ((m + 1) % 2)
            I = np.round(raw - off) + off
        if quantum_numbers is not None:
            I = np.asarray(quantum_numbers, float)
        x, _, _ = _newton(cnt, x0, I, 1.0)
    _check_distinct(x)
    roots = np.concatenate([np.sort(x).astype(complex), np.array(fixed, complex)])
    F = cnt.residual(x, I, 1.0)
    state = BetheState(tp, roots, np.asarray(I, float), rank, tuple(fixed), float(np.max(np.abs(F))) if F.size else 0.0)
    # at p0 = 2 the pinned pair (0, 2i) is an exact singular string: only
    # the real roots carry regular equations
    singular_pair = bool(fixed) and abs(tp.p0 - 2) < 1e-12
    r = bae_residual(state, include_fixed=not singular_pair) if state.m else np.zeros(0)
    res = float(np.max(np.abs(r))) if r.size else 0.0
    if res > 1e-9:
        raise SolverError(f"Bethe roots fail the multiplicative equations (residual {res:.3e})")
    return state


def bae_residual(bs: BetheState, tp: TrotterParams | None = None, include_fixed=True):
    """log(LHS) - log(RHS) of the Bethe equations per root, wrapped to (-pi, pi].

    With ``include_fixed`` false only the non-pinned roots are tested (all
    roots still enter Q).
    """
    tp = bs.tp if tp is None else tp
    roots = np.asarray(bs.roots, complex)
    if roots.size == 0:
        return np.zeros(0, complex)
    th = tp.theta
    N2 = tp.N // 2
    w = roots
    if not include_fixed and bs.fixed_roots:
        fixed = np.asarray(bs.fixed_roots, complex)
        w = np.array([r for r in roots if np.min(np.abs(fixed - r)) > 1e-12], complex)
        if w.size == 0:
            return np.zeros(0, complex)
    num = _log_sinh(th * (w + 1j * (tp.u + 2)) / 2) + _log_sinh(th * (w - 1j * tp.u) / 2)
    den = _log_sinh(th * (w - 1j * (tp.u + 2)) / 2) + _log_sinh(th * (w + 1j * tp.u) / 2)
    if not np.all(np.isfinite(num)) or not np.all(np.isfinite(den)):
        raise PoleError("Bethe root sits on a pole of the Bethe equations")
    lhs = N2 * (num - den) + 1j * np.pi
    rhs = log_q(w + 2j, roots, th) - log_q(w - 2j, roots, th)
    r = lhs - rhs
    im = (r.imag + np.pi) % (2 * np.pi) - np.pi
    return r.real + 1j * im


# --- Y-functions ----------------------------------------------------------

class FusionEvaluator:
    """Y- and K-functions of a Bethe state, in log form.

    ``log_y(j, v)`` uses the ratio definition with the T_{n+y} T_{n-y}
    numerator; ``log_one_plus_y(j, v)`` uses the independent T_n T_n form.
    """

    def __init__(self, bs: BetheState, ts: TSSequences | None = None):
        self.bs = bs
        self.ts = sequences_for(RationalP0.parse(_p0_from_theta(bs.tp.theta))) if ts is None else ts
        self.p0 = float(self.ts.p0)
        self.sign_exp = bs.m * self.ts.z[self.ts.alpha]

    def T(self, n, v):
        return log_t(n, v, self.bs)

    def _data(self, j):
        ts = self.ts
        if not 1 <= j <= ts.j_max:
            raise DomainError(f"Y_j defined for 1 <= j <= {ts.j_max}")
        r = ts.block(j)
        return ts.n_tilde[j + 1], ts.y[r], ts.w[j] * self.p0

    def log_y(self, j, v):
        v = np.asarray(v, complex)
        if j == 0:
            return np.full(v.shape, -np.inf + 0j)
        nt, yr, shift = self._data(j)
        w = v + 1j * shift
        return (self.T(nt + yr - 1, w) + self.T(nt - yr - 1, w)
                - self.T(yr - 1, w + 1j * nt) - self.T(yr - 1, w - 1j * nt))

    def log_one_plus_y(self, j, v):
        v = np.asarray(v, complex)
        if j == 0:
            return np.zeros(v.shape, complex)
        nt, yr, shift = self._data(j)
        w = v + 1j * shift
        return (self.T(nt - 1, w + 1j * yr) + self.T(nt - 1, w - 1j * yr)
                - self.T(yr - 1, w + 1j * nt) - self.T(yr - 1, w - 1j * nt))

    def log_k(self, v):
        ts = self.ts
        a = ts.alpha
        v = np.asarray(v, complex)
        nt = ts.y[a] - ts.y[a - 1]
        shift = (ts.z[a] - ts.z[a - 1] - 1) * self.p0
        sign = 1j * np.pi * (self.sign_exp % 2)
        return sign + self.T(nt - 1, v + 1j * shift) - self.T(ts.y[a - 1] - 1, v + 1j * ts.y[a] + 1j * shift)

    def y(self, j, v):
        return np.exp(self.log_y(j, v))

    def one_plus_y(self, j, v):
        return np.exp(self.log_one_plus_y(j, v))

    def k(self, v):
        return np.exp(self.log_k(v))

    # integer p0 forms
    def log_y_int(self, j, v):
        v = np.asarray(v, complex)
        return self.T(j + 1, v) + self.T(j - 1, v) - self.T(0, v + 1j * (j + 1)) - self.T(0, v - 1j * (j + 1))

    def log_one_plus_y_int(self, j, v):
        v = np.asarray(v, complex)
        return self.T(j, v + 1j) + self.T(j, v - 1j) - self.T(0, v + 1j * (j + 1)) - self.T(0, v - 1j * (j + 1))

    def log_k_int(self, v):
        p0 = int(round(self.p0))
        v = np.asarray(v, complex)
        return 1j * np.pi * (self.bs.m % 2) + self.T(p0 - 2, v) - self.T(0, v + 1j * p0)


def _p0_from_theta(theta):
    from fractions import Fraction

    return Fraction(math.pi / theta).limit_denominator(1000)


def y_functions(bs, tp, ts, j, v):
    return FusionEvaluator(bs, ts).y(j, v)


def k_function(bs, tp, ts, v):
    return FusionEvaluator(bs, ts).k(v)


# --- identity checks ------------------------------------------------------

def sample_points(p0, count=10, seed=0, re_span=3.0, margin=0.2):
    """Random v with |Re v| <= re_span, |Im v| < p0, kept >= margin from the
    lines Im v in Z where the fusion eigenvalues concentrate their zeros."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        x = rng.uniform(-re_span, re_span)
        y = rng.uniform(-p0, p0)
        if abs(y - round(y)) >= margin:
            out.append(complex(x, y))
    return np.array(out)


def _samples(bs, samples):
    if samples is None or np.isscalar(samples):
        return sample_points(bs.tp.p0, 10 if samples is None else int(samples))
    return np.asarray(samples, complex)


def _sum2(a, b):
    return logsumexp_complex(np.stack([a, b]), axis=0)


def verify_t_system(bs, tp=None, ts=None, samples=None, tol=1e-9, tol2=1e-8):
    """Both T-system families at the sample points, sides evaluated independently."""
    ev = FusionEvaluator(bs, ts)
    ts = ev.ts
    v = _samples(bs, samples)
    T = ev.T
    rep = CheckReport()
    nmax = ts.n_tilde[ts.m_alpha + 1] + 1
    worst, pts = 0.0, []
    for n in range(1, nmax + 1):
        for y in range(1, n + 1):
            if n + y > nmax:
                break
            lhs = T(n - 1, v + 1j * y) + T(n - 1, v - 1j * y)
            rhs = _sum2(T(n + y - 1, v) + T(n - y - 1, v), T(y - 1, v + 1j * n) + T(y - 1, v - 1j * n))
            worst = max(worst, float(np.max(rel_diff(lhs, rhs))))
            pts.append((n, y))
    rep.add("tsystem1", v, worst, tol)
    a = ts.alpha
    ya, yb = ts.y[a], ts.y[a - 1]
    sign = 1j * np.pi * ((bs.m * ts.z[a]) % 2)
    lhs = T(ya + yb - 1, v)
    rhs = _sum2(T(ya - yb - 1, v), math.log(2) + sign + T(yb - 1, v + 1j * ya))
    rep.add("tsystem2", v, float(np.max(rel_diff(lhs, rhs))), tol2)
    return rep


def verify_y_system(bs, tp=None, ts=None, samples=None, tol=1e-8):
    ev = FusionEvaluator(bs, ts)
    ts = ev.ts
    v = _samples(bs, samples)
    p = ts.p_float
    m = ts.m
    a = ts.alpha
    Y, P1 = ev.log_y, ev.log_one_plus_y
    rep = CheckReport()

    worst = 0.0
    for r in range(1, a + 1):
        for j in range(max(m[r - 1], 1), m[r] - 1):
            e = -1 if j == m[r - 1] else 1
            lhs = Y(j, v + 1j * p[r]) + Y(j, v - 1j * p[r])
            rhs = e * P1(j - 1, v) + P1(j + 1, v)
            worst = max(worst, float(np.max(rel_diff(lhs, rhs))))
    rep.add("ysystem1", v, worst, tol)

    worst = 0.0
    for r in range(1, a):
        j = m[r] - 1
        pr, ps = p[r], p[r + 1]
        e = -1 if ts.cf.nu(r) == 1 else 1
        lhs = sum(Y(j, v + 1j * (s1 * pr + s2 * ps)) for s1 in (1, -1) for s2 in (1, -1))
        rhs = (e * (P1(j - 1, v + 1j * ps) + P1(j - 1, v - 1j * ps))
               + P1(j + 1, v + 1j * pr) + P1(j + 1, v - 1j * pr)
               + P1(j, v + 1j * (pr - ps)) + P1(j, v - 1j * (pr - ps)))
        worst = max(worst, float(np.max(rel_diff(lhs, rhs))))
    rep.add("ysystem2", v, worst, tol)

    K = ev.log_k(v)
    rep.add("ysystem3", v, float(np.max(rel_diff(P1(ts.j_max, v), 2 * np.log1p(np.exp(K))))), tol)
    lhs = ev.log_k(v + 1j * p[a]) + ev.log_k(v - 1j * p[a])
    rep.add("ysystem4", v, float(np.max(rel_diff(lhs, P1(m[a] - 2, v)))), tol)

    worst = 0.0
    for j in range(1, ts.j_max + 1):
        worst = max(worst, float(np.max(rel_diff(np.log1p(np.exp(Y(j, v))), P1(j, v)))))
    rep.add("ydef1_ydef2_equivalence", v, worst, 1e-9)

    if ts.p0.is_integer:
        p0 = int(ts.p0.value)
        worst = 0.0
        for j in range(1, p0 - 1):
            lhs = ev.log_y_int(j, v + 1j) + ev.log_y_int(j, v - 1j)
            rhs = (ev.log_one_plus_y_int(j - 1, v) if j > 1 else 0) + ev.log_one_plus_y_int(j + 1, v)
            worst = max(worst, float(np.max(rel_diff(lhs, rhs))))
        rep.add("ysystemc1", v, worst, tol)
        rep.add("ysystemc2", v, float(np.max(rel_diff(ev.log_one_plus_y_int(p0 - 1, v), 2 * np.log1p(np.exp(ev.log_k_int(v)))))), tol)
        lhs = ev.log_k_int(v + 1j) + ev.log_k_int(v - 1j)
        rep.add("ysystemc3", v, float(np.max(rel_diff(lhs, ev.log_one_plus_y_int(p0 - 2, v)))), tol)
    return rep


def verify_inversion(bs, tp=None, samples=None, tol=1e-9):
    """T_1(v+i) T_1(v-i) = T_0(v+2i) T_0(v-2i) (1 + Y_1(v)), Y_1 from its ratio form."""
    ev = FusionEvaluator(bs)
    v = _samples(bs, samples)
    T = ev.T
    lhs = T(1, v + 1j) + T(1, v - 1j)
    rhs = T(0, v + 2j) + T(0, v - 2j) + np.log1p(np.exp(ev.log_y(1, v)))
    rep = CheckReport()
    rep.add("inversion", v, float(np.max(rel_diff(lhs, rhs))), tol)
    return rep


def verify_periodicity(bs, nmax=None, samples=None, tol=1e-10):
    v = _samples(bs, samples)
    nmax = int(math.ceil(bs.tp.p0)) + 1 if nmax is None else nmax
    worst = 0.0
    for n in range(nmax + 1):
        worst = max(worst, float(np.max(rel_diff(log_t(n, v, bs), log_t(n, v + 2j * bs.tp.p0, bs)))))
    rep = CheckReport()
    rep.add("tperiod", v, worst, tol)
    return rep


# --- zeros ----------------------------------------------------------------

@dataclass(frozen=True)
class Zero:
    n: int
    v: complex
    multiplicity: int


def _laurent_coefficients(n, bs, radius=1.0):
    """Coefficients c_k of z^(N/2) T_n = sum c_k z^k, z = exp(theta v)."""
    tp = bs.tp
    N = tp.N
    K = 4 * (N + 2)
    phase = 2 * np.pi * (np.arange(K) + 0.5) / K
    z = radius * np.exp(1j * phase)
    v = np.log(z) / tp.theta
    P = np.exp(log_t(n, v, bs) + (N // 2) * np.log(z))
    # samples sit half a step off the lattice of Bethe roots on the imaginary axis
    c = np.array([np.mean(P * np.exp(-1j * j * phase)) for j in range(N + 1)]) / radius ** np.arange(N + 1)
    return c


def _winding(n, bs, re_v, samples=4096):
    tp = bs.tp
    phase = 2 * np.pi * (np.arange(samples + 1) + 0.25) / samples
    v = re_v + 1j * phase / tp.theta
    arg = (log_t(n, v, bs) + (tp.N // 2) * tp.theta * v).imag
    d = np.diff(arg)
    d = (d + np.pi) % (2 * np.pi) - np.pi
    return int(round(d.sum() / (2 * np.pi)))


def locate_zeros(n, bs, tp=None, region=None, cluster_tol=1e-4):
    """Zeros of T_{n-1}(u, .) in the region (re_min, re_max, im_min, im_max).

    All zeros in one period come from the Laurent polynomial in exp(theta v);
    each is polished by Newton on T and clustered into multiplicities.  The
    count is cross-checked against the argument principle over the vertical
    edges of the strip (the horizontal edges cancel by periodicity).
    """
    from .errors import IncompleteSearchError

    tp = bs.tp
    p0 = tp.p0
    if region is None:
        region = (-20.0, 20.0, -p0, p0)
    re_min, re_max, im_min, im_max = region
    label, n = n, n - 1
    c = _laurent_coefficients(n, bs)
    nz = np.nonzero(np.abs(c) > 1e-13 * np.max(np.abs(c)))[0]
    lo, hi = nz[0], nz[-1]
    zr = np.roots(c[lo:hi + 1][::-1])
    v = np.log(zr.astype(complex)) / tp.theta

    def f(x):
        return complex(t_eigenvalue(n, np.array([x]), bs)[0])

    # cluster before polishing so a double zero is not split further
    v = list(v)
    groups = []
    for x in v:
        for g in groups:
            if abs(g[0] - x) < cluster_tol * 10 or abs(np.exp(tp.theta * (g[0] - x)) - 1) < cluster_tol * 10:
                g.append(x)
                break
        else:
            groups.append([x])
    zeros = []
    for g in groups:
        mult = len(g)
        x = complex(np.mean(g))
        for _ in range(30):
            h = 1e-6
            fx = f(x)
            d = (f(x + h) - f(x - h)) / (2 * h)
            if d == 0:
                break
            step = mult * fx / d
            x -= step
            if abs(step) < 1e-13:
                break
        # fold into the strip -p0 < Im v <= p0
        x = complex(x.real, (x.imag + p0) % (2 * p0) - p0)
        zeros.append(Zero(label, x, mult))
    inside = [z for z in zeros if re_min <= z.v.real <= re_max and im_min <= z.v.imag <= im_max]
    full_period = im_max - im_min >= 2 * p0 - 1e-12
    if full_period:
        count = _winding(n, bs, re_max) - _winding(n, bs, re_min)
        found = sum(z.multiplicity for z in inside)
        if count != found:
            raise IncompleteSearchError(f"argument principle counts {count} zeros, search found {found}")
    return sorted(inside, key=lambda z: (z.v.imag, z.v.real))


def write_zero_map(path, zeros):
    import csv

    with open(path, "w", newline="") as fh:
        fh.write("#schema=1\n")
        w = csv.writer(fh)
        w.writerow(["n", "re_v", "im_v", "multiplicity"])
        for z in zeros:
            w.writerow([z.n, repr(z.v.real), repr(z.v.imag), z.multiplicity])
