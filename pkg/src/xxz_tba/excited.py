"""Excited-state equations for integer p0 >= 3, J > 0, and the correlation lengths.

For the rank-k state (k = 2, 3) the functions are stored as
eta_j = R_j(v) exp(E_j(v)) with E_j smooth and R_j an explicit real factor
carrying the real zeros +-zeta and the signs:

    R_j = tau(zeta_{j-1}) tau(zeta_{j+1})      (absent indices dropped)
    R_{p0-2} gets an extra tanh(pi v/4)^2 (k = 3) or -1 (k = 2)
    R_kappa = tau(zeta_{p0-2}), times -1 for k = 2

with tau(zeta)(v) = (cosh(pi v/2) - cosh(pi zeta/2)) / (cosh(pi v/2) + cosh(pi zeta/2)).
The zeta_j are fixed by 1 + eta_j(zeta_j + i) = 0; on that line only the
phase condition is nontrivial.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import interpolate, optimize

from .errors import DomainError, SolverError
from .ground import EtaState, GroundSystem, ModelParams, driving_term, solve_ground_nlie
from .numerics import Grid, SampledFunction, convolve, fixed_point_solve, grid_for, pv_convolve_shifted
from .rational_ts import sequences_for

log = logging.getLogger(__name__)

RANKS = (2, 3)


def _check_domain(mp: ModelParams, k):
    if not mp.p0.is_integer or mp.p0.numerator < 3:
        raise DomainError("excited-state equations are implemented for integer p0 >= 3 only")
    if mp.J <= 0:
        raise DomainError("excited-state equations are implemented for J > 0 only")
    if k not in RANKS:
        raise DomainError("rank k must be 2 or 3")


def log_abs_tau(v, zeta):
    """ln|tau(zeta)(v)| and its sign, via tau = tanh((A+B)/2) tanh((A-B)/2)."""
    a = np.pi * np.abs(np.asarray(v, float)) / 2
    b = np.pi * abs(zeta) / 2
    with np.errstate(divide="ignore"):
        la = np.log(np.abs(np.tanh((a + b) / 2))) + np.log(np.abs(np.tanh((a - b) / 2)))
    return la, np.sign(a - b)


def tau(v, zeta):
    la, sg = log_abs_tau(v, zeta)
    return sg * np.exp(la)


def log_h(v, p0, k):
    """ln h: zero for k = 3, (2 pi/p0)(v tanh(pi v/2) - sech(pi v/2)) for k = 2."""
    v = np.asarray(v, float)
    if k == 3:
        return np.zeros_like(v)
    x = np.abs(np.pi * v / 2)
    return 2 * np.pi / p0 * (v * np.tanh(np.pi * v / 2) - 2 * np.exp(-x) / (1 + np.exp(-2 * x)))


def g_exponent(v, p0, k):
    """Smooth exponent attached to eta_{p0-2}: -(pi/p0) v tanh(pi v/4) for k = 2."""
    v = np.asarray(v, float)
    if k == 3:
        return np.zeros_like(v)
    return -np.pi / p0 * v * np.tanh(np.pi * v / 4)


def log_one_minus_tau(v, zeta):
    """ln(1 - tau(zeta)(v)) = ln(2 cosh(pi zeta/2) / (cosh(pi v/2) + cosh(pi zeta/2)))."""
    a = np.pi * np.abs(np.asarray(v, float)) / 2
    b = np.pi * abs(zeta) / 2
    lc = lambda t: t + np.log1p(np.exp(-2 * t)) - math.log(2)
    return math.log(2) - np.logaddexp(0.0, lc(a) - lc(b))


def log_abs_1p(z, sign):
    """ln|1 + sign e^z| without cancellation."""
    z = np.asarray(z, float)
    sign = np.broadcast_to(sign, z.shape)
    out = np.logaddexp(0.0, z)
    neg = sign < 0
    if neg.any():
        with np.errstate(divide="ignore"):
            out = np.where(neg, np.log(np.abs(np.expm1(np.where(neg, z, 0.0)))), out)
    return out


class ExcitedSystem:
    """Equation layout of the rank-k excited state for integer p0."""

    def __init__(self, mp: ModelParams, k, grid: Grid, ground: GroundSystem | None = None):
        _check_domain(mp, k)
        self.mp, self.k, self.grid = mp, k, grid
        self.p0 = mp.p0.numerator
        self.ts = sequences_for(mp.p0)
        self.ground = GroundSystem(self.ts, grid) if ground is None else ground
        self.s1 = self.ground.kernels.s[1]
        self.n = self.p0 - 2  # number of eta_j and of zeta_j
        x = grid.x
        self.x = x
        self.logh = log_h(x, self.p0, k)
        self.gexp = g_exponent(x, self.p0, k)
        # asymptotic growth rate of M beyond the grid: for k = 2 the decaying
        # exponents approach -(pi/3)|v| (the rate a with 2 cos a = 1), so
        # ln|1 + kappa| ~ -(pi/3)|v| against the +(2 pi/p0)|v| of ln h
        self.m_slope = 2 * np.pi / self.p0 - 2 * np.pi / 3 if k == 2 else 0.0
        if k == 3:
            with np.errstate(divide="ignore"):
                self.log_tanh2 = 2 * np.log(np.abs(np.tanh(np.pi * x / 4)))

    # -- explicit factors ----------------------------------------------
    def factors(self, zeta):
        """(ln|R_j|, sign R_j) for j = 1..n and for kappa (index n + 1)."""
        n, x = self.n, self.x
        out = []
        for j in range(1, n + 2):
            lr = np.zeros_like(x)
            sg = np.ones_like(x)
            nbrs = [j - 1, j + 1] if j <= n else [n]
            for i in nbrs:
                if 1 <= i <= n:
                    la, s = log_abs_tau(x, zeta[i - 1])
                    lr = lr + la
                    sg = sg * s
            if j == n and self.k == 3:
                lr = lr + self.log_tanh2
            if (j == n or j == n + 1) and self.k == 2:
                sg = -sg
            out.append((lr, sg))
        return out

    def logs(self, E, zeta):
        """L_1..L_n (ln|1 + eta_j|) and M = 2 ln|1 + kappa| + ln h as SampledFunctions."""
        fac = self.factors(zeta)
        L = [SampledFunction(self.grid, log_abs_1p(E[j] + fac[j][0], fac[j][1])) for j in range(self.n)]
        Ek = E[self.n]
        if self.k == 2:
            # 1 + kappa = -expm1(E) + e^E (1 - tau): kappa -> -1 at large |v|
            one_p = -np.expm1(Ek) + np.exp(Ek + log_one_minus_tau(self.x, zeta[self.n - 1]))
            with np.errstate(divide="ignore"):
                lk = np.log(np.abs(one_p))
        else:
            lk = log_abs_1p(Ek + fac[self.n][0], fac[self.n][1])
        mv = 2 * lk + self.logh
        M = SampledFunction(self.grid, mv, slope_left=self.m_slope, slope_right=self.m_slope)
        return L, M

    def _sources(self, j, L, M):
        """Functions convolved into eta_j (1-based j)."""
        src = []
        if j >= 2:
            src.append(L[j - 2])
        src.append(L[j] if j + 1 <= self.n else M)
        return src

    def residual_weights(self, E, zeta):
        """Sensitivity of the convolved quantities to each exponent.

        E_j enters only through ln|1 + eta_j|, so its residual is scaled by
        |eta_j / (1 + eta_j)|.  E_kappa enters through ln|1 + kappa| and then
        eta_{p0-2}; its scale is |kappa / (1 + kappa)| times min(1, that of
        eta_{p0-2}), capped at 1.  Far-tail exponents of vanishing functions
        thus stop dominating the convergence test.
        """
        fac = self.factors(zeta)
        out = []
        for j in range(self.n + 1):
            z = E[j] + fac[j][0]
            sg = fac[j][1]
            with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
                eta = sg * np.exp(z)
                if j == self.n and self.k == 2:
                    one_p = -np.expm1(E[j]) + np.exp(E[j] + log_one_minus_tau(self.x, zeta[self.n - 1]))
                else:
                    one_p = 1 + eta
                w = np.abs(eta / one_p)
            w = np.where(np.isfinite(w), w, 1.0)
            if j == self.n:
                w = np.minimum(1.0, w * np.minimum(1.0, out[self.n - 1]))
            out.append(w)
        return out

    # -- the two halves of the iteration ---------------------------------
    def new_exponents(self, E, zeta):
        L, M = self.logs(E, zeta)
        drive = driving_term(self.x, self.mp)
        out = []
        for j in range(1, self.n + 1):
            acc = drive.copy() if j == 1 else np.zeros_like(self.x)
            for f in self._sources(j, L, M):
                acc += convolve(self.s1, f).values
            if j == self.n:
                acc += self.gexp
            out.append(acc)
        out.append(convolve(self.s1, L[self.n - 1]).values)
        return out

    def phases(self, E, zeta):
        """Wrapped Im ln eta_j(zeta_j + i) - pi, j = 1..n."""
        L, M = self.logs(E, zeta)
        mp, p0, n = self.mp, self.p0, self.n
        c = mp.beta * np.pi * mp.J * math.sin(mp.theta) / (2 * mp.theta)
        out = np.empty(n)
        for j in range(1, n + 1):
            z = zeta[j - 1]
            sh = math.sinh(np.pi * z / 2)
            ph = c / sh if j == 1 else 0.0
            for f in self._sources(j, L, M):
                at = float(log_h(z, p0, self.k)) if f is M else 0.0
                ph += pv_convolve_shifted(f, z, at).imag
            for i in (j - 1, j + 1):
                if 1 <= i <= n:
                    ph += 2 * math.atan2(math.cosh(np.pi * zeta[i - 1] / 2), sh)
            if j == n:
                if self.k == 3:
                    ph += 2 * math.atan2(1.0, sh)
                else:
                    ph += np.pi - np.pi / p0 * (z / math.cosh(np.pi * z / 2) + math.tanh(np.pi * z / 2))
            out[j - 1] = ph - np.pi
        return np.angle(np.exp(1j * out))

    def solve_zeta(self, E, zeta, tol=1e-13, maxiter=40, step=1e-5):
        """Newton on the phase conditions at fixed exponents (central-difference Jacobian)."""
        z = np.array(zeta, float)
        for _ in range(maxiter):
            r = self.phases(E, z)
            if np.max(np.abs(r)) < tol:
                break
            jac = np.empty((self.n, self.n))
            for i in range(self.n):
                dz = np.zeros(self.n)
                dz[i] = step
                jac[:, i] = np.angle(np.exp(1j * (self.phases(E, z + dz) - self.phases(E, z - dz)))) / (2 * step)
            dzeta = np.linalg.solve(jac, -r)
            lim = np.max(np.abs(dzeta))
            if lim > 0.25:
                dzeta *= 0.25 / lim
            z = np.abs(z + dzeta)
        return z


@dataclass
class ExcitedState:
    mp: ModelParams
    k: int
    grid: Grid
    E: list
    zeta: np.ndarray
    iterations: int = 0
    residual: float = 0.0
    phase_residual: float = 0.0
    system: ExcitedSystem = field(default=None, repr=False)

    def eta(self, j):
        """eta_j on the grid (j = 1..p0-2); j = p0-1 returns kappa."""
        lr, sg = self.system.factors(self.zeta)[j - 1]
        return sg * np.exp(self.E[j - 1] + lr)

    def log1p_eta(self, j) -> SampledFunction:
        L, _ = self.system.logs(self.E, self.zeta)
        return L[j - 1]


def _fill_masked(x, y, mask):
    """Replace masked samples by a cubic spline through the rest."""
    if not mask.any():
        return y
    spl = interpolate.CubicSpline(x[~mask], y[~mask])
    out = y.copy()
    out[mask] = spl(x[mask])
    return out


def seed_from_finite_N(mp: ModelParams, k, grid: Grid, N=20, system: ExcitedSystem | None = None):
    """Exponents and zetas from the rank-k Bethe state at Trotter number N."""
    from .qtm import FusionEvaluator, TrotterParams, solve_bae

    sysm = ExcitedSystem(mp, k, grid) if system is None else system
    tp = TrotterParams(N, mp.trotter_u(N), mp.theta, mp.beta, mp.J)
    bs = solve_bae(tp, rank=k)
    fe = FusionEvaluator(bs, sysm.ts)
    n = sysm.n

    def one_plus_y_line(j, z):
        v = np.asarray(z, float) + 1j
        ly = fe.log_y(j, v) if j <= n else fe.log_k(v)
        return np.abs(1 + np.exp(np.ravel(ly)))

    scan = np.linspace(0.02, min(15.0, grid.extent - 1), 1500)
    zeta = np.empty(n)
    for j in range(1, n + 1):
        a = one_plus_y_line(j, scan)
        i = int(np.argmin(a))
        lo, hi = scan[max(i - 1, 0)], scan[min(i + 1, len(scan) - 1)]
        r = optimize.minimize_scalar(lambda t: float(one_plus_y_line(j, t)[0]), bounds=(lo, hi), method="bounded",
                                     options={"xatol": 1e-10})
        zeta[j - 1] = r.x
    x = grid.x
    fac = sysm.factors(zeta)
    E = []
    for j in range(1, n + 2):
        ly = np.ravel(fe.log_y(j, x + 0j) if j <= n else fe.log_k(x + 0j)).real
        lr = fac[j - 1][0]
        mask = ~np.isfinite(lr) | ~np.isfinite(ly)
        for z in zeta:
            mask |= np.abs(np.abs(x) - z) < 0.1
        if k == 3 and j == n:
            mask |= np.abs(x) < 0.2
        vals = np.where(mask, 0.0, ly - np.where(np.isfinite(lr), lr, 0.0))
        E.append(_fill_masked(x, vals, mask))
    return E, zeta


def _solve_fixed(sysm: ExcitedSystem, E, zeta, tol, damping, maxiter, anderson):
    n = sysm.n

    def F(xs):
        E_, z = xs[: n + 1], np.asarray(xs[n + 1])
        z = sysm.solve_zeta(E_, z)
        return sysm.new_exponents(E_, z) + [z]

    def weights(xs):
        return sysm.residual_weights(xs[: n + 1], np.asarray(xs[n + 1])) + [np.ones(n)]

    res = fixed_point_solve(F, list(E) + [np.asarray(zeta, float)], damping=damping, tol=tol,
                            maxiter=maxiter, anderson=anderson, weights=weights)
    E, zeta = res.x[: n + 1], np.asarray(res.x[n + 1])
    return E, zeta, res


def solve_excited(mp: ModelParams, k, grid: Grid | None = None, tol=1e-10, damping=0.7, maxiter=3000,
                  anderson=6, seed_beta=2.0, seed_N=20, step=1.3, initial: ExcitedState | None = None,
                  system: ExcitedSystem | None = None) -> ExcitedState:
    """Rank-k excited-state solution at (p0, J, beta).

    Seeds from the finite-N Bethe state at beta J = min(beta J, seed_beta)
    and continues geometrically in beta up to the target.
    """
    _check_domain(mp, k)
    grid = grid_for(sequences_for(mp.p0)) if grid is None else grid
    ground = system.ground if system is not None and system.grid == grid else None
    if initial is not None:
        E, zeta = [np.array(a) for a in initial.E], np.array(initial.zeta)
        betas = [mp.beta]
    else:
        b0 = min(mp.beta, seed_beta / mp.J)
        sysm = ExcitedSystem(mp.with_beta(b0), k, grid, ground)
        ground = sysm.ground
        E, zeta = seed_from_finite_N(mp.with_beta(b0), k, grid, seed_N, sysm)
        betas = [b0]
        while betas[-1] < mp.beta:
            betas.append(min(betas[-1] * step, mp.beta))
    total = 0
    for b in betas:
        sysm = ExcitedSystem(mp.with_beta(b), k, grid, ground)
        ground = sysm.ground
        E, zeta, res = _solve_fixed(sysm, E, zeta, tol, damping, maxiter, anderson)
        total += res.iterations
        log.debug("excited k=%d beta=%g zeta=%s iterations=%d", k, b, zeta, res.iterations)
    pr = float(np.max(np.abs(sysm.phases(E, zeta))))
    st = ExcitedState(mp, k, grid, E, zeta, total, res.residual, pr, sysm)
    if np.any(zeta <= 0) or not all(np.all(np.isfinite(e)) for e in E):
        raise SolverError("excited-state solution degenerated", [res.residual])
    return st


def inverse_correlation_length(es: ExcitedState, ground: EtaState | None = None) -> float:
    """1/xi_k = -2 ln tanh(pi zeta_1/4) - int s_1 ln((1 + eta_1^(k)) / (1 + eta_1^(1)))."""
    sysm = es.system
    if ground is None:
        ground = solve_ground_nlie(es.mp, sysm.ts, es.grid, system=sysm.ground)
    diff = es.log1p_eta(1).values - ground.log1p_eta(1).values
    c = es.grid.points // 2
    conv = float(convolve(sysm.s1, SampledFunction(es.grid, diff)).values[c])
    return -2 * math.log(math.tanh(np.pi * es.zeta[0] / 4)) - conv


def correlation_length(es: ExcitedState, ground: EtaState | None = None) -> float:
    return 1.0 / inverse_correlation_length(es, ground)


def finite_N_inverse_correlation_length(mp: ModelParams, k, N) -> float:
    """-ln|T_1^(k)(u_N, 0) / T_1^(1)(u_N, 0)| from the Bethe states."""
    from .qtm import TrotterParams, solve_bae, t_eigenvalue

    tp = TrotterParams(N, mp.trotter_u(N), mp.theta, mp.beta, mp.J)
    t1 = t_eigenvalue(1, 0.0, solve_bae(tp, rank=1))[0]
    tk = t_eigenvalue(1, 0.0, solve_bae(tp, rank=k))[0]
    return -math.log(abs(tk / t1))


def known_xi2_over_beta(p0, J):
    th = np.pi / float(p0)
    return J * np.pi * math.sin(th) / (2 * (np.pi - th) * th)


def known_xi3_over_beta(p0, J):
    th = np.pi / float(p0)
    return J * (np.pi - th) * math.sin(th) / (2 * np.pi * th)


CORRELATION_COLUMNS_BASE = ["beta", "J", "p0", "k", "xi_k", "xi_k_over_beta"]


def correlation_row(es: ExcitedState, xi):
    mp = es.mp
    return ([repr(mp.beta), repr(mp.J), str(mp.p0), es.k, repr(xi), repr(xi / mp.beta)]
            + [repr(float(z)) for z in es.zeta] + [es.iterations, repr(es.residual)])


def correlation_columns(n_zeta):
    return CORRELATION_COLUMNS_BASE + [f"zeta_{j}" for j in range(1, n_zeta + 1)] + ["iterations", "residual"]


def write_correlation_csv(path, rows, n_zeta):
    with open(path, "w", newline="") as fh:
        fh.write("#schema=1\n")
        w = csv.writer(fh)
        w.writerow(correlation_columns(n_zeta))
        w.writerows(rows)
