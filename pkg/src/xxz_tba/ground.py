"""Ground-state TBA equations at rational p0 > 2 and the free energy."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .errors import DomainError, SolverError
from .numerics import Grid, KernelSet, SampledFunction, convolve, fixed_point_solve, grid_for
from .rational_ts import RationalP0, TSSequences, sequences_for

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ModelParams:
    p0: RationalP0
    J: float
    beta: float

    def __post_init__(self):
        object.__setattr__(self, "p0", RationalP0.parse(self.p0))
        if self.J == 0:
            raise DomainError("J must be nonzero")
        if not self.beta > 0:
            raise DomainError("beta must be positive")

    @property
    def theta(self) -> float:
        return self.p0.theta

    @property
    def delta(self) -> float:
        return math.cos(self.theta)

    def with_beta(self, beta):
        return ModelParams(self.p0, self.J, beta)

    def trotter_u(self, N):
        return -self.beta * self.J * math.sin(self.theta) / (self.theta * N)


def driving_term(v, mp: ModelParams):
    """-beta pi J sin(theta) / (2 theta cosh(pi v / 2))."""
    v = np.asarray(v, float)
    x = np.abs(np.pi * v / 2)
    sech = 2 * np.exp(-x) / (1 + np.exp(-2 * x))
    return -mp.beta * np.pi * mp.J * math.sin(mp.theta) / (2 * mp.theta) * sech


def finite_N_driving(v, mp: ModelParams, N):
    """+-(N/2) ln(tanh(pi/4 (v - i a)) tanh(pi/4 (v + i a))), a = 1 +- u_N, sign of J."""
    v = np.asarray(v, float)
    u = mp.trotter_u(N)
    sgn = 1.0 if mp.J > 0 else -1.0
    a = 1 + sgn * u
    ch = np.cosh(np.pi * v / 2)
    c = math.cos(np.pi * a / 2)
    return sgn * N / 2 * (np.log1p(-c / ch) - np.log1p(c / ch))


def a1_function(v, theta):
    p0 = math.pi / theta
    e = np.exp(-np.abs(theta * np.asarray(v, float)))
    # 1 / (cosh x - cos theta) written in e^{-|x|} so large |v| cannot overflow
    return math.sin(theta) * e / (p0 * (1 + e * e - 2 * math.cos(theta) * e))


def _a1s1_integral(theta):
    from .numerics import s_of_p

    f = lambda v: a1_function(v, theta) * s_of_p(1.0, v)
    return 2 * integrate.quad(f, 0, np.inf, epsabs=1e-15, epsrel=1e-13, limit=200)[0]


class GroundSystem:
    """Coupling table of the ground-state equations for one p0.

    ``terms[j]`` lists (coefficient, kernel, source) with source index j'
    meaning ln(1 + eta_j'); source 0 is identically zero and source j_max is
    ln((1 + kappa)^2) by the algebraic closure.
    """

    def __init__(self, ts: TSSequences, grid: Grid, kernels: KernelSet | None = None):
        self.ts = ts
        self.grid = grid
        self.kernels = KernelSet.build(ts, grid) if kernels is None else kernels
        m, a = ts.m, ts.alpha
        s, d = self.kernels.s, self.kernels.d
        terms = {}
        for r in range(1, a + 1):
            for j in range(max(m[r - 1], 1), m[r] - 1):
                e = -1.0 if j == m[r - 1] else 1.0
                terms[j] = [(e, s[r], j - 1), (1.0, s[r], j + 1)]
            if r < a:
                j = m[r] - 1
                e = -1.0 if j == m[r - 1] else 1.0
                terms[j] = [(e, s[r], j - 1), (1.0, d[r], j), (1.0, s[r + 1], j + 1)]
        self.terms = {j: [t for t in lst if t[2] != 0] for j, lst in terms.items()}
        self.kappa_terms = [(1.0, s[a], m[a] - 2)]
        self.jmax = ts.j_max
        assert sorted(self.terms) == list(range(1, self.jmax)), "coupling table does not cover every eta_j"

    def logs(self, log_eta, log_kappa):
        """ln(1 + eta_j) for j = 1..j_max as SampledFunctions."""
        L = {}
        for j in range(1, self.jmax):
            L[j] = SampledFunction(self.grid, np.logaddexp(0.0, log_eta[j - 1]))
        L[self.jmax] = SampledFunction(self.grid, 2 * np.logaddexp(0.0, log_kappa))
        return L

    def rhs(self, log_eta, log_kappa, drive):
        L = self.logs(log_eta, log_kappa)
        new = []
        for j in range(1, self.jmax):
            acc = drive.copy() if j == 1 else np.zeros(self.grid.points)
            for coef, ker, src in self.terms[j]:
                acc += coef * convolve(ker, L[src]).values
            new.append(acc)
        acc = np.zeros(self.grid.points)
        for coef, ker, src in self.kappa_terms:
            acc += coef * convolve(ker, L[src]).values
        return new, acc

    def constant_solution(self, tol=1e-14, maxiter=10000):
        """v-independent solution with zero driving (the beta -> 0 limit)."""
        n = self.jmax

        def F(x):
            le, lk = x[: n - 1], x[n - 1]
            Lv = {j: np.logaddexp(0.0, le[j - 1]) for j in range(1, n)}
            Lv[n] = 2 * np.logaddexp(0.0, lk)
            out = np.empty(n)
            for j in range(1, n):
                out[j - 1] = sum(0.5 * c * Lv[src] for c, _, src in self.terms[j])
            out[n - 1] = sum(0.5 * c * Lv[src] for c, _, src in self.kappa_terms)
            return out

        res = fixed_point_solve(F, np.zeros(n), damping=0.5, tol=tol, maxiter=maxiter)
        return np.asarray(res.x)


@dataclass
class EtaState:
    mp: ModelParams
    ts: TSSequences
    grid: Grid
    log_eta: list
    log_kappa: np.ndarray
    iterations: int = 0
    residual: float = 0.0
    finite_N: int | None = None
    system: GroundSystem = field(default=None, repr=False)

    def eta(self, j):
        if j == self.ts.j_max:
            k = np.exp(self.log_kappa)
            return k * k + 2 * k
        return np.exp(self.log_eta[j - 1])

    @property
    def kappa(self):
        return np.exp(self.log_kappa)

    def log1p_eta(self, j) -> SampledFunction:
        if j == self.ts.j_max:
            return SampledFunction(self.grid, 2 * np.logaddexp(0.0, self.log_kappa))
        return SampledFunction(self.grid, np.logaddexp(0.0, self.log_eta[j - 1]))

    def closure_residual(self):
        """|ln(1 + eta_jmax) - 2 ln(1 + kappa)| with eta_jmax from its own ratio form.

        Within this state eta_jmax is defined by the closure, so this returns
        the consistency of the stored kappa with the last coupled equation.
        """
        k = self.kappa
        return float(np.max(np.abs(np.log1p(k * k + 2 * k) - 2 * np.log1p(k))))


def _grid_and_system(ts, grid, system):
    grid = grid_for(ts) if grid is None else grid
    if system is None or system.grid != grid or system.ts.p0 != ts.p0:
        system = GroundSystem(ts, grid)
    return grid, system


def _solve_at(mp, ts, grid, system, drive, init, tol, damping, maxiter, anderson=6):
    n = ts.j_max

    def F(x):
        le, lk = system.rhs(x[: n - 1], x[n - 1], drive)
        return le + [lk]

    res = fixed_point_solve(F, init, damping=damping, tol=tol, maxiter=maxiter, anderson=anderson)
    x = res.x
    return EtaState(mp, ts, grid, x[: n - 1], x[n - 1], res.iterations, res.residual, None, system)


def solve_ground_nlie(mp: ModelParams, ts=None, grid=None, tol=1e-12, damping=0.5, maxiter=2000,
                      initial: EtaState | None = None, step=1.3, system=None) -> EtaState:
    """Damped iteration of the ground-state equations.

    Starts from the constant beta -> 0 solution at beta|J| <= 1 and
    continues geometrically in beta (factor ``step``) up to the target, or
    from ``initial`` when given.
    """
    ts = sequences_for(mp.p0) if ts is None else ts
    if mp.p0.value == 2:
        raise DomainError("p0 = 2 is handled by xxz_tba.free_fermion")
    grid, system = _grid_and_system(ts, grid, system)
    n = ts.j_max
    if initial is not None:
        x = [np.array(a) for a in initial.log_eta] + [np.array(initial.log_kappa)]
        betas = [mp.beta]
    else:
        c = system.constant_solution()
        x = [np.full(grid.points, c[j]) for j in range(n)]
        b = min(mp.beta, 1.0 / abs(mp.J))
        betas = [b]
        while betas[-1] < mp.beta:
            betas.append(min(betas[-1] * step, mp.beta))
    total = 0
    state = None
    for b in betas:
        m = mp.with_beta(b)
        state = _solve_at(m, ts, grid, system, driving_term(grid.x, m), x, tol, damping, maxiter)
        total += state.iterations
        x = list(state.log_eta) + [state.log_kappa]
    state.iterations = total
    _check_positive(state)
    return state


def _check_positive(state):
    for a in list(state.log_eta) + [state.log_kappa]:
        if not np.all(np.isfinite(a)):
            raise SolverError("ground-state solution left the positive domain")


def solve_finite_N_y1(mp: ModelParams, N, ts=None, grid=None, tol=1e-12, damping=0.5, maxiter=2000, system=None) -> EtaState:
    """Same equations with the exact finite-N driving term for eta_1."""
    ts = sequences_for(mp.p0) if ts is None else ts
    grid, system = _grid_and_system(ts, grid, system)
    if N % 2:
        raise DomainError("N must be even")
    start = solve_ground_nlie(mp, ts, grid, tol=max(tol, 1e-10), damping=damping, maxiter=maxiter, system=system)
    x = list(start.log_eta) + [start.log_kappa]
    state = _solve_at(mp, ts, grid, system, finite_N_driving(grid.x, mp, N), x, tol, damping, maxiter)
    state.finite_N = N
    return state


def free_energy(es: EtaState, mp: ModelParams | None = None) -> float:
    """Free energy per site from eta_1."""
    mp = es.mp if mp is None else mp
    th = mp.theta
    bulk = -(2 * np.pi * mp.J * math.sin(th) / th) * _a1s1_integral(th)
    s1 = es.system.kernels.s[1]
    center = es.grid.points // 2
    thermal = float(convolve(s1, es.log1p_eta(1)).values[center])
    return bulk - thermal / mp.beta


def trotter_free_energy(mp: ModelParams, N) -> float:
    """-(1/beta) ln T_1(u_N, 0) - (J/2) Delta from the finite-N Bethe roots."""
    from .qtm import TrotterParams, solve_bae, t_eigenvalue

    tp = TrotterParams(N, mp.trotter_u(N), mp.theta, mp.beta, mp.J)
    bs = solve_bae(tp, rank=1)
    t1 = t_eigenvalue(1, 0.0, bs)[0]
    return -math.log(t1.real) / mp.beta - mp.J / 2 * mp.delta


def richardson_in_N(Ns, values, power=2):
    """Polynomial extrapolation in 1/N^power to N = infinity."""
    x = np.array([1.0 / n ** power for n in Ns])
    y = np.array(values, float)
    coef = np.polyfit(x, y, len(Ns) - 1)
    return float(np.polyval(coef, 0.0))


FREE_ENERGY_COLUMNS = ["beta", "J", "p0_num", "p0_den", "f", "minus_beta_f", "iterations", "residual"]


def free_energy_row(es: EtaState, f=None):
    mp = es.mp
    f = free_energy(es) if f is None else f
    return [repr(mp.beta), repr(mp.J), mp.p0.numerator, mp.p0.denominator, repr(f), repr(-mp.beta * f), es.iterations, repr(es.residual)]


def write_free_energy_csv(path, rows):
    with open(path, "w", newline="") as fh:
        fh.write("#schema=1\n")
        w = csv.writer(fh)
        w.writerow(FREE_ENERGY_COLUMNS)
        w.writerows(rows)
