"""Closed forms at Delta = 0 (p0 = 2) and the finite-N identities behind them."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import DomainError
from .report import CheckReport

THETA = math.pi / 2


@dataclass(frozen=True)
class FreeFermionParams:
    J: float
    beta: float

    def __post_init__(self):
        if self.J == 0:
            raise DomainError("J must be nonzero")
        if not self.beta > 0:
            raise DomainError("beta must be positive")

    @property
    def x(self) -> float:
        """|J beta| / 2."""
        return abs(self.J * self.beta) / 2


def _log_2cosh(y):
    y = abs(y)
    return y + math.log1p(math.exp(-2 * y))


def _quad(f, a, b):
    return integrate.quad(f, a, b, epsabs=1e-14, epsrel=1e-13, limit=400)[0]


def ff_free_energy(p: FreeFermionParams) -> float:
    """f = -(2/(pi beta)) int_0^{pi/2} ln(2 cosh((J beta/2) cos eta)) d eta."""
    x = p.x
    val = _quad(lambda e: _log_2cosh(x * math.cos(e)), 0.0, math.pi / 2)
    return -2.0 / (math.pi * p.beta) * val


def _log_tanh(y):
    # ln tanh y = ln(1 - e^{-2y}) - ln(1 + e^{-2y}), fine for small and large y
    t = math.exp(-2 * y)
    return math.log(-math.expm1(-2 * y)) - math.log1p(t)


def ff_inverse_xi2(p: FreeFermionParams) -> float:
    """1/xi_2 = -(2/pi) int_0^{pi/2} ln tanh(x cos eta) d eta with x = |J beta|/2.

    The logarithmic endpoint singularity at eta = pi/2 is removed by
    eta = pi/2 - s^2.
    """
    x = p.x
    top = math.sqrt(math.pi / 2)
    val = _quad(lambda s: 2 * s * _log_tanh(x * math.sin(s * s)) if s > 0 else 0.0, 0.0, top)
    return -2.0 / math.pi * val


def ff_inverse_xi2_printed(p: FreeFermionParams) -> float:
    """The variant with ln(2 tanh(...)); differs from ff_inverse_xi2 by -ln 2."""
    return ff_inverse_xi2(p) - math.log(2)


def ff_xi2(p: FreeFermionParams) -> float:
    return 1.0 / ff_inverse_xi2(p)


def ff_inverse_xi3(p: FreeFermionParams) -> float:
    """1/xi_3 = 2 asinh(pi / |J beta|)."""
    return 2 * math.asinh(math.pi / abs(p.J * p.beta))


def ff_inverse_xi3_alt(p: FreeFermionParams) -> float:
    """-2 ln tanh(asinh(|J beta|/pi) / 2), equal to ff_inverse_xi3."""
    return -2 * math.log(math.tanh(0.5 * math.asinh(abs(p.J * p.beta) / math.pi)))


def ff_xi3(p: FreeFermionParams) -> float:
    return 1.0 / ff_inverse_xi3(p)


def ff_zeta(p: FreeFermionParams) -> float:
    """Trotter-limit real zero of rho: (2/pi) asinh(J beta / pi)."""
    return 2 / math.pi * math.asinh(abs(p.J * p.beta) / math.pi)


# --- finite-N identities --------------------------------------------------

def log_rho(v, bs):
    """ln rho(u, v) for the state's sector m (theta = pi/2)."""
    from .qtm import log_phi, logsumexp_complex

    tp = bs.tp
    v = np.asarray(v, complex)
    u = tp.u
    a = log_phi(v - 1j * (u + 2), tp) + log_phi(v + 1j * u, tp)
    b = log_phi(v + 1j * (u + 2), tp) + log_phi(v - 1j * u, tp) + (1j * np.pi if bs.m % 2 else 0)
    return logsumexp_complex(np.stack([a, b]), axis=0)


def log_x_ratio(v, tp):
    """ln X(u, v) = ln[phi(v + i(u-1)) phi(v - i(u-1)) / (phi(v + i(u+1)) phi(v - i(u+1)))]."""
    from .qtm import log_phi

    v = np.asarray(v, complex)
    u = tp.u
    return (log_phi(v + 1j * (u - 1), tp) + log_phi(v - 1j * (u - 1), tp)
            - log_phi(v + 1j * (u + 1), tp) - log_phi(v - 1j * (u + 1), tp))


def log_t_tilde(v, bs):
    """ln of T_1 / (phi(v + i(u+2)) phi(v - i(u+2)))."""
    from .qtm import log_phi, log_t

    tp = bs.tp
    v = np.asarray(v, complex)
    return log_t(1, v, bs) - log_phi(v + 1j * (tp.u + 2), tp) - log_phi(v - 1j * (tp.u + 2), tp)


def _wrapped(a, b):
    """Relative difference of two complex logs, |exp(a - b) - 1|."""
    d = np.asarray(a) - np.asarray(b)
    return np.abs(np.expm1(d.real + 1j * (np.angle(np.exp(1j * d.imag)))))


def ff_verify_identities(N, u, samples=None, ranks=(1, 2, 3), tol=1e-9, seed=0) -> CheckReport:
    """Residuals of the free-fermion T-function identities at finite N."""
    from .qtm import TrotterParams, log_q, log_t, solve_bae

    if N % 2 or N < 4:
        raise DomainError("N must be even and at least 4")
    tp = TrotterParams(N, u, THETA)
    if samples is None:
        rng = np.random.default_rng(seed)
        samples = rng.uniform(-2, 2, 10) + 1j * rng.uniform(-0.8, 0.8, 10)
    v = np.asarray(samples, complex)
    rep = CheckReport()
    states = {k: solve_bae(tp, rank=k) for k in ranks}
    for k, bs in states.items():
        lhs = log_t(1, v, bs)
        rhs = log_rho(v, bs) + log_q(v + 2j, bs.roots, THETA) - log_q(v, bs.roots, THETA)
        rep.add(f"freeT_k{k}", v, float(np.max(_wrapped(lhs, rhs))), tol)

        lhs = log_t(1, v + 1j, bs) + log_t(1, v - 1j, bs)
        rhs = log_rho(v + 1j, bs) + log_rho(v - 1j, bs) + (1j * np.pi if bs.m % 2 else 0)
        rep.add(f"t_product_k{k}", v, float(np.max(_wrapped(lhs, rhs))), tol)

        lhs = log_t_tilde(v + 1j, bs) + log_t_tilde(v - 1j, bs)
        lx = log_x_ratio(v, tp)
        sgn = -1.0 if (N // 2 - bs.m) % 2 else 1.0
        rhs = 2 * np.log(np.exp(lx / 2) + sgn * np.exp(-lx / 2))
        rep.add(f"t_tilde_k{k}", v, float(np.max(_wrapped(lhs, rhs))), tol)

    if 1 in states and 3 in states:
        # the rank-3 state swaps the outer pair +-zeta_N for 0 and 2i
        zN = float(np.max(np.abs(states[1].real_roots)))
        lhs = log_t(1, v, states[3])
        rhs = (log_t(1, v, states[1]) + np.log(np.tanh(np.pi * (v + zN) / 4))
               + np.log(np.tanh(np.pi * (v - zN) / 4)))
        rep.add("t3_from_t1", v, float(np.max(_wrapped(lhs, rhs))), tol)
    if 1 in states:
        rr = states[1].real_roots
        res = np.exp(np.real(log_rho(rr + 0j, states[1]) - log_phi_scale(rr, tp)))
        rep.add("ground_roots_are_rho_zeros", rr, float(np.max(np.abs(res))), tol)
    return rep


def log_phi_scale(v, tp):
    """Magnitude scale of the two terms of rho, used to make the zero test relative."""
    from .qtm import log_phi

    v = np.asarray(v, complex)
    u = tp.u
    return np.real(log_phi(v - 1j * (u + 2), tp) + log_phi(v + 1j * u, tp))


def trotter_free_energy(p: FreeFermionParams, N) -> float:
    """-(1/beta) ln T_1(u_N, 0) at theta = pi/2."""
    from .qtm import TrotterParams, solve_bae, t_eigenvalue

    u = -p.beta * p.J * math.sin(THETA) / (THETA * N)
    bs = solve_bae(TrotterParams(N, u, THETA, p.beta, p.J), rank=1)
    return -math.log(t_eigenvalue(1, 0.0, bs)[0].real) / p.beta


FF_COLUMNS = ["beta", "J", "p0_num", "p0_den", "f", "minus_beta_f", "inv_xi2", "inv_xi2_printed", "inv_xi3",
              "xi2_over_beta", "xi3_over_beta"]


def ff_row(p: FreeFermionParams):
    f = ff_free_energy(p)
    i2 = ff_inverse_xi2(p)
    i3 = ff_inverse_xi3(p)
    return [repr(p.beta), repr(p.J), 2, 1, repr(f), repr(-p.beta * f), repr(i2), repr(ff_inverse_xi2_printed(p)),
            repr(i3), repr(1 / (i2 * p.beta)), repr(1 / (i3 * p.beta))]
