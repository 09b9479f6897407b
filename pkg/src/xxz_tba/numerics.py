"""Grids, TBA kernels and convolutions on the real axis.

Convolutions are dense Toeplitz sums (trapezoid rule) rather than FFTs:
direct summation keeps relative accuracy in the far tails, where some of
the excited-state quantities are exponentially small but still enter
logarithms.  The part of a function outside the grid is a constant plus an
optional linear slope and is convolved in closed form.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import fft as sp_fft
from scipy import linalg, special

from .errors import DomainError, SolverError, TruncationError
from .rational_ts import TSSequences

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Grid:
    extent: float = 40.0
    points: int = 2049

    def __post_init__(self):
        if self.points % 2 == 0 or self.points < 3:
            raise DomainError("grid needs an odd number of points so that v = 0 is a node")
        if self.extent <= 0:
            raise DomainError("grid extent must be positive")

    @property
    def h(self) -> float:
        return 2 * self.extent / (self.points - 1)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(-self.extent, self.extent, self.points)

    @property
    def weights(self) -> np.ndarray:
        w = np.full(self.points, self.h)
        w[0] = w[-1] = self.h / 2
        return w

    def refined(self):
        """Half the spacing, twice the extent."""
        return Grid(2 * self.extent, 4 * (self.points - 1) + 1)


def grid_for(ts: TSSequences, extent=40.0, points=2049) -> Grid:
    """Default grid, refined until the narrowest s_r kernel has four nodes per width p_r.

    The trapezoid error on a kernel of width p is about exp(-2 pi p / h).
    """
    pmin = min(float(ts.p[r]) for r in range(1, ts.alpha + 1))
    need = int(math.ceil(2 * extent * 4 / pmin)) + 1
    while points < need:
        points = 2 * (points - 1) + 1
    return Grid(extent, points)


@dataclass
class SampledFunction:
    """Samples on a grid plus the model used beyond it.

    For x > L the function is ``right + slope_right * (x - L)``, mirrored
    for x < -L.  Tails default to the edge values.
    """

    grid: Grid
    values: np.ndarray
    left: float | None = None
    right: float | None = None
    slope_left: float = 0.0
    slope_right: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, float)
        if self.values.shape != (self.grid.points,):
            raise DomainError("sample count does not match the grid")
        if self.left is None:
            self.left = float(self.values[0])
        if self.right is None:
            self.right = float(self.values[-1])

    @classmethod
    def constant(cls, grid, c):
        return cls(grid, np.full(grid.points, float(c)))

    @classmethod
    def from_callable(cls, grid, f, **tails):
        return cls(grid, f(grid.x), **tails)

    def check_tails(self, tol=1e-4):
        gap = max(abs(self.values[0] - self.left), abs(self.values[-1] - self.right))
        if gap > tol:
            raise TruncationError(f"samples and tail model disagree by {gap:.2e} at the grid edge")
        return gap

    def __call__(self, v, order=10):
        """Local Lagrange interpolation inside the grid, tail model outside."""
        g = self.grid
        v = np.atleast_1d(np.asarray(v, float))
        out = np.empty_like(v)
        L = g.extent
        hi = v > L
        lo = v < -L
        out[hi] = self.right + self.slope_right * (v[hi] - L)
        out[lo] = self.left + self.slope_left * (-L - v[lo])
        mid = ~(hi | lo)
        if mid.any():
            out[mid] = _lagrange(self.values, g, v[mid], order)
        return out

    def integral_against(self, kernel_values):
        """Trapezoid integral of kernel * f over the grid (kernel sampled on the grid)."""
        return float(np.dot(self.grid.weights, kernel_values * self.values))


def _lagrange(values, grid, v, order):
    t = (v + grid.extent) / grid.h
    n = grid.points
    start = np.clip(np.floor(t).astype(int) - order // 2 + 1, 0, n - order)
    idx = start[:, None] + np.arange(order)[None, :]
    nodes = idx.astype(float)
    out = np.zeros(len(v))
    for a in range(order):
        w = np.ones(len(v))
        for b in range(order):
            if a != b:
                w *= (t - nodes[:, b]) / (nodes[:, a] - nodes[:, b])
        out += w * values[idx[:, a]]
    return out


# --- kernels --------------------------------------------------------------

def _p(ts: TSSequences, r):
    return float(ts.p[r])


def kernel_s(r, v, ts: TSSequences):
    """1 / (4 p_r cosh(pi v / (2 p_r)))."""
    if not 1 <= r <= ts.alpha:
        raise DomainError(f"s_r needs 1 <= r <= alpha = {ts.alpha}, got {r}")
    return s_of_p(_p(ts, r), v)


def s_of_p(p, v):
    v = np.asarray(v, float)
    x = np.abs(np.pi * v / (2 * p))
    # 1/cosh without overflow
    return np.exp(-x) / (1 + np.exp(-2 * x)) / (2 * p)


def _s_cumulative(p, a):
    """Integral of s_p from -inf to a."""
    return np.arctan(np.exp(np.clip(np.pi * np.asarray(a, float) / (2 * p), -700, 700))) / np.pi


def _ti2(x):
    """Inverse tangent integral Ti2(x) for x > 0."""
    x = np.asarray(x, float)
    out = np.empty_like(x)
    small = x <= 1
    xs = x[small]
    out[small] = np.imag(_li2(1j * xs))
    xl = x[~small]
    out[~small] = np.imag(_li2(1j / xl)) + np.pi / 2 * np.log(xl)
    return out


def _li2(z):
    return special.spence(1 - np.asarray(z, complex))


def _s_ramp(p, a):
    """Integral of (a - t) s_p(t) for t < a: response of s_p to a unit ramp starting at 0."""
    c = np.pi / (2 * p)
    a = np.asarray(a, float)
    return _ti2(np.exp(np.clip(c * a, -700, 700))) / (np.pi * c)


def kernel_d(r, v, ts: TSSequences, kmax=None, dk=None):
    """Fourier integral for d_r by trapezoid quadrature in k with an exponential cutoff."""
    if not 1 <= r < ts.alpha:
        raise DomainError(f"d_r needs 1 <= r < alpha = {ts.alpha}, got {r}")
    a, b = _p(ts, r), _p(ts, r + 1)
    if b >= a:
        raise DomainError("d_r needs p_{r+1} < p_r")
    # integrand decays like exp(-2 b |k|)
    v = np.atleast_1d(np.asarray(v, float))
    kmax = 40.0 / b if kmax is None else kmax
    # the k-trapezoid aliases d(v) onto d(v + 2 pi / dk); keep the images far away
    vmax = float(np.max(np.abs(v))) if v.size else 0.0
    dk = min(0.05, 0.5 * a, 2 * np.pi / (vmax + 80.0)) if dk is None else dk
    k = np.arange(0.0, kmax + dk, dk)
    F = np.exp(-2 * b * k) * (1 + np.exp(-2 * (a - b) * k)) / ((1 + np.exp(-2 * a * k)) * (1 + np.exp(-2 * b * k)))
    w = np.full(k.shape, dk)
    w[0] = dk / 2
    out = np.empty(v.shape)
    for i in range(0, len(v), 512):
        out[i:i + 512] = (np.cos(np.outer(v[i:i + 512], k)) * (w * F)).sum(axis=1) / np.pi
    return out


KERNEL_MASS = 0.5  # every s_r and d_r integrates to 1/2


@dataclass
class Kernel:
    """A sampled even kernel and its FFT convolution on a grid."""

    name: str
    grid: Grid
    samples: np.ndarray  # kernel at 0, h, 2h, ... (2L)
    p: float | None = None  # set for s-type kernels (closed-form tails)
    _spectrum: np.ndarray = field(repr=False, default=None)
    _size: int = field(repr=False, default=0)

    def __post_init__(self):
        n = self.grid.points
        # circulant embedding of the symmetric Toeplitz matrix, transformed once
        size = sp_fft.next_fast_len(2 * n - 1, real=True)
        col = np.zeros(size)
        col[:n] = self.samples[:n]
        col[size - n + 1:] = self.samples[1:n][::-1]
        self._spectrum = sp_fft.rfft(col)
        self._size = size

    def apply(self, values):
        """Trapezoid quadrature of kernel(x_i - y) values(y) over the grid."""
        n = self.grid.points
        w = np.array(values, float)
        w[0] *= 0.5
        w[-1] *= 0.5
        m = self._size
        out = sp_fft.irfft(self._spectrum * sp_fft.rfft(w, n=m), n=m)[:n]
        return out * self.grid.h

    def dense_matrix(self):
        """Explicit quadrature matrix; for tests and small grids."""
        m = linalg.toeplitz(self.samples[: self.grid.points]) * self.grid.h
        m[:, 0] *= 0.5
        m[:, -1] *= 0.5
        return m

    @property
    def integral(self):
        """Integral over the line from the samples (trapezoid, symmetric)."""
        h = self.grid.h
        s = self.samples
        return h * (s[0] + 2 * s[1:].sum()) - h * s[-1]

    def tail_mass(self, a):
        """Kernel mass beyond distance a (one side)."""
        if self.p is not None:
            return KERNEL_MASS - _s_cumulative(self.p, a)
        # numeric for d-type kernels: trapezoid over the stored samples
        h = self.grid.h
        idx = np.clip(np.round(np.asarray(a) / h).astype(int), 0, len(self.samples) - 1)
        cs = np.concatenate([[0.0], np.cumsum((self.samples[1:] + self.samples[:-1]) * h / 2)])
        return KERNEL_MASS / 2 - cs[idx]

    def __call__(self, f: SampledFunction) -> SampledFunction:
        return convolve(self, f)


def convolve(kernel: Kernel, f: SampledFunction) -> SampledFunction:
    """kernel * f on the grid, with the out-of-grid tail model convolved exactly."""
    g = f.grid
    if g != kernel.grid:
        raise DomainError("kernel and function live on different grids")
    x = g.x
    L = g.extent
    c = 0.5 * (f.left + f.right)
    out = kernel.apply(f.values - c) + KERNEL_MASS * c
    dl, dr = f.left - c, f.right - c
    if dl or dr:
        out += dr * kernel.tail_mass(L - x) + dl * kernel.tail_mass(L + x)
    if f.slope_left or f.slope_right:
        if kernel.p is None:
            raise DomainError("linear tails are only supported for s-type kernels")
        out += f.slope_right * _s_ramp(kernel.p, x - L) + f.slope_left * _s_ramp(kernel.p, -x - L)
    if kernel.p is not None and (dl or dr or f.slope_left or f.slope_right):
        # Euler-Maclaurin h^2 end correction: the interior integrand has a
        # nonzero derivative at +-L once the tails are not flat and even
        p = kernel.p
        h = g.h
        kr, kl = s_of_p(p, x - L), s_of_p(p, x + L)
        dkr = -np.pi / (2 * p) * np.tanh(np.pi * (x - L) / (2 * p)) * kr
        dkl = -np.pi / (2 * p) * np.tanh(np.pi * (x + L) / (2 * p)) * kl
        gr = -dkr * dr + kr * f.slope_right
        gl = -dkl * dl - kl * f.slope_left
        out -= h * h / 12 * (gr - gl)
    m = KERNEL_MASS
    return SampledFunction(g, out, m * f.left, m * f.right, m * f.slope_left, m * f.slope_right)


@dataclass
class KernelSet:
    ts: TSSequences
    grid: Grid
    s: dict = field(default_factory=dict)
    d: dict = field(default_factory=dict)

    @classmethod
    def build(cls, ts: TSSequences, grid: Grid, rs=None):
        ks = cls(ts, grid)
        offs = np.arange(grid.points) * grid.h
        for r in range(1, ts.alpha + 1) if rs is None else rs:
            ks.s[r] = Kernel(f"s{r}", grid, kernel_s(r, offs, ts), p=_p(ts, r))
        for r in range(1, ts.alpha):
            ks.d[r] = Kernel(f"d{r}", grid, kernel_d(r, offs, ts))
        return ks

    def normalizations(self):
        """Full-line integrals: trapezoid over the samples (out to 2L) plus the far tail."""
        out = {}
        far = 2 * self.grid.extent
        for r, k in self.s.items():
            out[f"s{r}"] = k.integral + 2 * float(k.tail_mass(far))
        for r, k in self.d.items():
            # d_r decays at least like exp(-pi v / (2 p_r)) with p_r <= 1: nothing left beyond 2L
            out[f"d{r}"] = k.integral
        return out


# --- principal value ------------------------------------------------------

def _pv_inv_sinh(a, zeta, lo, hi):
    """p.v. integral of 1/sinh(a (zeta - x)) for x in [lo, hi] (lo < zeta < hi)."""
    def F(x):
        return -np.log(np.abs(np.tanh(a * (zeta - x) / 2))) / a

    return F(hi) - F(lo)


def pv_convolve_shifted(f: SampledFunction, zeta, f_at_zeta=None):
    """s_1 * f evaluated at zeta + i:

    p.v. int f(x) / (4 i sinh(pi (zeta - x) / 2)) dx + f(zeta) / 2.

    The singular part is removed by subtracting f(zeta); the subtracted
    constant is integrated in closed form, as are the tails beyond the grid.
    """
    g = f.grid
    L = g.extent
    if not -L < zeta < L:
        raise DomainError("zeta must lie inside the grid")
    a = np.pi / 2
    fz = float(f(zeta)[0]) if f_at_zeta is None else float(f_at_zeta)
    x = g.x
    d = zeta - x
    with np.errstate(divide="ignore", invalid="ignore"):
        integrand = (f.values - fz) / np.sinh(a * d)
    near = np.abs(d) < 1e-9
    if near.any():
        i = int(np.nonzero(near)[0][0])
        nb = integrand[[i - 2, i - 1, i + 1, i + 2]]
        integrand[i] = (-nb[0] + 4 * nb[1] + 4 * nb[2] - nb[3]) / 6
    pv = float(np.dot(g.weights, integrand))
    pv += fz * _pv_inv_sinh(a, zeta, -L, L)
    # tails: constant part beyond the grid
    pv += f.right * (-np.log(np.abs(np.tanh(a * (zeta - L) / 2))) / a)
    pv += f.left * (np.log(np.abs(np.tanh(a * (zeta + L) / 2))) / a)
    return complex(0.5 * fz, -pv / 4)


# --- iteration ------------------------------------------------------------

@dataclass
class FixedPointResult:
    x: object
    iterations: int
    residual: float
    history: list


def fixed_point_solve(F, x0, damping=0.5, tol=1e-12, maxiter=2000, norm=None, min_damping=1e-3, anderson=0,
                      weights=None):
    """Damped iteration x <- (1 - lam) x + lam F(x).

    ``lam`` is halved whenever the sup-norm change grows and slowly restored
    after progress.  With ``anderson > 0`` the step is Anderson-mixed over
    that many previous iterates; when the residual jumps the history is
    dropped and the iteration restarts from the best iterate so far.
    ``weights`` (an array over the flattened unknowns, or a callable of the
    current unknowns returning one) scales the residual both in the
    convergence norm and in the Anderson least-squares fit.
    ``x`` may be an array or a list of arrays.
    """
    def flat(x):
        if isinstance(x, (list, tuple)):
            return np.concatenate([np.ravel(np.asarray(a, float)) for a in x])
        return np.ravel(np.asarray(x, float))

    def unflat(v, like):
        if isinstance(like, (list, tuple)):
            out, i = [], 0
            for a in like:
                n = np.size(a)
                out.append(v[i:i + n].reshape(np.shape(a)))
                i += n
            return out
        return v.reshape(np.shape(like)) if np.ndim(like) else float(v[0])

    norm = (lambda d: float(np.max(np.abs(d)))) if norm is None else norm
    like = x0
    x = flat(x0)
    lam = damping
    hist = []
    prev = math.inf
    best = math.inf
    x_best = x.copy()
    xs, rs = [], []
    for it in range(1, maxiter + 1):
        fx = flat(F(unflat(x, like)))
        if not np.all(np.isfinite(fx)):
            raise SolverError("fixed-point map produced non-finite values", hist)
        diff = fx - x
        w = None
        if weights is not None:
            w = flat(weights(unflat(x, like))) if callable(weights) else np.asarray(weights, float)
        res = norm(diff if w is None else w * diff)
        hist.append(res)
        if res < tol:
            return FixedPointResult(unflat(fx, like), it, res, hist)
        if anderson:
            if res > 10 * best:
                # restart from the best iterate with a shorter step
                xs, rs = [], []
                lam = max(lam / 2, min_damping)
                x = x_best.copy()
                continue
            if res < best:
                best, x_best = res, x.copy()
                lam = min(damping, lam * 1.2)
            xs.append(x.copy())
            rs.append(diff)
            if len(xs) > anderson + 1:
                xs.pop(0)
                rs.pop(0)
            if len(xs) > 1:
                dR = np.diff(np.array(rs), axis=0).T
                dX = np.diff(np.array(xs), axis=0).T
                if w is None:
                    gamma = np.linalg.lstsq(dR, diff, rcond=None)[0]
                else:
                    gamma = np.linalg.lstsq(w[:, None] * dR, w * diff, rcond=None)[0]
                x = x + lam * diff - (dX + lam * dR) @ gamma
            else:
                x = x + lam * diff
            continue
        if res > prev and lam > min_damping:
            lam = max(lam / 2, min_damping)
        elif lam < damping:
            lam = min(damping, lam * 1.1)
        prev = res
        x = x + lam * diff
    raise SolverError(f"fixed-point iteration did not converge in {maxiter} steps (residual {hist[-1]:.3e})", hist)
