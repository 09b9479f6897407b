"""Continued fractions of p0 and the Takahashi-Suzuki sequences.

Everything here is exact: p0 and the p_j are :class:`fractions.Fraction`
values, so identities such as ``p_{alpha+1} == 0`` are tested with ``==``.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

from .errors import DomainError, SequenceValidationError
from .report import CheckReport

#: Stand-in for m_{alpha+1}; compares greater than every integer.
INFINITY = math.inf


@dataclass(frozen=True)
class RationalP0:
    numerator: int
    denominator: int = 1

    def __post_init__(self):
        if self.denominator <= 0 or self.numerator <= 0:
            raise DomainError("p0 must be a positive rational")
        if math.gcd(self.numerator, self.denominator) != 1:
            g = math.gcd(self.numerator, self.denominator)
            object.__setattr__(self, "numerator", self.numerator // g)
            object.__setattr__(self, "denominator", self.denominator // g)
        if self.value < 2:
            raise DomainError(f"p0 = {self} < 2 is outside the critical regime 0 <= Delta < 1")

    @classmethod
    def parse(cls, text) -> "RationalP0":
        if isinstance(text, RationalP0):
            return text
        if isinstance(text, Fraction):
            return cls(text.numerator, text.denominator)
        if isinstance(text, int):
            return cls(text, 1)
        s = str(text).strip()
        try:
            if "/" in s:
                num, den = s.split("/")
                num, den = int(num), int(den)
            else:
                num, den = int(s), 1
        except ValueError:
            raise DomainError(f"cannot parse p0 from {text!r}; expected 'num/den'") from None
        if den == 0:
            raise DomainError(f"zero denominator in p0 {text!r}")
        frac = Fraction(num, den)
        return cls(frac.numerator, frac.denominator)

    @property
    def value(self) -> Fraction:
        return Fraction(self.numerator, self.denominator)

    @property
    def is_integer(self) -> bool:
        return self.denominator == 1

    @property
    def theta(self) -> float:
        return math.pi * self.denominator / self.numerator

    @property
    def delta(self) -> float:
        return math.cos(self.theta)

    def __float__(self):
        return self.numerator / self.denominator

    def __str__(self):
        if self.denominator == 1:
            return str(self.numerator)
        return f"{self.numerator}/{self.denominator}"


@dataclass(frozen=True)
class ContinuedFraction:
    terms: tuple

    @property
    def alpha(self) -> int:
        return len(self.terms)

    def nu(self, j: int) -> int:
        """1-based access, nu(1) is the leading term."""
        return self.terms[j - 1]

    def evaluate(self) -> Fraction:
        acc = Fraction(self.terms[-1])
        for t in reversed(self.terms[:-1]):
            acc = t + 1 / acc
        return acc


def expand_continued_fraction(p0: RationalP0) -> ContinuedFraction:
    """Canonical expansion p0 = nu_1 + 1/(nu_2 + ...), last term >= 2 when alpha >= 2."""
    p0 = RationalP0.parse(p0)
    if p0.value == 2:
        raise DomainError("p0 = 2 is the free-fermion point; use xxz_tba.free_fermion")
    num, den = p0.numerator, p0.denominator
    terms = []
    while den:
        q, r = divmod(num, den)
        terms.append(q)
        num, den = den, r
    # the Euclidean algorithm already ends on a term >= 2 unless alpha == 1
    cf = ContinuedFraction(tuple(terms))
    assert cf.evaluate() == p0.value
    return cf


@dataclass(frozen=True)
class TSSequences:
    """Takahashi-Suzuki data of a rational p0 > 2.

    ``m`` runs over m_0..m_{alpha+1} with the last entry :data:`INFINITY`;
    ``p`` over p_0..p_{alpha+1}.  ``y`` and ``z`` are dicts keyed -1..alpha,
    ``n`` and ``n_tilde`` are keyed 1..m_alpha+1 and ``w`` 1..m_alpha.
    """

    p0: RationalP0
    cf: ContinuedFraction
    m: tuple
    p: tuple
    y: dict
    z: dict
    n: dict
    n_tilde: dict
    w: dict

    @property
    def alpha(self) -> int:
        return self.cf.alpha

    @property
    def m_alpha(self) -> int:
        return self.m[self.alpha]

    @property
    def j_max(self) -> int:
        return self.m_alpha - 1

    def block(self, j: int) -> int:
        """The r with m_r <= j < m_{r+1}."""
        for r in range(self.alpha + 1):
            if self.m[r] <= j < self.m[r + 1]:
                return r
        raise DomainError(f"index {j} outside the sequences")

    def w_of(self, j: int) -> int:
        r = self.block(j)
        return self.z[r - 1] + (j - self.m[r]) * self.z[r] - 1

    def n_tilde_of(self, j: int) -> int:
        for r in range(self.alpha + 1):
            if self.m[r] < j <= self.m[r + 1]:
                return self.y[r - 1] + (j - self.m[r]) * self.y[r]
        raise DomainError(f"index {j} outside the sequences")

    @cached_property
    def p_float(self) -> tuple:
        return tuple(float(x) for x in self.p)


def build_sequences(cf: ContinuedFraction, p0: RationalP0) -> TSSequences:
    p0 = RationalP0.parse(p0)
    alpha = cf.alpha
    nu = cf.nu

    m = [0]
    for j in range(1, alpha + 1):
        m.append(m[-1] + nu(j))
    m.append(INFINITY)

    p = [p0.value, Fraction(1)]
    for j in range(2, alpha + 2):
        p.append(p[j - 2] - nu(j - 1) * p[j - 1])

    y = {-1: 0, 0: 1}
    z = {-1: 1, 0: 0}
    for j in range(1, alpha + 1):
        y[j] = y[j - 2] + nu(j) * y[j - 1]
        z[j] = z[j - 2] + nu(j) * z[j - 1]

    count = m[alpha] + 1
    n, n_tilde, w = {}, {}, {}
    for j in range(1, count + 1):
        for r in range(alpha + 1):
            if m[r] <= j < m[r + 1]:
                n[j] = y[r - 1] + (j - m[r]) * y[r]
                if j <= m[alpha]:
                    w[j] = z[r - 1] + (j - m[r]) * z[r] - 1
            if m[r] < j <= m[r + 1]:
                n_tilde[j] = y[r - 1] + (j - m[r]) * y[r]

    return TSSequences(p0, cf, tuple(m), tuple(p), y, z, n, n_tilde, w)


def sequences_for(p0) -> TSSequences:
    p0 = RationalP0.parse(p0)
    return build_sequences(expand_continued_fraction(p0), p0)


def _floor(x) -> int:
    return math.floor(x)


def validate_sequences(ts: TSSequences, p0=None, raise_on_failure=True) -> CheckReport:
    """Check every sequence identity; exact except the sine-sign condition.

    Raises :class:`SequenceValidationError` naming the failed identities
    unless ``raise_on_failure`` is false.
    """
    P0 = ts.p0.value if p0 is None else RationalP0.parse(p0).value
    a = ts.alpha
    nu = ts.cf.nu
    p, y, z, m = ts.p, ts.y, ts.z, ts.m
    rep = CheckReport()

    def exact(name, ok, samples=()):
        rep.add(name, samples, 0.0 if ok else 1.0, 0.5)

    exact("continued_fraction_roundtrip", ts.cf.evaluate() == P0)
    exact("canonical_form", a == 1 and nu(1) >= 3 or a >= 2 and nu(a) >= 2 and nu(1) >= 2)
    exact("p_alpha_plus_1_zero", p[a + 1] == 0)
    # p_j <= p_{j-1}/nu_j, with equality exactly at j = alpha
    exact("p_j_below_p_prev_over_nu", all(p[j] < p[j - 1] / nu(j) for j in range(1, a)) and p[a] == p[a - 1] / nu(a))
    exact("p_j_below_half_p0", all(p[j] < P0 / 2 for j in range(1, a + 2)))
    js = [j for j in range(2, a + 1)] + ([1] if nu(1) >= 3 else [])
    exact("two_p_sum_below_p0", all(2 * p[j] + 2 * p[j + 1] < P0 for j in js))
    exact("y_equals_z_p0_plus_p", all(y[j] == z[j] * P0 + (-1) ** (j % 2) * p[j + 1] for j in range(-1, a + 1)))
    exact("y_alpha_equals_z_alpha_p0", y[a] == z[a] * P0)
    exact("gcd_y_alpha_z_alpha", math.gcd(y[a], z[a]) == 1)

    count = m[a] + 1
    nt = [ts.n_tilde[j] for j in range(1, count + 1)]
    exact("n_tilde_strictly_increasing", all(b > c for b, c in zip(nt[1:], nt[:-1])))
    special = {m[r]: r for r in range(1, a + 1)}
    ok = True
    for j in range(1, count + 1):
        if j in special:
            r = special[j]
            ok &= ts.n_tilde[j] == y[r] and ts.n[j] == y[r - 1]
        else:
            ok &= ts.n_tilde[j] == ts.n[j]
    exact("n_tilde_vs_n", ok)
    lhs = Counter(ts.n_tilde.values())
    rhs = Counter(ts.n.values())
    rhs[y[a]] += 1
    rhs[1] -= 1
    exact("multiset_identity", +lhs == +rhs)

    exact("w_floor_identity", all(_floor(Fraction(ts.n[j] - 1) / P0) == ts.w[j] + (j == m[1]) for j in range(1, m[a] + 1)))
    wk = ts.w[1] == 0 and ts.w[m[1]] == -1 and (a < 2 or ts.w[m[2]] == 0)
    exact("w_special_values", wk)

    worst = math.inf
    ok2 = True
    for j in range(1, m[a] + 1):
        nj = ts.n[j]
        for k in range(1, nj):
            val = (-1) ** (ts.w[j] % 2) * math.sin(math.pi * k / float(P0)) * math.sin(math.pi * (nj - k) / float(P0))
            worst = min(worst, val)
            lhs2 = _floor(Fraction(k) / P0) + _floor(Fraction(nj - k) / P0)
            ok2 &= lhs2 == _floor(Fraction(nj - 1) / P0)
    # pass iff the smallest sine product exceeds 1e-12
    rep.add("ts_condition_sine_sign", [], 1e-12 - worst if worst != math.inf else -1.0, 0.0)
    exact("ts_condition_floor", ok2)

    if raise_on_failure and not rep.passed:
        raise SequenceValidationError(rep.failed())
    return rep
