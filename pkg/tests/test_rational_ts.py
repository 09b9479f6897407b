import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xxz_tba.errors import DomainError, SequenceValidationError
from xxz_tba.rational_ts import (INFINITY, RationalP0, build_sequences, expand_continued_fraction, sequences_for,
                                 validate_sequences)


def euclid(num, den):
    out = []
    while den:
        q, r = divmod(num, den)
        out.append(q)
        num, den = den, r
    return out


@pytest.mark.parametrize("p0, terms", [("24/5", (4, 1, 4)), ("5", (5,)), ("7/2", (3, 2)), ("37/12", (3, 12))])
def test_continued_fraction_terms(p0, terms):
    cf = expand_continued_fraction(RationalP0.parse(p0))
    assert cf.terms == terms
    assert cf.evaluate() == Fraction(p0)


def test_sequences_24_over_5():
    ts = sequences_for("24/5")
    assert ts.m[:-1] == (0, 4, 5, 9) and ts.m[-1] == INFINITY
    assert ts.p == (Fraction(24, 5), 1, Fraction(4, 5), Fraction(1, 5), 0)
    assert [ts.y[j] for j in range(-1, 4)] == [0, 1, 4, 5, 24]
    assert [ts.z[j] for j in range(-1, 4)] == [1, 0, 1, 1, 5]
    assert [ts.n[j] for j in range(1, 10)] == [1, 2, 3, 1, 4, 9, 14, 19, 5]
    assert [ts.n_tilde[j] for j in range(1, 10)] == [1, 2, 3, 4, 5, 9, 14, 19, 24]
    assert [ts.w[j] for j in range(1, 9)] == [0, 0, 0, -1, 0, 1, 2, 3]
    assert ts.n_tilde[8] == ts.y[3] - ts.y[2]
    assert ts.j_max == 8


def test_sequences_integer_5():
    ts = sequences_for("5")
    assert ts.m[:-1] == (0, 5)
    assert ts.p == (5, 1, 0)
    assert [ts.y[j] for j in range(-1, 2)] == [0, 1, 5]
    assert [ts.z[j] for j in range(-1, 2)] == [1, 0, 1]
    assert [ts.n[j] for j in range(1, 6)] == [1, 2, 3, 4, 1]
    assert [ts.n_tilde[j] for j in range(1, 6)] == [1, 2, 3, 4, 5]
    assert [ts.w[j] for j in range(1, 6)] == [0, 0, 0, 0, -1]


def test_p_values_are_exact():
    ts = sequences_for("24/5")
    assert all(isinstance(x, (int, Fraction)) for x in ts.p)
    assert ts.p[-1] == 0


@pytest.mark.parametrize("p0", ["24/5", "7/2", "5", "3", "37/12", "41/20", "100/49"])
def test_validation_passes(p0):
    rep = validate_sequences(sequences_for(p0))
    assert rep.passed, rep.format()


def test_y_alpha_seven_halves():
    ts = sequences_for("7/2")
    assert ts.y[ts.alpha] == 7 and ts.z[ts.alpha] == 2


def test_validation_names_failed_identity():
    ts = sequences_for("24/5")
    bad = build_sequences(ts.cf, "24/5")
    bad.n_tilde[3] = 7
    with pytest.raises(SequenceValidationError) as e:
        validate_sequences(bad)
    assert "n_tilde_vs_n" in str(e.value)
    rep = validate_sequences(bad, raise_on_failure=False)
    assert not rep.passed and "n_tilde_strictly_increasing" in rep.failed()


@pytest.mark.parametrize("text", ["2", "3/2", "1", "24/0", "abc", "0"])
def test_domain_errors(text):
    with pytest.raises(DomainError):
        expand_continued_fraction(RationalP0.parse(text))


def test_parse_reduces():
    p = RationalP0.parse("48/10")
    assert (p.numerator, p.denominator) == (24, 5)
    assert math.isclose(p.theta, math.pi / 4.8)


@st.composite
def rationals(draw, max_den=50, max_val=100):
    den = draw(st.integers(1, max_den))
    num = draw(st.integers(2 * den + 1, max_val * den))
    return Fraction(num, den)


@settings(max_examples=300, deadline=None)
@given(rationals())
def test_round_trip_property(p0):
    cf = expand_continued_fraction(RationalP0.parse(p0))
    assert cf.evaluate() == p0
    assert cf.terms == tuple(euclid(p0.numerator, p0.denominator))
    if cf.alpha == 1:
        assert cf.terms[0] >= 3
    else:
        assert cf.terms[-1] >= 2


@settings(max_examples=100, deadline=None)
@given(rationals(max_den=12, max_val=20))
def test_invariants_property(p0):
    ts = sequences_for(p0)
    assert validate_sequences(ts).passed
    assert ts.w[1] == 0 and ts.w[ts.m[1]] == -1
