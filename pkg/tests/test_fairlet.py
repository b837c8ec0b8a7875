from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from faircluster import ConfigurationError, get_fairlet_integers

BANK_K2_LAMBDA_001 = Fraction(99, 100) * Fraction(6395, 13607)


@pytest.mark.parametrize(
    "target,pair", [(0.5, (1, 2)), (0.75, (3, 4)), (0.9, (9, 10)), (BANK_K2_LAMBDA_001, (67, 144))]
)
def test_known_pairs(target, pair):
    res = get_fairlet_integers(target)
    assert (res.p, res.q) == pair
    assert res.achieved <= Fraction(target)


def test_exact_hit():
    assert get_fairlet_integers(0.5).achieved == Fraction(1, 2)


def test_float_bank_target():
    res = get_fairlet_integers(float(BANK_K2_LAMBDA_001))
    assert (res.p, res.q) == (67, 144)


def test_zero_target():
    res = get_fairlet_integers(0)
    assert res.achieved == 0 and res.p == 0


@pytest.mark.parametrize("bad", [-0.1, 1.1])
def test_out_of_range(bad):
    with pytest.raises(ConfigurationError):
        get_fairlet_integers(bad)


@settings(max_examples=200, deadline=None)
@given(p=st.integers(0, 1000), q=st.integers(1, 1000))
def test_rationals_hit_exactly(p, q):
    if p > q:
        p, q = q, p
    t = Fraction(p, q)
    res = get_fairlet_integers(t)
    assert res.achieved == t
    assert 0 <= res.p <= res.q <= 1000


@settings(max_examples=100, deadline=None)
@given(x=st.floats(0, 1, allow_nan=False))
def test_never_exceeds_target(x):
    res = get_fairlet_integers(x)
    assert res.achieved <= Fraction(x)
    assert Fraction(x) - res.achieved < Fraction(1, 1000)
