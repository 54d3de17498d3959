import math

import pytest
from hypothesis import given, strategies as st

from hypernum import NEG_INF, OVERFLOW, ZERO, Hypernum, hmax, hsum, relative_residual, relative_slack

linear = st.floats(min_value=-OVERFLOW, max_value=OVERFLOW)
moderate = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False)


def test_level_zero_is_plain_float_arithmetic():
    a, b = Hypernum(3.5), Hypernum(-1.25)
    assert float(a + b) == 2.25
    assert float(a - b) == 4.75
    assert float(a * b) == -4.375
    assert float(a / b) == -2.8
    assert float(Hypernum(9.0) ** 0.5) == 3.0


def test_values_past_double_range_climb_a_level():
    big = Hypernum(1e300) * 1e10
    assert big.pt == 1
    assert float(big) == math.inf
    assert big.log_float() == pytest.approx(math.log(1e310), rel=1e-15)
    assert big > 1e300


def test_exp_log_are_exact_inverses_on_towers():
    x = Hypernum(1000.0)
    tower = x.exp().exp().exp()
    assert tower.pt == 3
    assert tower.log().log().log() == x


def test_huge_ints_go_through_the_log():
    h = Hypernum(10 ** 400)
    assert h.pt == 1
    assert h.mantissa == pytest.approx(400 * math.log(10), rel=1e-15)


def test_adding_negligible_terms_returns_the_big_one():
    big = Hypernum(50.0).exp().exp()
    assert big + 1.0 == big
    assert big - big == ZERO


def test_zero_and_sentinels():
    assert Hypernum(0.0).log() == NEG_INF
    assert NEG_INF.exp() == ZERO
    assert float(Hypernum(0.0) ** -1) == math.inf
    assert float(Hypernum(0.0) ** 0) == 1.0
    with pytest.raises(ValueError):
        Hypernum(-2.0).log()


def test_infinity_orders_above_every_tower():
    tower = Hypernum(5.0).exp().exp().exp().exp()
    inf = Hypernum(math.inf)
    assert tower < inf
    assert -tower > -inf
    assert tower + inf == inf


def test_tokens():
    assert Hypernum(2.5).to_token() == '2.5'
    tower = Hypernum._raw(1, 2, 800.0)
    assert tower.to_token() == '2p800.0'
    assert Hypernum.from_token('2p800.0') == tower
    assert Hypernum.from_token('-1p800.0') == -Hypernum._raw(1, 1, 800.0)
    assert Hypernum.from_token('-inf') == NEG_INF


def test_relative_slack_levels():
    assert relative_slack(3.0, 2.0) == 0.5
    assert relative_slack(0.5, 0.25) == 0.25
    tower = Hypernum(2000.0).exp()
    assert relative_residual(tower, tower) == 0.0
    assert relative_slack(Hypernum(2001.0).exp(), tower) == pytest.approx(1 / 2000)


def test_next_up_is_the_next_representable_value():
    assert float(Hypernum(1.0).next_up()) == math.nextafter(1.0, 2.0)
    tower = Hypernum(1e5).exp().exp()
    assert tower.next_up() > tower
    assert tower.next_up().pt == tower.pt


def test_hmax_and_hsum():
    assert hmax(1.0, Hypernum(3.0), 2.0) == 3.0
    assert float(hsum([1.0, 2.0, Hypernum(3.5)])) == 6.5


@given(linear, linear)
def test_ordering_matches_floats(a, b):
    assert (Hypernum(a) < Hypernum(b)) == (a < b)
    assert (Hypernum(a) == Hypernum(b)) == (a == b)


@given(moderate, moderate)
def test_exp_is_monotone_into_towers(a, b):
    ha, hb = Hypernum(abs(a)).exp().exp(), Hypernum(abs(b)).exp().exp()
    if abs(a) <= abs(b):
        assert ha <= hb


@given(st.floats(min_value=1.0, max_value=OVERFLOW), st.floats(min_value=1.0, max_value=OVERFLOW))
def test_products_past_overflow_keep_their_logs(a, b):
    assert (Hypernum(a) * b).log_float() == pytest.approx(math.log(a) + math.log(b), rel=1e-12)
