"""Exact arithmetic of the truncated beta-power series layer."""

from fractions import Fraction
from math import inf

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from branchflow.series import (BetaSeries, FormalSeries, binomial_series,
                               exp_series, log1p_series, mono_str,
                               polynomial_str)

F = Fraction


# ---------------------------------------------------------------- BetaSeries


def test_zero_coefficients_are_dropped():
    s = BetaSeries({0: 1, 1: 0, 2: F(3, 4)})
    assert s.terms == {F(0): F(1), F(2): F(3, 4)}


def test_terms_at_or_above_cutoff_are_dropped():
    s = BetaSeries({0: 1, 2: 5, 3: 7}, cutoff=2)
    assert s.terms == {F(0): F(1)}
    assert s.cutoff == F(2)


def test_addition_merges_and_takes_min_cutoff():
    a = BetaSeries({0: 1, 1: 2}, cutoff=3)
    b = BetaSeries({1: -2, 2: 5}, cutoff=2)
    c = a + b
    assert c.terms == {F(0): F(1)}
    assert c.cutoff == F(2)


def test_multiplication_exact_values():
    a = BetaSeries({0: 1, 1: 1})          # 1 + b
    b = BetaSeries({0: 1, 1: -1})         # 1 - b
    assert (a * b).terms == {F(0): F(1), F(2): F(-1)}


def test_multiplication_cutoff_shifts_with_valuation():
    # (b + O(b^3)) * (b^2) is known modulo O(b^5): 3 + min exponent 2.
    a = BetaSeries({1: 1}, cutoff=3)
    b = BetaSeries({2: 1})
    c = a * b
    assert c.terms == {F(3): F(1)}
    assert c.cutoff == F(5)


def test_shift_scales_and_translates():
    s = BetaSeries({1: 2}, cutoff=4).shift(F(-1, 2), F(3, 2))
    assert s.terms == {F(1, 2): F(3)}
    assert s.cutoff == F(7, 2)


def test_truncate_keeps_exactness_when_nothing_dropped():
    s = BetaSeries({0: 1, 1: 1})
    assert s.truncate(5).cutoff is None
    assert s.truncate(1).cutoff == F(1)


def test_effective_min():
    assert BetaSeries({2: 1}).effective_min() == F(2)
    assert BetaSeries({}, cutoff=3).effective_min() == F(3)
    assert BetaSeries({}).effective_min() == inf


def test_rejects_inexact_coefficients():
    with pytest.raises(TypeError):
        BetaSeries({0: 0.25})


rationals = st.fractions(
    min_value=F(-4), max_value=F(4), max_denominator=6)
exponents = st.integers(min_value=-2, max_value=4).map(lambda n: F(n, 2))
exact_series = st.dictionaries(exponents, rationals, max_size=4).map(BetaSeries)


@settings(max_examples=60, deadline=None)
@given(exact_series, exact_series, exact_series)
def test_exact_series_form_a_commutative_ring(a, b, c):
    assert (a + b).terms == (b + a).terms
    assert ((a + b) + c).terms == (a + (b + c)).terms
    assert (a * b).terms == (b * a).terms
    assert ((a * b) * c).terms == (a * (b * c)).terms
    assert (a * (b + c)).terms == ((a * b) + (a * c)).terms


@settings(max_examples=40, deadline=None)
@given(exact_series)
def test_subtraction_is_inverse_of_addition(a):
    assert (a - a).terms == {}
    assert (-(-a)).terms == a.terms


# ---------------------------------------------------------------- FormalSeries


def test_formal_series_multiplication_tracks_monomials():
    u = FormalSeries.monomial(1, 0, BetaSeries.constant(1))
    ux = FormalSeries.monomial(0, 1, BetaSeries.constant(1))
    prod = (u + ux) * (u - ux)
    assert prod.coefficient(2, 0) == 1
    assert prod.coefficient(0, 2) == -1
    assert prod.coefficient(1, 1) == 0


def test_power_matches_repeated_multiplication():
    u = FormalSeries.monomial(1, 0, BetaSeries({0: 1, 1: F(1, 3)}))
    by_mult = FormalSeries.one()
    for _ in range(5):
        by_mult = by_mult * u
    assert u ** 5 == by_mult
    assert u ** 0 == FormalSeries.one()


def test_formal_dx_product_rule_on_powers():
    # d/dx u^3 = 3 u^2 u_x
    s = FormalSeries.monomial(3, 0, BetaSeries.constant(2))
    d = s.dx()
    assert d.coefficient(2, 1) == 6
    assert len(d.compact().terms) == 1


def test_formal_dx_rejects_existing_ux():
    s = FormalSeries.monomial(1, 1, BetaSeries.constant(1))
    with pytest.raises(ValueError):
        s.dx()


def test_substitute_beta_one_sums_exponents():
    s = FormalSeries.monomial(2, 0, BetaSeries({0: F(1, 2), 1: F(1, 3)}))
    collapsed = s.substitute_beta_one()
    assert collapsed.coefficient(2, 0) == F(5, 6)


def test_substitute_beta_one_requires_exact_series():
    s = FormalSeries.monomial(1, 0, BetaSeries({0: 1}, cutoff=2))
    with pytest.raises(ValueError):
        s.substitute_beta_one()


def test_coefficient_map_filters_zeros():
    s = FormalSeries({(1, 0): BetaSeries({0: 1}),
                      (2, 0): BetaSeries({1: 1})})
    assert s.coefficient_map(0) == {(1, 0): F(1)}
    assert s.coefficient_map(1) == {(2, 0): F(1)}


# ------------------------------------------------------- analytic expansions


def small_series():
    # s = b u + b^2 u_x, valuation 1
    return FormalSeries({(1, 0): BetaSeries({1: 1}),
                         (0, 1): BetaSeries({2: 1})})


def test_exp_times_exp_of_negative_is_one():
    s = small_series()
    prod = exp_series(s, 6) * exp_series(-s, 6)
    prod = prod.truncate(6).compact()
    assert prod.coefficient(0, 0, 0) == 1
    for (a, b), bs in prod.terms.items():
        for e, c in bs.terms.items():
            if (a, b) != (0, 0) or e != 0:
                assert c == 0, f"residual term {mono_str((a, b))} b^{e}: {c}"


def test_exp_of_log1p_recovers_argument():
    s = small_series()
    back = exp_series(log1p_series(s, 6), 6) - FormalSeries.one() - s
    for bs in back.truncate(6).compact().terms.values():
        assert all(c == 0 for c in bs.terms.values())


def test_binomial_half_squared_is_one_plus_s():
    s = small_series()
    sq = binomial_series(s, F(1, 2), 6) ** 2
    diff = sq.truncate(6) - FormalSeries.one() - s
    for bs in diff.truncate(6).compact().terms.values():
        assert all(c == 0 for c in bs.terms.values())


def test_binomial_integer_exponent_matches_power():
    s = small_series()
    left = binomial_series(s, 3, 8).truncate(8)
    right = ((FormalSeries.one() + s) ** 3).truncate(8)
    assert left == right


def test_expansions_reject_nonpositive_valuation():
    s = FormalSeries.monomial(1, 0, BetaSeries.constant(1))  # valuation 0
    with pytest.raises(ValueError):
        exp_series(s, 4)
    with pytest.raises(ValueError):
        binomial_series(s, F(1, 2), 4)
    with pytest.raises(ValueError):
        log1p_series(s, 4)


# ---------------------------------------------------------------- rendering


def test_polynomial_str_orders_by_degree():
    assert polynomial_str({(2, 0): F(1), (1, 0): F(-1)}) == "u^2 - u"
    assert polynomial_str({(3, 0): F(-1)}) == "-u^3"
    assert polynomial_str({(2, 0): F(2), (0, 2): F(1)}) == "2*u^2 + u_x^2"
    assert polynomial_str({(0, 2): F(1, 2), (2, 0): F(2)}) == "2*u^2 + 1/2 u_x^2"
    assert polynomial_str({}) == "0"


def test_mono_str():
    assert mono_str((0, 0)) == "1"
    assert mono_str((1, 0)) == "u"
    assert mono_str((2, 3)) == "u^2*u_x^3"
