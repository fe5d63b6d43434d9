import math
from fractions import Fraction
from itertools import permutations

import pytest

from maxprod.factors import EnumerationCapError
from maxprod.order_stats import (
    enclosing_width,
    expected_steps,
    expected_steps_enumerate,
    expected_steps_exact,
    prob_exceed,
    prob_exceed_exact,
    step_bound,
)


class TestProbExceed:
    def test_empty_square_excludes_nothing(self):
        for n in (1, 2, 7, 100):
            assert prob_exceed(n, 0) == 1.0

    def test_n2_m1(self):
        # of the 2 permutations of size 2, only the swap avoids the 1x1 square
        assert prob_exceed(2, 1) == pytest.approx(0.5)
        assert prob_exceed_exact(2, 1) == Fraction(1, 2)

    def test_n4_m1(self):
        # 18 of the 24 permutations have p[0] != 0
        count = sum(1 for p in permutations(range(4)) if p[0] != 0)
        assert count == 18
        assert prob_exceed(4, 1) == pytest.approx(18 / 24)

    def test_beyond_half_is_zero(self):
        assert prob_exceed(5, 3) == 0.0

    def test_negative_is_error(self):
        with pytest.raises(ValueError):
            prob_exceed(4, -1)
        with pytest.raises(ValueError):
            prob_exceed(0, 0)

    def test_matches_exact_and_stays_finite_large_n(self):
        for n in (10, 50):
            for m in range(n // 2 + 1):
                assert prob_exceed(n, m) == pytest.approx(float(prob_exceed_exact(n, m)), rel=1e-12)
        assert 0.0 < prob_exceed(10**6, 100) < 1.0


class TestExpectedSteps:
    def test_single_element(self):
        assert expected_steps(1) == 1.0

    def test_two_elements(self):
        assert expected_steps(2) == 1.5
        assert expected_steps_exact(2) == Fraction(3, 2)

    def test_four_elements(self):
        assert expected_steps_exact(4) == Fraction(23, 12)
        assert expected_steps(4) == pytest.approx(23 / 12, rel=1e-15)

    def test_enumeration_oracle_small_n(self):
        # average smallest enclosing square over all permutations
        for n in range(1, 8):
            total = 0
            for p in permutations(range(n)):
                total += enclosing_width((p,), n)
            want = Fraction(total, math.factorial(n))
            assert expected_steps_exact(n) == want
            assert expected_steps(n) == pytest.approx(float(want), rel=1e-12)


class TestEnumerate:
    def test_k2_matches_formula(self):
        assert expected_steps_enumerate(4, 2) == Fraction(23, 12)
        assert expected_steps_enumerate(2, 2) == Fraction(3, 2)

    def test_k3_n2_hand_oracle(self):
        # four permutation pairs at N=2: identity/identity needs width 1,
        # the other three need width 2
        assert expected_steps_enumerate(2, 3) == Fraction(1 + 2 + 2 + 2, 4)

    def test_cap(self):
        with pytest.raises(EnumerationCapError):
            expected_steps_enumerate(12, 3, cap=10**6)


class TestStepBound:
    def test_square_root(self):
        assert step_bound(100, 2) == pytest.approx(10.0)

    def test_two_thirds(self):
        assert step_bound(8, 3) == pytest.approx(4.0)

    def test_singleton(self):
        for k in (2, 3, 7):
            assert step_bound(1, k) == 1.0
