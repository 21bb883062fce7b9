"""
Tests for sparse Laurent coefficient sequences.
"""
from __future__ import annotations

import math
from fractions import Fraction

import pytest

from core.coeffseq import (
    CoeffSeq,
    CoeffSeqError,
    convolve,
    parse_scalar,
    power,
    power_table,
    scalar_to_json,
    scale_shift,
    weighted_shift,
)


class TestParseScalar:
    def test_integers_and_strings_are_exact(self) -> None:
        assert parse_scalar(3) == Fraction(3)
        assert parse_scalar("-7/2") == Fraction(-7, 2)
        assert parse_scalar(" 0.25 ") == Fraction(1, 4)
        assert isinstance(parse_scalar("5"), Fraction)

    def test_floats_stay_binary(self) -> None:
        value = parse_scalar(0.1)
        assert isinstance(value, float)
        assert value == 0.1

    @pytest.mark.parametrize("bad", [True, math.inf, math.nan, "1/0", "abc", None, [1]])
    def test_rejects_malformed_values(self, bad) -> None:
        with pytest.raises(CoeffSeqError):
            parse_scalar(bad)

    def test_json_rendering(self) -> None:
        assert scalar_to_json(Fraction(4)) == 4
        assert scalar_to_json(Fraction(-3, 8)) == "-3/8"
        assert scalar_to_json(0.5) == 0.5


class TestCoeffSeq:
    def test_zero_entries_are_pruned(self) -> None:
        s = CoeffSeq({-2: 0, 0: 1, 3: Fraction(0)})
        assert list(s.items()) == [(0, Fraction(1))]
        assert s.support == (0, 0)

    def test_lookup_outside_support_is_exact_zero(self) -> None:
        s = CoeffSeq({1: 2})
        assert s[7] == 0
        assert isinstance(s[-4], Fraction)

    def test_negative_indices_and_window(self) -> None:
        s = CoeffSeq({-3: 1, 2: "1/2"})
        assert (s.lo, s.hi) == (-3, 2)
        assert s[2] == Fraction(1, 2)

    def test_empty_sequence(self) -> None:
        s = CoeffSeq()
        assert s.is_zero
        assert s.support is None
        assert not s

    def test_float_noise_is_dropped_relative_to_peak(self) -> None:
        s = CoeffSeq({0: 1.0, 1: 1e-17, 2: 1e-3})
        assert 1 not in s
        assert s[2] == 1e-3

    def test_mixing_exact_and_float_promotes(self) -> None:
        exact = CoeffSeq({0: 1, 1: 1})
        loose = CoeffSeq({0: 0.5})
        assert exact.is_exact and exact.mode == "exact"
        mixed = exact + loose
        assert mixed.promoted
        assert mixed.mode == "float"
        assert not (exact + exact).promoted

    def test_from_json_rejects_bad_index(self) -> None:
        with pytest.raises(CoeffSeqError):
            CoeffSeq.from_json({"x": 1})

    def test_from_json_and_back(self) -> None:
        doc = {"-1": "2/3", "4": 5}
        assert CoeffSeq.from_json(doc).to_json() == doc

    def test_derivative(self) -> None:
        # d/du (u^-1 + 3u^2) = -u^-2 + 6u
        s = CoeffSeq({-1: 1, 2: 3})
        assert s.derivative() == CoeffSeq({-2: -1, 1: 6})

    def test_evaluate_exact_and_float(self) -> None:
        s = CoeffSeq({-1: 1, 2: 3})
        assert s.evaluate(Fraction(2)) == Fraction(1, 2) + 12
        assert s.evaluate(2.0) == pytest.approx(12.5)


class TestConvolve:
    def test_delta_is_identity(self) -> None:
        s = CoeffSeq({-2: 3, 0: "1/5", 4: -1})
        assert convolve(CoeffSeq.delta(0), s) == s
        assert convolve(s, CoeffSeq.delta(0)) == s

    def test_binomial_square_matches_energy_row(self) -> None:
        f = CoeffSeq({0: 1, 2: 1})
        assert convolve(f, f) == CoeffSeq({0: 1, 2: 2, 4: 1})

    def test_with_zero_is_zero(self) -> None:
        assert convolve(CoeffSeq({1: 2}), CoeffSeq()).is_zero

    def test_against_double_loop(self) -> None:
        a = CoeffSeq({-2: 1, -1: "3/4", 0: 2, 3: -5, 5: 7})
        b = CoeffSeq({-1: -2, 0: 1, 1: "1/3", 2: 4, 6: -1})
        expected: dict[int, Fraction] = {}
        for i in range(a.lo, a.hi + 1):
            for j in range(b.lo, b.hi + 1):
                expected[i + j] = expected.get(i + j, Fraction(0)) + a[i] * b[j]
        assert convolve(a, b) == CoeffSeq(expected)

    def test_support_inside_predicted_window(self) -> None:
        a = CoeffSeq({-1: 1, 2: 1})
        b = CoeffSeq({0: 1, 3: -1})
        lo, hi = convolve(a, b).support
        assert lo >= a.lo + b.lo
        assert hi <= a.hi + b.hi


class TestPower:
    def test_zeroth_power_is_delta(self) -> None:
        assert power(CoeffSeq({1: 5}), 0) == CoeffSeq.delta(0)

    def test_square(self) -> None:
        assert power(CoeffSeq({0: 1, 2: 1}), 2) == CoeffSeq({0: 1, 2: 2, 4: 1})

    def test_matches_repeated_convolution(self) -> None:
        f0 = CoeffSeq({-1: "1/2", 0: 2, 3: -1})
        assert power(f0, 3) == convolve(convolve(f0, f0), f0)

    def test_negative_power_rejected(self) -> None:
        with pytest.raises(CoeffSeqError):
            power(CoeffSeq({0: 1}), -1)

    def test_table(self) -> None:
        f0 = CoeffSeq({0: 1, 2: 3})
        table = power_table(f0, 3)
        assert len(table) == 4
        assert table[1] == f0
        assert table[3] == power(f0, 3)
        assert power_table(f0, -1) == []


class TestShifts:
    def test_identity_shift(self) -> None:
        s = CoeffSeq({0: 1, 3: "2/7"})
        assert scale_shift(s, Fraction(1), 0) == s

    def test_scale_shift(self) -> None:
        s = CoeffSeq({2: 3})
        assert scale_shift(s, Fraction(2), 1) == CoeffSeq({1: 6})

    def test_weighted_shift_builds_derivative_pattern(self) -> None:
        # w(l) = l + 1 on delta_2 with shift 1 gives 2*delta_1
        assert weighted_shift(CoeffSeq.delta(2), lambda l: l + 1, 1) == CoeffSeq({1: 2})

    def test_shift_round_trip(self) -> None:
        s = CoeffSeq({-4: 1, 0: "5/3", 9: -2})
        assert s.shifted(5).shifted(-5) == s
