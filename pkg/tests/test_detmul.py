#!/usr/bin/env python3
"""
Tests for the clock-division and scalable deterministic multipliers
"""

import io
import os
import sys
import unittest
from fractions import Fraction

import numpy as np

# Add src directory to path
sys.path.insert(0, os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "src"))

from streams import ParameterError, UnaryValue, is_thermometer
from detmul import (
    TRACE_COLUMNS, Operand, TieRule, build_flip_plan, clockdiv_multiply_exact, downscale,
    term_sum_oracle, error_value, inv_count, optimal_approximation, pipeline_model, round_half_up,
    scalable_multiply, simulate_products, split_shifts, thermometer, trace,
    uncompensated_multiply, write_trace_csv,
)


def all_pairs(n):
    full = 1 << n
    return [(a, b) for a in range(full + 1) for b in range(full + 1)]


class TestHelpers(unittest.TestCase):
    """Test rounding, shift split and downscaling"""

    def test_round_half_up(self):
        self.assertEqual(round_half_up(3, 4), 1)
        self.assertEqual(round_half_up(1, 2), 1)
        self.assertEqual(round_half_up(1, 4), 0)
        self.assertEqual(round_half_up(9, 4), 2)

    def test_split_shifts(self):
        self.assertEqual(split_shifts(4), (2, 2))
        self.assertEqual(split_shifts(5), (2, 3))
        for n in range(1, 10):
            s_a, s_b = split_shifts(n)
            self.assertEqual((n - s_a) + (n - s_b), n)

    def test_downscale(self):
        result = downscale(UnaryValue(13, 4), 2)
        self.assertEqual(result.quotient, UnaryValue(3, 2))
        self.assertEqual(result.error, 1)
        self.assertEqual(result.original, UnaryValue(13, 4))
        self.assertLessEqual(result.quotient.value(), UnaryValue(13, 4).value())
        with self.assertRaises(ParameterError):
            downscale(UnaryValue(13, 4), 5)

    def test_thermometer(self):
        np.testing.assert_array_equal(thermometer(UnaryValue(3, 2)), [True, True, True, False])

    def test_inv_count(self):
        self.assertEqual(inv_count(1, UnaryValue(3, 2)), 1)
        self.assertEqual(inv_count(3, UnaryValue(1, 2)), 1)
        self.assertEqual(inv_count(0, UnaryValue(3, 2)), 0)
        with self.assertRaises(ParameterError):
            inv_count(4, UnaryValue(3, 2))


class TestClockDivision(unittest.TestCase):
    """Test the exact 2^(2n) multiplier"""

    def test_popcount_is_product(self):
        for a, b in [(5, 15), (0, 7), (16, 16), (9, 3)]:
            stream = clockdiv_multiply_exact(UnaryValue(a, 4), UnaryValue(b, 4))
            self.assertEqual(stream.length, 256)
            self.assertEqual(stream.popcount(), a * b)

    def test_exhaustive_small_n(self):
        for n in range(1, 6):
            for a, b in all_pairs(n):
                stream = clockdiv_multiply_exact(UnaryValue(a, n), UnaryValue(b, n))
                self.assertEqual(stream.popcount(), a * b)

    def test_resolution_mismatch(self):
        with self.assertRaises(ParameterError):
            clockdiv_multiply_exact(UnaryValue(1, 4), UnaryValue(1, 3))


class TestScalableMultiply(unittest.TestCase):
    """Test the constant-length multiplier"""

    def test_worked_example(self):
        result = scalable_multiply(UnaryValue(5, 4), UnaryValue(15, 4))
        self.assertEqual(result.stream.length, 16)
        self.assertEqual(result.value, UnaryValue(5, 4))
        self.assertEqual(result.ideal, UnaryValue(5, 4))
        self.assertEqual(result.error_bits, 0)
        plan_a, plan_b = result.plans
        self.assertEqual(plan_a.operand, Operand.A)
        self.assertEqual(plan_a.flip_cycles, frozenset({1}))
        self.assertEqual(plan_a.aligned_count, 1)
        self.assertEqual(plan_b.flip_cycles, frozenset({12, 14, 15}))
        self.assertEqual(plan_b.aligned_count, 1)
        self.assertEqual(plan_b.withheld, 0)

    def test_contested_cycle_is_withheld(self):
        a, b = UnaryValue(15, 4), UnaryValue(15, 4)
        down_a, down_b = downscale(a, 2), downscale(b, 2)
        plan_a = build_flip_plan(down_a, down_b, Operand.A)
        plan_b = build_flip_plan(down_b, down_a, Operand.B)
        self.assertEqual(plan_b.withheld, 1)
        self.assertFalse(plan_a.flip_cycles & plan_b.flip_cycles)
        self.assertEqual(plan_b.flip_count + plan_b.withheld, down_b.error)
        self.assertLessEqual(abs(scalable_multiply(a, b).error_bits), 1)

    def test_flip_plans_conserve_and_align(self):
        for n in (2, 4, 6, 8):
            s = n // 2
            q = 1 << (n - s)
            for a, b in all_pairs(n):
                down_a, down_b = downscale(UnaryValue(a, n), s), downscale(UnaryValue(b, n), s)
                a_high, b_high = down_a.quotient.numerator, down_b.quotient.numerator
                plan_a = build_flip_plan(down_a, down_b, Operand.A)
                plan_b = build_flip_plan(down_b, down_a, Operand.B)
                self.assertEqual(plan_a.withheld, 0)
                self.assertEqual(plan_a.flip_count, down_a.error, (n, a, b))
                self.assertEqual(plan_b.flip_count + plan_b.withheld, down_b.error, (n, a, b))
                self.assertEqual(plan_a.aligned_count, inv_count(down_a.error, down_b.quotient))
                self.assertEqual(plan_b.aligned_count, inv_count(down_b.error, down_a.quotient))
                # A flips at j = t // q, B flips at i = t % q
                self.assertEqual(sum(t // q < b_high for t in plan_a.flip_cycles), plan_a.aligned_count)
                self.assertEqual(sum(t % q < a_high for t in plan_b.flip_cycles), plan_b.aligned_count)
                self.assertFalse(plan_a.flip_cycles & plan_b.flip_cycles)

    def test_error_at_most_one_bit_at_n4(self):
        for a, b in all_pairs(4):
            result = scalable_multiply(UnaryValue(a, 4), UnaryValue(b, 4))
            self.assertLessEqual(abs(result.error_bits), 1, (a, b))

    def test_error_at_most_two_bits_at_n3(self):
        for a, b in all_pairs(3):
            result = scalable_multiply(UnaryValue(a, 3), UnaryValue(b, 3))
            self.assertLessEqual(abs(result.error_bits), 2, (a, b))

    def test_representable_products_are_exact(self):
        for a, b in all_pairs(4):
            if (a * b) % 16 == 0:
                result = scalable_multiply(UnaryValue(a, 4), UnaryValue(b, 4))
                self.assertEqual(result.error_bits, 0, (a, b))

    def test_zero_and_one(self):
        for k in range(17):
            x = UnaryValue(k, 4)
            self.assertEqual(scalable_multiply(x, UnaryValue(0, 4)).value.numerator, 0)
            self.assertEqual(scalable_multiply(x, UnaryValue(16, 4)).value.numerator, k)
            self.assertEqual(scalable_multiply(UnaryValue(16, 4), x).value.numerator, k)

    def test_uncompensated_multiply(self):
        result = uncompensated_multiply(UnaryValue(5, 4), UnaryValue(15, 4))
        self.assertEqual(result.value.numerator, 3)
        self.assertEqual(result.error_bits, -2)

    def test_uncompensated_product_under_approximates(self):
        for n in (4, 5, 6):
            s_a, s_b = split_shifts(n)
            for a, b in all_pairs(n):
                high = (a >> s_a) * (b >> s_b)
                result = uncompensated_multiply(UnaryValue(a, n), UnaryValue(b, n))
                self.assertEqual(result.value.numerator, high, (n, a, b))
                self.assertLessEqual(high << n, a * b, (n, a, b))

    def test_vectorised_model_matches(self):
        for n in (4, 5):
            pairs = all_pairs(n)
            bits = simulate_products([a for a, _ in pairs], [b for _, b in pairs], n)
            for row, (a, b) in zip(bits, pairs):
                stream = scalable_multiply(UnaryValue(a, n), UnaryValue(b, n)).stream
                np.testing.assert_array_equal(row, stream.bits().astype(bool))

    def test_vectorised_model_rejects_bad_input(self):
        with self.assertRaises(ParameterError):
            simulate_products([1, 2], [3], 4)
        with self.assertRaises(ParameterError):
            simulate_products([17], [3], 4)

    def test_error_value(self):
        result = uncompensated_multiply(UnaryValue(5, 4), UnaryValue(15, 4))
        self.assertEqual(error_value(result), Fraction(-2, 16))


class TestOracles(unittest.TestCase):
    """Test the ideal reference and the term-sum oracle"""

    def test_optimal_approximation_ties(self):
        a, b = UnaryValue(1, 4), UnaryValue(8, 4)
        self.assertEqual(optimal_approximation(a, b, 4).numerator, 1)
        self.assertEqual(optimal_approximation(a, b, 4, TieRule.HALF_EVEN).numerator, 0)
        a, b = UnaryValue(3, 4), UnaryValue(8, 4)
        self.assertEqual(optimal_approximation(a, b, 4, TieRule.HALF_EVEN).numerator, 2)

    def test_term_expansion(self):
        for n in (4, 5, 6):
            s_a, s_b = split_shifts(n)
            for a, b in all_pairs(n):
                x, y = UnaryValue(a, n), UnaryValue(b, n)
                down_a, down_b = downscale(x, s_a), downscale(y, s_b)
                a_high, a_low = down_a.quotient.numerator, down_a.error
                b_high, b_low = down_b.quotient.numerator, down_b.error
                self.assertEqual(a * b, (a_high * b_high << n) + (a_low * b_high << s_b)
                                 + (b_low * a_high << s_a) + a_low * b_low)
                three = (a_high * b_high + round_half_up(a_low * b_high, 1 << (n - s_b))
                         + round_half_up(b_low * a_high, 1 << (n - s_a)))
                self.assertEqual(term_sum_oracle(x, y), three, (n, a, b))
                self.assertEqual(term_sum_oracle(x, y, include_fourth_term=True),
                                 three + round_half_up(a_low * b_low, 1 << n))

    def test_three_term_oracle_matches_datapath(self):
        for n in (4, 5, 6):
            for a, b in all_pairs(n):
                x, y = UnaryValue(a, n), UnaryValue(b, n)
                self.assertEqual(scalable_multiply(x, y).value.numerator, term_sum_oracle(x, y), (n, a, b))

    def test_four_term_oracle_within_one_bit(self):
        for n in (3, 4, 5, 6):
            for a, b in all_pairs(n):
                x, y = UnaryValue(a, n), UnaryValue(b, n)
                ideal = optimal_approximation(x, y, n).numerator
                self.assertLessEqual(abs(term_sum_oracle(x, y, include_fourth_term=True) - ideal), 1)


class TestTraceAndPipeline(unittest.TestCase):
    """Test the cycle trace and the latency model"""

    def test_trace(self):
        rows = trace(UnaryValue(5, 4), UnaryValue(15, 4))
        self.assertEqual(len(rows), 16)
        self.assertEqual(sum(r.out_bit for r in rows), 5)
        self.assertEqual([r.cycle for r in rows if r.flip_a], [1])
        self.assertEqual([r.cycle for r in rows if r.flip_b], [12, 14, 15])
        self.assertEqual((rows[6].i, rows[6].j), (2, 1))

    def test_trace_csv(self):
        buffer = io.StringIO()
        write_trace_csv(trace(UnaryValue(5, 4), UnaryValue(15, 4)), buffer)
        lines = buffer.getvalue().splitlines()
        self.assertEqual(lines[0], ",".join(TRACE_COLUMNS))
        self.assertEqual(len(lines), 17)

    def test_pipeline_model(self):
        single = pipeline_model(1, 4, pipelined=False)
        self.assertEqual(single.total_cycles, 32)
        run = pipeline_model(100, 4)
        self.assertEqual(run.total_cycles, 1616)
        self.assertEqual(run.steady_state_interval, 16)

    def test_pipeline_model_odd_n(self):
        record = pipeline_model(2, 5)
        self.assertEqual((record.stage1_cycles, record.stage2_cycles), (64, 32))
        self.assertEqual(record.steady_state_interval, 64)
        self.assertEqual(record.total_cycles, 64 + 32 + 64)
        with self.assertRaises(ParameterError):
            pipeline_model(0, 4)

    def test_output_is_not_thermometer_after_flips(self):
        stream = scalable_multiply(UnaryValue(5, 4), UnaryValue(15, 4)).stream
        self.assertFalse(is_thermometer(stream))


if __name__ == "__main__":
    unittest.main()
