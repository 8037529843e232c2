#!/usr/bin/env python3
"""
Tests for stochastic-logic gates, multipliers and series evaluation
"""

import os
import sys
import tempfile
import unittest

import numpy as np

# Add src directory to path
sys.path.insert(0, os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "src"))

from streams import BitStream, ParameterError, UnaryValue
from funcs import (
    COEFFICIENT_RESOLUTION, DEFAULT_SERIES_FILE, Method, Multiplier, SeriesFunction, SeriesSpec,
    and_multiply, coefficient_count, default_series, get_multiplier, half_select, load_series,
    maclaurin_eval, mux_scaled_add, nand_stage, reference_numerator, save_series,
)


class TestGates(unittest.TestCase):
    """Test the AND, MUX and NAND stages"""

    def test_and_multiply(self):
        a = BitStream.from_string("11110000")
        b = BitStream.from_string("10101010")
        self.assertEqual(and_multiply(a, b).popcount(), 2)

    def test_mux_scaled_add(self):
        ones = BitStream.constant(1, 8)
        zeros = BitStream.constant(0, 8)
        self.assertEqual(mux_scaled_add(ones, zeros, half_select(3)).popcount(), 4)
        self.assertEqual(mux_scaled_add(ones, zeros, half_select(3)).dump(), "10101010")

    def test_nand_stage(self):
        a = BitStream.from_string("1100")
        b = BitStream.from_string("1010")
        self.assertEqual(nand_stage(a, b).dump(), "0111")

    def test_gate_identities(self):
        s = BitStream.from_string("10110010")
        ones, zeros = BitStream.constant(1, 8), BitStream.constant(0, 8)
        self.assertEqual(and_multiply(s, ones), s)
        self.assertEqual(and_multiply(s, zeros), zeros)
        self.assertEqual(mux_scaled_add(s, zeros, ones), s)
        self.assertEqual(mux_scaled_add(zeros, s, zeros), s)
        self.assertEqual(nand_stage(zeros, s), ones)
        self.assertEqual(nand_stage(ones, s), ~s)

    def test_aligned_thermometers_give_min(self):
        a = BitStream.from_string("11100000")
        b = BitStream.from_string("11111000")
        self.assertEqual(and_multiply(a, b).popcount(), 3)

    def test_length_mismatch(self):
        with self.assertRaises(ParameterError):
            and_multiply(BitStream.constant(1, 8), BitStream.constant(1, 16))


class TestMultiplier(unittest.TestCase):
    """Test per-method multipliers"""

    def test_det_product_table(self):
        table = Multiplier(Method.DET, 4).product_table()
        self.assertEqual(table.shape, (17, 17))
        self.assertEqual(table[5, 15], 5)
        self.assertEqual(table[15, 15], 13)
        np.testing.assert_array_equal(table[16], np.arange(17))
        self.assertFalse(table.flags.writeable)

    def test_output_bits_shape(self):
        for method in Method:
            bits = Multiplier(method, 4).output_bits([0, 7])
            self.assertEqual(bits.shape, (2, 17, 16), method)
            self.assertEqual(int(bits[0].sum()), 0)

    def test_row_popcounts_match_output_bits(self):
        for method in Method:
            multiplier = Multiplier(method, 4)
            counts = multiplier.row_popcounts([3, 11])
            np.testing.assert_array_equal(counts, multiplier.output_bits([3, 11]).sum(axis=2))

    def test_full_period_sources_multiply_by_one_exactly(self):
        for method in (Method.SOBOL, Method.DET):
            multiplier = Multiplier(method, 4)
            for y in range(17):
                self.assertEqual(multiplier.multiply(16, y).popcount(), y, (method, y))
                self.assertEqual(multiplier.multiply(0, y).popcount(), 0, (method, y))

    def test_nand(self):
        for method in Method:
            multiplier = Multiplier(method, 4)
            self.assertEqual(multiplier.nand(5, 15).popcount(),
                             16 - multiplier.multiply(5, 15).popcount())

    def test_det_mux_half(self):
        multiplier = Multiplier(Method.DET, 4)
        for y in range(17):
            self.assertEqual(multiplier.mux_half(y).popcount(), 8 + y // 2)

    def test_out_of_range_operand(self):
        with self.assertRaises(ParameterError):
            Multiplier(Method.DET, 4).multiply(17, 1)

    def test_describe(self):
        self.assertEqual(Multiplier(Method.DET, 4).describe(), "det")
        self.assertEqual(Multiplier(Method.SOBOL, 4).describe(), "sobol(dim=0) x sobol(dim=1)")

    def test_get_multiplier_is_shared(self):
        self.assertIs(get_multiplier(Method.LFSR, 4), get_multiplier(Method.LFSR, 4))
        self.assertIsNot(get_multiplier(Method.LFSR, 4), get_multiplier(Method.LFSR, 4, index=1))


class TestSeries(unittest.TestCase):
    """Test series definitions and Maclaurin evaluation"""

    def test_default_coefficients(self):
        self.assertEqual(default_series(SeriesFunction.EXP_NEG).numerators, [256, 128, 85, 64, 51])
        self.assertEqual(default_series(SeriesFunction.SIN).numerators, [43, 13])
        self.assertEqual(default_series(SeriesFunction.LOG1P).numerators, [128, 171, 192, 205])
        self.assertEqual(default_series(SeriesFunction.SIGMOID).numerators, [21, 26])

    def test_coefficient_count(self):
        self.assertEqual(coefficient_count(SeriesFunction.EXP_NEG, 5), 5)
        self.assertEqual(coefficient_count(SeriesFunction.SIN, 7), 6)
        self.assertEqual(coefficient_count(SeriesFunction.SIGMOID, 7), 4)
        with self.assertRaises(ParameterError):
            coefficient_count(SeriesFunction.SIGMOID, 9)
        with self.assertRaises(ParameterError):
            coefficient_count(SeriesFunction.SIGMOID, 1)

    def test_spec_validation(self):
        with self.assertRaises(ParameterError):
            SeriesSpec(SeriesFunction.SIN, 3, (UnaryValue(43, COEFFICIENT_RESOLUTION),))
        with self.assertRaises(ParameterError):
            SeriesSpec(SeriesFunction.SIN, 3, (UnaryValue(1, 4), UnaryValue(1, 4)))

    def test_values_at_zero(self):
        x = UnaryValue(0, 8)
        self.assertEqual(maclaurin_eval(default_series(SeriesFunction.EXP_NEG), x).numerator, 256)
        self.assertEqual(maclaurin_eval(default_series(SeriesFunction.SIN), x).numerator, 0)
        self.assertEqual(maclaurin_eval(default_series(SeriesFunction.LOG1P), x).numerator, 0)
        self.assertEqual(maclaurin_eval(default_series(SeriesFunction.SIGMOID), x).numerator, 128)

    def test_det_tracks_reference(self):
        for function in SeriesFunction:
            spec = default_series(function)
            for k in (32, 64, 128):
                x = UnaryValue(k, 8)
                got = maclaurin_eval(spec, x).numerator
                self.assertLessEqual(abs(got - reference_numerator(function, x)), 8, (function, k))

    def test_expneg_at_one(self):
        x = UnaryValue(256, 8)
        self.assertEqual(reference_numerator(SeriesFunction.EXP_NEG, x), 94)
        got = maclaurin_eval(default_series(SeriesFunction.EXP_NEG), x).numerator
        self.assertLessEqual(abs(got - 94), 2)

    def test_expneg_is_non_increasing(self):
        spec = default_series(SeriesFunction.EXP_NEG)
        outputs = [maclaurin_eval(spec, UnaryValue(16 * k, 8)).numerator for k in range(17)]
        self.assertEqual(outputs, sorted(outputs, reverse=True))
        self.assertEqual(outputs[0], 256)

    def test_baseline_evaluation_stays_in_range(self):
        spec = default_series(SeriesFunction.SIGMOID)
        for method in (Method.LFSR, Method.SOBOL, Method.HALTON):
            value = maclaurin_eval(spec, UnaryValue(100, 8), method)
            self.assertEqual(value.resolution_log2, 8)
            self.assertTrue(0 <= value.numerator <= 256)


class TestSeriesFiles(unittest.TestCase):
    """Test loading and saving series definitions"""

    def test_shipped_file_matches_defaults(self):
        specs = load_series(DEFAULT_SERIES_FILE)
        for function in SeriesFunction:
            self.assertEqual(specs[function], default_series(function))

    def test_missing_file_falls_back(self):
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertLogs("funcs", level="WARNING"):
                specs = load_series(os.path.join(tmp, "missing.ini"))
        self.assertEqual(specs[SeriesFunction.SIN], default_series(SeriesFunction.SIN))

    def test_unknown_section(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "series.ini")
            with open(path, "w") as f:
                f.write("[cosh]\ndegree = 2\ncoefficients = 1\n")
            with self.assertRaises(ParameterError):
                load_series(path)

    def test_save_and_load(self):
        custom = default_series(SeriesFunction.EXP_NEG, 3)
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "series.ini")
            save_series([custom], path)
            specs = load_series(path)
        self.assertEqual(specs[SeriesFunction.EXP_NEG], custom)
        self.assertEqual(specs[SeriesFunction.LOG1P], default_series(SeriesFunction.LOG1P))


if __name__ == "__main__":
    unittest.main()
