#!/usr/bin/env python3
"""
Tests for the unary dot-product engine
"""

import io
import os
import sys
import tempfile
import unittest
from fractions import Fraction

import numpy as np

# Add src directory to path
sys.path.insert(0, os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "src"))

from streams import ParameterError, UnaryValue
from funcs import Method
from matrix import (
    EngineConfig, FixedMatrix, MatrixResult, SignedWeightMatrix, UnaryEngine, dot_product,
    exact_decimal, exact_matmul, latency_model, matmul, random_matrix, read_matrix, tradeoff_curve,
    write_matrix, write_result_csv,
)


class TestMatrixTypes(unittest.TestCase):
    """Test operand matrix validation"""

    def test_fixed_matrix_copies_input(self):
        source = np.array([[1, 2], [3, 4]])
        matrix = FixedMatrix(source, 4)
        source[0, 0] = 9
        self.assertEqual(matrix.element(0, 0), UnaryValue(1, 4))
        self.assertEqual((matrix.rows, matrix.cols), (2, 2))

    def test_fixed_matrix_range(self):
        with self.assertRaises(ParameterError):
            FixedMatrix(np.array([[17]]), 4)
        with self.assertRaises(ParameterError):
            FixedMatrix(np.array([1, 2]), 4)

    def test_from_values(self):
        matrix = FixedMatrix.from_values([[UnaryValue(1, 4), UnaryValue(2, 4)]])
        self.assertEqual(matrix.resolution_log2, 4)
        with self.assertRaises(ParameterError):
            FixedMatrix.from_values([[UnaryValue(1, 4), UnaryValue(1, 3)]])

    def test_signed_weights(self):
        magnitudes = FixedMatrix(np.array([[1, 2]]), 4)
        weights = SignedWeightMatrix(magnitudes, np.array([[1, -1]]))
        np.testing.assert_array_equal(weights.negated().signs, [[-1, 1]])
        np.testing.assert_array_equal(SignedWeightMatrix.positive(magnitudes).signs, [[1, 1]])
        with self.assertRaises(ParameterError):
            SignedWeightMatrix(magnitudes, np.array([[1, 0]]))
        with self.assertRaises(ParameterError):
            SignedWeightMatrix(magnitudes, np.array([[1]]))

    def test_engine_config(self):
        with self.assertRaises(ParameterError):
            EngineConfig(comparator_count=0)


class TestDotProduct(unittest.TestCase):
    """Test single dot products"""

    def test_unit_inputs_pass_weights_through(self):
        x = [UnaryValue(16, 4)] * 3
        w = [UnaryValue(5, 4), UnaryValue(15, 4), UnaryValue(7, 4)]
        self.assertEqual(dot_product(x, w, EngineConfig()), Fraction(27, 16))
        self.assertEqual(dot_product(x, w, EngineConfig(), signs=[1, -1, 1]), Fraction(-3, 16))

    def test_worked_example(self):
        result = dot_product([UnaryValue(5, 4)], [UnaryValue(15, 4)], EngineConfig())
        self.assertEqual(result, Fraction(5, 16))

    def test_length_mismatch(self):
        with self.assertRaises(ParameterError):
            dot_product([UnaryValue(1, 4)], [], EngineConfig())
        with self.assertRaises(ParameterError):
            dot_product([], [], EngineConfig())


class TestMatmul(unittest.TestCase):
    """Test matrix multiplication"""

    def setUp(self):
        rng = np.random.default_rng(7)
        self.a = random_matrix(rng, 70, 5, 4)
        self.b = random_matrix(rng, 5, 3, 4)

    def test_close_to_exact(self):
        result = matmul(self.a, self.b, EngineConfig())
        exact = exact_matmul(self.a, self.b)
        self.assertEqual(exact.resolution_log2, 8)
        self.assertEqual(result.numerators.shape, (70, 3))
        # each term is within 1.5 output bits of the exact product
        error = np.abs(result.numerators * 16 - exact.numerators)
        self.assertTrue((error <= 24 * 5).all())

    def test_workers_do_not_change_result(self):
        engine = UnaryEngine(EngineConfig())
        single = engine.matmul(self.a, self.b, workers=1)
        threaded = engine.matmul(self.a, self.b, workers=3)
        np.testing.assert_array_equal(single.numerators, threaded.numerators)

    def test_signed_weights_negate(self):
        signed = SignedWeightMatrix.positive(self.b)
        engine = UnaryEngine(EngineConfig(Method.SOBOL))
        positive = engine.matmul(self.a, signed)
        negative = engine.matmul(self.a, signed.negated())
        np.testing.assert_array_equal(positive.numerators, -negative.numerators)

    def test_values(self):
        result = matmul(self.a, self.b, EngineConfig())
        self.assertEqual(result.values()[0][0], result.value(0, 0))
        self.assertEqual(result.value(0, 0), Fraction(int(result.numerators[0, 0]), 16))

    def test_mismatches(self):
        with self.assertRaises(ParameterError):
            matmul(self.a, self.a, EngineConfig())
        with self.assertRaises(ParameterError):
            matmul(self.a, self.b, EngineConfig(resolution_log2=5))

    def test_random_signed_matrix(self):
        weights = random_matrix(np.random.default_rng(1), 4, 4, 4, signed=True)
        self.assertIsInstance(weights, SignedWeightMatrix)
        self.assertTrue(np.isin(weights.signs, (-1, 1)).all())


class TestLatency(unittest.TestCase):
    """Test the comparator-budget latency model"""

    def test_latency(self):
        estimate = latency_model((1, 8), (8, 1), EngineConfig(comparator_count=4))
        self.assertEqual(estimate.streams_needed, 16)
        self.assertEqual(estimate.waves, 4)
        self.assertEqual(estimate.interval, 16)
        self.assertEqual(estimate.cycles, 64)

    def test_tradeoff_curve_is_monotone(self):
        curve = tradeoff_curve((4, 8), (8, 2), EngineConfig(), [1, 2, 4, 8, 16])
        cycles = [e.cycles for e in curve]
        self.assertEqual(cycles, sorted(cycles, reverse=True))

    def test_invalid_dimensions(self):
        with self.assertRaises(ParameterError):
            latency_model((2, 3), (4, 1), EngineConfig())


class TestMatrixFiles(unittest.TestCase):
    """Test matrix file IO"""

    def test_round_trip_with_signs(self):
        weights = SignedWeightMatrix(FixedMatrix(np.array([[1, 2], [3, 16]]), 4),
                                     np.array([[1, -1], [-1, 1]]))
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "w.txt")
            write_matrix(weights, path)
            loaded = read_matrix(path)
        self.assertIsInstance(loaded, SignedWeightMatrix)
        np.testing.assert_array_equal(loaded.magnitudes.numerators, weights.magnitudes.numerators)
        np.testing.assert_array_equal(loaded.signs, weights.signs)

    def test_malformed_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "bad.txt")
            with open(path, "w") as f:
                f.write("2 2 4\n1 2 3\n")
            with self.assertRaises(ParameterError):
                read_matrix(path)
            with open(path, "w") as f:
                f.write("1 2 4\n1 2\n+ x\n")
            with self.assertRaises(ParameterError):
                read_matrix(path)

    def test_result_csv(self):
        result = matmul(FixedMatrix(np.array([[16, 8]]), 4),
                        FixedMatrix(np.array([[5], [16]]), 4), EngineConfig())
        buffer = io.StringIO()
        write_result_csv(result, buffer)
        self.assertEqual(buffer.getvalue(), "0.8125\n")

    def test_result_csv_is_exact(self):
        buffer = io.StringIO()
        write_result_csv(MatrixResult(np.array([[1, -3], [64, 0]]), 6), buffer)
        self.assertEqual(buffer.getvalue(), "0.015625,-0.046875\n1.000000,0.000000\n")
        self.assertEqual(exact_decimal(1, 8), "0.00390625")
        self.assertEqual(exact_decimal(-3, 4), "-0.1875")
        self.assertEqual(exact_decimal(-1, 2), "-0.2500")


if __name__ == "__main__":
    unittest.main()
