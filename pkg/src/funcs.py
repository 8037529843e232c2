#!/usr/bin/env python3
"""
Functions Module for UnaryFlow
Handles the stochastic-logic gates (AND multiply, MUX scaled add, NAND),
the per-method multipliers and Maclaurin-series function evaluation
"""

import os
import math
import logging
import configparser
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from functools import lru_cache
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from streams import (
    BitStream, GeneratorKind, ParameterError, SourceSettings, UnaryValue,
    generate_stream, operand_sources, stream_matrix,
)
from detmul import round_half_up, simulate_products

logger = logging.getLogger(__name__)

# Coefficients are quantized to denominators of 2^8
COEFFICIENT_RESOLUTION = 8

DEFAULT_SERIES_FILE = os.path.join(
    os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "series.ini"
)


class Method(Enum):
    """Multiplier used for a product"""
    DET = "det"
    LFSR = "lfsr"
    SOBOL = "sobol"
    HALTON = "halton"

    @property
    def generator_kind(self) -> Optional[GeneratorKind]:
        if self is Method.DET:
            return None
        return GeneratorKind(self.value)


class SeriesFunction(Enum):
    """Functions with a shipped Maclaurin evaluator"""
    EXP_NEG = "expneg"
    SIN = "sin"
    LOG1P = "log1p"
    SIGMOID = "sigmoid"


DEFAULT_DEGREES: Dict[SeriesFunction, int] = {
    SeriesFunction.EXP_NEG: 5,
    SeriesFunction.SIN: 3,
    SeriesFunction.LOG1P: 5,
    SeriesFunction.SIGMOID: 5,
}

# Ratios between consecutive odd Maclaurin coefficients of sigmoid(x) - 1/2
SIGMOID_RATIOS = (Fraction(1, 12), Fraction(1, 10), Fraction(17, 168), Fraction(31, 306))


def coefficient_count(function: SeriesFunction, degree: int) -> int:
    """Number of chained NAND stages for a function at a given degree"""
    if function is SeriesFunction.EXP_NEG:
        count = degree
    elif function is SeriesFunction.SIGMOID:
        count = degree - 3
    else:
        count = degree - 1
    if count < 0 or degree < 1:
        raise ParameterError(f"Degree {degree} too small for {function.value}")
    if function is SeriesFunction.SIGMOID and count > len(SIGMOID_RATIOS):
        raise ParameterError(f"Sigmoid degree above {len(SIGMOID_RATIOS) + 3} is not supported")
    return count


@dataclass(frozen=True)
class SeriesSpec:
    """
    Truncated Maclaurin series in Horner form

    coefficients are listed outermost first and evaluated innermost first;
    each is a numerator over 2^8.
    """
    function: SeriesFunction
    degree: int
    coefficients: Tuple[UnaryValue, ...]

    def __post_init__(self):
        expected = coefficient_count(self.function, self.degree)
        if len(self.coefficients) != expected:
            raise ParameterError(
                f"{self.function.value} degree {self.degree} needs {expected} coefficients, "
                f"got {len(self.coefficients)}"
            )
        for c in self.coefficients:
            if c.resolution_log2 != COEFFICIENT_RESOLUTION:
                raise ParameterError(f"Coefficient {c} is not over 2^{COEFFICIENT_RESOLUTION}")

    @property
    def numerators(self) -> List[int]:
        return [c.numerator for c in self.coefficients]


# Gates

def _check_lengths(*streams: BitStream) -> None:
    lengths = {s.length for s in streams}
    if len(lengths) != 1:
        raise ParameterError(f"Stream length mismatch: {sorted(lengths)}")


def and_multiply(sa: BitStream, sb: BitStream) -> BitStream:
    """AND gate; multiplies only when the two streams are independent"""
    _check_lengths(sa, sb)
    return sa & sb


def mux_scaled_add(sa: BitStream, sb: BitStream, sel: BitStream) -> BitStream:
    """Per bit: sel ? sa : sb, i.e. s*a + (1 - s)*b for an independent select"""
    _check_lengths(sa, sb, sel)
    return (sel & sa) | (~sel & sb)


def nand_stage(sa: BitStream, sb: BitStream) -> BitStream:
    """NOT(AND), the 1 - a*b step of a Horner-factored alternating series"""
    _check_lengths(sa, sb)
    return ~(sa & sb)


def half_select(n: int) -> BitStream:
    """Select stream 1010... of value 1/2, independent of any thermometer code"""
    return BitStream.from_bits(np.arange(1 << n) % 2 == 0)


# Multipliers

class Multiplier:
    """
    Unary multiplier for one method at resolution n

    Every product depends only on the two operand numerators, since each
    operand stream comes from a fixed source, so results are cacheable.
    """

    def __init__(self, method: Method, n: int, settings: Optional[SourceSettings] = None,
                 index: int = 0):
        """
        Initialize the multiplier

        Args:
            method: Multiplier kind
            n: Resolution (stream length 2^n)
            settings: Baseline source parameters
            index: Position in a chain of multiplies (selects distinct sources)
        """
        self.method = method
        self.n = n
        self.length = 1 << n
        self.settings = settings or SourceSettings()
        self.index = index
        self._table: Optional[np.ndarray] = None

        if method is Method.DET:
            self.sources = None
            self._streams = None
        else:
            self.sources = operand_sources(method.generator_kind, n, self.settings, index)
            self._streams = tuple(stream_matrix(spec) for spec in self.sources)

    def describe(self) -> str:
        if self.sources is None:
            return "det"
        return f"{self.sources[0].describe()} x {self.sources[1].describe()}"

    def _check(self, x: int, y: int) -> None:
        for value in (x, y):
            if not 0 <= value <= self.length:
                raise ParameterError(f"Numerator {value} outside [0, {self.length}]")

    def output_bits(self, a_numerators: Sequence[int]) -> np.ndarray:
        """
        Output streams against every second operand

        Returns:
            Bool array (len(a_numerators), 2^n + 1, 2^n)
        """
        a = np.asarray(a_numerators, dtype=np.int64)
        b = np.arange(self.length + 1)
        if self._streams is None:
            bits = simulate_products(np.repeat(a, b.size), np.tile(b, a.size), self.n)
            return bits.reshape(a.size, b.size, self.length)
        stream_a, stream_b = self._streams
        return stream_a[a][:, None, :] & stream_b[None, :, :]

    def row_popcounts(self, a_numerators: Sequence[int]) -> np.ndarray:
        """Product popcounts, shape (len(a_numerators), 2^n + 1)"""
        if self._streams is None:
            return self.output_bits(a_numerators).sum(axis=2, dtype=np.int64)
        stream_a, stream_b = self._streams
        a = np.asarray(a_numerators, dtype=np.int64)
        return stream_a[a].astype(np.int64) @ stream_b.T.astype(np.int64)

    def product_table(self) -> np.ndarray:
        """Popcount of every product, indexed [a, b]"""
        if self._table is None:
            logger.debug(f"Building {self.method.value} product table at n={self.n}")
            rows = [self.row_popcounts([a]) for a in range(self.length + 1)]
            self._table = np.vstack(rows)
            self._table.flags.writeable = False
        return self._table

    def multiply(self, x: int, y: int) -> BitStream:
        """Product stream of two numerators"""
        self._check(x, y)
        if self._streams is None:
            return BitStream.from_bits(simulate_products([x], [y], self.n)[0])
        return and_multiply(*self._operand_streams(x, y))

    def nand(self, x: int, y: int) -> BitStream:
        """Complemented product stream"""
        self._check(x, y)
        if self._streams is None:
            return nand_stage(self.multiply(x, y), BitStream.constant(1, self.length))
        return nand_stage(*self._operand_streams(x, y))

    def mux_half(self, y: int) -> BitStream:
        """1/2 + y/2: MUX between the constant-1 stream and y with select 1/2"""
        self._check(y, 0)
        ones = BitStream.constant(1, self.length)
        if self._streams is None:
            data = generate_stream(UnaryValue(y, self.n), operand_sources(GeneratorKind.UNARY_COUNTER, self.n)[0])
            return mux_scaled_add(ones, data, half_select(self.n))
        sel, data = self._operand_streams(self.length // 2, y)
        return mux_scaled_add(ones, data, sel)

    def _operand_streams(self, x: int, y: int) -> Tuple[BitStream, BitStream]:
        stream_a, stream_b = self._streams
        return BitStream.from_bits(stream_a[x]), BitStream.from_bits(stream_b[y])


@lru_cache(maxsize=64)
def get_multiplier(method: Method, n: int, settings: SourceSettings = SourceSettings(),
                   index: int = 0) -> Multiplier:
    """Shared multiplier instance per (method, n, settings, index)"""
    return Multiplier(method, n, settings, index)


class _Chain:
    """Hands out a fresh source pair to every multiply of one evaluation"""

    def __init__(self, method: Method, n: int, settings: SourceSettings):
        self.method = method
        self.n = n
        self.settings = settings
        self.count = 0

    def _next(self) -> Multiplier:
        index = 0 if self.method is Method.DET else self.count
        self.count += 1
        return get_multiplier(self.method, self.n, self.settings, index)

    def multiply(self, x: int, y: int) -> int:
        return self._next().multiply(x, y).popcount()

    def nand(self, x: int, y: int) -> int:
        return self._next().nand(x, y).popcount()

    def mux_half(self, y: int) -> int:
        return self._next().mux_half(y).popcount()


def _rescale(coefficient: UnaryValue, n: int) -> int:
    shift = n - coefficient.resolution_log2
    if shift >= 0:
        return coefficient.numerator << shift
    return round_half_up(coefficient.numerator, 1 << -shift)


def _horner(chain: _Chain, base: int, coefficients: Sequence[int], full: int) -> int:
    s = full
    for c in reversed(coefficients):
        s = chain.nand(chain.multiply(base, c), s)
    return s


def maclaurin_eval(spec: SeriesSpec, x: UnaryValue, method: Method = Method.DET,
                   settings: Optional[SourceSettings] = None) -> UnaryValue:
    """
    Evaluate a Horner-factored series with chained unary operations

    Each stage is one multiply feeding a NAND, so 1 - x*c*(...) never leaves
    [0, 1] and the stream length stays 2^n throughout.

    Args:
        spec: Series to evaluate
        x: Input in [0, 1]
        method: Multiplier used for every product
        settings: Baseline source parameters

    Returns:
        Output value at the resolution of x
    """
    n = x.resolution_log2
    full = 1 << n
    chain = _Chain(method, n, settings or SourceSettings())
    coefficients = [_rescale(c, n) for c in spec.coefficients]
    xn = x.numerator

    if spec.function is SeriesFunction.EXP_NEG:
        out = _horner(chain, xn, coefficients, full)
    elif spec.function is SeriesFunction.LOG1P:
        out = chain.multiply(xn, _horner(chain, xn, coefficients, full))
    elif spec.function is SeriesFunction.SIN:
        square = chain.multiply(xn, xn)
        out = chain.multiply(xn, _horner(chain, square, coefficients, full))
    else:
        square = chain.multiply(xn, xn)
        inner = _horner(chain, square, coefficients, full)
        out = chain.mux_half(chain.multiply(chain.multiply(xn, full // 2), inner))
    return UnaryValue(out, n)


def reference_value(function: SeriesFunction, x: float) -> float:
    """Real-valued function the series approximates"""
    if function is SeriesFunction.EXP_NEG:
        return math.exp(-x)
    if function is SeriesFunction.SIN:
        return math.sin(x)
    if function is SeriesFunction.LOG1P:
        return math.log1p(x)
    return 1.0 / (1.0 + math.exp(-x))


def reference_numerator(function: SeriesFunction, x: UnaryValue) -> int:
    """True function value rounded half up to the resolution of x"""
    return math.floor(reference_value(function, float(x.value())) * x.denominator + 0.5)


def default_series(function: SeriesFunction, degree: Optional[int] = None) -> SeriesSpec:
    """
    Build quantized coefficients for a function

    Args:
        function: Target function
        degree: Series degree (DEFAULT_DEGREES when omitted)

    Returns:
        SeriesSpec with coefficients over 2^8
    """
    degree = degree or DEFAULT_DEGREES[function]
    count = coefficient_count(function, degree)
    full = 1 << COEFFICIENT_RESOLUTION

    if function is SeriesFunction.EXP_NEG:
        ratios = [Fraction(1, i) for i in range(1, count + 1)]
    elif function is SeriesFunction.SIN:
        ratios = [Fraction(1, (2 * k) * (2 * k + 1)) for k in range(1, count + 1)]
    elif function is SeriesFunction.LOG1P:
        ratios = [Fraction(i - 1, i) for i in range(2, count + 2)]
    else:
        ratios = list(SIGMOID_RATIOS[:count])

    coefficients = tuple(
        UnaryValue(round_half_up(full * r.numerator, r.denominator), COEFFICIENT_RESOLUTION)
        for r in ratios
    )
    return SeriesSpec(function, degree, coefficients)


def load_series(path: str = DEFAULT_SERIES_FILE) -> Dict[SeriesFunction, SeriesSpec]:
    """
    Load series specs from an INI file with one section per function

    Functions missing from the file fall back to default_series.
    """
    specs = {f: default_series(f) for f in SeriesFunction}
    parser = configparser.ConfigParser()
    if not parser.read(path):
        logger.warning(f"Series file {path} not found, using default coefficients")
        return specs

    for section in parser.sections():
        try:
            function = SeriesFunction(section.lower())
        except ValueError:
            raise ParameterError(f"{path}: unknown function section [{section}]")
        try:
            degree = parser.getint(section, "degree")
            numerators = [int(tok) for tok in parser.get(section, "coefficients", fallback="").split()]
        except ValueError as e:
            raise ParameterError(f"{path}: bad entry in [{section}]: {e}")
        specs[function] = SeriesSpec(
            function, degree,
            tuple(UnaryValue(num, COEFFICIENT_RESOLUTION) for num in numerators),
        )
    logger.debug(f"Loaded {len(parser.sections())} series from {path}")
    return specs


def save_series(specs: Iterable[SeriesSpec], path: str) -> None:
    parser = configparser.ConfigParser()
    for spec in specs:
        parser[spec.function.value] = {
            "degree": str(spec.degree),
            "coefficients": " ".join(str(num) for num in spec.numerators),
        }
    with open(path, "w") as f:
        parser.write(f)


if __name__ == "__main__":
    # Example usage
    spec = default_series(SeriesFunction.EXP_NEG)
    for k in (0, 64, 128, 192, 256):
        x = UnaryValue(k, 8)
        y = maclaurin_eval(spec, x)
        print(f"exp(-{float(x.value()):.3f}) ~ {y} (true {reference_value(spec.function, float(x.value())):.4f})")
