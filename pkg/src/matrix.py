#!/usr/bin/env python3
"""
Matrix Module for UnaryFlow
Handles the hybrid unary/binary dot-product engine: unary multipliers per
element, exact binary accumulation and separate positive/negative weights
"""

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional, Sequence, TextIO, Tuple, Union

import numpy as np

from streams import ParameterError, SourceSettings, UnaryValue
from detmul import pipeline_model
from funcs import Method, get_multiplier

logger = logging.getLogger(__name__)

# Rows per gathered block of the product table
ROW_BLOCK = 32


@dataclass(frozen=True, eq=False)
class FixedMatrix:
    """Unsigned operand matrix, every element a numerator over 2^resolution_log2"""
    numerators: np.ndarray
    resolution_log2: int

    def __post_init__(self):
        array = np.array(self.numerators, dtype=np.int64)
        if array.ndim != 2 or 0 in array.shape:
            raise ParameterError(f"Matrix must be 2-D and non-empty, got shape {array.shape}")
        if array.min() < 0 or array.max() > (1 << self.resolution_log2):
            raise ParameterError(f"Elements must lie in [0, {1 << self.resolution_log2}]")
        array.flags.writeable = False
        object.__setattr__(self, "numerators", array)

    @property
    def rows(self) -> int:
        return self.numerators.shape[0]

    @property
    def cols(self) -> int:
        return self.numerators.shape[1]

    def element(self, i: int, j: int) -> UnaryValue:
        return UnaryValue(int(self.numerators[i, j]), self.resolution_log2)

    @classmethod
    def from_values(cls, values: Sequence[Sequence[UnaryValue]]) -> "FixedMatrix":
        resolutions = {v.resolution_log2 for row in values for v in row}
        if len(resolutions) != 1:
            raise ParameterError(f"Mixed resolutions: {sorted(resolutions)}")
        return cls(np.array([[v.numerator for v in row] for row in values]), resolutions.pop())


@dataclass(frozen=True, eq=False)
class SignedWeightMatrix:
    """Weight magnitudes with a separate +1/-1 sign per element"""
    magnitudes: FixedMatrix
    signs: np.ndarray

    def __post_init__(self):
        signs = np.array(self.signs, dtype=np.int64)
        if signs.shape != self.magnitudes.numerators.shape:
            raise ParameterError(
                f"Sign shape {signs.shape} differs from magnitudes {self.magnitudes.numerators.shape}"
            )
        if not np.isin(signs, (-1, 1)).all():
            raise ParameterError("Signs must be +1 or -1")
        signs.flags.writeable = False
        object.__setattr__(self, "signs", signs)

    @classmethod
    def positive(cls, magnitudes: FixedMatrix) -> "SignedWeightMatrix":
        return cls(magnitudes, np.ones(magnitudes.numerators.shape, dtype=np.int64))

    def negated(self) -> "SignedWeightMatrix":
        return SignedWeightMatrix(self.magnitudes, -self.signs)


@dataclass(frozen=True)
class EngineConfig:
    """Multiplier choice and comparator budget of the dot-product engine"""
    multiplier: Method = Method.DET
    comparator_count: int = 1
    resolution_log2: int = 4
    settings: SourceSettings = field(default_factory=SourceSettings)

    def __post_init__(self):
        if self.comparator_count < 1:
            raise ParameterError(f"Need at least one comparator, got {self.comparator_count}")


@dataclass(frozen=True, eq=False)
class MatrixResult:
    """Exact signed result: element value = numerators[i, k] / 2^resolution_log2"""
    numerators: np.ndarray
    resolution_log2: int

    def value(self, i: int, k: int) -> Fraction:
        return Fraction(int(self.numerators[i, k]), 1 << self.resolution_log2)

    def values(self) -> List[List[Fraction]]:
        return [[self.value(i, k) for k in range(self.numerators.shape[1])]
                for i in range(self.numerators.shape[0])]


@dataclass(frozen=True)
class LatencyEstimate:
    """Cycle estimate for one matmul under a comparator budget"""
    comparator_count: int
    streams_needed: int
    waves: int
    interval: int
    cycles: int


def _as_signed(b: Union[FixedMatrix, SignedWeightMatrix]) -> SignedWeightMatrix:
    if isinstance(b, SignedWeightMatrix):
        return b
    return SignedWeightMatrix.positive(b)


class UnaryEngine:
    """Dot-product engine over a memoised product table of the configured multiplier"""

    def __init__(self, config: EngineConfig):
        """
        Initialize the engine

        Args:
            config: Multiplier, comparator count and resolution
        """
        self.config = config
        self.n = config.resolution_log2
        self.multiplier = get_multiplier(config.multiplier, self.n, config.settings)

    @property
    def table(self) -> np.ndarray:
        return self.multiplier.product_table()

    def accumulate(self, table: np.ndarray, x: np.ndarray, w: np.ndarray,
                   signs: np.ndarray) -> np.ndarray:
        """
        Signed integer accumulation of table[x_ij, w_jk] over j

        Positive-sign terms feed one counter and negative-sign terms another;
        the result is their difference.
        """
        out = np.empty((x.shape[0], w.shape[1]), dtype=np.int64)
        positive = signs > 0
        for start in range(0, x.shape[0], ROW_BLOCK):
            block = table[x[start:start + ROW_BLOCK, :, None], w[None, :, :]]
            pos = np.where(positive[None, :, :], block, 0).sum(axis=1)
            neg = np.where(positive[None, :, :], 0, block).sum(axis=1)
            out[start:start + ROW_BLOCK] = pos - neg
        return out

    def matmul(self, a: FixedMatrix, b: Union[FixedMatrix, SignedWeightMatrix],
               workers: int = 1) -> MatrixResult:
        """
        Matrix product with unary element multiplies and binary accumulation

        Args:
            a: Input matrix (r1 x c1)
            b: Weight matrix (c1 x c2), unsigned or signed
            workers: Row partitions computed concurrently

        Returns:
            MatrixResult at the engine resolution
        """
        weights = _as_signed(b)
        self._check(a, weights)
        x = a.numerators
        w = weights.magnitudes.numerators
        table = self.table

        if workers <= 1 or a.rows < 2 * ROW_BLOCK:
            result = self.accumulate(table, x, w, weights.signs)
        else:
            bounds = np.array_split(np.arange(a.rows), workers)
            with ThreadPoolExecutor(max_workers=workers) as pool:
                parts = list(pool.map(
                    lambda rows: self.accumulate(table, x[rows], w, weights.signs),
                    [rows for rows in bounds if rows.size],
                ))
            result = np.vstack(parts)
        return MatrixResult(result, self.n)

    def _check(self, a: FixedMatrix, weights: SignedWeightMatrix) -> None:
        for matrix in (a, weights.magnitudes):
            if matrix.resolution_log2 != self.n:
                raise ParameterError(
                    f"Matrix resolution 2^{matrix.resolution_log2} differs from engine 2^{self.n}"
                )
        if a.cols != weights.magnitudes.rows:
            raise ParameterError(
                f"Dimension mismatch: {a.rows}x{a.cols} times "
                f"{weights.magnitudes.rows}x{weights.magnitudes.cols}"
            )


def dot_product(x: Sequence[UnaryValue], w: Sequence[UnaryValue], config: EngineConfig,
                signs: Optional[Sequence[int]] = None) -> Fraction:
    """
    Signed dot product of one input row and one weight column

    Args:
        x: Inputs
        w: Weight magnitudes
        config: Engine configuration
        signs: +1/-1 per weight (all positive when omitted)

    Returns:
        Exact rational (pos_sum - neg_sum) / 2^n
    """
    if len(x) != len(w):
        raise ParameterError(f"Length mismatch: {len(x)} inputs vs {len(w)} weights")
    if not x:
        raise ParameterError("Empty dot product")
    signs = list(signs) if signs is not None else [1] * len(w)
    a = FixedMatrix.from_values([list(x)])
    magnitudes = FixedMatrix.from_values([[v] for v in w])
    weights = SignedWeightMatrix(magnitudes, np.array(signs).reshape(-1, 1))
    return UnaryEngine(config).matmul(a, weights).value(0, 0)


def matmul(a: FixedMatrix, b: Union[FixedMatrix, SignedWeightMatrix], config: EngineConfig,
           workers: int = 1) -> MatrixResult:
    return UnaryEngine(config).matmul(a, b, workers)


def exact_matmul(a: FixedMatrix, b: Union[FixedMatrix, SignedWeightMatrix]) -> MatrixResult:
    """Full-precision oracle, numerators over 2^(2n)"""
    weights = _as_signed(b)
    product = a.numerators @ (weights.magnitudes.numerators * weights.signs)
    return MatrixResult(product, a.resolution_log2 + weights.magnitudes.resolution_log2)


def latency_model(a_dims: Tuple[int, int], b_dims: Tuple[int, int],
                  config: EngineConfig) -> LatencyEstimate:
    """
    Cycles for a matmul when operand streams share a limited comparator pool

    Every multiply needs two operand streams, each holding one comparator for
    a pipeline interval.
    """
    r1, c1 = a_dims
    c1_b, c2 = b_dims
    if c1 != c1_b or min(r1, c1, c2) < 1:
        raise ParameterError(f"Invalid dimensions {a_dims} x {b_dims}")
    streams_needed = 2 * r1 * c1 * c2
    waves = math.ceil(streams_needed / config.comparator_count)
    interval = pipeline_model(1, config.resolution_log2).steady_state_interval
    return LatencyEstimate(config.comparator_count, streams_needed, waves, interval, waves * interval)


def tradeoff_curve(a_dims: Tuple[int, int], b_dims: Tuple[int, int], config: EngineConfig,
                   counts: Sequence[int]) -> List[LatencyEstimate]:
    """latency_model over a range of comparator counts"""
    return [
        latency_model(a_dims, b_dims, EngineConfig(config.multiplier, count,
                                                   config.resolution_log2, config.settings))
        for count in counts
    ]


def random_matrix(rng: np.random.Generator, rows: int, cols: int, n: int,
                  signed: bool = False) -> Union[FixedMatrix, SignedWeightMatrix]:
    """Uniform numerators over [0, 2^n], optionally with uniform random signs"""
    magnitudes = FixedMatrix(rng.integers(0, (1 << n) + 1, size=(rows, cols)), n)
    if not signed:
        return magnitudes
    return SignedWeightMatrix(magnitudes, rng.choice(np.array([-1, 1]), size=(rows, cols)))


def read_matrix(path: str) -> Union[FixedMatrix, SignedWeightMatrix]:
    """
    Read the matrix text format

    First line 'rows cols resolution_log2', then row-major numerators and an
    optional trailing block of '+'/'-' signs.
    """
    try:
        with open(path) as f:
            tokens = f.read().split()
    except OSError as e:
        logger.error(f"Failed to read matrix from {path}: {e}")
        raise
    try:
        rows, cols, n = (int(tok) for tok in tokens[:3])
        count = rows * cols
        numerators = np.array([int(tok) for tok in tokens[3:3 + count]], dtype=np.int64)
    except ValueError as e:
        raise ParameterError(f"{path}: malformed matrix header or element: {e}")
    if numerators.size != count:
        raise ParameterError(f"{path}: expected {count} elements, found {numerators.size}")

    magnitudes = FixedMatrix(numerators.reshape(rows, cols), n)
    sign_tokens = tokens[3 + count:]
    if not sign_tokens:
        return magnitudes
    if len(sign_tokens) != count or set(sign_tokens) - {"+", "-"}:
        raise ParameterError(f"{path}: sign block must hold {count} '+'/'-' tokens")
    signs = np.array([1 if tok == "+" else -1 for tok in sign_tokens]).reshape(rows, cols)
    return SignedWeightMatrix(magnitudes, signs)


def write_matrix(matrix: Union[FixedMatrix, SignedWeightMatrix], path: str) -> None:
    weights = matrix if isinstance(matrix, SignedWeightMatrix) else None
    magnitudes = weights.magnitudes if weights else matrix
    with open(path, "w") as f:
        f.write(f"{magnitudes.rows} {magnitudes.cols} {magnitudes.resolution_log2}\n")
        for row in magnitudes.numerators:
            f.write(" ".join(str(int(v)) for v in row) + "\n")
        if weights is not None:
            for row in weights.signs:
                f.write(" ".join("+" if s > 0 else "-" for s in row) + "\n")


def exact_decimal(numerator: int, resolution_log2: int) -> str:
    """numerator / 2^resolution_log2 written out exactly, at least 4 places"""
    digits = max(resolution_log2, 4)
    scaled = abs(numerator) * 5 ** resolution_log2 * 10 ** (digits - resolution_log2)
    whole, frac = divmod(scaled, 10 ** digits)
    sign = "-" if numerator < 0 else ""
    return f"{sign}{whole}.{frac:0{digits}d}"


def write_result_csv(result: MatrixResult, fh: TextIO) -> None:
    """One CSV row per matrix row, values as exact decimals"""
    writer = csv.writer(fh, lineterminator="\n")
    for row in result.numerators:
        writer.writerow([exact_decimal(int(v), result.resolution_log2) for v in row])
