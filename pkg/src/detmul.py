#!/usr/bin/env python3
"""
Deterministic Multiplier Module for UnaryFlow
Handles exact clock-division multiplication and the constant-length
scalable multiplier with downscaling and deterministic error compensation
"""

import csv
import logging
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import FrozenSet, List, Optional, Sequence, TextIO, Tuple

import numpy as np

from streams import BitStream, ParameterError, UnaryValue

logger = logging.getLogger(__name__)


class Operand(Enum):
    """Which multiplier input a flip plan belongs to"""
    A = "a"  # cycled every q_a cycles
    B = "b"  # held for q_a cycles per bit


class TieRule(Enum):
    """Rounding rule for the ideal reference when the product sits on a .5"""
    HALF_UP = "half_up"
    HALF_EVEN = "half_even"


@dataclass(frozen=True)
class DownscaleResult:
    """Quotient and remainder of a right-shifted operand"""
    quotient: UnaryValue
    error: int
    shift: int

    @property
    def original(self) -> UnaryValue:
        numerator = (self.quotient.numerator << self.shift) + self.error
        return UnaryValue(numerator, self.quotient.resolution_log2 + self.shift)


@dataclass(frozen=True)
class FlipPlan:
    """
    Cycles at which one operand's erroneous bit is inverted from 0 to 1

    withheld counts flips that had no free cycle left; flip_cycles plus
    withheld always equals the operand's downscale error.
    """
    operand: Operand
    erroneous_index: int
    flip_cycles: FrozenSet[int]
    aligned_count: int
    withheld: int = 0

    @property
    def flip_count(self) -> int:
        return len(self.flip_cycles)


@dataclass(frozen=True)
class MulResult:
    """Output stream of a multiply plus its accuracy and latency accounting"""
    stream: BitStream
    value: UnaryValue
    ideal: UnaryValue
    error_bits: int
    stage1_cycles: int
    stage2_cycles: int
    plans: Tuple[FlipPlan, ...] = field(default=(), compare=False)


@dataclass(frozen=True)
class PipelineRecord:
    """Latency of a run of back-to-back multiplies"""
    total_cycles: int
    steady_state_interval: int
    stage1_cycles: int
    stage2_cycles: int
    pipelined: bool


@dataclass(frozen=True)
class TraceRow:
    """One cycle of the two-stage datapath"""
    cycle: int
    i: int
    j: int
    a_bit: int
    b_bit: int
    flip_a: int
    flip_b: int
    out_bit: int


TRACE_COLUMNS = ["cycle", "i", "j", "a_bit", "b_bit", "flip_a", "flip_b", "out_bit"]


def round_half_up(numerator: int, denominator: int) -> int:
    """Integer nearest to numerator/denominator, ties upward"""
    return (2 * numerator + denominator) // (2 * denominator)


def split_shifts(n: int) -> Tuple[int, int]:
    """
    Right-shift amounts for operands A and B at resolution n

    The two thermometer lengths 2^(n - shift) always multiply to 2^n; for
    odd n operand B gets the extra bit of shift.
    """
    if n < 0:
        raise ParameterError(f"Negative resolution: {n}")
    return n // 2, n - n // 2


def _check_same_resolution(a: UnaryValue, b: UnaryValue) -> int:
    if a.resolution_log2 != b.resolution_log2:
        raise ParameterError(
            f"Resolution mismatch: 2^{a.resolution_log2} vs 2^{b.resolution_log2}"
        )
    return a.resolution_log2


def thermometer(value: UnaryValue) -> np.ndarray:
    """Unary-counter stream of a value as a bool array"""
    return np.arange(value.denominator) < value.numerator


def clockdiv_multiply_exact(a: UnaryValue, b: UnaryValue) -> BitStream:
    """
    Exact product by clock division

    Operand a cycles through its thermometer code every 2^n cycles while b
    holds each of its bits for 2^n cycles, so every pair of bits meets once.

    Returns:
        Stream of length 2^(2n) with popcount a.numerator * b.numerator
    """
    n = _check_same_resolution(a, b)
    length = 1 << n
    bits = np.tile(thermometer(a), length) & np.repeat(thermometer(b), length)
    return BitStream.from_bits(bits)


def downscale(x: UnaryValue, shift: int) -> DownscaleResult:
    """
    Right-shift an operand register, keeping the discarded remainder

    Args:
        x: Operand to shorten
        shift: Number of bits to drop

    Returns:
        DownscaleResult whose quotient always under-approximates x
    """
    if not 0 <= shift <= x.resolution_log2:
        raise ParameterError(f"Shift {shift} outside [0, {x.resolution_log2}]")
    quotient = UnaryValue(x.numerator >> shift, x.resolution_log2 - shift)
    return DownscaleResult(quotient, x.numerator & ((1 << shift) - 1), shift)


def inv_count(error: int, other_quotient: UnaryValue) -> int:
    """
    Number of compensating flips that must line up with the other operand's 1s

    Computed the way the first stage does it: a q x q clock-division product
    of error/q and the other quotient, whose popcount is scaled back by q
    with round-half-up.
    """
    q = other_quotient.denominator
    if not 0 <= error < q:
        raise ParameterError(f"Error {error} outside [0, {q})")
    if error == 0:
        return 0
    product = clockdiv_multiply_exact(UnaryValue(error, other_quotient.resolution_log2), other_quotient)
    return round_half_up(product.popcount(), q)


def build_flip_plan(own: DownscaleResult, other: DownscaleResult, which: Operand) -> FlipPlan:
    """
    Place an operand's compensating flips on the output cycle grid

    Cycle t covers A index i = t mod q_a and B index j = t // q_a. Aligned
    flips take the lowest 1-blocks of the other operand, unaligned flips the
    highest 0-blocks. B never flips on a cycle A already flipped; when that
    leaves B without a zero slot the flip is withheld.

    Args:
        own: Downscaled operand the plan is for
        other: The other downscaled operand
        which: Operand.A or Operand.B

    Returns:
        FlipPlan for own
    """
    own_index = own.quotient.numerator
    if own.error == 0:
        return FlipPlan(which, own_index, frozenset(), 0)

    aligned = inv_count(own.error, other.quotient)
    unaligned = own.error - aligned
    other_len = other.quotient.denominator
    other_index = other.quotient.numerator
    aligned_positions = list(range(aligned))
    unaligned_positions = list(range(other_len - 1, other_len - 1 - unaligned, -1))

    if which is Operand.A:
        q_a = own.quotient.denominator
        cycles = frozenset(j * q_a + own_index for j in aligned_positions + unaligned_positions)
        return FlipPlan(which, own_index, cycles, aligned)

    q_a = other_len
    withheld = 0
    a_plan = build_flip_plan(other, own, Operand.A)
    overlap = own_index * q_a + other_index
    if overlap in a_plan.flip_cycles and other_index in unaligned_positions:
        unaligned_positions.remove(other_index)
        withheld = 1
        logger.debug(
            f"Withholding B flip at i={other_index}, j={own_index}: cycle owned by A"
        )
    cycles = frozenset(own_index * q_a + i for i in aligned_positions + unaligned_positions)
    return FlipPlan(which, own_index, cycles, aligned, withheld)


def _flip_mask(plan: FlipPlan, length: int) -> np.ndarray:
    mask = np.zeros(length, dtype=bool)
    if plan.flip_cycles:
        mask[sorted(plan.flip_cycles)] = True
    return mask


def _stage_cycles(n: int) -> Tuple[int, int]:
    s_a, s_b = split_shifts(n)
    q_a, q_b = 1 << (n - s_a), 1 << (n - s_b)
    return max(q_a, q_b) ** 2, 1 << n


def _operand_planes(a: UnaryValue, b: UnaryValue):
    n = _check_same_resolution(a, b)
    s_a, s_b = split_shifts(n)
    down_a, down_b = downscale(a, s_a), downscale(b, s_b)
    q_a = down_a.quotient.denominator
    t = np.arange(1 << n)
    i, j = t % q_a, t // q_a
    base_a = i < down_a.quotient.numerator
    base_b = j < down_b.quotient.numerator
    return n, down_a, down_b, i, j, base_a, base_b


def optimal_approximation(a: UnaryValue, b: UnaryValue, out_resolution_log2: int,
                          tie_rule: TieRule = TieRule.HALF_UP) -> UnaryValue:
    """
    Representable value at the output resolution nearest to a * b

    Args:
        a: First factor
        b: Second factor
        out_resolution_log2: Output resolution n
        tie_rule: How exact halves round

    Returns:
        UnaryValue at resolution out_resolution_log2
    """
    scaled = a.value() * b.value() * (1 << out_resolution_log2)
    if tie_rule is TieRule.HALF_EVEN:
        numerator = round(scaled)
    else:
        numerator = round_half_up(scaled.numerator, scaled.denominator)
    return UnaryValue(numerator, out_resolution_log2)


def scalable_multiply(a: UnaryValue, b: UnaryValue) -> MulResult:
    """
    Constant-length multiply with downscaling and error compensation

    Stage one computes the aligned flip counts; stage two runs 2^n cycles
    where the output bit is (a'_i XOR flipA) AND (b'_j XOR flipB).

    Args:
        a: First operand at resolution n
        b: Second operand at resolution n

    Returns:
        MulResult with a 2^n-bit output stream
    """
    n, down_a, down_b, i, j, base_a, base_b = _operand_planes(a, b)
    plan_a = build_flip_plan(down_a, down_b, Operand.A)
    plan_b = build_flip_plan(down_b, down_a, Operand.B)
    length = 1 << n
    out = (base_a ^ _flip_mask(plan_a, length)) & (base_b ^ _flip_mask(plan_b, length))
    return _result(out, a, b, n, (plan_a, plan_b))


def uncompensated_multiply(a: UnaryValue, b: UnaryValue) -> MulResult:
    """Downscaled product with flips disabled (popcount = A_H * B_H)"""
    n, _, _, _, _, base_a, base_b = _operand_planes(a, b)
    return _result(base_a & base_b, a, b, n, ())


def _result(out: np.ndarray, a: UnaryValue, b: UnaryValue, n: int,
            plans: Tuple[FlipPlan, ...]) -> MulResult:
    stream = BitStream.from_bits(out)
    popcount = int(out.sum())
    ideal = optimal_approximation(a, b, n)
    stage1, stage2 = _stage_cycles(n)
    return MulResult(
        stream=stream,
        value=UnaryValue(popcount, n),
        ideal=ideal,
        error_bits=popcount - ideal.numerator,
        stage1_cycles=stage1,
        stage2_cycles=stage2,
        plans=plans,
    )


def term_sum_oracle(a: UnaryValue, b: UnaryValue, include_fourth_term: bool = False) -> int:
    """
    Expected popcount from the quotient/remainder expansion of A * B

    Sums A_H*B_H with the two rounded cross terms; the remainder product
    A_L*B_L/2^n is added only when include_fourth_term is set.
    """
    n = _check_same_resolution(a, b)
    s_a, s_b = split_shifts(n)
    down_a, down_b = downscale(a, s_a), downscale(b, s_b)
    total = (down_a.quotient.numerator * down_b.quotient.numerator
             + inv_count(down_a.error, down_b.quotient)
             + inv_count(down_b.error, down_a.quotient))
    if include_fourth_term:
        total += round_half_up(down_a.error * down_b.error, 1 << n)
    return total


def simulate_products(a_numerators: Sequence[int], b_numerators: Sequence[int], n: int,
                      compensate: bool = True) -> np.ndarray:
    """
    Vectorised two-stage cycle model for many operand pairs at once

    Args:
        a_numerators: A numerators, one per case
        b_numerators: B numerators, same length
        n: Resolution
        compensate: False disables the flips

    Returns:
        Bool array of shape (cases, 2^n), one output stream per row
    """
    a = np.asarray(a_numerators, dtype=np.int64).reshape(-1, 1)
    b = np.asarray(b_numerators, dtype=np.int64).reshape(-1, 1)
    if a.shape != b.shape:
        raise ParameterError(f"Operand count mismatch: {a.shape[0]} vs {b.shape[0]}")
    limit = 1 << n
    if a.size and (a.min() < 0 or b.min() < 0 or a.max() > limit or b.max() > limit):
        raise ParameterError(f"Numerators must lie in [0, {limit}]")

    s_a, s_b = split_shifts(n)
    q_a, q_b = 1 << (n - s_a), 1 << (n - s_b)
    t = np.arange(limit)
    i = (t % q_a)[None, :]
    j = (t // q_a)[None, :]

    a_h, a_l = a >> s_a, a & ((1 << s_a) - 1)
    b_h, b_l = b >> s_b, b & ((1 << s_b) - 1)
    base_a = i < a_h
    base_b = j < b_h
    if not compensate:
        return base_a & base_b

    inv_a = (2 * a_l * b_h + q_b) // (2 * q_b)
    inv_b = (2 * b_l * a_h + q_a) // (2 * q_a)
    un_a = a_l - inv_a
    un_b = b_l - inv_b
    contested = (a_l > 0) & (b_l > 0) & (b_h >= q_b - un_a) & (a_h >= q_a - un_b)

    flip_a = (i == a_h) & (a_l > 0) & ((j < inv_a) | (j >= q_b - un_a))
    flip_b = (j == b_h) & (b_l > 0) & (
        (i < inv_b) | ((i >= q_a - un_b) & ~(contested & (i == a_h)))
    )
    return (base_a ^ flip_a) & (base_b ^ flip_b)


def trace(a: UnaryValue, b: UnaryValue) -> List[TraceRow]:
    """Per-cycle record of a single scalable multiply"""
    n, down_a, down_b, i, j, base_a, base_b = _operand_planes(a, b)
    length = 1 << n
    flip_a = _flip_mask(build_flip_plan(down_a, down_b, Operand.A), length)
    flip_b = _flip_mask(build_flip_plan(down_b, down_a, Operand.B), length)
    out = (base_a ^ flip_a) & (base_b ^ flip_b)
    return [
        TraceRow(t, int(i[t]), int(j[t]), int(base_a[t]), int(base_b[t]),
                 int(flip_a[t]), int(flip_b[t]), int(out[t]))
        for t in range(length)
    ]


def write_trace_csv(rows: Sequence[TraceRow], fh: TextIO) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(TRACE_COLUMNS)
    for row in rows:
        writer.writerow([getattr(row, column) for column in TRACE_COLUMNS])


def pipeline_model(num_multiplies: int, n: int, pipelined: bool = True) -> PipelineRecord:
    """
    Latency of num_multiplies back-to-back scalable multiplies

    Unpipelined, each multiply pays both stages. Pipelined, stage one of the
    next multiply overlaps stage two of the current one; for odd n the longer
    stage sets the interval.
    """
    if num_multiplies < 1:
        raise ParameterError(f"Need at least one multiply, got {num_multiplies}")
    stage1, stage2 = _stage_cycles(n)
    if pipelined:
        interval = max(stage1, stage2)
        total = stage1 + stage2 + (num_multiplies - 1) * interval
    else:
        interval = stage1 + stage2
        total = num_multiplies * interval
    return PipelineRecord(total, interval, stage1, stage2, pipelined)


def error_value(result: MulResult) -> Fraction:
    """Signed error of a multiply in value units"""
    return Fraction(result.error_bits, 1 << result.value.resolution_log2)


if __name__ == "__main__":
    # Worked example: 5/16 x 15/16
    a, b = UnaryValue(5, 4), UnaryValue(15, 4)
    result = scalable_multiply(a, b)
    print(f"{a} x {b} -> {result.value} (ideal {result.ideal}, error {result.error_bits})")
    print(result.stream.dump())
