#!/usr/bin/env python3
"""
Streams Module for UnaryFlow
Handles unary values, packed bit streams and the number sources that drive
the stream comparator (sequential counter, LFSR, Sobol, Halton)
"""

import logging
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from functools import lru_cache
from typing import Dict, Iterable, List, Optional, Tuple, Union

import numpy as np

logger = logging.getLogger(__name__)

# Direction numbers are expanded to this many bits before scaling down
SOBOL_BITS = 32

# Fibonacci tap masks: bit (k-1) set for every x^k term of the polynomial
MAXIMAL_POLYNOMIALS: Dict[int, int] = {
    2: 0x3,      # x^2 + x + 1
    3: 0x6,      # x^3 + x^2 + 1
    4: 0xC,      # x^4 + x^3 + 1
    5: 0x14,     # x^5 + x^3 + 1
    6: 0x30,     # x^6 + x^5 + 1
    7: 0x60,     # x^7 + x^6 + 1
    8: 0xB8,     # x^8 + x^6 + x^5 + x^4 + 1
    9: 0x110,    # x^9 + x^5 + 1
    10: 0x240,   # x^10 + x^7 + 1
    11: 0x500,   # x^11 + x^9 + 1
    12: 0xE08,   # x^12 + x^11 + x^10 + x^4 + 1
    13: 0x1C80,  # x^13 + x^12 + x^11 + x^8 + 1
    14: 0x3802,  # x^14 + x^13 + x^12 + x^2 + 1
    15: 0x6000,  # x^15 + x^14 + 1
    16: 0xD008,  # x^16 + x^15 + x^13 + x^4 + 1
}


class ParameterError(ValueError):
    """Raised when an operation receives invalid or mismatched parameters"""


@dataclass(frozen=True)
class UnaryValue:
    """Exact operand numerator / 2^resolution_log2"""
    numerator: int
    resolution_log2: int

    def __post_init__(self):
        if self.resolution_log2 < 0:
            raise ParameterError(f"Negative resolution: {self.resolution_log2}")
        if not 0 <= self.numerator <= (1 << self.resolution_log2):
            raise ParameterError(
                f"Numerator {self.numerator} outside [0, {1 << self.resolution_log2}]"
            )

    @property
    def denominator(self) -> int:
        return 1 << self.resolution_log2

    def value(self) -> Fraction:
        """Exact rational value, never a float"""
        return Fraction(self.numerator, self.denominator)

    @classmethod
    def quantize(cls, x: Union[float, Fraction], resolution_log2: int) -> "UnaryValue":
        """
        Round a real value in [0, 1] to the nearest representable operand

        Ties round half up. Values outside [0, 1] are rejected.
        """
        x = Fraction(x)
        if not 0 <= x <= 1:
            raise ParameterError(f"Value {x} outside [0, 1]")
        scaled = x * (1 << resolution_log2)
        return cls(int(scaled + Fraction(1, 2)), resolution_log2)

    @classmethod
    def from_string(cls, text: str) -> "UnaryValue":
        """Parse 'k/2^n' notation such as '5/16'"""
        try:
            num, den = (int(part) for part in text.strip().split("/"))
        except ValueError:
            raise ParameterError(f"Cannot parse unary value: {text!r}")
        if den <= 0 or den & (den - 1):
            raise ParameterError(f"Denominator {den} is not a power of two")
        return cls(num, den.bit_length() - 1)

    def __str__(self) -> str:
        return f"{self.numerator}/{self.denominator}"


class BitStream:
    """Immutable finite bit stream stored packed, popcount as the measurement"""

    __slots__ = ("_words", "_length")

    def __init__(self, words: np.ndarray, length: int):
        if length <= 0:
            raise ParameterError(f"Stream length must be positive, got {length}")
        words = np.asarray(words, dtype=np.uint8)
        if words.size != (length + 7) // 8:
            raise ParameterError(f"{words.size} words cannot hold {length} bits")
        # Padding bits past the end are kept at zero so popcount stays exact
        tail = length % 8
        if tail:
            words = words.copy()
            words[-1] &= (0xFF << (8 - tail)) & 0xFF
        words.flags.writeable = False
        self._words = words
        self._length = length

    @classmethod
    def from_bits(cls, bits: Iterable[int]) -> "BitStream":
        array = np.asarray(list(bits) if not isinstance(bits, np.ndarray) else bits)
        array = array.astype(bool).ravel()
        return cls(np.packbits(array), int(array.size))

    @classmethod
    def from_string(cls, text: str) -> "BitStream":
        """Parse the debug dump format ('0'/'1' characters, earliest bit first)"""
        text = "".join(text.split())
        if not text or set(text) - {"0", "1"}:
            raise ParameterError(f"Not a bit stream dump: {text!r}")
        return cls.from_bits(int(ch) for ch in text)

    @classmethod
    def constant(cls, bit: int, length: int) -> "BitStream":
        return cls.from_bits(np.full(length, bool(bit)))

    @property
    def length(self) -> int:
        return self._length

    @property
    def words(self) -> np.ndarray:
        return self._words

    def bits(self) -> np.ndarray:
        """Unpacked bits as a uint8 array of the stream length"""
        return np.unpackbits(self._words, count=self._length)

    def popcount(self) -> int:
        return int(np.unpackbits(self._words).sum())

    def value(self) -> Fraction:
        return Fraction(self.popcount(), self._length)

    def prefix(self, count: int) -> "BitStream":
        if not 0 < count <= self._length:
            raise ParameterError(f"Prefix length {count} outside [1, {self._length}]")
        return BitStream.from_bits(self.bits()[:count])

    def dump(self) -> str:
        """Debug dump: one '0'/'1' character per cycle, most recent bit last"""
        return "".join("1" if bit else "0" for bit in self.bits())

    def _check_length(self, other: "BitStream") -> None:
        if self._length != other._length:
            raise ParameterError(
                f"Stream length mismatch: {self._length} vs {other._length}"
            )

    def __and__(self, other: "BitStream") -> "BitStream":
        self._check_length(other)
        return BitStream(self._words & other._words, self._length)

    def __or__(self, other: "BitStream") -> "BitStream":
        self._check_length(other)
        return BitStream(self._words | other._words, self._length)

    def __xor__(self, other: "BitStream") -> "BitStream":
        self._check_length(other)
        return BitStream(self._words ^ other._words, self._length)

    def __invert__(self) -> "BitStream":
        return BitStream(~self._words, self._length)

    def __len__(self) -> int:
        return self._length

    def __eq__(self, other) -> bool:
        if not isinstance(other, BitStream):
            return NotImplemented
        return self._length == other._length and np.array_equal(self._words, other._words)

    def __hash__(self) -> int:
        return hash((self._length, self._words.tobytes()))

    def __repr__(self) -> str:
        shown = self.dump() if self._length <= 64 else self.dump()[:61] + "..."
        return f"BitStream({shown!r}, length={self._length})"


class GeneratorKind(Enum):
    """Number source feeding the stream comparator"""
    UNARY_COUNTER = "counter"
    LFSR = "lfsr"
    SOBOL = "sobol"
    HALTON = "halton"


@dataclass(frozen=True)
class GeneratorSpec:
    """Which number source drives the comparator, plus its parameters"""
    kind: GeneratorKind
    width_log2: int
    lfsr_polynomial: Optional[int] = None
    lfsr_seed: int = 1
    sobol_dimension: int = 0
    halton_base: int = 2
    direction_file: Optional[str] = None

    def __post_init__(self):
        if self.width_log2 < 0:
            raise ParameterError(f"Negative stream width: {self.width_log2}")
        if self.kind is GeneratorKind.LFSR:
            if self.width_log2 < 2:
                raise ParameterError("LFSR streams need width_log2 >= 2")
            if self.polynomial == 0:
                raise ParameterError(f"No default LFSR polynomial for width {self.width_log2}")
            if self.lfsr_seed == 0:
                raise ParameterError("LFSR seed must be nonzero")
            if not 0 < self.lfsr_seed < (1 << self.width_log2):
                raise ParameterError(
                    f"LFSR seed {self.lfsr_seed} does not fit {self.width_log2} bits"
                )
        elif self.kind is GeneratorKind.SOBOL:
            if not 0 <= self.sobol_dimension < len(direction_table(self.direction_file)):
                raise ParameterError(f"Unknown Sobol dimension {self.sobol_dimension}")
        elif self.kind is GeneratorKind.HALTON:
            if not _is_prime(self.halton_base):
                raise ParameterError(f"Halton base must be prime, got {self.halton_base}")

    @property
    def polynomial(self) -> int:
        if self.lfsr_polynomial:
            return self.lfsr_polynomial
        return MAXIMAL_POLYNOMIALS.get(self.width_log2, 0)

    def describe(self) -> str:
        """Config echo for reports"""
        if self.kind is GeneratorKind.LFSR:
            return f"lfsr(poly=0x{self.polynomial:x},seed={self.lfsr_seed})"
        if self.kind is GeneratorKind.SOBOL:
            return f"sobol(dim={self.sobol_dimension})"
        if self.kind is GeneratorKind.HALTON:
            return f"halton(base={self.halton_base})"
        return "counter"


def _is_prime(value: int) -> bool:
    if value < 2:
        return False
    return all(value % d for d in range(2, int(value ** 0.5) + 1))


# LFSR

def lfsr_step(state: int, polynomial: int, width: int) -> int:
    """
    Advance a Fibonacci LFSR by one step

    The feedback bit is the parity of the tapped state bits; the register
    shifts left and the feedback enters at bit 0.

    Args:
        state: Current nonzero register state
        polynomial: Tap mask, bit (k-1) set for each x^k term
        width: Register width in bits

    Returns:
        Next register state
    """
    if state == 0:
        raise ParameterError("LFSR state must be nonzero")
    mask = (1 << width) - 1
    feedback = bin(state & polynomial).count("1") & 1
    return ((state << 1) & mask) | feedback


def lfsr_period(polynomial: int, width: int, seed: int = 1) -> Optional[int]:
    """
    Number of steps until the seed recurs

    Returns:
        Cycle length, or None if the seed never recurs within 2^width steps
    """
    state = seed
    for steps in range(1, (1 << width) + 1):
        state = lfsr_step(state, polynomial, width)
        if state == 0:
            return None
        if state == seed:
            return steps
    return None


def is_maximal_polynomial(polynomial: int, width: int) -> bool:
    return lfsr_period(polynomial, width) == (1 << width) - 1


# Sobol

# Joe-Kuo direction numbers in the standard 'd s a m_1 ... m_s' format.
# Line d describes dimension d - 1; dimension 0 (all m = 1) is implicit.
BUILTIN_DIRECTION_NUMBERS = """\
d s a m_i
2 1 0 1
3 2 1 1 3
4 3 1 1 3 1
5 3 2 1 1 1
6 4 1 1 1 3 3
7 4 4 1 3 5 13
8 5 2 1 1 5 5 17
9 5 4 1 1 5 5 5
10 5 7 1 1 7 11 19
11 5 11 1 1 5 1 1
12 5 13 1 1 1 3 11
13 5 14 1 3 5 5 31
14 6 1 1 3 3 9 7 49
15 6 13 1 1 1 15 21 21
16 6 16 1 3 1 13 27 49
17 6 19 1 1 1 15 7 5
18 6 22 1 3 1 15 13 25
19 6 25 1 1 5 5 19 61
20 7 1 1 3 7 11 23 15 103
21 7 4 1 3 7 13 13 15 69
"""


def parse_direction_numbers(lines: Iterable[str],
                            source: str = "built-in") -> List[Tuple[int, int, List[int]]]:
    """
    Parse Sobol direction numbers in the standard 'd s a m_1 ... m_s' format

    Returns:
        List of (s, a, initial m values), index = dimension
    """
    table: List[Tuple[int, int, List[int]]] = [(0, 0, [])]
    for lineno, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line or not line[0].isdigit():
            continue
        fields = [int(tok) for tok in line.split()]
        d, s, a, m = fields[0], fields[1], fields[2], fields[3:]
        if len(m) != s:
            raise ParameterError(f"{source}:{lineno}: expected {s} direction numbers, got {len(m)}")
        for k, m_k in enumerate(m, start=1):
            if m_k % 2 == 0 or m_k >= (1 << k):
                raise ParameterError(f"{source}:{lineno}: m_{k}={m_k} must be odd and < 2^{k}")
        if d != len(table) + 1:
            raise ParameterError(f"{source}:{lineno}: dimension {d} out of order")
        table.append((s, a, m))
    return table


def load_direction_numbers(path: Optional[str] = None) -> List[Tuple[int, int, List[int]]]:
    """
    Load Sobol direction numbers from a file, or the built-in table when path is None

    Dimension 0 is the implicit van der Corput dimension (all m_k = 1);
    the line for d describes dimension d - 1.
    """
    if path is None:
        return parse_direction_numbers(BUILTIN_DIRECTION_NUMBERS.splitlines())
    try:
        with open(path) as f:
            lines = f.readlines()
    except OSError as e:
        logger.error(f"Failed to read direction numbers from {path}: {e}")
        raise ParameterError(f"Cannot read direction numbers: {path}") from e

    table = parse_direction_numbers(lines, path)
    logger.debug(f"Loaded {len(table)} Sobol dimensions from {path}")
    return table


@lru_cache(maxsize=None)
def direction_table(path: Optional[str] = None) -> Tuple[Tuple[int, ...], ...]:
    """Direction integers V_1..V_32 for every dimension in the table"""
    vectors = []
    for s, a, initial in load_direction_numbers(path):
        if s == 0:
            m = [1] * SOBOL_BITS
        else:
            m = list(initial)
            for i in range(s, SOBOL_BITS):
                value = m[i - s] ^ (m[i - s] << s)
                for k in range(1, s):
                    value ^= (((a >> (s - 1 - k)) & 1) * m[i - k]) << k
                m.append(value)
        vectors.append(tuple(m_k << (SOBOL_BITS - k) for k, m_k in enumerate(m, start=1)))
    return tuple(vectors)


def sobol_point(index: int, dimension: int, scale_log2: int,
                direction_file: Optional[str] = None) -> int:
    """
    index-th point of a base-2 Sobol sequence, as an integer in [0, 2^scale_log2)

    Uses the Gray-code form: XOR of the direction integers selected by the
    set bits of index ^ (index >> 1).
    """
    table = direction_table(direction_file)
    if not 0 <= dimension < len(table):
        raise ParameterError(f"Unknown Sobol dimension {dimension}")
    if not 0 <= index < (1 << SOBOL_BITS):
        raise ParameterError(f"Sobol index {index} out of range")
    gray = index ^ (index >> 1)
    point = 0
    k = 0
    while gray:
        if gray & 1:
            point ^= table[dimension][k]
        gray >>= 1
        k += 1
    return point >> (SOBOL_BITS - scale_log2)


# Halton

def halton_point(index: int, base: int, scale_log2: int) -> int:
    """
    Radical inverse of index in the given base, truncated to scale_log2 bits

    Args:
        index: Non-negative sequence index
        base: Radix (a small prime in practice)
        scale_log2: Output resolution n; result lies in [0, 2^n)

    Returns:
        floor(2^n * radical_inverse(index))
    """
    if base < 2:
        raise ParameterError(f"Halton base must be >= 2, got {base}")
    if index < 0:
        raise ParameterError(f"Negative Halton index {index}")
    numerator, denominator = 0, 1
    while index:
        index, digit = divmod(index, base)
        numerator = numerator * base + digit
        denominator *= base
    return (numerator << scale_log2) // denominator


# Stream generation

@lru_cache(maxsize=256)
def _source_numbers(spec: GeneratorSpec) -> np.ndarray:
    length = 1 << spec.width_log2
    n = spec.width_log2

    if spec.kind is GeneratorKind.UNARY_COUNTER:
        numbers = np.arange(length, dtype=np.int64)
    elif spec.kind is GeneratorKind.LFSR:
        numbers = np.empty(length, dtype=np.int64)
        state = spec.lfsr_seed
        for t in range(length):
            numbers[t] = state
            state = lfsr_step(state, spec.polynomial, n)
    elif spec.kind is GeneratorKind.SOBOL:
        numbers = np.fromiter(
            (sobol_point(t, spec.sobol_dimension, n, spec.direction_file) for t in range(length)),
            dtype=np.int64, count=length,
        )
    else:
        numbers = np.fromiter(
            (halton_point(t, spec.halton_base, n) for t in range(length)),
            dtype=np.int64, count=length,
        )
    numbers.flags.writeable = False
    return numbers


def source_numbers(spec: GeneratorSpec) -> np.ndarray:
    """The 2^n comparator inputs of a source, scaled to [0, 2^n)"""
    return _source_numbers(spec)


def generate_stream(value: UnaryValue, spec: GeneratorSpec) -> BitStream:
    """
    Compare the operand register against the number source for 2^n cycles

    bit(t) = 1 iff source_number(t) < value.numerator
    """
    if value.resolution_log2 != spec.width_log2:
        raise ParameterError(
            f"Resolution mismatch: value 2^{value.resolution_log2}, generator 2^{spec.width_log2}"
        )
    return BitStream.from_bits(source_numbers(spec) < value.numerator)


def stream_matrix(spec: GeneratorSpec) -> np.ndarray:
    """Streams for every numerator 0..2^n at once, shape (2^n + 1, 2^n)"""
    numerators = np.arange((1 << spec.width_log2) + 1)
    return source_numbers(spec)[None, :] < numerators[:, None]


def measure(stream: BitStream) -> UnaryValue:
    """popcount / length as a unary value"""
    length = stream.length
    if length & (length - 1):
        raise ParameterError(f"Stream length {length} is not a power of two")
    return UnaryValue(stream.popcount(), length.bit_length() - 1)


def is_thermometer(stream: BitStream) -> bool:
    """True iff every 1 precedes every 0"""
    bits = stream.bits().astype(np.int8)
    return bool(np.all(np.diff(bits) <= 0))


# Operand source pairs for the baseline multipliers

SMALL_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53)


@dataclass(frozen=True)
class SourceSettings:
    """Baseline generator parameters for the two operands of a multiply"""
    lfsr_seed_a: int = 1
    lfsr_seed_b: int = 0  # 0 selects 2^(n-1) + 1
    lfsr_polynomial: int = 0  # 0 selects the table default
    sobol_dimensions: Tuple[int, int] = (0, 1)
    halton_bases: Tuple[int, int] = (2, 3)
    direction_file: Optional[str] = None

    def echo(self) -> Dict[str, str]:
        """Config echo for reports"""
        return {
            "lfsr_seed_a": str(self.lfsr_seed_a),
            "lfsr_seed_b": str(self.lfsr_seed_b),
            "lfsr_polynomial": hex(self.lfsr_polynomial),
            "sobol_dimensions": " ".join(map(str, self.sobol_dimensions)),
            "halton_bases": " ".join(map(str, self.halton_bases)),
            "direction_file": self.direction_file or "default",
        }


def operand_sources(kind: GeneratorKind, n: int, settings: SourceSettings = SourceSettings(),
                    index: int = 0) -> Tuple[GeneratorSpec, GeneratorSpec]:
    """
    Generator pair for the two operands of the index-th multiply in a chain

    Each index shifts the LFSR seeds, Sobol dimensions and Halton bases so
    chained multiplies draw from distinct sources.

    Args:
        kind: Source kind shared by both operands
        n: Stream width (log2 of the length)
        settings: Base parameters for index 0
        index: Position of the multiply in a chain

    Returns:
        (spec for operand A, spec for operand B)
    """
    if kind is GeneratorKind.UNARY_COUNTER:
        spec = GeneratorSpec(kind, n)
        return spec, spec

    if kind is GeneratorKind.LFSR:
        period = (1 << n) - 1
        seed_b = settings.lfsr_seed_b or (1 << (n - 1)) + 1
        seeds = [((seed - 1 + 2 * index) % period) + 1 for seed in (settings.lfsr_seed_a, seed_b)]
        if seeds[0] == seeds[1]:
            raise ParameterError(f"LFSR operand seeds coincide: {seeds[0]}")
        return tuple(
            GeneratorSpec(kind, n, lfsr_polynomial=settings.lfsr_polynomial or None, lfsr_seed=seed)
            for seed in seeds
        )

    if kind is GeneratorKind.SOBOL:
        path = settings.direction_file
        count = len(direction_table(path))
        dims = [(d + 2 * index) % count for d in settings.sobol_dimensions]
        if any(d + 2 * index >= count for d in settings.sobol_dimensions):
            logger.warning(f"Chain index {index} wraps past {count} Sobol dimensions; "
                           f"operands reuse dimensions {dims}")
        if dims[0] == dims[1]:
            raise ParameterError(f"Sobol operand dimensions coincide: {dims[0]}")
        return tuple(GeneratorSpec(kind, n, sobol_dimension=d, direction_file=path) for d in dims)

    bases = []
    for base in settings.halton_bases:
        if base not in SMALL_PRIMES:
            raise ParameterError(f"Halton base {base} not in {SMALL_PRIMES}")
        bases.append(SMALL_PRIMES[(SMALL_PRIMES.index(base) + 2 * index) % len(SMALL_PRIMES)])
    if bases[0] == bases[1]:
        raise ParameterError(f"Halton operand bases coincide: {bases[0]}")
    return tuple(GeneratorSpec(kind, n, halton_base=b) for b in bases)
