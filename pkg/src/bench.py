#!/usr/bin/env python3
"""
Benchmark Module for UnaryFlow
Handles exhaustive multiply sweeps, progressive accuracy, function
approximation error, matrix trials and report emission
"""

import os
import sys
import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Any, Callable, Dict, List, Optional, Sequence, TextIO, Tuple

import numpy as np
from tqdm import tqdm

from streams import ParameterError, SourceSettings, UnaryValue
from detmul import split_shifts
from funcs import (
    Method, SeriesSpec, get_multiplier, maclaurin_eval, reference_numerator,
)
from matrix import EngineConfig, FixedMatrix, UnaryEngine, exact_matmul, random_matrix
from costmodel import GateCostEstimate

logger = logging.getLogger(__name__)

# First-operand numerators per work item
CHUNK_ROWS = 16

MAE_DEFINITION = "mean |measured - ideal| over values in [0,1], x100; ideal rounded half up"

SWEEP_COLUMNS = ["method", "n", "mae_pct", "err0", "err1", "err2", "cases",
                 "max_abs_error", "two_bit_fraction", "mae_pct_half_even", "mae_pct_interior", "domain"]
PROGRESSIVE_COLUMNS = ["method", "n", "observe_bits", "mae_pct", "domain"]
FUNCTION_COLUMNS = ["function", "method", "n", "degree", "mae_pct"]
MATRIX_COLUMNS = ["method", "n", "r1", "c1", "c2", "trials", "mae_pct", "term_mae_pct"]
COST_COLUMNS = ["design", "n", "total_nand", "relative_pct"]


class ReportError(OSError):
    """Raised when a report cannot be written to its destination"""


class OperandDomain(Enum):
    """Range of operand numerators an exhaustive evaluation covers"""
    INCLUSIVE = "inclusive"  # 0..2^n, both endpoints of [0, 1]
    EXCLUSIVE = "exclusive"  # 0..2^n - 1, the n-bit binary range

    def top(self, n: int) -> int:
        return (1 << n) if self is OperandDomain.INCLUSIVE else (1 << n) - 1


@dataclass
class Report:
    """Tabular result with a reproducibility comment block"""
    title: str
    columns: List[str]
    rows: List[List[Any]] = field(default_factory=list)
    config: Dict[str, str] = field(default_factory=dict)
    notes: List[str] = field(default_factory=list)


@dataclass(frozen=True)
class MaeReport:
    """Aggregate error statistics of one method over an exhaustive case set"""
    method: str
    n: int
    mae_pct: Fraction
    error_histogram: Dict[int, int]
    cases: int
    config: Dict[str, str] = field(default_factory=dict)
    mae_pct_half_even: Optional[Fraction] = None
    mae_pct_interior: Optional[Fraction] = None
    max_abs_error: int = 0
    oracle_mismatches: Optional[int] = None
    domain: str = OperandDomain.INCLUSIVE.value

    @property
    def two_bit_fraction(self) -> Fraction:
        return Fraction(self.count_at_least(2), self.cases) if self.cases else Fraction(0)

    def count_at_least(self, bits: int) -> int:
        return sum(count for error, count in self.error_histogram.items() if error >= bits)

    def sweep_row(self) -> List[Any]:
        h = self.error_histogram
        return [self.method, self.n, self.mae_pct, h.get(0, 0), h.get(1, 0), self.count_at_least(2),
                self.cases, self.max_abs_error, self.two_bit_fraction,
                self.mae_pct_half_even, self.mae_pct_interior, self.domain]


@dataclass(frozen=True)
class ProgressiveReport:
    """MAE of one method when only a prefix of each output stream is observed"""
    method: str
    n: int
    mae_by_length: Dict[int, Fraction]
    config: Dict[str, str] = field(default_factory=dict)
    domain: str = OperandDomain.INCLUSIVE.value


@dataclass(frozen=True)
class MatrixTrialResult:
    """Matrix MAE of one method averaged over trials"""
    method: str
    n: int
    dims: Tuple[int, int, int]
    trials: int
    mae_pct: Fraction
    term_mae_pct: Fraction


def resolve_workers(workers: int) -> int:
    """0 means one worker per available CPU"""
    if workers < 0:
        raise ParameterError(f"Negative worker count: {workers}")
    return workers or os.cpu_count() or 1


def _map_chunks(func: Callable, chunks: Sequence, workers: int, progress: bool, desc: str) -> List:
    workers = resolve_workers(workers)
    if workers == 1:
        return [func(chunk) for chunk in tqdm(chunks, desc=desc, disable=not progress, file=sys.stderr)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(tqdm(pool.map(func, chunks), total=len(chunks), desc=desc,
                         disable=not progress, file=sys.stderr))


def _row_chunks(n: int, top: Optional[int] = None) -> List[np.ndarray]:
    numerators = np.arange((1 << n if top is None else top) + 1)
    return [numerators[i:i + CHUNK_ROWS] for i in range(0, numerators.size, CHUNK_ROWS)]


def _ideal(a: np.ndarray, b: np.ndarray, n: int, half_even: bool = False) -> np.ndarray:
    full = 1 << n
    product = a * b
    if not half_even:
        return (2 * product + full) // (2 * full)
    quotient, remainder = np.divmod(product, full)
    up = (2 * remainder > full) | ((2 * remainder == full) & (quotient % 2 == 1))
    return quotient + up


def _term_sum_counts(a: np.ndarray, b: np.ndarray, n: int) -> np.ndarray:
    s_a, s_b = split_shifts(n)
    q_a, q_b = 1 << (n - s_a), 1 << (n - s_b)
    a_h, a_l = a >> s_a, a & ((1 << s_a) - 1)
    b_h, b_l = b >> s_b, b & ((1 << s_b) - 1)
    return (a_h * b_h + (2 * a_l * b_h + q_b) // (2 * q_b) + (2 * b_l * a_h + q_a) // (2 * q_a))


def _source_echo(method: Method, n: int, settings: SourceSettings) -> Dict[str, str]:
    echo = {"method": method.value, "n": str(n), "sources": get_multiplier(method, n, settings).describe()}
    if method is not Method.DET:
        echo.update(settings.echo())
    echo["mae_definition"] = MAE_DEFINITION
    return echo


def sweep_multiply_mae(method: Method, n: int, settings: SourceSettings = SourceSettings(),
                       workers: int = 1, progress: bool = False,
                       domain: OperandDomain = OperandDomain.INCLUSIVE) -> MaeReport:
    """
    Error statistics of a multiplier over every operand pair at resolution n

    Operands range over numerators 0..2^n, or 0..2^n - 1 in the exclusive
    domain. The operand space is split by first operand; partial sums are
    exact integers, so the report does not depend on the worker count.

    Args:
        method: Multiplier under test
        n: Resolution
        settings: Baseline source parameters
        workers: Concurrent chunks (0 = CPU count)
        progress: Show a progress bar on stderr
        domain: Operand range

    Returns:
        MaeReport
    """
    if n > 8:
        logger.warning(f"Exhaustive sweep at n={n} covers {((1 << n) + 1) ** 2} pairs")
    multiplier = get_multiplier(method, n, settings)
    full = 1 << n
    top = domain.top(n)
    b = np.arange(top + 1)[None, :]
    interior_b = (b > 0) & (b < full)
    logger.info(f"Sweeping {method.value} multiply at n={n} over the {domain.value} domain")

    def work(rows: np.ndarray) -> Dict[str, Any]:
        a = rows[:, None]
        counts = multiplier.row_popcounts(rows)[:, :top + 1]
        errors = np.abs(counts - _ideal(a, b, n))
        interior = ((a > 0) & (a < full)) & interior_b
        part = {
            "abs": int(errors.sum()),
            "abs_half_even": int(np.abs(counts - _ideal(a, b, n, half_even=True)).sum()),
            "abs_interior": int(errors[interior].sum()),
            "interior_cases": int(interior.sum()),
            "histogram": np.bincount(errors.ravel(), minlength=3),
            "max": int(errors.max()),
            "mismatches": None,
        }
        if method is Method.DET:
            part["mismatches"] = int((counts != _term_sum_counts(a, b, n)).sum())
        return part

    parts = _map_chunks(work, _row_chunks(n, top), workers, progress, f"sweep {method.value} n={n}")

    cases = (top + 1) ** 2
    size = max(len(p["histogram"]) for p in parts)
    histogram = sum(np.pad(p["histogram"], (0, size - len(p["histogram"]))) for p in parts)
    interior_cases = sum(p["interior_cases"] for p in parts)
    report = MaeReport(
        method=method.value,
        n=n,
        mae_pct=Fraction(100 * sum(p["abs"] for p in parts), full * cases),
        error_histogram={k: int(v) for k, v in enumerate(histogram) if v},
        cases=cases,
        config=_source_echo(method, n, settings),
        mae_pct_half_even=Fraction(100 * sum(p["abs_half_even"] for p in parts), full * cases),
        mae_pct_interior=Fraction(100 * sum(p["abs_interior"] for p in parts), full * max(interior_cases, 1)),
        max_abs_error=max(p["max"] for p in parts),
        oracle_mismatches=sum(p["mismatches"] for p in parts) if method is Method.DET else None,
        domain=domain.value,
    )
    logger.info(f"{method.value} n={n} {domain.value}: MAE {float(report.mae_pct):.4f}%")
    return report


def progressive_mae(method: Method, n: int, observe_lengths: Sequence[int],
                    settings: SourceSettings = SourceSettings(), workers: int = 1,
                    progress: bool = False,
                    domain: OperandDomain = OperandDomain.INCLUSIVE) -> ProgressiveReport:
    """
    MAE when each output is measured from its first t bits as popcount_t / t

    Args:
        method: Multiplier under test
        n: Resolution
        observe_lengths: Prefix lengths t, each in [1, 2^n]
        settings: Baseline source parameters
        workers: Concurrent chunks (0 = CPU count)
        progress: Show a progress bar on stderr
        domain: Operand range

    Returns:
        ProgressiveReport keyed by t
    """
    full = 1 << n
    lengths = list(observe_lengths)
    if not lengths:
        raise ParameterError("No observe lengths given")
    for t in lengths:
        if not 0 < t <= full:
            raise ParameterError(f"Observe length {t} outside [1, {full}]")
    multiplier = get_multiplier(method, n, settings)
    top = domain.top(n)
    b = np.arange(top + 1)[None, :]

    def work(rows: np.ndarray) -> List[int]:
        a = rows[:, None]
        ideal = _ideal(a, b, n)
        prefix = np.cumsum(multiplier.output_bits(rows)[:, :top + 1, :], axis=2, dtype=np.int64)
        # |pc_t / t - ideal / 2^n| scaled by t * 2^n stays integral
        return [int(np.abs(prefix[:, :, t - 1] * full - ideal * t).sum()) for t in lengths]

    parts = _map_chunks(work, _row_chunks(n, top), workers, progress, f"progressive {method.value} n={n}")
    cases = (top + 1) ** 2
    mae = {
        t: Fraction(100 * sum(p[k] for p in parts), t * full * cases)
        for k, t in enumerate(lengths)
    }
    return ProgressiveReport(method.value, n, mae, _source_echo(method, n, settings), domain.value)


def function_mae(spec: SeriesSpec, method: Method = Method.DET, n: int = 8,
                 settings: SourceSettings = SourceSettings(), workers: int = 1,
                 progress: bool = False) -> MaeReport:
    """
    Error of a series evaluator over every input x = k/2^n

    The reference is the real function value rounded half up to resolution n.
    """
    full = 1 << n

    def work(ks: np.ndarray) -> List[int]:
        errors = []
        for k in ks:
            x = UnaryValue(int(k), n)
            errors.append(maclaurin_eval(spec, x, method, settings).numerator
                          - reference_numerator(spec.function, x))
        return errors

    logger.info(f"Evaluating {spec.function.value} (degree {spec.degree}) with {method.value} at n={n}")
    parts = _map_chunks(work, _row_chunks(n), workers, progress, f"{spec.function.value} {method.value}")
    errors = np.abs(np.concatenate([np.asarray(p, dtype=np.int64) for p in parts]))
    histogram = np.bincount(errors)
    config = _source_echo(method, n, settings)
    config.update({"function": spec.function.value, "degree": str(spec.degree),
                   "coefficients": " ".join(map(str, spec.numerators))})
    return MaeReport(
        method=method.value,
        n=n,
        mae_pct=Fraction(100 * int(errors.sum()), full * errors.size),
        error_histogram={k: int(v) for k, v in enumerate(histogram) if v},
        cases=int(errors.size),
        config=config,
        max_abs_error=int(errors.max()),
    )


def matrix_error_sums(engine: UnaryEngine, a: FixedMatrix, b: FixedMatrix) -> Tuple[int, int]:
    """
    Element and per-term error of one matmul, both as exact integers

    Returns:
        (sum over elements of |C - C_exact|, in units of 2^-2n;
         sum over elements of sum_j |p_j - ideal_j|, in units of 2^-n)
    """
    n = engine.n
    full = 1 << n
    result = engine.matmul(a, b)
    exact = exact_matmul(a, b)
    element = np.abs(result.numerators * full - exact.numerators)

    grid = np.arange(full + 1)
    error_table = np.abs(engine.table - _ideal(grid[:, None], grid[None, :], n))
    ones = np.ones(b.numerators.shape, dtype=np.int64)
    per_term = engine.accumulate(error_table, a.numerators, b.numerators, ones)
    return int(element.sum()), int(per_term.sum())


def matrix_trials(dims: Tuple[int, int, int], n: int, trials: int, seed: int,
                  methods: Sequence[Method], settings: SourceSettings = SourceSettings(),
                  workers: int = 1, progress: bool = False) -> List[MatrixTrialResult]:
    """
    Average matmul MAE of each method over seeded random trials

    Every method sees the same operand matrices in a trial; trial t draws
    from numpy's default_rng([seed, t]).

    Args:
        dims: (r1, c1, c2)
        n: Resolution
        trials: Number of trials
        seed: Base seed
        methods: Multipliers to compare

    Returns:
        One MatrixTrialResult per method, in the given order
    """
    if trials < 1:
        raise ParameterError(f"Need at least one trial, got {trials}")
    r1, c1, c2 = dims
    if min(dims) < 1:
        raise ParameterError(f"Invalid matrix dimensions {dims}")
    engines = {m: UnaryEngine(EngineConfig(m, 1, n, settings)) for m in methods}

    def work(trial: int) -> Dict[Method, Tuple[int, int]]:
        rng = np.random.default_rng([seed, trial])
        a = random_matrix(rng, r1, c1, n)
        b = random_matrix(rng, c1, c2, n)
        return {m: matrix_error_sums(engine, a, b) for m, engine in engines.items()}

    logger.info(f"Running {trials} matrix trials of {r1}x{c1} . {c1}x{c2} at n={n}")
    parts = _map_chunks(work, list(range(trials)), workers, progress, "matrix trials")
    full = 1 << n
    elements = r1 * c2 * trials
    results = []
    for m in methods:
        element = sum(p[m][0] for p in parts)
        per_term = sum(p[m][1] for p in parts)
        results.append(MatrixTrialResult(
            method=m.value, n=n, dims=dims, trials=trials,
            mae_pct=Fraction(100 * element, full * full * c1 * elements),
            term_mae_pct=Fraction(100 * per_term, full * c1 * elements),
        ))
    return results


# Report assembly

def sweep_report(reports: Sequence[MaeReport]) -> Report:
    report = Report("multiply sweep", SWEEP_COLUMNS, [r.sweep_row() for r in reports])
    for r in reports:
        report.config.update({f"{r.method}.{k}": v for k, v in r.config.items() if k not in ("method", "n")})
        if r.oracle_mismatches is not None:
            report.notes.append(f"{r.method} n={r.n} {r.domain}: {r.oracle_mismatches} pairs differ "
                                f"from the term-sum oracle")
    report.config["mae_definition"] = MAE_DEFINITION
    return report


def progressive_report(reports: Sequence[ProgressiveReport]) -> Report:
    rows = [[r.method, r.n, t, mae, r.domain] for r in reports for t, mae in r.mae_by_length.items()]
    report = Report("progressive accuracy", PROGRESSIVE_COLUMNS, rows)
    for r in reports:
        report.config.update({f"{r.method}.{k}": v for k, v in r.config.items() if k not in ("method", "n")})
    report.config["mae_definition"] = "mean |popcount_t / t - ideal| over values in [0,1], x100"
    return report


def function_report(reports: Sequence[MaeReport]) -> Report:
    rows = [[r.config["function"], r.method, r.n, int(r.config["degree"]), r.mae_pct] for r in reports]
    report = Report("function approximation", FUNCTION_COLUMNS, rows)
    for r in reports:
        report.config[f"{r.config['function']}.coefficients"] = r.config["coefficients"]
    report.config["mae_definition"] = "mean |output - true value rounded to 2^-n| over x = k/2^n, x100"
    return report


def matrix_report(results: Sequence[MatrixTrialResult], seed: int) -> Report:
    rows = [[r.method, r.n, *r.dims, r.trials, r.mae_pct, r.term_mae_pct] for r in results]
    report = Report("matrix trials", MATRIX_COLUMNS, rows, config={"seed": str(seed)})
    report.config["mae_definition"] = "mean |C - exact rational product| per element, / c1, x100"
    report.notes.append("term_mae_pct = per-term |p - ideal| accumulated without cancellation, / (2^n * c1)")
    return report


def cost_report(estimates: Sequence[GateCostEstimate], unit_costs: Dict[str, float]) -> Report:
    rows = [[e.design.value, e.n, e.total, e.relative_pct] for e in estimates]
    config = {f"cost.{k}": str(v) for k, v in unit_costs.items()}
    return Report("gate cost", COST_COLUMNS, rows, config=config,
                  notes=["NAND-equivalent component model; relative to the Sobol design"])


# Emission

def format_cell(value: Any) -> str:
    """Fixed formatting: 4 decimal places for rationals and floats"""
    if value is None:
        return ""
    if isinstance(value, (Fraction, float, np.floating)):
        return f"{float(value):.4f}"
    return str(value)


def _write(report: Report, fmt: str, fh: TextIO) -> None:
    fh.write(f"# {report.title}\n")
    for key, value in report.config.items():
        fh.write(f"# {key}={value}\n")
    for note in report.notes:
        fh.write(f"# {note}\n")

    cells = [[format_cell(v) for v in row] for row in report.rows]
    if fmt == "csv":
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(report.columns)
        writer.writerows(cells)
        return

    widths = [max([len(c)] + [len(row[k]) for row in cells]) for k, c in enumerate(report.columns)]
    fh.write("  ".join(c.ljust(w) for c, w in zip(report.columns, widths)).rstrip() + "\n")
    fh.write("  ".join("-" * w for w in widths) + "\n")
    for row in cells:
        fh.write("  ".join(v.rjust(w) for v, w in zip(row, widths)) + "\n")


def emit_report(report: Report, fmt: str = "csv", path: str = "-", append: bool = False) -> None:
    """
    Write a report as CSV or an aligned text table

    Args:
        report: Report to write
        fmt: 'csv' or 'text'
        path: Destination file, '-' for stdout
        append: Add to an existing file instead of replacing it
    """
    if fmt not in ("csv", "text"):
        raise ParameterError(f"Unknown report format: {fmt}")
    if path == "-":
        _write(report, fmt, sys.stdout)
        return
    try:
        with open(path, "a" if append else "w", newline="") as f:
            _write(report, fmt, f)
    except OSError as e:
        logger.error(f"Failed to write report to {path}: {e}")
        raise ReportError(f"Cannot write report to {path}: {e}") from e
    logger.info(f"Wrote {report.title} report to {path}")
