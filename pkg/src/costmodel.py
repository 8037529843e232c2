#!/usr/bin/env python3
"""
Cost Model Module for UnaryFlow
Handles component-count area estimates of the multiplier designs in
NAND-equivalent units, Sobol-relative percentages and unit-cost calibration
"""

import math
import logging
from dataclasses import asdict, dataclass, fields, replace
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize

from streams import MAXIMAL_POLYNOMIALS, ParameterError
from funcs import SeriesSpec

logger = logging.getLogger(__name__)


class Design(Enum):
    """Multiplier circuits the model can tally"""
    UNARY_COUNTER = "counter"  # plain clock-division multiplier
    DET = "det"
    LFSR = "lfsr"
    SOBOL = "sobol"
    HALTON = "halton"


@dataclass(frozen=True)
class ComponentCosts:
    """NAND-equivalent cost of one unit of each component kind"""
    register_bit: float = 4.0
    counter_bit: float = 6.0
    comparator_bit: float = 5.0
    mux2: float = 3.0
    xor: float = 3.0
    and_: float = 1.5
    not_: float = 0.5
    direction_vector_cell: float = 4.0

    def __post_init__(self):
        for f in fields(self):
            if not getattr(self, f.name) > 0:
                raise ParameterError(f"Unit cost {kind_name(f.name)} must be positive")

    def as_dict(self) -> Dict[str, float]:
        return {kind_name(key): value for key, value in asdict(self).items()}

    @classmethod
    def from_dict(cls, values: Dict[str, float]) -> "ComponentCosts":
        known = {kind_name(f.name): f.name for f in fields(cls)}
        unknown = set(values) - set(known)
        if unknown:
            raise ParameterError(f"Unknown component kinds: {sorted(unknown)}")
        return cls(**{known[key]: float(value) for key, value in values.items()})


def kind_name(field_name: str) -> str:
    """Component kind as written in config files and reports"""
    return field_name.rstrip("_")


COMPONENT_KINDS = [kind_name(f.name) for f in fields(ComponentCosts)]

# Published Sobol-relative gate costs for the multiply circuit
PUBLISHED_RELATIVE_COSTS: Dict[Tuple[Design, int], float] = {
    (Design.LFSR, 4): 53.29,
    (Design.LFSR, 6): 47.28,
    (Design.LFSR, 8): 43.05,
    (Design.DET, 4): 68.73,
    (Design.DET, 6): 63.16,
    (Design.DET, 8): 57.73,
}


@dataclass(frozen=True)
class GateCostEstimate:
    """Component tally and totals for one design at one precision"""
    design: Design
    n: int
    tally: Dict[str, float]
    total: float
    relative_pct: float


@dataclass(frozen=True)
class CalibrationResult:
    """Unit costs fitted to target percentages, with per-target residuals"""
    costs: ComponentCosts
    residuals: Dict[Tuple[Design, int], float]
    success: bool

    @property
    def rms_residual(self) -> float:
        values = list(self.residuals.values())
        return math.sqrt(sum(v * v for v in values) / len(values)) if values else 0.0


def _add(tally: Dict[str, float], **counts: float) -> None:
    for kind, count in counts.items():
        key = kind_name(kind)
        tally[key] = tally.get(key, 0) + count


def _output_stage(tally: Dict[str, float], n: int) -> None:
    # AND gate into an (n+1)-bit output counter
    _add(tally, and_=1, counter_bit=n + 1)


def tally(design: Design, n: int, lfsr_polynomial: Optional[int] = None) -> Dict[str, float]:
    """
    Component counts of a two-operand multiply circuit

    Args:
        design: Circuit to tally
        n: Operand precision in bits
        lfsr_polynomial: Tap mask for the LFSR design (table default if None)

    Returns:
        Map component kind -> count
    """
    if n < 2:
        raise ParameterError(f"Cost model needs n >= 2, got {n}")
    counts: Dict[str, float] = {}

    if design is Design.UNARY_COUNTER:
        # operand registers, 2n-bit clock-division counter, comparators
        _add(counts, register_bit=2 * n, counter_bit=2 * n, and_=n - 1, comparator_bit=2 * n)
        _add(counts, and_=1, counter_bit=2 * n + 1)
        return counts

    if design is Design.LFSR:
        polynomial = lfsr_polynomial or MAXIMAL_POLYNOMIALS.get(n)
        if not polynomial:
            raise ParameterError(f"No LFSR polynomial for n={n}")
        taps = bin(polynomial).count("1")
        _add(counts, register_bit=2 * n, xor=2 * (taps - 1))  # two LFSRs
        _add(counts, register_bit=2 * n, comparator_bit=2 * n)
        _output_stage(counts, n)
        return counts

    if design is Design.SOBOL:
        _add(counts, counter_bit=n)  # shared index counter
        # per operand: direction-vector array, XOR network, state register, select logic
        _add(counts, direction_vector_cell=2 * n * n, xor=2 * n, register_bit=2 * n, and_=2 * n)
        _add(counts, register_bit=2 * n, comparator_bit=2 * n)
        _output_stage(counts, n)
        return counts

    if design is Design.HALTON:
        digits = math.ceil(n / math.log2(3))
        _add(counts, counter_bit=n)
        # base-3 digit counter with digit-reversal scaling logic
        _add(counts, counter_bit=2 * digits, and_=n * digits, xor=n * digits)
        _add(counts, register_bit=2 * n, comparator_bit=2 * n)
        _output_stage(counts, n)
        return counts

    if design is Design.DET:
        h = math.ceil(n / 2)
        _add(counts, register_bit=2 * n)
        # stage 1: downscaled thermometer counters and comparators, q x q products
        _add(counts, counter_bit=2 * h, comparator_bit=4 * h, and_=h + 1)
        _add(counts, counter_bit=2 * (h + 1))
        # stage 2: cycle counters and comparators
        _add(counts, counter_bit=2 * h, comparator_bit=2 * h, and_=h - 1)
        # flip control, once per operand
        for _ in range(2):
            _add(counts, mux2=1, not_=1, comparator_bit=2 * h, counter_bit=h + 1, and_=3)
        _output_stage(counts, n)
        return counts

    raise ParameterError(f"Unknown design: {design}")


def _total(counts: Dict[str, float], costs: ComponentCosts) -> float:
    unit = costs.as_dict()
    return sum(count * unit[kind] for kind, count in counts.items())


def estimate(design: Design, n: int, costs: ComponentCosts = ComponentCosts()) -> GateCostEstimate:
    """
    Area of one design relative to the Sobol design at the same n

    Args:
        design: Circuit to estimate
        n: Operand precision in bits
        costs: Unit costs

    Returns:
        GateCostEstimate with relative_pct = 100 * total / Sobol total
    """
    counts = tally(design, n)
    total = _total(counts, costs)
    reference = _total(tally(Design.SOBOL, n), costs)
    return GateCostEstimate(design, n, counts, total, 100.0 * total / reference)


def cost_table(designs: Sequence[Design], n_values: Sequence[int],
               costs: ComponentCosts = ComponentCosts()) -> List[GateCostEstimate]:
    """Estimates for every design at every n, ordered by n then design"""
    if not designs or not n_values:
        raise ParameterError("cost_table needs at least one design and one n")
    return [estimate(design, n, costs) for n in n_values for design in designs]


def series_cost(design: Design, n: int, spec: SeriesSpec,
                costs: ComponentCosts = ComponentCosts()) -> GateCostEstimate:
    """Function circuit cost as the multiply circuit repeated once per series stage"""
    single = estimate(design, n, costs)
    scaled = {kind: count * spec.degree for kind, count in single.tally.items()}
    return GateCostEstimate(design, n, scaled, single.total * spec.degree, single.relative_pct)


def calibrate(targets: Optional[Dict[Tuple[Design, int], float]] = None,
              costs: ComponentCosts = ComponentCosts()) -> CalibrationResult:
    """
    Fit unit costs so the model's relative percentages match targets

    The fit runs over log unit costs so every cost stays positive; only
    ratios matter, so the result is rescaled to keep register_bit fixed.

    Args:
        targets: (design, n) -> Sobol-relative percentage
        costs: Starting unit costs

    Returns:
        CalibrationResult with fitted costs and model-minus-target residuals
    """
    targets = targets or PUBLISHED_RELATIVE_COSTS
    names = [f.name for f in fields(ComponentCosts)]
    start = np.log([getattr(costs, name) for name in names])
    tallies = {key: tally(key[0], key[1]) for key in targets}
    sobol = {n: tally(Design.SOBOL, n) for _, n in targets}

    def build(log_costs: np.ndarray) -> ComponentCosts:
        return ComponentCosts(**dict(zip(names, np.exp(log_costs))))

    def model(candidate: ComponentCosts) -> Dict[Tuple[Design, int], float]:
        return {
            key: 100.0 * _total(tallies[key], candidate) / _total(sobol[key[1]], candidate)
            for key in targets
        }

    def error(log_costs: np.ndarray) -> float:
        predicted = model(build(log_costs))
        return sum((predicted[key] - target) ** 2 for key, target in targets.items())

    logger.info(f"Calibrating {len(names)} unit costs against {len(targets)} targets")
    fit = minimize(error, start, method="Nelder-Mead",
                   options={"maxiter": 20000, "xatol": 1e-6, "fatol": 1e-8})
    fitted = build(fit.x)
    scale = costs.register_bit / fitted.register_bit
    fitted = replace(fitted, **{name: getattr(fitted, name) * scale for name in names})
    predicted = model(fitted)
    residuals = {key: predicted[key] - target for key, target in targets.items()}
    logger.info(f"Calibration finished: success={fit.success}, sse={fit.fun:.4f}")
    return CalibrationResult(fitted, residuals, bool(fit.success))


def load_costs(config) -> ComponentCosts:
    """
    Unit costs from the [Costs] section of a ConfigLoader

    Missing keys keep their defaults.
    """
    defaults = ComponentCosts().as_dict()
    values = {kind: config.get_float("Costs", kind, defaults[kind]) for kind in COMPONENT_KINDS}
    return ComponentCosts.from_dict(values)


if __name__ == "__main__":
    # Example usage
    for row in cost_table(list(Design), [4, 6, 8]):
        print(f"{row.design.value:8s} n={row.n} total={row.total:7.1f} relative={row.relative_pct:6.2f}%")
