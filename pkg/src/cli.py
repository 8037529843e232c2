#!/usr/bin/env python3
"""
Command Line Interface for UnaryFlow
Provides stream generation, single multiplies, accuracy sweeps, function
and matrix benchmarks, and gate-cost tables from the command line
"""

import sys
import logging
import argparse
from typing import List, Optional

from streams import (
    GeneratorKind, GeneratorSpec, ParameterError, SourceSettings, UnaryValue,
    generate_stream,
)
from detmul import (
    clockdiv_multiply_exact, term_sum_oracle, optimal_approximation, scalable_multiply, trace,
    write_trace_csv,
)
from funcs import Method, SeriesFunction, get_multiplier, load_series, DEFAULT_SERIES_FILE
from matrix import EngineConfig, FixedMatrix, UnaryEngine, read_matrix, write_result_csv
from costmodel import (
    PUBLISHED_RELATIVE_COSTS, Design, calibrate, cost_table, estimate, load_costs, series_cost,
)
from bench import (
    Report, ReportError, cost_report, emit_report, function_mae, function_report, matrix_report,
    OperandDomain, matrix_trials, progressive_mae, progressive_report, resolve_workers,
    sweep_multiply_mae, sweep_report,
)
from config_loader import ConfigLoader

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

logger = logging.getLogger(__name__)

METHOD_NAMES = [m.value for m in Method]
DESIGN_NAMES = [d.value for d in Design]
KIND_NAMES = [k.value for k in GeneratorKind]
FUNCTION_NAMES = [f.value for f in SeriesFunction]
DOMAIN_NAMES = [d.value for d in OperandDomain]


class UnaryFlowCLI:
    """Command Line Interface for UnaryFlow"""

    def __init__(self):
        """Initialize the CLI"""
        self.config: Optional[ConfigLoader] = None
        self.progress = False
        self.parser = self.build_parser()

    def build_parser(self) -> argparse.ArgumentParser:
        """Build the argument parser with one subparser per command"""
        parser = argparse.ArgumentParser(
            prog="unaryflow",
            description="Deterministic unary computing: multiplies, sweeps and cost models",
            formatter_class=argparse.ArgumentDefaultsHelpFormatter
        )
        self._add_global_options(parser, suppress=False)

        # Global options repeated after the subcommand must not reset earlier values
        common = argparse.ArgumentParser(add_help=False)
        self._add_global_options(common, suppress=True)

        sources = argparse.ArgumentParser(add_help=False)
        sources.add_argument("--lfsr-seed-a", type=int, help="LFSR seed of operand A")
        sources.add_argument("--lfsr-seed-b", type=int, help="LFSR seed of operand B (0 = 2^(n-1)+1)")
        sources.add_argument("--lfsr-polynomial", type=lambda s: int(s, 0),
                             help="LFSR tap mask, e.g. 0xC (0 = table default)")
        sources.add_argument("--sobol-dims", type=int, nargs=2, metavar=("DA", "DB"),
                             help="Sobol dimensions of the two operands")
        sources.add_argument("--halton-bases", type=int, nargs=2, metavar=("BA", "BB"),
                             help="Halton bases of the two operands")

        sub = parser.add_subparsers(dest="command", metavar="COMMAND")

        # gen
        gen = sub.add_parser("gen", parents=[common, sources], help="Emit one bit stream",
                             formatter_class=argparse.ArgumentDefaultsHelpFormatter)
        gen.add_argument("--kind", choices=KIND_NAMES, default="counter", help="Number source")
        gen.add_argument("--n", type=int, default=4, help="Stream length is 2^n")
        gen.add_argument("--value", type=int, required=True, help="Operand numerator")
        gen.add_argument("--out", default="-", help="Output path ('-' for stdout)")

        # mul
        mul = sub.add_parser("mul", parents=[common, sources], help="Run one multiply",
                             formatter_class=argparse.ArgumentDefaultsHelpFormatter)
        mul.add_argument("--method", choices=METHOD_NAMES + ["exact"], default="det", help="Multiplier")
        mul.add_argument("--n", type=int, default=4, help="Operand resolution")
        mul.add_argument("--a", type=int, required=True, help="Numerator of operand A")
        mul.add_argument("--b", type=int, required=True, help="Numerator of operand B")
        mul.add_argument("--trace", action="store_true", help="Append the per-cycle trace (det only)")
        mul.add_argument("--fourth-term", action="store_true",
                         help="Also print the four-term expansion oracle (det only)")
        mul.add_argument("--out", default="-", help="Output path ('-' for stdout)")

        # sweep
        sweep = sub.add_parser("sweep", parents=[common, sources], help="Exhaustive multiply MAE",
                               formatter_class=argparse.ArgumentDefaultsHelpFormatter)
        sweep.add_argument("--method", choices=METHOD_NAMES, nargs="+", help="Multipliers (default all)")
        sweep.add_argument("--n", type=int, nargs="+", help="Resolutions (default [Bench] n_values)")
        sweep.add_argument("--domain", choices=DOMAIN_NAMES, nargs="+",
                           help="Operand ranges (default [Bench] domains)")
        sweep.add_argument("--out", default="-", help="Output path ('-' for stdout)")

        # progressive
        prog = sub.add_parser("progressive", parents=[common, sources], help="MAE from output prefixes",
                              formatter_class=argparse.ArgumentDefaultsHelpFormatter)
        prog.add_argument("--method", choices=METHOD_NAMES, nargs="+", help="Multipliers (default all)")
        prog.add_argument("--n", type=int, default=4, help="Resolution")
        prog.add_argument("--observe", type=int, nargs="+",
                          help="Observed prefix lengths (default [Bench] observe_lengths)")
        prog.add_argument("--domain", choices=DOMAIN_NAMES, nargs="+",
                          help="Operand ranges (default [Bench] domains)")
        prog.add_argument("--out", default="-", help="Output path ('-' for stdout)")

        # funcs
        fn = sub.add_parser("funcs", parents=[common, sources], help="Maclaurin function MAE",
                            formatter_class=argparse.ArgumentDefaultsHelpFormatter)
        fn.add_argument("--function", choices=FUNCTION_NAMES, nargs="+",
                        help="Functions (default [Bench] functions)")
        fn.add_argument("--method", choices=METHOD_NAMES, nargs="+", default=["det"], help="Multipliers")
        fn.add_argument("--n", type=int, default=8, help="Resolution")
        fn.add_argument("--series-file", help="Series definitions (default series.ini)")
        fn.add_argument("--out", default="-", help="Output path ('-' for stdout)")

        # matmul
        mm = sub.add_parser("matmul", parents=[common, sources], help="Matrix dot-product trials",
                            formatter_class=argparse.ArgumentDefaultsHelpFormatter)
        mm.add_argument("--method", choices=METHOD_NAMES, nargs="+", help="Multipliers (default all)")
        mm.add_argument("--n", type=int, default=4, help="Resolution")
        mm.add_argument("--dims", type=int, nargs=3, metavar=("R1", "C1", "C2"),
                        help="Matrix dimensions (default [Bench] matrix_dims)")
        mm.add_argument("--trials", type=int, help="Trials (default [Bench] matrix_trials)")
        mm.add_argument("--seed", type=int, help="Seed for random operands (required for trials)")
        mm.add_argument("--a-file", help="Input matrix file (multiply files instead of trials)")
        mm.add_argument("--b-file", help="Weight matrix file")
        mm.add_argument("--out", default="-", help="Output path ('-' for stdout)")
        self.matmul_parser = mm

        # cost
        cost = sub.add_parser("cost", parents=[common], help="Relative gate-cost table",
                              formatter_class=argparse.ArgumentDefaultsHelpFormatter)
        cost.add_argument("--design", choices=DESIGN_NAMES, nargs="+", help="Designs (default all)")
        cost.add_argument("--n", type=int, nargs="+", help="Precisions (default [Bench] n_values)")
        cost.add_argument("--calibrate", action="store_true",
                          help="Fit unit costs to the published relative costs and report residuals")
        cost.add_argument("--series", action="store_true", help="Add per-function circuit costs")
        cost.add_argument("--series-file", help="Series definitions (default series.ini)")
        cost.add_argument("--out", default="-", help="Output path ('-' for stdout)")

        return parser

    @staticmethod
    def _add_global_options(parser: argparse.ArgumentParser, suppress: bool) -> None:
        def pick(value):
            return argparse.SUPPRESS if suppress else value

        parser.add_argument("--config", default=pick(None), help="Configuration file")
        parser.add_argument("--show-config", action="store_true", default=pick(False),
                            help="Print the effective configuration and exit")
        parser.add_argument("--save-config", metavar="PATH", default=pick(None),
                            help="Write the effective configuration to PATH")
        parser.add_argument("--workers", type=int, default=pick(None),
                            help="Concurrent workers (0 = CPU count)")
        parser.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR"],
                            default=pick(None), help="Log level")
        parser.add_argument("--quiet", action="store_true", default=pick(False),
                            help="Only log warnings and errors")
        parser.add_argument("--format", choices=["csv", "text"], default=pick(None),
                            help="Report format")

    def parse_arguments(self, argv: Optional[List[str]] = None) -> argparse.Namespace:
        """Parse command line arguments"""
        args = self.parser.parse_args(argv)
        if not args.command and not (args.show_config or args.save_config):
            self.parser.error("a command is required")
        return args

    def load_config(self, args: argparse.Namespace) -> ConfigLoader:
        """Load the config file and apply command-line overrides"""
        config = ConfigLoader(args.config)
        if args.workers is not None:
            config.set('General', 'workers', args.workers)
        if args.log_level:
            config.set('General', 'log_level', args.log_level)
        if args.format:
            config.set('General', 'format', args.format)

        overrides = {
            'lfsr_seed_a': getattr(args, 'lfsr_seed_a', None),
            'lfsr_seed_b': getattr(args, 'lfsr_seed_b', None),
            'lfsr_polynomial': getattr(args, 'lfsr_polynomial', None),
            'sobol_dimensions': getattr(args, 'sobol_dims', None),
            'halton_bases': getattr(args, 'halton_bases', None),
        }
        for key, value in overrides.items():
            if value is None:
                continue
            if isinstance(value, list):
                value = " ".join(map(str, value))
            config.set('Streams', key, value)
        return config

    def source_settings(self) -> SourceSettings:
        """Baseline stream sources from the effective configuration"""
        c = self.config
        dims = c.get_int_list('Streams', 'sobol_dimensions', [0, 1])
        bases = c.get_int_list('Streams', 'halton_bases', [2, 3])
        if len(dims) != 2 or len(bases) != 2:
            raise ParameterError("sobol_dimensions and halton_bases need exactly two values")
        return SourceSettings(
            lfsr_seed_a=c.get_int('Streams', 'lfsr_seed_a', 1),
            lfsr_seed_b=c.get_int('Streams', 'lfsr_seed_b', 0),
            lfsr_polynomial=c.get_int('Streams', 'lfsr_polynomial', 0),
            sobol_dimensions=tuple(dims),
            halton_bases=tuple(bases),
            direction_file=c.get('Streams', 'direction_file') or None,
        )

    def show_config(self) -> None:
        for section, options in self.config.get_all().items():
            for key, value in options.items():
                print(f"{section}.{key}={value}")

    def _workers(self) -> int:
        return resolve_workers(self.config.get_int('General', 'workers', 0))

    def _domains(self, names: Optional[List[str]]) -> List[OperandDomain]:
        names = names or self.config.get_list('Bench', 'domains', DOMAIN_NAMES)
        try:
            return [OperandDomain(name) for name in names]
        except ValueError as e:
            raise ParameterError(f"Unknown operand domain in {names}: {e}")

    def _format(self) -> str:
        return self.config.get('General', 'format', 'csv')

    def _emit(self, report: Report, out: str, append: bool = False) -> None:
        emit_report(report, self._format(), out, append=append)

    def _write_lines(self, lines: List[str], out: str) -> None:
        text = "".join(line + "\n" for line in lines)
        if out == "-":
            sys.stdout.write(text)
            return
        try:
            with open(out, "w") as f:
                f.write(text)
        except OSError as e:
            raise ReportError(f"Cannot write to {out}: {e}") from e

    # Commands

    def cmd_gen(self, args: argparse.Namespace) -> None:
        settings = self.source_settings()
        kind = GeneratorKind(args.kind)
        spec = GeneratorSpec(
            kind, args.n,
            lfsr_polynomial=settings.lfsr_polynomial or None,
            lfsr_seed=settings.lfsr_seed_a,
            sobol_dimension=settings.sobol_dimensions[0],
            halton_base=settings.halton_bases[0],
            direction_file=settings.direction_file,
        )
        stream = generate_stream(UnaryValue(args.value, args.n), spec)
        self._write_lines([stream.dump()], args.out)

    def cmd_mul(self, args: argparse.Namespace) -> None:
        a, b = UnaryValue(args.a, args.n), UnaryValue(args.b, args.n)
        ideal = optimal_approximation(a, b, args.n)
        lines: List[str] = []

        if args.method == "exact":
            stream = clockdiv_multiply_exact(a, b)
            lines.append(f"{stream.popcount()}/{stream.length}")
            lines.append("error_bits=0")
        elif args.method == Method.DET.value:
            result = scalable_multiply(a, b)
            lines.append(str(result.value))
            lines.append(f"error_bits={result.error_bits}")
            lines.append(f"ideal={result.ideal}")
            lines.append(f"stream={result.stream.dump()}")
            lines.append(f"stage1_cycles={result.stage1_cycles}")
            lines.append(f"stage2_cycles={result.stage2_cycles}")
            if args.fourth_term:
                lines.append(f"four_term_oracle={term_sum_oracle(a, b, include_fourth_term=True)}")
        else:
            multiplier = get_multiplier(Method(args.method), args.n, self.source_settings())
            stream = multiplier.multiply(args.a, args.b)
            lines.append(f"{stream.popcount()}/{stream.length}")
            lines.append(f"error_bits={stream.popcount() - ideal.numerator}")
            lines.append(f"ideal={ideal}")
            lines.append(f"stream={stream.dump()}")
            lines.append(f"sources={multiplier.describe()}")

        if args.trace:
            if args.method != Method.DET.value:
                raise ParameterError("--trace is only available for the det method")
            if args.out == "-":
                self._write_lines(lines, "-")
                write_trace_csv(trace(a, b), sys.stdout)
                return
            self._write_lines(lines, args.out)
            try:
                with open(args.out, "a") as f:
                    write_trace_csv(trace(a, b), f)
            except OSError as e:
                raise ReportError(f"Cannot write to {args.out}: {e}") from e
            return
        self._write_lines(lines, args.out)

    def cmd_sweep(self, args: argparse.Namespace) -> None:
        methods = [Method(m) for m in (args.method or METHOD_NAMES)]
        n_values = args.n or self.config.get_int_list('Bench', 'n_values', [4, 6, 8])
        settings = self.source_settings()
        domains = self._domains(args.domain)
        reports = [
            sweep_multiply_mae(method, n, settings, self._workers(), self.progress, domain)
            for n in n_values for domain in domains for method in methods
        ]
        self._emit(sweep_report(reports), args.out)

    def cmd_progressive(self, args: argparse.Namespace) -> None:
        methods = [Method(m) for m in (args.method or METHOD_NAMES)]
        lengths = args.observe or self.config.get_int_list('Bench', 'observe_lengths',
                                                           list(range(10, 17)))
        settings = self.source_settings()
        domains = self._domains(args.domain)
        reports = [
            progressive_mae(method, args.n, lengths, settings, self._workers(), self.progress, domain)
            for domain in domains for method in methods
        ]
        self._emit(progressive_report(reports), args.out)

    def _series(self, path: Optional[str]):
        return load_series(path or self.config.get('Bench', 'series_file') or DEFAULT_SERIES_FILE)

    def cmd_funcs(self, args: argparse.Namespace) -> None:
        names = args.function or self.config.get_list('Bench', 'functions', FUNCTION_NAMES)
        try:
            functions = [SeriesFunction(name) for name in names]
        except ValueError as e:
            raise ParameterError(f"Unknown function in {names}: {e}")
        specs = self._series(args.series_file)
        settings = self.source_settings()
        reports = [
            function_mae(specs[f], Method(m), args.n, settings, self._workers(), self.progress)
            for f in functions for m in args.method
        ]
        self._emit(function_report(reports), args.out)

    def cmd_matmul(self, args: argparse.Namespace) -> None:
        methods = [Method(m) for m in (args.method or METHOD_NAMES)]
        settings = self.source_settings()

        if args.a_file or args.b_file:
            if not (args.a_file and args.b_file):
                self.matmul_parser.error("--a-file and --b-file must be given together")
            a = read_matrix(args.a_file)
            b = read_matrix(args.b_file)
            if not isinstance(a, FixedMatrix):
                raise ParameterError(f"{args.a_file}: input matrix cannot carry signs")
            engine = UnaryEngine(EngineConfig(methods[0], 1, a.resolution_log2, settings))
            result = engine.matmul(a, b, self._workers())
            if args.out == "-":
                write_result_csv(result, sys.stdout)
                return
            try:
                with open(args.out, "w", newline="") as f:
                    write_result_csv(result, f)
            except OSError as e:
                raise ReportError(f"Cannot write to {args.out}: {e}") from e
            return

        if args.seed is None:
            self.matmul_parser.error("--seed is required for random matrix trials")
        dims = tuple(args.dims or self.config.get_int_list('Bench', 'matrix_dims', [256, 256, 32]))
        if len(dims) != 3:
            raise ParameterError(f"matrix_dims needs three values, got {dims}")
        trials = args.trials or self.config.get_int('Bench', 'matrix_trials', 20)
        results = matrix_trials(dims, args.n, trials, args.seed, methods, settings,
                                self._workers(), self.progress)
        self._emit(matrix_report(results, args.seed), args.out)

    def cmd_cost(self, args: argparse.Namespace) -> None:
        designs = [Design(d) for d in (args.design or DESIGN_NAMES)]
        n_values = args.n or self.config.get_int_list('Bench', 'n_values', [4, 6, 8])
        costs = load_costs(self.config)
        self._emit(cost_report(cost_table(designs, n_values, costs), costs.as_dict()), args.out)
        append = args.out != "-"

        if args.series:
            specs = self._series(args.series_file)
            rows = [
                [spec.function.value, design.value, n, spec.degree,
                 series_cost(design, n, spec, costs).total, estimate(design, n, costs).relative_pct]
                for spec in specs.values() for n in n_values for design in designs
            ]
            report = Report("function gate cost",
                            ["function", "design", "n", "degree", "total_nand", "relative_pct"], rows)
            self._emit(report, args.out, append=append)

        if args.calibrate:
            fit = calibrate(PUBLISHED_RELATIVE_COSTS, costs)
            fitted = cost_table(sorted({d for d, _ in PUBLISHED_RELATIVE_COSTS}, key=lambda d: d.value),
                                sorted({n for _, n in PUBLISHED_RELATIVE_COSTS}), fit.costs)
            model = {(e.design, e.n): e.relative_pct for e in fitted}
            rows = [[d.value, n, target, model[(d, n)], fit.residuals[(d, n)]]
                    for (d, n), target in PUBLISHED_RELATIVE_COSTS.items()]
            report = Report("cost calibration",
                            ["design", "n", "target_pct", "model_pct", "residual"], rows,
                            config={f"fitted.{k}": f"{v:.4f}" for k, v in fit.costs.as_dict().items()},
                            notes=[f"converged={fit.success} rms_residual={fit.rms_residual:.4f}"])
            self._emit(report, args.out, append=append)

    def run(self, argv: Optional[List[str]] = None) -> int:
        """Run the CLI"""
        try:
            args = self.parse_arguments(argv)
        except SystemExit as e:
            # argparse exits 0 for --help and 2 for usage errors
            return e.code if isinstance(e.code, int) else 2

        self.config = self.load_config(args)
        level = 'WARNING' if args.quiet else self.config.get('General', 'log_level', 'INFO').upper()
        logging.basicConfig(level=getattr(logging, level, logging.INFO), format=LOG_FORMAT,
                            stream=sys.stderr, force=True)
        self.progress = sys.stderr.isatty() and not args.quiet

        if args.save_config and not self.config.save(args.save_config):
            return 1

        if args.show_config:
            self.show_config()
            return 0
        if not args.command:
            return 0

        handler = getattr(self, f"cmd_{args.command}")
        try:
            handler(args)
            return 0
        except SystemExit as e:
            return e.code if isinstance(e.code, int) else 2
        except (ParameterError, ReportError) as e:
            logger.error(f"Error: {e}")
            logger.debug("Traceback", exc_info=True)
            return 1
        except Exception as e:
            logger.error(f"Unexpected error: {e}")
            logger.debug("Traceback", exc_info=True)
            return 1


def main() -> int:
    """Console entry point"""
    return UnaryFlowCLI().run()


if __name__ == "__main__":
    sys.exit(main())
