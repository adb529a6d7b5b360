"""
Command-line interface for the Incidental Regression toolkit.

Fits penalized models from CSV files, selects lambda, and runs the Monte
Carlo experiment suites from JSON configs.
"""

import argparse
import logging
import re
import sys
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd
from dotenv import load_dotenv

from incidental_regression import (
    ConfigError, Dataset, DegenerateInterval, IncidentalRegressionError, LambdaProcedureConfig,
    ParseError, Penalty, PenaltyKind, SolverConfig, ci_lambda, component_interval,
    coverage_experiment, data_driven_lambda, fit, load_experiment_config, qq_experiment,
    rmse_experiment, selection_experiment, two_step_fit,
)
from incidental_regression.config import SUITES, default_threads
from incidental_regression.reporting import (
    generate_fit_report, lambda_curve_frame, sparse_mu_frame, write_coverage_report,
    write_json_summary, write_qq_report, write_rmse_report, write_selection_report, write_tsv,
)

logger = logging.getLogger('incidental_cli')

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERICAL = 3

# Share of failed replicates above which an experiment run counts as failed.
FAILURE_BUDGET = 0.01

_PANDAS_LINE = re.compile(r'line (\d+)')


@dataclass
class CliRunRecord:
    """What a CLI invocation did; written to run_record.json even on failure."""
    command: str
    config: Dict[str, Any]
    seed: int
    artifacts: List[str] = field(default_factory=list)
    wall_time: float = 0.0
    exit_code: Optional[int] = None
    error: Optional[str] = None


def read_dataset_csv(path: str) -> Dataset:
    """
    Load a CSV with a header row, Y in the first column and X in the rest.

    Raises:
        ParseError: naming the offending line (1-based, header is line 1)
    """
    try:
        frame = pd.read_csv(path, dtype=str, skipinitialspace=True, encoding='utf-8')
    except FileNotFoundError:
        raise ParseError(f"input file not found: {path}")
    except pd.errors.EmptyDataError:
        raise ParseError("file is empty", line=1)
    except pd.errors.ParserError as exc:
        match = _PANDAS_LINE.search(str(exc))
        raise ParseError(f"wrong number of fields ({exc})",
                         line=int(match.group(1)) if match else None)

    if frame.shape[1] < 2:
        raise ParseError("need a response column and at least one covariate column", line=1)
    values = frame.apply(pd.to_numeric, errors='coerce')
    bad_rows = np.flatnonzero(~np.isfinite(values.to_numpy(dtype=float)).all(axis=1))
    if bad_rows.size:
        row = int(bad_rows[0])
        raise ParseError(f"non-numeric or missing value in row {row + 1}: {list(frame.iloc[row])}",
                         line=row + 2)

    d = frame.shape[1] - 1
    if len(frame) < d + 2:
        raise ParseError(f"need at least d + 2 = {d + 2} data rows, got {len(frame)}")
    matrix = values.to_numpy(dtype=float)
    return Dataset(matrix[:, 1:], matrix[:, 0])


class IncidentalCLI:
    """Command-line front end."""

    def __init__(self, args: argparse.Namespace):
        """Initialize CLI with parsed arguments."""
        self.args = args
        self.out_dir = Path(args.out)
        self.record = CliRunRecord(
            command=args.command,
            config={key: value for key, value in vars(args).items() if key != 'command'},
            seed=args.seed if args.seed is not None else 0,
        )

    def _written(self, paths) -> None:
        self.record.artifacts.extend(str(path) for path in paths)

    def _procedure(self) -> LambdaProcedureConfig:
        return LambdaProcedureConfig(seed=self.record.seed)

    def fit(self) -> int:
        """Fit the penalized model to --input and write estimates and intervals."""
        data = read_dataset_csv(self.args.input)
        kind = PenaltyKind(self.args.penalty)
        print(f"Loaded {data.n} observations with {data.d} covariates from {self.args.input}")

        selection = None
        if self.args.lam == 'auto':
            selection = data_driven_lambda(data, kind, self._procedure())
            lam = selection.lambda_opt
            self._written([write_tsv(lambda_curve_frame(selection), self.out_dir / 'lambda_curve.tsv')])
        else:
            lam = parse_lambda(self.args.lam)

        start = SolverConfig(beta_init=selection.beta_pure) if selection is not None else None
        result = fit(data, Penalty(kind, lam), start)
        refit = None
        intervals = []
        try:
            refit = two_step_fit(data, result)
            intervals = [component_interval(refit, j, self.args.alpha) for j in range(data.d)]
        except IncidentalRegressionError as exc:
            logger.warning("two-step refit skipped: %s", exc)

        coefficients = pd.DataFrame({
            'component': np.arange(1, data.d + 1),
            'beta_hat': result.beta,
            'beta_tilde': refit.beta_tilde if refit is not None else np.nan,
            'ci_lower': [ci.lower for ci in intervals] if intervals else np.nan,
            'ci_upper': [ci.upper for ci in intervals] if intervals else np.nan,
        })
        selected = pd.DataFrame({'index': result.selected.indices})
        summary = {
            'command': 'fit',
            'input': self.args.input,
            'penalty': kind.value,
            'lambda': lam,
            'alpha': self.args.alpha,
            'iterations': result.iterations,
            'converged': result.converged,
            'objective': result.objective,
            'beta_hat': result.beta,
            'beta_tilde': None if refit is None else refit.beta_tilde,
            'sigma_hat': None if refit is None else refit.sigma_hat,
            'm': None if refit is None else refit.m,
            'nonzero_mu': len(result.active_set),
        }
        report = generate_fit_report(result, refit, intervals, selection, source=self.args.input)
        report_path = self.out_dir / 'fit_report.txt'
        self.out_dir.mkdir(parents=True, exist_ok=True)
        report_path.write_text(report + "\n", encoding='utf-8')
        self._written([
            write_tsv(coefficients, self.out_dir / 'coefficients.tsv'),
            write_tsv(sparse_mu_frame(result), self.out_dir / 'mu_hat.tsv'),
            write_tsv(selected, self.out_dir / 'selected.tsv'),
            write_json_summary(summary, self.out_dir / 'fit_summary.json'),
            report_path,
        ])
        print(report)
        status = "✓" if result.converged else "✗"
        print(f"{status} Fit written to {self.out_dir}")
        return EXIT_OK if result.converged else EXIT_NUMERICAL

    def experiment(self) -> int:
        """Run the suite described by --config."""
        suite = load_experiment_config(self.args.config)
        if self.args.suite and self.args.suite != suite.suite:
            raise ConfigError(f"--suite {self.args.suite} does not match the config's suite {suite.suite!r}")

        config = suite.config
        if self.args.seed is not None:
            config = replace(config, seed=self.args.seed)
        self.record.seed = config.seed
        options = dict(suite.options)
        if self.args.alpha_given:
            options['alpha'] = self.args.alpha
        if self.args.lam is not None:
            if suite.suite not in ('qq', 'selection'):
                raise ConfigError(f"--lambda applies to the qq and selection suites, not {suite.suite}")
            options['lambda'] = parse_lambda(self.args.lam)
        if self.args.penalty_given:
            options['penalty'] = self.args.penalty
        self.record.config['suite'] = {'name': suite.name, 'suite': suite.suite, 'options': options}

        threads = self.args.threads or default_threads()
        print(f"Running {suite.suite} suite '{suite.name}': n={config.n}, reps={config.reps}, "
              f"seed={config.seed}, threads={threads}")
        started = time.perf_counter()

        if suite.suite == 'rmse':
            report = rmse_experiment(config, n_jobs=threads)
            self._written(write_rmse_report(report, self.out_dir, suite.name))
            failed, attempted = max(report.failures.values(), default=0), config.reps
            for label, rows in report.minimal.items():
                full = rows[-1]
                print(f"  {label:>5}: RMSE(beta) = {full.rmse:.4f}   bias(beta_1) = {rows[0].bias: .5f}")
        elif suite.suite == 'coverage':
            report = coverage_experiment(
                config, alpha=options.get('alpha', 0.05), p1_grid=options.get('p1_grid'),
                p2_grid=options.get('p2_grid'), component=options.get('component', 0), n_jobs=threads,
            )
            self._written(write_coverage_report(report, self.out_dir, suite.name))
            failed, attempted = int(report.failures.sum()), int(report.failures.size * config.reps)
            print(pd.DataFrame(100 * report.coverage, index=report.p2_grid,
                               columns=report.p1_grid).round(1).to_string())
        elif suite.suite == 'qq':
            report = qq_experiment(
                config, options['lambda'], component=options.get('component', 0),
                penalty_kind=PenaltyKind(options.get('penalty', 'soft')), n_jobs=threads,
            )
            self._written(write_qq_report(report, self.out_dir, suite.name))
            failed, attempted = report.failures, config.reps
            print(f"  KS beta_hat:   {report.ks_hat[0]:.4f} (p = {report.ks_hat[1]:.4g})")
            print(f"  KS beta_tilde: {report.ks_tilde[0]:.4f} (p = {report.ks_tilde[1]:.4g})")
        else:
            report = selection_experiment(
                config, options['lambda'], threshold=options.get('threshold'),
                penalty_kind=PenaltyKind(options.get('penalty', 'soft')), n_jobs=threads,
            )
            self._written(write_selection_report(report, self.out_dir, suite.name))
            failed, attempted = report.failures, config.reps
            print(f"  selection frequency: {report.frequency:.3f} ± {report.mc_se:.3f}")

        print(f"  finished in {time.perf_counter() - started:.1f}s")
        if attempted and failed / attempted > FAILURE_BUDGET:
            print(f"✗ {failed} of {attempted} replicates failed")
            return EXIT_NUMERICAL
        print(f"✓ Reports written to {self.out_dir}")
        return EXIT_OK

    def select_lambda(self) -> int:
        """Report the data-driven lambda (or the six-SD rule with --rule ci)."""
        data = read_dataset_csv(self.args.input)
        kind = PenaltyKind(self.args.penalty)
        if self.args.rule == 'ci':
            lam = ci_lambda(data, self._procedure())
            print(f"lambda (six-SD rule) = {lam:.6g}")
            summary = {'command': 'select-lambda', 'rule': 'ci', 'lambda': lam}
            self._written([write_json_summary(summary, self.out_dir / 'lambda_summary.json')])
            return EXIT_OK

        selection = data_driven_lambda(data, kind, self._procedure())
        print(f"lambda_opt = {selection.lambda_opt:.6g}")
        print(f"interval   = [{selection.lambda_low:.6g}, {selection.lambda_high:.6g}]"
              + ("  (lower bound clamped to lambda_U / 10)" if selection.clamped else ""))
        summary = {
            'command': 'select-lambda',
            'rule': 'procedure',
            'penalty': kind.value,
            'lambda_opt': selection.lambda_opt,
            'lambda_low': selection.lambda_low,
            'lambda_high': selection.lambda_high,
            'clamped': selection.clamped,
            'sigma_pure': selection.sigma_pure,
            'n_pure': len(selection.pure_set),
            'n_test': len(selection.test_set),
        }
        self._written([
            write_tsv(lambda_curve_frame(selection), self.out_dir / 'lambda_curve.tsv'),
            write_json_summary(summary, self.out_dir / 'lambda_summary.json'),
        ])
        return EXIT_OK

    def run(self) -> int:
        """Dispatch the command; always leaves run_record.json behind."""
        handlers = {'fit': self.fit, 'experiment': self.experiment, 'select-lambda': self.select_lambda}
        started = time.perf_counter()
        code = EXIT_NUMERICAL
        try:
            code = handlers[self.args.command]()
        except (ParseError, ConfigError) as exc:
            code = self._failed(exc, EXIT_USAGE)
        except DegenerateInterval as exc:
            code = self._failed(exc, EXIT_NUMERICAL)
            print("  hint: pass an explicit --lambda, or use --rule ci for the six-SD rule")
        except IncidentalRegressionError as exc:
            code = self._failed(exc, EXIT_NUMERICAL, "Numerical failure: ")
        except (ValueError, OSError) as exc:
            code = self._failed(exc, EXIT_USAGE)
        except Exception as exc:
            logger.exception("%s failed", self.args.command)
            code = self._failed(exc, EXIT_NUMERICAL, f"{type(exc).__name__}: ")
        finally:
            self.record.wall_time = time.perf_counter() - started
            self.record.exit_code = code
            self.write_record()
        return code

    def reject(self, message: str) -> int:
        """Record a usage error found before dispatch."""
        print(f"✗ {message}", file=sys.stderr)
        self.record.error = message
        self.record.exit_code = EXIT_USAGE
        self.write_record()
        return EXIT_USAGE

    def _failed(self, exc: BaseException, code: int, prefix: str = "") -> int:
        print(f"✗ {prefix}{exc}")
        self.record.error = f"{prefix}{exc}"
        return code

    def write_record(self) -> None:
        write_run_record(self.record, self.out_dir)


def write_run_record(record: CliRunRecord, out_dir: Path) -> None:
    record_path = out_dir / 'run_record.json'
    record.artifacts.append(str(record_path))
    try:
        write_json_summary(asdict(record), record_path)
    except OSError as exc:
        logger.error("could not write %s: %s", record_path, exc)


def parse_lambda(value: str) -> float:
    try:
        lam = float(value)
    except ValueError:
        raise ValueError(f"--lambda must be a positive number or 'auto', got {value!r}")
    if not np.isfinite(lam) or lam <= 0:
        raise ValueError(f"--lambda must be positive, got {value!r}")
    return lam


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Incidental Regression - penalized least squares with sparse incidental parameters",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Fit with the soft penalty at lambda = 2
  python cli.py fit --input data.csv --penalty soft --lambda 2

  # Choose lambda from the data
  python cli.py fit --input data.csv --penalty hard --lambda auto

  # Lambda selection report only
  python cli.py select-lambda --input data.csv --penalty soft --rule ci

  # Reproduce a simulation table
  python cli.py experiment --suite rmse --config configs/table2_setting4.json --out results/
        """
    )

    parser.add_argument('command', choices=['fit', 'experiment', 'select-lambda'],
                        help='Command to execute')
    parser.add_argument('--input', help='CSV file: header row, Y first, then the X columns')
    parser.add_argument('--config', help='Experiment config (JSON)')
    parser.add_argument('--suite', choices=SUITES, help='Experiment suite to run')
    parser.add_argument('--penalty', choices=['soft', 'hard'], default=None,
                        help='Penalty on the incidental parameters (default: soft)')
    parser.add_argument('--lambda', dest='lam', default=None,
                        help="Regularization parameter, or 'auto' for the data-driven choice")
    parser.add_argument('--alpha', type=float, default=None,
                        help='One minus the confidence level (default: 0.05)')
    parser.add_argument('--seed', type=int, default=None,
                        help='Random seed (default: 0, or the config seed)')
    parser.add_argument('--out', default='results', help='Output directory (default: results)')
    parser.add_argument('--threads', type=int, default=None,
                        help='Worker processes for experiments (default: $INCIDENTAL_THREADS or all CPUs)')
    parser.add_argument('--rule', choices=['procedure', 'ci'], default='procedure',
                        help='select-lambda rule (default: procedure)')
    parser.add_argument('--verbose', action='store_true', help='Debug logging')
    return parser


def usage_problem(args: argparse.Namespace) -> Optional[str]:
    """The first flag combination the commands cannot run with, if any."""
    if not 0 < args.alpha < 1:
        return "--alpha must lie in (0, 1)"
    if args.threads is not None and args.threads < 1:
        return "--threads must be at least 1"
    if args.command in ('fit', 'select-lambda') and not args.input:
        return f"{args.command} needs --input"
    if args.command == 'fit' and args.lam is None:
        return "fit needs --lambda (a number or 'auto')"
    if args.command == 'experiment' and not args.config:
        return "experiment needs --config"
    return None


def _out_dir(argv: List[str]) -> str:
    early = argparse.ArgumentParser(add_help=False)
    early.add_argument('--out', default='results')
    try:
        known, _ = early.parse_known_args(argv)
    except SystemExit:
        return 'results'
    return known.out


def main(argv: Optional[List[str]] = None) -> int:
    """Main CLI entry point."""
    load_dotenv()
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        if exc.code in (0, None):
            raise
        # argparse has already printed the usage message
        record = CliRunRecord(command=argv[0] if argv else '', config={'argv': argv}, seed=0,
                              exit_code=EXIT_USAGE, error="invalid command line")
        write_run_record(record, Path(_out_dir(argv)))
        return EXIT_USAGE

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format='%(asctime)s %(levelname)s %(name)s: %(message)s',
    )

    args.alpha_given = args.alpha is not None
    args.penalty_given = args.penalty is not None
    if args.alpha is None:
        args.alpha = 0.05
    if args.penalty is None:
        args.penalty = 'soft'

    cli = IncidentalCLI(args)
    problem = usage_problem(args)
    if problem is not None:
        parser.print_usage(sys.stderr)
        return cli.reject(problem)
    return cli.run()


if __name__ == '__main__':
    sys.exit(main())
