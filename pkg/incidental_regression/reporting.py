"""
Report writers: TSV tables, JSON summaries and the plain-text fit report.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from .data_models import (
    ConfidenceInterval, CoverageReport, FitResult, LambdaSelection, QQReport, RmseReport,
    SelectionReport, TwoStepResult,
)

logger = logging.getLogger(__name__)

REPORT_SCHEMA = 'incidental-report/1'
FLOAT_FORMAT = '%.6f'
NA_REP = 'NA'

PathLike = Union[str, Path]


class NumpyEncoder(json.JSONEncoder):
    """JSON encoder for numpy types."""
    def default(self, obj):
        if isinstance(obj, np.integer):
            return int(obj)
        elif isinstance(obj, np.floating):
            return float(obj)
        elif isinstance(obj, np.ndarray):
            return obj.tolist()
        elif isinstance(obj, np.bool_):
            return bool(obj)
        elif isinstance(obj, Path):
            return str(obj)
        return super().default(obj)


def write_tsv(frame: pd.DataFrame, path: PathLike) -> Path:
    """Tab-separated, fixed float format, no index."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, sep='\t', index=False, float_format=FLOAT_FORMAT, na_rep=NA_REP)
    logger.debug("wrote %s (%d rows)", path, len(frame))
    return path


def write_json_summary(payload: Dict[str, Any], path: PathLike) -> Path:
    """JSON with a top-level schema string and sorted keys."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    document = {'schema': REPORT_SCHEMA, **payload}
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(document, f, cls=NumpyEncoder, indent=2, sort_keys=True)
        f.write('\n')
    return path


def _rows_frame(rows) -> pd.DataFrame:
    return pd.DataFrame(
        [(row.method, row.target, np.nan if row.lam is None else row.lam,
          row.bias, row.rmse, row.reps_used) for row in rows],
        columns=['method', 'target', 'lambda', 'bias', 'rmse', 'reps_used'],
    )


def rmse_frame(report: RmseReport) -> pd.DataFrame:
    """One row per method x target x lambda."""
    return _rows_frame(report.rows)


def minimal_rmse_frame(report: RmseReport) -> pd.DataFrame:
    """Rows at each method's RMSE-minimizing lambda."""
    return _rows_frame([row for rows in report.minimal.values() for row in rows])


def write_rmse_report(report: RmseReport, out_dir: PathLike, name: str = 'rmse') -> List[Path]:
    out_dir = Path(out_dir)
    minimal = minimal_rmse_frame(report)
    summary = {
        'suite': 'rmse',
        'name': name,
        'reps': report.reps,
        'failures': report.failures,
        'nonconverged': report.nonconverged,
        'minimal': {
            label: {row.target: {'bias': row.bias, 'rmse': row.rmse, 'lambda': row.lam}
                    for row in rows}
            for label, rows in report.minimal.items()
        },
    }
    return [
        write_tsv(rmse_frame(report), out_dir / f'{name}.tsv'),
        write_tsv(minimal, out_dir / f'{name}_minimal.tsv'),
        write_json_summary(summary, out_dir / f'{name}_summary.json'),
    ]


def coverage_frame(report: CoverageReport) -> pd.DataFrame:
    records = []
    for a, p2 in enumerate(report.p2_grid):
        for b, p1 in enumerate(report.p1_grid):
            records.append((p1, p2, report.coverage[a, b], report.mc_se[a, b],
                            int(report.reps_used[a, b]), int(report.failures[a, b])))
    return pd.DataFrame(records, columns=['p1', 'p2', 'coverage', 'mc_se', 'reps_used', 'failures'])


def write_coverage_report(report: CoverageReport, out_dir: PathLike, name: str = 'coverage') -> List[Path]:
    out_dir = Path(out_dir)
    summary = {
        'suite': 'coverage',
        'name': name,
        'alpha': report.alpha,
        'component': report.component,
        'p1_grid': report.p1_grid,
        'p2_grid': report.p2_grid,
        'coverage': report.coverage,
        'failures': int(report.failures.sum()),
    }
    return [
        write_tsv(coverage_frame(report), out_dir / f'{name}.tsv'),
        write_json_summary(summary, out_dir / f'{name}_summary.json'),
    ]


def write_qq_report(report: QQReport, out_dir: PathLike, name: str = 'qq') -> List[Path]:
    out_dir = Path(out_dir)
    hat = pd.DataFrame({'empirical': report.beta_hat, 'theoretical': report.theoretical_hat})
    tilde = pd.DataFrame({'empirical': report.beta_tilde, 'theoretical': report.theoretical_tilde})
    summary = {
        'suite': 'qq',
        'name': name,
        'component': report.component,
        'lambda': report.lam,
        'draws': int(report.beta_hat.size),
        'failures': report.failures,
        'ks_beta_hat': {'statistic': report.ks_hat[0], 'pvalue': report.ks_hat[1]},
        'ks_beta_tilde': {'statistic': report.ks_tilde[0], 'pvalue': report.ks_tilde[1]},
    }
    return [
        write_tsv(hat, out_dir / f'{name}_beta_hat.tsv'),
        write_tsv(tilde, out_dir / f'{name}_beta_tilde.tsv'),
        write_json_summary(summary, out_dir / f'{name}_summary.json'),
    ]


def write_selection_report(report: SelectionReport, out_dir: PathLike,
                           name: str = 'selection') -> List[Path]:
    summary = {
        'suite': 'selection',
        'name': name,
        'frequency': report.frequency,
        'mc_se': report.mc_se,
        'reps_used': report.reps_used,
        'failures': report.failures,
        'lambda': report.lam,
        'threshold': report.threshold,
    }
    return [write_json_summary(summary, Path(out_dir) / f'{name}_summary.json')]


def lambda_curve_frame(selection: LambdaSelection) -> pd.DataFrame:
    return pd.DataFrame(selection.test_loss_curve, columns=['lambda', 'test_loss'])


def sparse_mu_frame(result: FitResult) -> pd.DataFrame:
    """Nonzero entries of mu_hat as (index, value)."""
    indices = result.active_set.indices
    return pd.DataFrame({'index': indices, 'value': result.mu[indices]})


def generate_fit_report(result: FitResult, refit: Optional[TwoStepResult] = None,
                        intervals: Sequence[ConfidenceInterval] = (),
                        selection: Optional[LambdaSelection] = None,
                        source: str = '') -> str:
    """
    Human-readable summary of a penalized fit and its two-step refit.

    Args:
        result: Penalized fit
        refit: Two-step refit, if computed
        intervals: Per-component intervals for beta
        selection: Data-driven lambda selection, if lambda was chosen automatically
        source: Input file name

    Returns:
        Formatted text report
    """
    report = []
    report.append("=" * 70)
    report.append("PENALIZED LEAST SQUARES FIT")
    report.append("=" * 70)
    report.append("")
    if source:
        report.append(f"Input: {source}")
    n = result.mu.shape[0]
    report.append(f"Observations: {n}    Covariates: {result.beta.shape[0]}")
    report.append(f"Penalty: {result.penalty.kind.value}    lambda = {result.penalty.lam:.6g}")
    if selection is not None:
        report.append(f"lambda chosen from [{selection.lambda_low:.6g}, {selection.lambda_high:.6g}]"
                      + (" (lower bound clamped)" if selection.clamped else ""))
    status = "converged" if result.converged else "NOT converged"
    report.append(f"Solver: {status} after {result.iterations} iterations, "
                  f"objective {result.objective:.10g}")
    report.append("")

    report.append("COEFFICIENTS")
    report.append("-" * 70)
    for j, value in enumerate(result.beta):
        line = f"  beta_{j + 1}: {value: .6f}"
        if refit is not None:
            line += f"    two-step: {refit.beta_tilde[j]: .6f}"
        if j < len(intervals):
            ci = intervals[j]
            line += f"    {100 * ci.level:.0f}% CI [{ci.lower: .6f}, {ci.upper: .6f}]"
        report.append(line)
    report.append("")

    report.append("INCIDENTAL PARAMETERS")
    report.append("-" * 70)
    report.append(f"Nonzero mu_hat: {len(result.active_set)} of {n}")
    for index in result.active_set.indices[:20]:
        report.append(f"    {index}: {result.mu[index]: .6f}")
    if len(result.active_set) > 20:
        report.append(f"    ... {len(result.active_set) - 20} more")
    if refit is not None:
        report.append(f"Refit sample size m = {refit.m}, sigma_hat = {refit.sigma_hat:.6f}")

    report.append("")
    report.append("=" * 70)
    return "\n".join(report)
