"""
Monte Carlo engine for the estimator comparisons.

Data generation, the OLS/oracle/LAD baselines, and the RMSE, coverage, QQ
and partial-selection experiments. Replicate r draws from its own stream
SeedSequence(seed, spawn_key=(r,)), so every experiment is a pure function
of its config and the replicate results can be computed in any order.
"""

import logging
from dataclasses import replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed
from scipy import stats

from .data_models import (
    CoverageReport, Dataset, ExperimentConfig, Method, MuMechanism, Penalty, PenaltyKind,
    QQReport, RmseReport, RmseRow, SelectionReport, SolverConfig,
)
from .exceptions import IncidentalRegressionError
from .inference import component_interval, oracle_fit, partial_selection_event, two_step_fit
from .lambda_select import ci_lambda, data_driven_lambda
from .linalg_core import LeastSquaresFactor, psd_power
from .penalized_estimator import fit

logger = logging.getLogger(__name__)

# Errors that disqualify one replicate of one method.
REPLICATE_ERRORS = (IncidentalRegressionError, np.linalg.LinAlgError, ValueError)

LAD_FLOOR = 1e-6
LAD_MAX_ITER = 200

# Seeds scanned by matched_incidental.
MATCH_SEEDS = 20000

DEFAULT_P1_GRID = np.round(np.arange(0.01, 0.16, 0.02), 2)
DEFAULT_P2_GRID = np.round(np.arange(0.01, 0.10, 0.02), 2)


def replicate_rng(seed: int, rep: int) -> np.random.Generator:
    """Independent generator for replicate `rep` of an experiment seeded with `seed`."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(rep,)))


def gen_incidental(mech: MuMechanism, n: int, rng: np.random.Generator) -> np.ndarray:
    """
    Draw n incidental parameters from the three-branch mixture.

    The generator is consumed in a fixed order regardless of the mechanism:
    n branch uniforms, n sign uniforms, n exponentials (mean tau) and n
    Uniform[-c, c] draws. Branch k is chosen by comparing the first uniform
    to the cumulative probabilities (p0, p0 + p1).

    Args:
        mech: Mixture parameters
        n: Number of draws
        rng: numpy Generator

    Returns:
        Vector of length n
    """
    branch = rng.random(n)
    sign_draw = rng.random(n)
    excess = rng.exponential(mech.tau, n)
    spread = rng.uniform(-mech.c, mech.c, n)

    signs = np.where(sign_draw < mech.p_w, 1.0, -1.0)
    mu = np.zeros(n)
    large = (branch >= mech.p0) & (branch < mech.p0 + mech.p1)
    uniform = branch >= mech.p0 + mech.p1
    mu[large] = signs[large] * (mech.c + excess[large])
    mu[uniform] = spread[uniform]
    return mu


def frozen_incidental(mech: MuMechanism, n: int, seed: int) -> np.ndarray:
    """One mechanism draw at a dedicated seed, for fixed-mu* experiments."""
    return gen_incidental(mech, n, np.random.default_rng(seed))


def matched_incidental(mech: MuMechanism, n: int, mean_square: float, nonzero: int,
                       seeds: int = MATCH_SEEDS) -> Tuple[int, np.ndarray]:
    """
    The frozen draw whose scale best matches a target realization.

    Scans seeds 0..seeds-1 and keeps the draw minimizing
    |mean(mu^2) / mean_square - 1| + |#{mu != 0} - nonzero| / nonzero;
    the first seed wins ties.

    Returns:
        (seed, mu)
    """
    if mean_square <= 0 or nonzero < 1 or seeds < 1:
        raise ValueError("mean_square and nonzero must be positive, seeds at least 1")
    best_seed, best_score = 0, np.inf
    for seed in range(seeds):
        mu = frozen_incidental(mech, n, seed)
        score = (abs(float(np.mean(mu ** 2)) / mean_square - 1.0)
                 + abs(int(np.count_nonzero(mu)) - nonzero) / nonzero)
        if score < best_score:
            best_seed, best_score = seed, score
    mu = frozen_incidental(mech, n, best_seed)
    logger.info("matched frozen draw: seed %d, mean(mu^2)=%.3f, %d nonzero",
                best_seed, float(np.mean(mu ** 2)), int(np.count_nonzero(mu)))
    return best_seed, mu


def gen_dataset(config: ExperimentConfig, rep: int):
    """
    Generate replicate `rep` of an experiment.

    X rows are N(0, x_cov) via the symmetric square root of x_cov, errors are
    N(0, sigma^2) and mu* comes from mu_fixed when set, else from the
    mechanism. Draw order: X, then eps, then mu*.

    Returns:
        (Dataset, mu_true)
    """
    rng = replicate_rng(config.seed, rep)
    root = psd_power(config.x_cov, 0.5)
    X = rng.standard_normal((config.n, config.d)) @ root
    eps = config.sigma * rng.standard_normal(config.n)
    if config.mu_fixed is not None:
        mu_true = config.mu_fixed.copy()
    else:
        mu_true = gen_incidental(config.mu, config.n, rng)
    Y = mu_true + X @ config.beta_star + eps
    return Dataset(X, Y), mu_true


def lad_objective(data: Dataset, beta: np.ndarray) -> float:
    return float(np.sum(np.abs(data.residuals(beta))))


def lad_fit(data: Dataset, max_iter: int = LAD_MAX_ITER, floor: float = LAD_FLOOR,
            tol: float = 1e-8, full_output: bool = False):
    """
    Least absolute deviation regression by iteratively reweighted least squares.

    Starts from OLS and reweights by 1 / max(|r_i|, floor). The iterate with
    the smallest absolute-deviation objective is returned, so the result is
    never worse than OLS.

    Args:
        data: Observations
        max_iter: Iteration cap
        floor: Smoothing floor on |residual|
        tol: Relative objective change that ends the iteration
        full_output: Also return whether the tolerance was met

    Returns:
        Coefficient vector of length d, or (beta, converged) with full_output
    """
    beta = data.factor.solve(data.Y)
    best_beta, best_value = beta, lad_objective(data, beta)
    previous = best_value
    converged = False

    for iteration in range(1, max_iter + 1):
        weights = np.sqrt(1.0 / np.maximum(np.abs(data.residuals(beta)), floor))
        beta = LeastSquaresFactor(data.X * weights[:, None]).solve(data.Y * weights)
        value = lad_objective(data, beta)
        if value < best_value:
            best_beta, best_value = beta, value
        if abs(previous - value) <= tol * max(previous, 1.0):
            logger.debug("LAD converged after %d iterations", iteration)
            converged = True
            break
        previous = value
    else:
        logger.warning("LAD stopped after %d iterations without meeting tol=%g", max_iter, tol)

    return (best_beta, converged) if full_output else best_beta


# ---------------------------------------------------------------------------
# Replicate runner
# ---------------------------------------------------------------------------

def _run_replicates(task: Callable, reps: int, n_jobs: int, *args) -> List:
    """task(*args, rep) for rep in range(reps), results in replicate order."""
    return Parallel(n_jobs=n_jobs)(delayed(task)(*args, rep) for rep in range(reps))


def _grid_estimates(data: Dataset, kind: PenaltyKind, grid: np.ndarray,
                    one_step: bool, two_step: bool) -> Dict[Method, np.ndarray]:
    """Estimates at every grid lambda; rows of failed fits are NaN."""
    plain = np.full((grid.size, data.d), np.nan)
    refit = np.full((grid.size, data.d), np.nan)
    for k, lam in enumerate(grid):
        try:
            result = fit(data, Penalty(kind, lam))
        except REPLICATE_ERRORS as exc:
            logger.debug("%s fit failed at lambda=%.4g: %s", kind.value, lam, exc)
            continue
        plain[k] = result.beta
        if two_step:
            try:
                refit[k] = two_step_fit(data, result).beta_tilde
            except REPLICATE_ERRORS as exc:
                logger.debug("two-step refit failed at lambda=%.4g: %s", lam, exc)

    estimates = {}
    if kind is PenaltyKind.SOFT:
        one_method, two_method = Method.SOFT_PLS, Method.SOFT_TWO_STEP
    else:
        one_method, two_method = Method.HARD_PLS, Method.HARD_TWO_STEP
    if one_step:
        estimates[one_method] = plain
    if two_step:
        estimates[two_method] = refit
    return estimates


def _rmse_replicate(config: ExperimentConfig, rep: int) -> Tuple[Dict[Method, Optional[np.ndarray]], bool]:
    """Estimates per method, and whether LAD met its tolerance (True when LAD is not run)."""
    data, mu_true = gen_dataset(config, rep)
    methods = set(config.methods)
    estimates: Dict[Method, Optional[np.ndarray]] = {}
    lad_converged = True

    def lad():
        nonlocal lad_converged
        beta, lad_converged = lad_fit(data, full_output=True)
        return beta

    baselines = {
        Method.ORACLE: lambda: oracle_fit(data, mu_true),
        Method.OLS: lambda: data.factor.solve(data.Y),
        Method.LAD: lad,
    }
    for method, estimator in baselines.items():
        if method in methods:
            try:
                estimates[method] = estimator()
            except REPLICATE_ERRORS as exc:
                logger.debug("replicate %d: %s failed: %s", rep, method.label, exc)
                estimates[method] = None

    for kind, one_method, two_method in (
        (PenaltyKind.HARD, Method.HARD_PLS, Method.HARD_TWO_STEP),
        (PenaltyKind.SOFT, Method.SOFT_PLS, Method.SOFT_TWO_STEP),
    ):
        if one_method in methods or two_method in methods:
            estimates.update(_grid_estimates(
                data, kind, config.grid_for(kind),
                one_step=one_method in methods, two_step=two_method in methods,
            ))

    procedure = replace(config.lambda_procedure, seed=config.lambda_procedure.seed + rep)
    for kind, method in ((PenaltyKind.HARD, Method.HARD_PRACTICAL),
                         (PenaltyKind.SOFT, Method.SOFT_PRACTICAL)):
        if method in methods:
            try:
                selection = data_driven_lambda(data, kind, procedure)
                start = SolverConfig(beta_init=selection.beta_pure)
                estimates[method] = fit(data, Penalty(kind, selection.lambda_opt), start).beta
            except REPLICATE_ERRORS as exc:
                logger.debug("replicate %d: %s failed: %s", rep, method.label, exc)
                estimates[method] = None

    return estimates, lad_converged


def _error_rows(method: Method, errors: np.ndarray, lam: Optional[float]) -> List[RmseRow]:
    """Bias/RMSE rows for each component and for the full vector; errors is (R, d)."""
    errors = errors[np.all(np.isfinite(errors), axis=1)]
    used = errors.shape[0]
    if used == 0:
        nan_rows = [RmseRow(method.label, f"beta_{j + 1}", lam, np.nan, np.nan, 0)
                    for j in range(errors.shape[1])]
        return nan_rows + [RmseRow(method.label, 'beta', lam, np.nan, np.nan, 0)]

    mean_error = errors.mean(axis=0)
    rows = [
        RmseRow(method.label, f"beta_{j + 1}", lam,
                float(mean_error[j]), float(np.sqrt(np.mean(errors[:, j] ** 2))), used)
        for j in range(errors.shape[1])
    ]
    rows.append(RmseRow(method.label, 'beta', lam, float(np.linalg.norm(mean_error)),
                        float(np.sqrt(np.mean(np.sum(errors ** 2, axis=1)))), used))
    return rows


def rmse_experiment(config: ExperimentConfig, n_jobs: int = 1) -> RmseReport:
    """
    Bias and RMSE of every configured method.

    Grid methods are evaluated at every lambda of their grid; `minimal`
    keeps, per method, the rows at the lambda minimizing RMSE of the full
    vector. Failed replicates are counted per method and left out.

    Args:
        config: Experiment setting
        n_jobs: Worker processes for replicates

    Returns:
        RmseReport
    """
    logger.info("RMSE experiment: n=%d, d=%d, reps=%d, methods=%s",
                config.n, config.d, config.reps, ','.join(m.label for m in config.methods))
    outcomes = _run_replicates(_rmse_replicate, config.reps, n_jobs, config)
    replicates = [estimates for estimates, _ in outcomes]
    lad_stalled = sum(1 for _, converged in outcomes if not converged)

    rows: List[RmseRow] = []
    minimal: Dict[str, List[RmseRow]] = {}
    failures: Dict[str, int] = {}

    for method in config.methods:
        draws = [replicate.get(method) for replicate in replicates]
        if method.uses_lambda_grid:
            grid = config.grid_for(method.penalty_kind)
            failures[method.label] = sum(
                1 for draw in draws if draw is None or not np.all(np.isfinite(draw))
            )
            stacked = np.stack([draw for draw in draws if draw is not None])
            curve = [_error_rows(method, stacked[:, k, :] - config.beta_star, float(lam))
                     for k, lam in enumerate(grid)]
            for block in curve:
                rows.extend(block)
            full_rmse = np.array([block[-1].rmse for block in curve])
            if np.all(np.isnan(full_rmse)):
                minimal[method.label] = curve[0]
            else:
                minimal[method.label] = curve[int(np.nanargmin(full_rmse))]
        else:
            failures[method.label] = sum(1 for draw in draws if draw is None)
            valid = [draw for draw in draws if draw is not None]
            errors = (np.stack(valid) - config.beta_star) if valid else np.empty((0, config.d))
            block = _error_rows(method, errors, None)
            rows.extend(block)
            minimal[method.label] = block

    for label, count in failures.items():
        if count:
            logger.warning("%s: %d of %d replicates failed", label, count, config.reps)

    if lad_stalled:
        logger.warning("%s: %d of %d replicates stopped at the iteration cap",
                       Method.LAD.label, lad_stalled, config.reps)
    nonconverged = {Method.LAD.label: lad_stalled} if Method.LAD in config.methods else {}

    return RmseReport(rows=rows, minimal=minimal, failures=failures, reps=config.reps,
                      nonconverged=nonconverged)


def _cell_config(config: ExperimentConfig, p1: float, p2: float) -> ExperimentConfig:
    mechanism = replace(config.mu, p0=float(1.0 - p1 - p2), p1=float(p1), p2=float(p2))
    return replace(config, mu=mechanism, mu_fixed=None)


def _coverage_replicate(config: ExperimentConfig, alpha: float, component: int,
                        rep: int) -> Optional[bool]:
    data, _ = gen_dataset(config, rep)
    try:
        lam = ci_lambda(data, config.lambda_procedure)
        result = two_step_fit(data, fit(data, Penalty.soft(lam)))
        interval = component_interval(result, component, alpha)
    except REPLICATE_ERRORS as exc:
        logger.debug("coverage replicate %d failed: %s", rep, exc)
        return None
    return interval.contains(float(config.beta_star[component]))


def coverage_experiment(config: ExperimentConfig, alpha: float = 0.05,
                        p1_grid: Optional[Sequence[float]] = None,
                        p2_grid: Optional[Sequence[float]] = None,
                        component: int = 0, n_jobs: int = 1) -> CoverageReport:
    """
    Empirical coverage of the two-step component interval over a (p1, p2) grid.

    Each replicate picks lambda by the six-standard-deviation rule, fits the
    soft penalty, refits on I0 and records whether the interval for
    beta*_component contains the truth. All cells share the replicate
    streams of `config.seed`.

    Returns:
        CoverageReport with matrices indexed [p2, p1]
    """
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if not 0 <= component < config.d:
        raise IndexError(f"component {component} out of range for d={config.d}")
    p1_grid = np.asarray(DEFAULT_P1_GRID if p1_grid is None else p1_grid, dtype=float)
    p2_grid = np.asarray(DEFAULT_P2_GRID if p2_grid is None else p2_grid, dtype=float)

    shape = (p2_grid.size, p1_grid.size)
    coverage = np.full(shape, np.nan)
    mc_se = np.full(shape, np.nan)
    reps_used = np.zeros(shape, dtype=int)
    failures = np.zeros(shape, dtype=int)

    for a, p2 in enumerate(p2_grid):
        for b, p1 in enumerate(p1_grid):
            cell = _cell_config(config, p1, p2)
            outcomes = _run_replicates(_coverage_replicate, config.reps, n_jobs,
                                       cell, alpha, component)
            hits = np.array([outcome for outcome in outcomes if outcome is not None], dtype=float)
            failures[a, b] = len(outcomes) - hits.size
            reps_used[a, b] = hits.size
            if hits.size:
                rate = hits.mean()
                coverage[a, b] = rate
                mc_se[a, b] = np.sqrt(rate * (1.0 - rate) / hits.size)
            logger.info("coverage p1=%.2f p2=%.2f: %.3f (%d reps, %d failed)",
                        p1, p2, coverage[a, b], hits.size, failures[a, b])

    return CoverageReport(
        p1_grid=p1_grid, p2_grid=p2_grid, coverage=coverage, mc_se=mc_se,
        reps_used=reps_used, failures=failures, alpha=alpha, component=component,
    )


def _qq_replicate(config: ExperimentConfig, penalty: Penalty, component: int, rep: int):
    data, _ = gen_dataset(config, rep)
    try:
        first = fit(data, penalty)
        refit = two_step_fit(data, first)
        spread = np.sqrt(np.linalg.inv(refit.gram_hat)[component, component]) * refit.sigma_hat
    except REPLICATE_ERRORS as exc:
        logger.debug("QQ replicate %d failed: %s", rep, exc)
        return None
    if not spread > 0:
        return None
    truth = config.beta_star[component]
    hat = np.sqrt(data.n) * (first.beta[component] - truth) / spread
    tilde = np.sqrt(refit.m) * (refit.beta_tilde[component] - truth) / spread
    return float(hat), float(tilde)


def normal_scores(size: int) -> np.ndarray:
    """N(0, 1) quantiles at the plotting positions (i - 0.5) / size."""
    return stats.norm.ppf((np.arange(1, size + 1) - 0.5) / size)


def qq_experiment(config: ExperimentConfig, lam: float, component: int = 0,
                  penalty_kind: PenaltyKind = PenaltyKind.SOFT, n_jobs: int = 1) -> QQReport:
    """
    Standardized draws of beta_hat_j and beta_tilde_j against N(0, 1).

    beta_tilde_j is scaled by sqrt(m) and beta_hat_j by sqrt(n); both by
    sigma_hat^{-1} (Sigma_hat^{-1})_jj^{-1/2}. Samples are sorted and paired
    with normal quantiles; the KS statistic and p-value against N(0, 1) are
    reported for each.
    """
    if not 0 <= component < config.d:
        raise IndexError(f"component {component} out of range for d={config.d}")
    penalty = Penalty(penalty_kind, lam)
    outcomes = _run_replicates(_qq_replicate, config.reps, n_jobs, config, penalty, component)
    valid = [outcome for outcome in outcomes if outcome is not None]
    failures = len(outcomes) - len(valid)
    if failures:
        logger.warning("QQ experiment: %d of %d replicates failed", failures, config.reps)
    if not valid:
        raise IncidentalRegressionError("every QQ replicate failed")

    hat = np.sort(np.array([pair[0] for pair in valid]))
    tilde = np.sort(np.array([pair[1] for pair in valid]))
    scores = normal_scores(len(valid))
    ks_hat = stats.kstest(hat, 'norm')
    ks_tilde = stats.kstest(tilde, 'norm')

    return QQReport(
        component=component,
        lam=float(lam),
        beta_hat=hat,
        beta_tilde=tilde,
        theoretical_hat=scores,
        theoretical_tilde=scores.copy(),
        ks_hat=(float(ks_hat.statistic), float(ks_hat.pvalue)),
        ks_tilde=(float(ks_tilde.statistic), float(ks_tilde.pvalue)),
        failures=failures,
    )


def _selection_replicate(config: ExperimentConfig, penalty: Penalty,
                         threshold: float, rep: int) -> Optional[bool]:
    data, mu_true = gen_dataset(config, rep)
    try:
        result = fit(data, penalty)
    except REPLICATE_ERRORS as exc:
        logger.debug("selection replicate %d failed: %s", rep, exc)
        return None
    return partial_selection_event(result, mu_true, threshold)


def selection_experiment(config: ExperimentConfig, lam: float, threshold: Optional[float] = None,
                         penalty_kind: PenaltyKind = PenaltyKind.SOFT,
                         n_jobs: int = 1) -> SelectionReport:
    """
    Frequency with which mu_hat is nonzero exactly where |mu*_i| > threshold.

    The threshold defaults to lam.
    """
    threshold = float(lam if threshold is None else threshold)
    penalty = Penalty(penalty_kind, lam)
    outcomes = _run_replicates(_selection_replicate, config.reps, n_jobs,
                               config, penalty, threshold)
    events = np.array([outcome for outcome in outcomes if outcome is not None], dtype=float)
    failures = len(outcomes) - events.size
    if events.size == 0:
        raise IncidentalRegressionError("every selection replicate failed")
    frequency = float(events.mean())
    logger.info("partial selection frequency %.3f over %d replicates", frequency, events.size)
    return SelectionReport(
        frequency=frequency,
        mc_se=float(np.sqrt(frequency * (1.0 - frequency) / events.size)),
        reps_used=int(events.size),
        failures=failures,
        lam=float(lam),
        threshold=threshold,
    )
