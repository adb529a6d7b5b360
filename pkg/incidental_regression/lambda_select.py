"""
Regularization parameter selection.

Closed-form (kappa_n, gamma_n) bounds for Gaussian and bounded designs, the
data-driven search over [lambda_L, lambda_U] scored on a held-out "pure"
test set, and the six-standard-error rule used for confidence intervals.
"""

import logging
import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional, Tuple

import numpy as np
from joblib import Parallel, delayed

from .data_models import (
    Dataset, IndexSet, LambdaProcedureConfig, LambdaSelection, Penalty, PenaltyKind, SolverConfig,
)
from .exceptions import DegenerateInterval
from .linalg_core import subset_ols
from .penalized_estimator import fit

logger = logging.getLogger(__name__)

CI_MULTIPLIER = 6.0

# Residual scales below this fraction of max|Y| count as an exact fit.
SCALE_FLOOR = 1e-10


class Regime(str, Enum):
    """Covariate/error families with closed-form thresholds."""
    BOUNDED_X_GAUSS_ERR = 'bounded_x_gauss_err'
    GAUSS_X_GAUSS_ERR = 'gauss_x_gauss_err'


def gaussian_spec_bounds(n: int, d: int, sigma: float, sigma_x: float,
                         regime: Regime = Regime.GAUSS_X_GAUSS_ERR) -> Tuple[float, float]:
    """
    Closed-form (gamma_n, kappa_n).

    gamma_n = sqrt(2 sigma^2 log n) in both regimes. kappa_n is
    sqrt(2 d sigma_x^2 log n) for Gaussian covariates and sqrt(d) C_X for
    covariates bounded by C_X, where sigma_x plays the role of C_X.

    Args:
        n: Sample size (>= 2)
        d: Number of covariates
        sigma: Error standard deviation
        sigma_x: Largest covariate standard deviation, or the bound C_X
        regime: Which closed form to use
    """
    if n < 2:
        raise ValueError(f"n must be at least 2, got {n}")
    log_n = math.log(n)
    gamma_n = math.sqrt(2.0 * sigma ** 2 * log_n)
    if Regime(regime) is Regime.GAUSS_X_GAUSS_ERR:
        kappa_n = math.sqrt(2.0 * d * sigma_x ** 2 * log_n)
    else:
        kappa_n = math.sqrt(d) * sigma_x
    return gamma_n, kappa_n


def theoretical_lambda_window(gamma_n: float, n: int, mu_min: float,
                              alpha: float = 2.5) -> Tuple[float, float]:
    """
    The window alpha gamma_n <= lambda << min(mu_min, sqrt(n)).

    Returns the pair (alpha gamma_n, min(mu_min, sqrt(n))); the window is
    empty when the first entry is not below the second.
    """
    if alpha <= 2:
        raise ValueError("alpha must exceed 2")
    return alpha * gamma_n, min(mu_min, math.sqrt(n))


@dataclass
class PureSplit:
    """Result of the OLS-refit screening (steps one to four)."""
    pure: IndexSet
    beta: np.ndarray  # OLS refit on the first pure set
    residuals: np.ndarray  # residuals of the refit on all n rows
    sigma_pure: float


def _negligible(scale: float, data: Dataset) -> bool:
    return not scale > SCALE_FLOOR * max(1.0, float(np.max(np.abs(data.Y))))


def nearest_rank_quantile(values: np.ndarray, q: float) -> float:
    """Nearest-rank q quantile: the ceil(q n)-th smallest value."""
    ordered = np.sort(np.asarray(values, dtype=float))
    # q n can land a hair above an integer in floating point (0.07 * 100)
    rank = max(1, math.ceil(q * ordered.size - 1e-12))
    return float(ordered[rank - 1])


def pure_split(data: Dataset, config: LambdaProcedureConfig) -> PureSplit:
    """
    Screen for the "pure" observations.

    OLS on all rows, keep the n_pure smallest absolute residuals, refit OLS on
    them, and re-select the n_pure smallest absolute residuals of the refit.
    """
    n_pure = int(round(config.pure_fraction * data.n))
    if n_pure <= data.d:
        raise ValueError(f"pure set of size {n_pure} is too small for d={data.d}")

    first = data.residuals(data.factor.solve(data.Y))
    initial = IndexSet.from_unsorted(np.argsort(np.abs(first), kind='stable')[:n_pure], data.n)
    refit = subset_ols(data, initial)
    residuals = data.residuals(refit)
    pure = IndexSet.from_unsorted(np.argsort(np.abs(residuals), kind='stable')[:n_pure], data.n)
    sigma_pure = float(np.std(residuals[pure.indices], ddof=1))
    return PureSplit(pure=pure, beta=refit, residuals=residuals, sigma_pure=sigma_pure)


def _test_loss(data: Dataset, training: Dataset, test_rows: np.ndarray,
               penalty: Penalty, solver: SolverConfig) -> float:
    beta = fit(training, penalty, solver).beta
    residuals = data.Y[test_rows] - data.X[test_rows] @ beta
    return float(residuals @ residuals)


def data_driven_lambda(data: Dataset, penalty_kind: PenaltyKind,
                       config: Optional[LambdaProcedureConfig] = None,
                       solver: Optional[SolverConfig] = None,
                       n_jobs: int = 1) -> LambdaSelection:
    """
    Pick lambda by held-out loss on a subset of the pure observations.

    Args:
        data: Observations
        penalty_kind: Penalty used for the grid fits
        config: Procedure settings
        solver: Stopping rule for the grid fits; its beta_init is replaced by the pure refit
        n_jobs: Worker threads for the grid fits

    Returns:
        LambdaSelection with lambda_opt, the interval and the test-loss curve

    Raises:
        DegenerateInterval: if no nonempty interval [lambda_L, lambda_U] exists
    """
    config = config or LambdaProcedureConfig()
    penalty_kind = PenaltyKind(penalty_kind)
    split = pure_split(data, config)

    rng = np.random.default_rng(config.seed)
    shuffled = rng.permutation(split.pure.indices)
    n_test = max(1, int(round(config.test_fraction * len(split.pure))))
    test_set = IndexSet.from_unsorted(shuffled[:n_test], data.n)
    training_set = test_set.complement()
    if len(training_set) <= data.d:
        raise ValueError("training set is too small after holding out the test rows")

    lambda_high = nearest_rank_quantile(np.abs(split.residuals), config.quantile_q)
    if _negligible(lambda_high, data):
        raise DegenerateInterval(
            "upper bound lambda_U is zero; residuals of the pure refit vanish",
            lambda_low=0.0, lambda_high=lambda_high,
        )
    if penalty_kind is PenaltyKind.HARD:
        lambda_low = config.alpha_L * split.sigma_pure
    else:
        lambda_low = config.soft_lambda_L
    clamped = False
    if not lambda_low < lambda_high:
        logger.warning("lambda_L=%.4g >= lambda_U=%.4g; falling back to lambda_U/10",
                       lambda_low, lambda_high)
        lambda_low = lambda_high / 10.0
        clamped = True
    if not 0 < lambda_low < lambda_high:
        raise DegenerateInterval(
            f"empty lambda interval [{lambda_low:.4g}, {lambda_high:.4g}]",
            lambda_low=lambda_low, lambda_high=lambda_high,
        )

    grid = np.geomspace(lambda_low, lambda_high, config.grid_size)
    training = Dataset(data.X[training_set.indices], data.Y[training_set.indices])
    # grid fits start from the pure refit; from zero, a hard fit at small lambda
    # absorbs every row into mu and stays at beta = 0
    solver = replace(solver or SolverConfig(), beta_init=split.beta)
    losses = Parallel(n_jobs=n_jobs, backend='threading')(
        delayed(_test_loss)(data, training, test_set.indices, Penalty(penalty_kind, lam), solver)
        for lam in grid
    )
    losses = np.asarray(losses)
    best = int(np.argmin(losses))  # first minimum, i.e. smallest lambda on ties
    logger.debug("lambda grid [%.4g, %.4g]: optimum %.4g (test loss %.6g)",
                 lambda_low, lambda_high, grid[best], losses[best])

    return LambdaSelection(
        lambda_opt=float(grid[best]),
        lambda_low=float(grid[0]),
        lambda_high=float(grid[-1]),
        test_loss_curve=[(float(lam), float(loss)) for lam, loss in zip(grid, losses)],
        pure_set=split.pure,
        test_set=test_set,
        training_set=training_set,
        sigma_pure=split.sigma_pure,
        clamped=clamped,
        beta_pure=split.beta,
    )


def ci_lambda(data: Dataset, config: Optional[LambdaProcedureConfig] = None,
              multiplier: float = CI_MULTIPLIER) -> float:
    """Six times the standard deviation of the pure-set refit residuals."""
    config = config or LambdaProcedureConfig()
    split = pure_split(data, config)
    lam = multiplier * split.sigma_pure
    if _negligible(split.sigma_pure, data):
        raise DegenerateInterval("pure-set residual deviation is zero", lambda_low=0.0, lambda_high=0.0)
    return float(lam)
