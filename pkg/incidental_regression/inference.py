"""
Two-step refitting, variance estimation and Wald-type confidence sets.
"""

import logging
from typing import Optional

import numpy as np
from scipy import stats

from .data_models import (
    ConfidenceInterval, Dataset, FitResult, IndexSet, LinearMap, TwoStepResult,
)
from .exceptions import DimensionMismatch, EmptySubset, RankDeficientMap, SingularGram
from .linalg_core import is_invertible_psd, psd_power, sample_gram, subset_ols

logger = logging.getLogger(__name__)


def two_step_fit(data: Dataset, first_stage: FitResult, dof_correction: bool = False) -> TwoStepResult:
    """
    Refit OLS on I0 = {i : mu_hat_i == 0}.

    Args:
        data: Observations used for the first stage
        first_stage: Penalized fit supplying mu_hat
        dof_correction: Divide the residual sum of squares by m - d instead of m

    Returns:
        TwoStepResult with beta_tilde, I0, m, sigma_hat and the Gram matrix
        (1/n) X^T X over all n rows

    Raises:
        EmptySubset: if |I0| <= d
    """
    if first_stage.mu.shape[0] != data.n:
        raise DimensionMismatch("first-stage fit does not match the dataset")
    selected = IndexSet.from_mask(first_stage.mu == 0)
    m = len(selected)
    if m <= data.d:
        raise EmptySubset(f"only {m} observations have mu_hat == 0, need more than d={data.d}")

    beta_tilde = subset_ols(data, selected)
    residuals = data.Y[selected.indices] - data.X[selected.indices] @ beta_tilde
    denominator = m - data.d if dof_correction else m
    sigma_hat = float(np.sqrt(residuals @ residuals / denominator))

    return TwoStepResult(
        beta_tilde=beta_tilde,
        selected=selected,
        m=m,
        sigma_hat=sigma_hat,
        gram_hat=sample_gram(data.X),
    )


def _inverse_gram(result: TwoStepResult) -> np.ndarray:
    if not is_invertible_psd(result.gram_hat):
        raise SingularGram("sample Gram matrix is not invertible")
    return np.linalg.inv(result.gram_hat)


def _sample_size(result: TwoStepResult, use_n: bool) -> int:
    return result.n if use_n else result.m


def _chi_quantile(alpha: float, dof: int) -> float:
    """Upper alpha quantile of the chi distribution with dof degrees of freedom."""
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    return float(np.sqrt(stats.chi2.isf(alpha, dof)))


def component_interval(result: TwoStepResult, j: int, alpha: float = 0.05,
                       use_n: bool = False) -> ConfidenceInterval:
    """
    Wald interval beta_tilde_j +/- m^{-1/2} sigma_hat sqrt((Sigma_hat^{-1})_jj) z_{alpha/2}.

    Args:
        result: Two-step fit
        j: Component index
        alpha: One minus the confidence level
        use_n: Scale by n instead of m (the asymptotic form)

    Raises:
        SingularGram: if the Gram matrix cannot be inverted
    """
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if not 0 <= j < result.d:
        raise IndexError(f"component {j} out of range for d={result.d}")
    inverse = _inverse_gram(result)
    z = float(stats.norm.isf(alpha / 2.0))
    scale = np.sqrt(inverse[j, j]) / np.sqrt(_sample_size(result, use_n))
    return ConfidenceInterval(
        center=float(result.beta_tilde[j]),
        half_width=float(result.sigma_hat * scale * z),
        level=1.0 - alpha,
    )


def _region_member(statistic_direction: np.ndarray, result: TwoStepResult,
                   quantile: float, use_n: bool) -> bool:
    """sigma_hat^{-1} sqrt(m) ||v|| <= quantile, with the sigma_hat == 0 limit handled."""
    norm = float(np.linalg.norm(statistic_direction))
    if result.sigma_hat == 0:
        return norm == 0
    statistic = np.sqrt(_sample_size(result, use_n)) * norm / result.sigma_hat
    return statistic <= quantile


def chisq_region_test(result: TwoStepResult, beta0: np.ndarray, alpha: float = 0.05,
                      use_n: bool = False) -> bool:
    """
    Membership of beta0 in {b : sigma_hat^{-1} sqrt(m) ||Sigma_hat^{1/2} (beta_tilde - b)|| <= q_alpha(chi_d)}.
    """
    beta0 = np.asarray(beta0, dtype=float)
    if beta0.shape != result.beta_tilde.shape:
        raise DimensionMismatch(f"beta0 has shape {beta0.shape}, expected {result.beta_tilde.shape}")
    _inverse_gram(result)
    root = psd_power(result.gram_hat, 0.5)
    quantile = _chi_quantile(alpha, result.d)
    return _region_member(root @ (result.beta_tilde - beta0), result, quantile, use_n)


def linear_map_region_test(result: TwoStepResult, linear_map: LinearMap, beta0: np.ndarray,
                           alpha: float = 0.05, use_n: bool = False) -> bool:
    """
    Membership test for the plug-in region of A beta.

    Accepts iff sigma_hat^{-1} sqrt(m) ||G^{-1/2} A (beta_tilde - beta0)|| <= q_alpha(chi_q)
    with G = A Sigma_hat^{-1} A^T.

    Raises:
        RankDeficientMap: if A lacks full row rank
        SingularGram: if the Gram matrix cannot be inverted
    """
    A = linear_map.A
    if A.shape[1] != result.d:
        raise DimensionMismatch(f"map has {A.shape[1]} columns, expected d={result.d}")
    if np.linalg.matrix_rank(A) < linear_map.q:
        raise RankDeficientMap(f"map of shape {A.shape} is not of full row rank")
    beta0 = np.asarray(beta0, dtype=float)
    if beta0.shape != result.beta_tilde.shape:
        raise DimensionMismatch(f"beta0 has shape {beta0.shape}, expected {result.beta_tilde.shape}")

    inverse = _inverse_gram(result)
    G = A @ inverse @ A.T
    direction = psd_power(G, -0.5) @ (A @ (result.beta_tilde - beta0))
    quantile = _chi_quantile(alpha, linear_map.q)
    return _region_member(direction, result, quantile, use_n)


def oracle_fit(data: Dataset, mu_true: np.ndarray) -> np.ndarray:
    """
    OLS of (Y - mu*) on X over S = {i : mu*_i == 0}.

    Raises:
        EmptySubset: if |S| <= d
    """
    mu_true = np.asarray(mu_true, dtype=float)
    if mu_true.shape != (data.n,):
        raise DimensionMismatch(f"mu_true has shape {mu_true.shape}, expected ({data.n},)")
    clean = IndexSet.from_mask(mu_true == 0)
    return subset_ols(Dataset(data.X, data.Y - mu_true), clean)


def partial_selection_event(result: FitResult, mu_true: np.ndarray,
                            s1_threshold: Optional[float] = None) -> bool:
    """
    True iff mu_hat is nonzero exactly on {i : |mu*_i| > threshold}.

    The threshold defaults to the fit's lambda.
    """
    mu_true = np.asarray(mu_true, dtype=float)
    if mu_true.shape != result.mu.shape:
        raise DimensionMismatch("mu_true and the fit disagree in length")
    threshold = result.penalty.lam if s1_threshold is None else s1_threshold
    large = np.abs(mu_true) > threshold
    return bool(np.array_equal(result.mu != 0, large))
