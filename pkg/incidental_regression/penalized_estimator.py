"""
Penalized least squares with one incidental intercept per observation.

Minimizes L(mu, beta) = ||Y - mu - X beta||^2 + sum_i p_lam(|mu_i|) by
alternating exact block updates: mu by thresholding the residuals, beta by
OLS of (Y - mu) on X. For the soft penalty p_lam(t) = 2 lam t, profiling mu
out leaves the Huber loss in the residuals.
"""

import logging
from typing import Optional

import numpy as np

from .data_models import (
    Dataset, FitResult, IndexSet, KKTReport, Penalty, PenaltyKind, SolverConfig,
)
from .exceptions import DimensionMismatch, WrongPenaltyKind

logger = logging.getLogger(__name__)


def soft_threshold(v, lam: float):
    """(|v| - lam)_+ sgn(v); exactly zero when |v| <= lam."""
    if lam <= 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    v = np.asarray(v, dtype=float)
    out = np.sign(v) * np.maximum(np.abs(v) - lam, 0.0)
    return float(out) if out.ndim == 0 else out


def hard_threshold(v, lam: float):
    """v 1{|v| > lam}; ties map to zero."""
    if lam <= 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    v = np.asarray(v, dtype=float)
    out = np.where(np.abs(v) > lam, v, 0.0)
    return float(out) if out.ndim == 0 else out


def penalty_value(mu: np.ndarray, penalty: Penalty) -> float:
    """sum_i p_lam(|mu_i|)."""
    magnitude = np.abs(np.asarray(mu, dtype=float))
    lam = penalty.lam
    if penalty.kind is PenaltyKind.SOFT:
        return float(2.0 * lam * magnitude.sum())
    inside = magnitude < lam
    return float(np.sum(lam ** 2 - np.where(inside, (magnitude - lam) ** 2, 0.0)))


def _check_mu(data: Dataset, mu: np.ndarray) -> np.ndarray:
    mu = np.asarray(mu, dtype=float)
    if mu.shape != (data.n,):
        raise DimensionMismatch(f"mu has shape {mu.shape}, expected ({data.n},)")
    return mu


def update_mu(data: Dataset, beta: np.ndarray, penalty: Penalty) -> np.ndarray:
    """Exact minimizer of L(., beta): the matching thresholder applied to Y - X beta."""
    residuals = data.residuals(beta)
    if penalty.kind is PenaltyKind.SOFT:
        return soft_threshold(residuals, penalty.lam)
    return hard_threshold(residuals, penalty.lam)


def update_beta(data: Dataset, mu: np.ndarray) -> np.ndarray:
    """Exact minimizer of L(mu, .): OLS of (Y - mu) on X."""
    mu = _check_mu(data, mu)
    return data.factor.solve(data.Y - mu)


def objective(data: Dataset, mu: np.ndarray, beta: np.ndarray, penalty: Penalty) -> float:
    """L(mu, beta) = ||Y - mu - X beta||^2 + sum_i p_lam(|mu_i|)."""
    mu = _check_mu(data, mu)
    residuals = data.residuals(beta) - mu
    return float(residuals @ residuals) + penalty_value(mu, penalty)


def huber_rho(x, lam: float):
    """x^2 for |x| <= lam, 2 lam |x| - lam^2 beyond."""
    if lam <= 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    x = np.asarray(x, dtype=float)
    magnitude = np.abs(x)
    out = np.where(magnitude <= lam, x ** 2, 2.0 * lam * magnitude - lam ** 2)
    return float(out) if out.ndim == 0 else out


def profiled_loss(data: Dataset, beta: np.ndarray, lam: float) -> float:
    """Huber loss sum_i rho(Y_i - X_i^T beta), i.e. min over mu of the soft objective."""
    return float(np.sum(huber_rho(data.residuals(beta), lam)))


def z_function(data: Dataset, beta: np.ndarray, lam: float) -> np.ndarray:
    """phi(beta) = beta - (X^T X)^{-1} X^T (Y - mu(beta)), zero at soft fixed points."""
    beta = np.asarray(beta, dtype=float)
    mu = update_mu(data, beta, Penalty.soft(lam))
    return beta - update_beta(data, mu)


class PenalizedLeastSquares:
    """
    Alternating minimizer of the penalized objective.

    The soft problem is convex and the result is its global minimizer. With
    the hard penalty each block update is still exact, so the objective
    never increases, but the limit is only a local minimizer.
    """

    def __init__(self, penalty: Penalty, config: Optional[SolverConfig] = None):
        """
        Initialize the solver.

        Args:
            penalty: Penalty kind and regularization parameter
            config: Stopping rule and starting point (defaults: beta=0,
                tol=1e-8, max_iter=100)
        """
        self.penalty = penalty
        self.config = config or SolverConfig()

    def fit(self, data: Dataset) -> FitResult:
        """
        Alternate mu and beta updates until the beta step is below tol.

        Args:
            data: Observations (X, Y)

        Returns:
            FitResult with the final estimates and the iteration trace
        """
        beta = self.config.initial_beta(data.d)
        trace = []
        objective_trace = []
        converged = False
        iterations = 0

        for iterations in range(1, self.config.max_iter + 1):
            mu = update_mu(data, beta, self.penalty)
            beta_next = update_beta(data, mu)
            step = float(np.linalg.norm(beta_next - beta))
            beta = beta_next
            trace.append(step)
            objective_trace.append(objective(data, mu, beta, self.penalty))
            logger.debug("iteration %d: step=%.3e objective=%.10g",
                         iterations, step, objective_trace[-1])
            if step <= self.config.tol:
                converged = True
                break

        if not converged:
            logger.warning("solver stopped after %d iterations without meeting tol=%g (last step %.3e)",
                           iterations, self.config.tol, trace[-1])

        # Refresh mu so (mu, beta) is an exact mu-block optimum.
        mu = update_mu(data, beta, self.penalty)
        final_objective = objective(data, mu, beta, self.penalty)

        return FitResult(
            beta=beta,
            mu=mu,
            active_set=IndexSet.from_mask(mu != 0),
            iterations=iterations,
            converged=converged,
            objective=final_objective,
            penalty=self.penalty,
            trace=tuple(trace),
            objective_trace=tuple(objective_trace),
        )


def fit(data: Dataset, penalty: Penalty, config: Optional[SolverConfig] = None) -> FitResult:
    """Functional form of PenalizedLeastSquares(penalty, config).fit(data)."""
    return PenalizedLeastSquares(penalty, config).fit(data)


def kkt_check(data: Dataset, result: FitResult, lam: float, tol: float = 1e-8) -> KKTReport:
    """
    Check the soft-penalty optimality conditions at (mu_hat, beta_hat).

    The three conditions are beta = (X^T X)^{-1} X^T (Y - mu),
    Y_i - mu_i - X_i^T beta = lam sgn(mu_i) where mu_i != 0, and
    |Y_i - X_i^T beta| <= lam where mu_i == 0.

    Raises:
        WrongPenaltyKind: for hard-penalty results
    """
    if result.penalty.kind is not PenaltyKind.SOFT:
        raise WrongPenaltyKind("KKT conditions are only characterized for the soft penalty")
    mu = _check_mu(data, result.mu)
    residuals = data.residuals(result.beta)
    active = mu != 0

    normal_equation = float(np.max(np.abs(result.beta - update_beta(data, mu))))
    if np.any(active):
        active_gap = residuals[active] - mu[active] - lam * np.sign(mu[active])
        active_violation = float(np.max(np.abs(active_gap)))
    else:
        active_violation = 0.0
    if np.any(~active):
        inactive_violation = float(np.max(np.maximum(np.abs(residuals[~active]) - lam, 0.0)))
    else:
        inactive_violation = 0.0

    return KKTReport(
        normal_equation=normal_equation,
        active_set=active_violation,
        inactive_set=inactive_violation,
        tol=tol,
    )
