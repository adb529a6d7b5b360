"""
Incidental Regression
Penalized least squares for linear regression with one sparse nuisance
intercept per observation, with two-step inference, data-driven
regularization selection and a Monte Carlo harness.
"""

__version__ = "1.0.0"
__author__ = "Incidental Regression Team"

from .data_models import (
    Dataset, IndexSet, Penalty, PenaltyKind, SolverConfig, FitResult, KKTReport,
    TwoStepResult, ConfidenceInterval, LinearMap, LambdaProcedureConfig, LambdaSelection,
    MuMechanism, ExperimentConfig, Method, RmseReport, CoverageReport, QQReport, SelectionReport,
)
from .exceptions import (
    IncidentalRegressionError, DimensionMismatch, SingularDesign, EmptySubset, WrongPenaltyKind,
    SingularGram, RankDeficientMap, DegenerateInterval, ConfigError, ParseError,
)
from .linalg_core import ols_solve, subset_ols, sample_gram
from .penalized_estimator import (
    PenalizedLeastSquares, fit, soft_threshold, hard_threshold, huber_rho, profiled_loss,
    objective, kkt_check, z_function,
)
from .inference import (
    two_step_fit, component_interval, chisq_region_test, linear_map_region_test,
    oracle_fit, partial_selection_event,
)
from .lambda_select import gaussian_spec_bounds, theoretical_lambda_window, data_driven_lambda, ci_lambda
from .simulation import (
    gen_incidental, gen_dataset, lad_fit, rmse_experiment, coverage_experiment,
    qq_experiment, selection_experiment,
)
from .config import ExperimentSuite, load_experiment_config

__all__ = [
    'Dataset',
    'IndexSet',
    'Penalty',
    'PenaltyKind',
    'SolverConfig',
    'FitResult',
    'KKTReport',
    'TwoStepResult',
    'ConfidenceInterval',
    'LinearMap',
    'LambdaProcedureConfig',
    'LambdaSelection',
    'MuMechanism',
    'ExperimentConfig',
    'Method',
    'RmseReport',
    'CoverageReport',
    'QQReport',
    'SelectionReport',
    'IncidentalRegressionError',
    'DimensionMismatch',
    'SingularDesign',
    'EmptySubset',
    'WrongPenaltyKind',
    'SingularGram',
    'RankDeficientMap',
    'DegenerateInterval',
    'ConfigError',
    'ParseError',
    'ols_solve',
    'subset_ols',
    'sample_gram',
    'PenalizedLeastSquares',
    'fit',
    'soft_threshold',
    'hard_threshold',
    'huber_rho',
    'profiled_loss',
    'objective',
    'kkt_check',
    'z_function',
    'two_step_fit',
    'component_interval',
    'chisq_region_test',
    'linear_map_region_test',
    'oracle_fit',
    'partial_selection_event',
    'gaussian_spec_bounds',
    'theoretical_lambda_window',
    'data_driven_lambda',
    'ci_lambda',
    'gen_incidental',
    'gen_dataset',
    'lad_fit',
    'rmse_experiment',
    'coverage_experiment',
    'qq_experiment',
    'selection_experiment',
    'ExperimentSuite',
    'load_experiment_config',
]
