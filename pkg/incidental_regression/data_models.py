"""
Data models for penalized regression with sparse incidental parameters.
"""

from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .exceptions import DimensionMismatch


class PenaltyKind(str, Enum):
    """Penalty placed on the incidental parameters."""
    SOFT = 'soft'
    HARD = 'hard'


class Method(str, Enum):
    """Estimators compared by the Monte Carlo harness."""
    ORACLE = 'oracle'
    OLS = 'ols'
    SOFT_PLS = 'soft'
    HARD_PLS = 'hard'
    SOFT_TWO_STEP = 'soft_two_step'
    HARD_TWO_STEP = 'hard_two_step'
    SOFT_PRACTICAL = 'soft_practical'
    HARD_PRACTICAL = 'hard_practical'
    LAD = 'lad'

    @property
    def label(self) -> str:
        """Short column label used in RMSE tables."""
        return _METHOD_LABELS[self]

    @property
    def uses_lambda_grid(self) -> bool:
        return self in _GRID_METHODS

    @property
    def penalty_kind(self) -> Optional[PenaltyKind]:
        if self in (Method.SOFT_PLS, Method.SOFT_TWO_STEP, Method.SOFT_PRACTICAL):
            return PenaltyKind.SOFT
        if self in (Method.HARD_PLS, Method.HARD_TWO_STEP, Method.HARD_PRACTICAL):
            return PenaltyKind.HARD
        return None


_METHOD_LABELS = {
    Method.ORACLE: 'O',
    Method.OLS: 'OLS',
    Method.SOFT_PLS: 'S',
    Method.HARD_PLS: 'H',
    Method.SOFT_TWO_STEP: 'S.TS',
    Method.HARD_TWO_STEP: 'H.TS',
    Method.SOFT_PRACTICAL: 'S.P',
    Method.HARD_PRACTICAL: 'H.P',
    Method.LAD: 'LAD',
}

_GRID_METHODS = frozenset({
    Method.SOFT_PLS, Method.HARD_PLS, Method.SOFT_TWO_STEP, Method.HARD_TWO_STEP,
})


def _as_vector(values, name: str) -> np.ndarray:
    array = np.asarray(values, dtype=float)
    if array.ndim != 1:
        raise DimensionMismatch(f"{name} must be one-dimensional, got shape {array.shape}")
    return array


@dataclass
class Dataset:
    """
    Design matrix X (n x d) and response Y (n) of the model
    Y = mu* + X beta* + eps.
    """
    X: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        """Validate shapes and finiteness."""
        self.X = np.asarray(self.X, dtype=float)
        if self.X.ndim == 1:
            self.X = self.X.reshape(-1, 1)
        if self.X.ndim != 2:
            raise DimensionMismatch(f"X must be a matrix, got shape {self.X.shape}")
        self.Y = _as_vector(self.Y, 'Y')

        if self.X.shape[0] != self.Y.shape[0]:
            raise DimensionMismatch(
                f"X has {self.X.shape[0]} rows but Y has {self.Y.shape[0]} entries"
            )
        n, d = self.X.shape
        if d < 1 or n < 1:
            raise ValueError("Dataset needs at least one observation and one covariate")
        if n <= d:
            raise ValueError(f"Dataset needs n > d, got n={n}, d={d}")
        if not (np.all(np.isfinite(self.X)) and np.all(np.isfinite(self.Y))):
            raise ValueError("Dataset entries must be finite")

    @property
    def n(self) -> int:
        """Number of observations."""
        return self.X.shape[0]

    @property
    def d(self) -> int:
        """Number of covariates."""
        return self.X.shape[1]

    @cached_property
    def factor(self):
        """Orthogonal factorization of X, computed once per dataset."""
        from .linalg_core import LeastSquaresFactor
        return LeastSquaresFactor(self.X)

    def residuals(self, beta: np.ndarray) -> np.ndarray:
        """Y - X beta."""
        beta = _as_vector(beta, 'beta')
        if beta.shape[0] != self.d:
            raise DimensionMismatch(f"beta has length {beta.shape[0]}, expected {self.d}")
        return self.Y - self.X @ beta


@dataclass
class IndexSet:
    """Sorted, distinct observation indices within [0, n)."""
    indices: np.ndarray
    n: int

    def __post_init__(self):
        self.indices = np.asarray(self.indices, dtype=np.int64).reshape(-1)
        if self.indices.size:
            if np.any(np.diff(self.indices) <= 0):
                raise ValueError("IndexSet indices must be sorted and distinct")
            if self.indices[0] < 0 or self.indices[-1] >= self.n:
                raise ValueError(f"IndexSet indices must lie in [0, {self.n})")

    @classmethod
    def from_mask(cls, mask: np.ndarray) -> 'IndexSet':
        mask = np.asarray(mask, dtype=bool)
        return cls(np.flatnonzero(mask), mask.shape[0])

    @classmethod
    def from_unsorted(cls, indices: Sequence[int], n: int) -> 'IndexSet':
        return cls(np.unique(np.asarray(indices, dtype=np.int64)), n)

    @classmethod
    def full(cls, n: int) -> 'IndexSet':
        return cls(np.arange(n), n)

    def mask(self) -> np.ndarray:
        out = np.zeros(self.n, dtype=bool)
        out[self.indices] = True
        return out

    def complement(self) -> 'IndexSet':
        return IndexSet.from_mask(~self.mask())

    def __len__(self) -> int:
        return int(self.indices.size)

    def __iter__(self):
        return iter(self.indices.tolist())

    def __contains__(self, item) -> bool:
        position = np.searchsorted(self.indices, item)
        return bool(position < self.indices.size and self.indices[position] == item)


@dataclass(frozen=True)
class Penalty:
    """Soft (2*lam*|mu|) or hard (lam^2 - (|mu|-lam)^2 1{|mu|<lam}) penalty."""
    kind: PenaltyKind
    lam: float

    def __post_init__(self):
        object.__setattr__(self, 'kind', PenaltyKind(self.kind))
        if not np.isfinite(self.lam) or self.lam <= 0:
            raise ValueError(f"Penalty lambda must be positive, got {self.lam}")

    @classmethod
    def soft(cls, lam: float) -> 'Penalty':
        return cls(PenaltyKind.SOFT, float(lam))

    @classmethod
    def hard(cls, lam: float) -> 'Penalty':
        return cls(PenaltyKind.HARD, float(lam))


@dataclass
class SolverConfig:
    """
    Stopping rule for the alternating solver.

    The iteration stops once ||beta^(k+1) - beta^(k)||_2 <= tol or after
    max_iter sweeps. beta_init defaults to the zero vector.
    """
    beta_init: Optional[np.ndarray] = None
    tol: float = 1e-8
    max_iter: int = 100

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if int(self.max_iter) < 1:
            raise ValueError(f"max_iter must be at least 1, got {self.max_iter}")
        self.max_iter = int(self.max_iter)
        if self.beta_init is not None:
            self.beta_init = _as_vector(self.beta_init, 'beta_init')

    def initial_beta(self, d: int) -> np.ndarray:
        if self.beta_init is None:
            return np.zeros(d)
        if self.beta_init.shape[0] != d:
            raise DimensionMismatch(f"beta_init has length {self.beta_init.shape[0]}, expected {d}")
        return self.beta_init.copy()


@dataclass(frozen=True)
class FitResult:
    """Penalized estimate (mu_hat, beta_hat) with its iteration history."""
    beta: np.ndarray
    mu: np.ndarray
    active_set: IndexSet
    iterations: int
    converged: bool
    objective: float
    penalty: Penalty
    trace: Tuple[float, ...] = ()  # ||beta^(k+1) - beta^(k)||_2 per sweep
    objective_trace: Tuple[float, ...] = ()

    @property
    def selected(self) -> IndexSet:
        """Indices with mu_hat == 0."""
        return self.active_set.complement()


@dataclass(frozen=True)
class KKTReport:
    """Maximum violation of each optimality condition of the soft problem."""
    normal_equation: float
    active_set: float
    inactive_set: float
    tol: float

    @property
    def max_violation(self) -> float:
        return max(self.normal_equation, self.active_set, self.inactive_set)

    @property
    def passed(self) -> bool:
        return self.max_violation <= self.tol


@dataclass(frozen=True)
class TwoStepResult:
    """OLS refit on the rows whose first-stage mu_hat is exactly zero."""
    beta_tilde: np.ndarray
    selected: IndexSet
    m: int
    sigma_hat: float
    gram_hat: np.ndarray

    def __post_init__(self):
        if self.m != len(self.selected):
            raise ValueError("m must equal the size of the selected index set")
        if self.m <= self.beta_tilde.shape[0]:
            raise ValueError("two-step refit needs m > d")
        if self.sigma_hat < 0:
            raise ValueError("sigma_hat must be nonnegative")

    @property
    def n(self) -> int:
        return self.selected.n

    @property
    def d(self) -> int:
        return self.beta_tilde.shape[0]


@dataclass(frozen=True)
class ConfidenceInterval:
    """Symmetric Wald interval center +/- half_width."""
    center: float
    half_width: float
    level: float

    def __post_init__(self):
        if self.half_width < 0:
            raise ValueError("half_width must be nonnegative")
        if not 0 < self.level < 1:
            raise ValueError("level must lie in (0, 1)")

    @property
    def lower(self) -> float:
        return self.center - self.half_width

    @property
    def upper(self) -> float:
        return self.center + self.half_width

    def contains(self, value: float) -> bool:
        return abs(value - self.center) <= self.half_width


@dataclass
class LinearMap:
    """q x d matrix A defining the target A beta of a confidence region."""
    A: np.ndarray

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        if self.A.ndim != 2:
            raise DimensionMismatch("LinearMap A must be a matrix")
        if not np.all(np.isfinite(self.A)):
            raise ValueError("LinearMap rows must be finite")
        if self.A.shape[0] > self.A.shape[1]:
            raise ValueError(f"LinearMap needs q <= d, got {self.A.shape}")

    @property
    def q(self) -> int:
        return self.A.shape[0]

    @classmethod
    def unit(cls, j: int, d: int) -> 'LinearMap':
        """The row vector e_j^T."""
        row = np.zeros((1, d))
        row[0, j] = 1.0
        return cls(row)


@dataclass
class LambdaProcedureConfig:
    """Knobs of the data-driven regularization procedure."""
    pure_fraction: float = 0.7
    test_fraction: float = 0.2
    quantile_q: float = 0.95
    alpha_L: float = 5.0
    soft_lambda_L: float = 0.5
    grid_size: int = 50
    seed: int = 0

    def __post_init__(self):
        for name in ('pure_fraction', 'test_fraction', 'quantile_q'):
            value = getattr(self, name)
            if not 0 < value < 1:
                raise ValueError(f"{name} must lie in (0, 1), got {value}")
        if self.alpha_L <= 0 or self.soft_lambda_L <= 0:
            raise ValueError("alpha_L and soft_lambda_L must be positive")
        if int(self.grid_size) < 2:
            raise ValueError(f"grid_size must be at least 2, got {self.grid_size}")
        self.grid_size = int(self.grid_size)


@dataclass
class LambdaSelection:
    """Outcome of the data-driven lambda search."""
    lambda_opt: float
    lambda_low: float
    lambda_high: float
    test_loss_curve: List[Tuple[float, float]]
    pure_set: IndexSet
    test_set: IndexSet
    training_set: IndexSet
    sigma_pure: float
    clamped: bool = False
    # pure-set OLS refit; starting point of the grid fits
    beta_pure: Optional[np.ndarray] = None

    def __post_init__(self):
        if not self.lambda_low <= self.lambda_opt <= self.lambda_high:
            raise ValueError("lambda_opt must lie within [lambda_low, lambda_high]")


@dataclass
class MuMechanism:
    """
    Three-branch mixture generating incidental parameters.

    mu_i = 0 with probability p0, W1 (c + W2) with probability p1 and
    Uniform[-c, c] with probability p2, where P(W1 = +1) = p_w and
    W2 ~ Exponential(mean tau).
    """
    p0: float = 0.8
    p1: float = 0.1
    p2: float = 0.1
    c: float = 3.0
    p_w: float = 0.5
    tau: float = 1.0

    def __post_init__(self):
        probs = (self.p0, self.p1, self.p2)
        if any(p < 0 or p > 1 for p in probs):
            raise ValueError(f"mechanism probabilities must lie in [0, 1], got {probs}")
        if abs(sum(probs) - 1.0) > 1e-12:
            raise ValueError(f"p0 + p1 + p2 must equal 1, got {sum(probs)}")
        if self.c < 0:
            raise ValueError("c must be nonnegative")
        if not 0 <= self.p_w <= 1:
            raise ValueError("p_w must lie in [0, 1]")
        if self.tau <= 0:
            raise ValueError("tau must be positive")


DEFAULT_METHODS = (
    Method.ORACLE, Method.OLS, Method.HARD_PLS, Method.SOFT_PLS,
    Method.HARD_TWO_STEP, Method.SOFT_TWO_STEP,
)


def default_lambda_grid() -> Dict[PenaltyKind, np.ndarray]:
    return {
        PenaltyKind.HARD: np.linspace(0.25, 6.0, 40),
        PenaltyKind.SOFT: np.linspace(0.1, 6.0, 40),
    }


@dataclass
class ExperimentConfig:
    """Full parameterization of one simulation setting."""
    n: int = 200
    d: int = 2
    beta_star: np.ndarray = field(default_factory=lambda: np.ones(2))
    sigma: float = 1.0
    x_cov: np.ndarray = field(default_factory=lambda: np.eye(2))
    mu: MuMechanism = field(default_factory=MuMechanism)
    mu_fixed: Optional[np.ndarray] = None
    reps: int = 1000
    seed: int = 0
    lambda_grid: Dict[PenaltyKind, np.ndarray] = field(default_factory=default_lambda_grid)
    methods: Tuple[Method, ...] = DEFAULT_METHODS
    lambda_procedure: LambdaProcedureConfig = field(default_factory=LambdaProcedureConfig)

    def __post_init__(self):
        self.beta_star = _as_vector(self.beta_star, 'beta_star')
        self.x_cov = np.atleast_2d(np.asarray(self.x_cov, dtype=float))
        if self.beta_star.shape[0] != self.d:
            raise DimensionMismatch(f"beta_star has length {self.beta_star.shape[0]}, expected d={self.d}")
        if self.x_cov.shape != (self.d, self.d):
            raise DimensionMismatch(f"x_cov must be {self.d}x{self.d}, got {self.x_cov.shape}")
        if not np.allclose(self.x_cov, self.x_cov.T):
            raise ValueError("x_cov must be symmetric")
        if np.linalg.eigvalsh(self.x_cov).min() < -1e-10:
            raise ValueError("x_cov must be positive semidefinite")
        if self.reps < 1:
            raise ValueError("reps must be at least 1")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        if self.mu_fixed is not None:
            self.mu_fixed = _as_vector(self.mu_fixed, 'mu_fixed')
            if self.mu_fixed.shape[0] != self.n:
                raise DimensionMismatch(f"mu_fixed has length {self.mu_fixed.shape[0]}, expected n={self.n}")
        self.methods = tuple(Method(m) for m in self.methods)
        self.lambda_grid = {
            PenaltyKind(kind): np.sort(np.asarray(grid, dtype=float))
            for kind, grid in self.lambda_grid.items()
        }
        for kind, grid in self.lambda_grid.items():
            if grid.size == 0 or np.any(grid <= 0):
                raise ValueError(f"{kind.value} lambda grid must be non-empty and positive")

    def grid_for(self, kind: PenaltyKind) -> np.ndarray:
        return self.lambda_grid[PenaltyKind(kind)]


@dataclass(frozen=True)
class RmseRow:
    """Bias and RMSE of one method for one target at one lambda (None if not penalized)."""
    method: str
    target: str
    lam: Optional[float]
    bias: float
    rmse: float
    reps_used: int


@dataclass
class RmseReport:
    """
    Per method, per target bias and RMSE.

    Targets are 'beta_1' ... 'beta_d' and 'beta' (the full vector, for which
    RMSE is sqrt(mean ||beta_hat - beta*||^2) and bias is the norm of the
    mean error). For grid methods `rows` holds the whole lambda curve and
    `minimal` the rows at the lambda minimizing RMSE of the full vector.
    `nonconverged` counts, per iterative baseline, the replicates that hit
    the iteration cap; their estimates still enter the table.
    """
    rows: List[RmseRow]
    minimal: Dict[str, List[RmseRow]]
    failures: Dict[str, int]
    reps: int
    nonconverged: Dict[str, int] = field(default_factory=dict)


@dataclass
class CoverageReport:
    """Empirical coverage on a (p1, p2) grid; matrices indexed [p2, p1]."""
    p1_grid: np.ndarray
    p2_grid: np.ndarray
    coverage: np.ndarray
    mc_se: np.ndarray
    reps_used: np.ndarray
    failures: np.ndarray
    alpha: float
    component: int


@dataclass
class QQReport:
    """Sorted standardized draws of beta_hat_j and beta_tilde_j with normal quantiles."""
    component: int
    lam: float
    beta_hat: np.ndarray
    beta_tilde: np.ndarray
    theoretical_hat: np.ndarray
    theoretical_tilde: np.ndarray
    ks_hat: Tuple[float, float]
    ks_tilde: Tuple[float, float]
    failures: int


@dataclass
class SelectionReport:
    """Frequency of the partial selection event across replicates."""
    frequency: float
    mc_se: float
    reps_used: int
    failures: int
    lam: float
    threshold: float
