"""
Dense linear-algebra primitives shared by all estimators.

Least squares is solved through an economic QR factorization of X; the
rank check uses the singular values of the triangular factor.
"""

import numpy as np
from scipy import linalg

from .data_models import Dataset, IndexSet
from .exceptions import DimensionMismatch, EmptySubset, SingularDesign

RANK_RTOL = 1e-10
EIGEN_FLOOR = 1e-12


class LeastSquaresFactor:
    """
    QR factorization of a design matrix, reusable for many right-hand sides.
    """

    def __init__(self, X: np.ndarray, rank_rtol: float = RANK_RTOL):
        """
        Factorize X and verify it has full column rank.

        Args:
            X: Design matrix (n x d) with n > d
            rank_rtol: Smallest/largest singular value ratio below which X
                is treated as rank-deficient
        """
        X = np.asarray(X, dtype=float)
        if X.ndim != 2:
            raise DimensionMismatch(f"X must be a matrix, got shape {X.shape}")
        n, d = X.shape
        if n <= d:
            raise SingularDesign(f"least squares needs n > d, got n={n}, d={d}")

        self.Q, self.R = linalg.qr(X, mode='economic')
        singular_values = linalg.svdvals(self.R)
        if singular_values[0] == 0 or singular_values[-1] < rank_rtol * singular_values[0]:
            raise SingularDesign(
                f"design is rank-deficient (singular value ratio "
                f"{singular_values[-1] / max(singular_values[0], np.finfo(float).tiny):.3e})"
            )
        self.shape = (n, d)

    def solve(self, y: np.ndarray) -> np.ndarray:
        """Least-squares coefficients for response y."""
        y = np.asarray(y, dtype=float)
        if y.shape[0] != self.shape[0]:
            raise DimensionMismatch(f"response has length {y.shape[0]}, expected {self.shape[0]}")
        return linalg.solve_triangular(self.R, self.Q.T @ y, lower=False)


def ols_solve(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """
    Least-squares minimizer of ||Y - X beta||^2.

    Args:
        X: Design matrix (n x d)
        Y: Response vector (n)

    Returns:
        Coefficient vector of length d

    Raises:
        DimensionMismatch: if X and Y disagree in length
        SingularDesign: if X is rank-deficient within tolerance
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    Y = np.asarray(Y, dtype=float)
    if Y.ndim != 1 or X.shape[0] != Y.shape[0]:
        raise DimensionMismatch(f"X has shape {X.shape} but Y has shape {Y.shape}")
    return LeastSquaresFactor(X).solve(Y)


def subset_ols(data: Dataset, S: IndexSet) -> np.ndarray:
    """
    OLS on the rows of S only.

    Raises:
        EmptySubset: if |S| <= d
        SingularDesign: if the restricted design is rank-deficient
    """
    if S.n != data.n:
        raise DimensionMismatch(f"index set is over {S.n} rows, data has {data.n}")
    if len(S) <= data.d:
        raise EmptySubset(f"subset has {len(S)} rows, need more than d={data.d}")
    if len(S) == data.n:
        return data.factor.solve(data.Y)
    return ols_solve(data.X[S.indices], data.Y[S.indices])


def sample_gram(X: np.ndarray) -> np.ndarray:
    """(1/n) X^T X, symmetrized."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.shape[0] < 1:
        raise DimensionMismatch("sample_gram needs at least one row")
    gram = X.T @ X / X.shape[0]
    return (gram + gram.T) / 2.0


def psd_power(A: np.ndarray, power: float, floor: float = EIGEN_FLOOR) -> np.ndarray:
    """
    A^power for a symmetric positive semidefinite matrix.

    Eigenvalues below floor * max(eigenvalue) are raised to the floor before
    taking negative powers; for nonnegative powers they are clipped at zero.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    eigenvalues, eigenvectors = linalg.eigh((A + A.T) / 2.0)
    if power < 0:
        scale = max(eigenvalues.max(), 0.0)
        eigenvalues = np.maximum(eigenvalues, floor * scale if scale > 0 else floor)
    else:
        eigenvalues = np.clip(eigenvalues, 0.0, None)
    return (eigenvectors * eigenvalues ** power) @ eigenvectors.T


def is_invertible_psd(A: np.ndarray, floor: float = EIGEN_FLOOR) -> bool:
    """True when the smallest eigenvalue exceeds floor times the largest."""
    eigenvalues = linalg.eigvalsh(np.atleast_2d(A))
    return eigenvalues[-1] > 0 and eigenvalues[0] > floor * eigenvalues[-1]
