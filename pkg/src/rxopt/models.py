"""Regression model zoo: exact linear-family solves and kernel ridge.

Estimators follow the scikit-learn protocol (``fit(X, y)`` returning self,
``predict(X)``, ``get_params``/``set_params`` via ``BaseEstimator``) so they
compose with the wider ecosystem.  Fitted state lives in trailing-underscore
attributes and is immutable after ``fit``; ``predict`` is safe to call
concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin

from .errors import (
    DimensionMismatch,
    EmptyDataset,
    NotPositiveDefinite,
    RankExceedsDimension,
    SingularGram,
)
from .numcore import rank_truncate, solve_spd, solve_spd_or_pinv
from .signals import Dataset


def _check_fit_inputs(X, y) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise DimensionMismatch(f"X must be 2-D, got shape {X.shape}")
    if X.shape[0] == 0:
        raise EmptyDataset("cannot fit on an empty dataset")
    if y.ndim != 1 or y.shape[0] != X.shape[0]:
        raise DimensionMismatch(f"y shape {y.shape} does not match X rows {X.shape[0]}")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise DimensionMismatch("fit inputs contain non-finite values")
    return X, y


def _check_predict_input(X, n_features: int) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[1] != n_features:
        raise DimensionMismatch(f"expected {n_features} feature columns, got shape {X.shape}")
    return X


def unpack(data) -> tuple[np.ndarray, np.ndarray]:
    """Accept either a Dataset or an (X, y) pair."""
    if isinstance(data, Dataset):
        return data.X, data.y
    X, y = data
    return np.asarray(X, dtype=float), np.asarray(y, dtype=float)


# ---------------------------------------------------------------------------
# Linear family


class LeastSquaresRegressor(RegressorMixin, BaseEstimator):
    """Ordinary least squares, optionally with an appended intercept column.

    Solves the normal equations by Cholesky; on a rank-deficient Gram matrix
    it falls back to the SVD pseudo-inverse and sets ``used_pinv_``.
    """

    def __init__(self, fit_intercept: bool = False):
        self.fit_intercept = fit_intercept

    def _augment(self, X: np.ndarray) -> np.ndarray:
        if self.fit_intercept:
            return np.hstack([X, np.ones((X.shape[0], 1))])
        return X

    def fit(self, X, y):
        X, y = _check_fit_inputs(X, y)
        self.n_features_in_ = X.shape[1]
        A = self._augment(X)
        gram = A.T @ A
        coef, used_pinv = solve_spd_or_pinv(gram, A.T @ y)
        self.coef_ = coef[: X.shape[1]] if self.fit_intercept else coef
        self.intercept_ = float(coef[-1]) if self.fit_intercept else 0.0
        self.used_pinv_ = used_pinv
        return self

    def predict(self, X):
        X = _check_predict_input(X, self.n_features_in_)
        return X @ self.coef_ + self.intercept_


class RidgeRegressor(RegressorMixin, BaseEstimator):
    """Ridge with penalty ``n * lam`` on the squared coefficient norm.

    The estimator is (X'X + n*lam*I)^-1 X'y, so that (1/n) X'X + lam*I is
    the sample analogue of the penalized second-moment matrix.  When
    ``fit_intercept`` is set, the constant column is penalized like any
    other coordinate (it is treated as a degenerate feature).
    """

    def __init__(self, lam: float = 0.0, fit_intercept: bool = False):
        self.lam = lam
        self.fit_intercept = fit_intercept

    def fit(self, X, y):
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        X, y = _check_fit_inputs(X, y)
        self.n_features_in_ = X.shape[1]
        A = np.hstack([X, np.ones((X.shape[0], 1))]) if self.fit_intercept else X
        n = A.shape[0]
        gram = A.T @ A + n * self.lam * np.eye(A.shape[1])
        if self.lam > 0:
            coef, used_pinv = solve_spd(gram, A.T @ y), False
        else:
            coef, used_pinv = solve_spd_or_pinv(gram, A.T @ y)
        self.coef_ = coef[: X.shape[1]] if self.fit_intercept else coef
        self.intercept_ = float(coef[-1]) if self.fit_intercept else 0.0
        self.used_pinv_ = used_pinv
        return self

    def predict(self, X):
        X = _check_predict_input(X, self.n_features_in_)
        return X @ self.coef_ + self.intercept_


class BendedRegressor(RegressorMixin, BaseEstimator):
    """Least squares on the feature pair (1, max(x, 0)) for 1-D inputs.

    When every training input is <= 0 the hinge column is identically zero;
    the fit degrades to the intercept-only model (the training mean) and
    ``degenerate_`` is set.
    """

    def fit(self, X, y):
        X, y = _check_fit_inputs(X, y)
        if X.shape[1] != 1:
            raise DimensionMismatch("bended model requires 1-D inputs")
        self.n_features_in_ = 1
        relu = np.maximum(X[:, 0], 0.0)
        self.degenerate_ = bool(np.max(X[:, 0]) <= 0.0)
        if self.degenerate_:
            self.intercept_ = float(np.mean(y))
            self.coef_ = np.zeros(1)
            return self
        F = np.column_stack([np.ones_like(relu), relu])
        coef, _ = solve_spd_or_pinv(F.T @ F, F.T @ y)
        self.intercept_ = float(coef[0])
        self.coef_ = coef[1:2]
        return self

    def predict(self, X):
        X = _check_predict_input(X, 1)
        return self.intercept_ + self.coef_[0] * np.maximum(X[:, 0], 0.0)


class LowRankRegressor(RegressorMixin, BaseEstimator):
    """Least squares with the sample second-moment matrix truncated to rank k.

    Fits beta = pinv(S_k) @ (X'y / n) where S_k is the best rank-k
    approximation of S = X'X / n, i.e. ordinary least squares restricted to
    the top-k eigenspace of the sample design moments.
    """

    def __init__(self, rank: int = 1):
        self.rank = rank

    def fit(self, X, y):
        X, y = _check_fit_inputs(X, y)
        d = X.shape[1]
        if not 1 <= self.rank <= d:
            raise RankExceedsDimension(f"rank {self.rank} outside [1, {d}]")
        self.n_features_in_ = d
        n = X.shape[0]
        second_moment = X.T @ X / n
        _, trunc_pinv, self.tail_singular_value_ = rank_truncate(second_moment, self.rank)
        self.coef_ = trunc_pinv @ (X.T @ y / n)
        self.intercept_ = 0.0
        return self

    def predict(self, X):
        X = _check_predict_input(X, self.n_features_in_)
        return X @ self.coef_


# ---------------------------------------------------------------------------
# Kernels and kernel ridge regression


class LinearKernel:
    """K(x, x') = x . x'."""

    def __call__(self, A: np.ndarray, B: np.ndarray) -> np.ndarray:
        return np.asarray(A, dtype=float) @ np.asarray(B, dtype=float).T


@dataclass(frozen=True)
class NtkKernel:
    """Tangent kernel of a width-m ReLU layer at fixed weights (W0, a).

    For g(x) = (1/sqrt(m)) * sum_j a_j * relu(w_j . x), the gradient of g
    with respect to the bottom-layer weights gives the feature map
    phi(x)_j = (1/sqrt(m)) * a_j * 1[w_j . x > 0] * x, hence

        K(x, x') = (1/m) * sum_j a_j^2 * 1[w_j.x > 0] * 1[w_j.x' > 0] * (x.x')

    The derivative of relu at exactly 0 is taken as 0 (a measure-zero event
    under continuous designs, fixed for determinism).
    """

    W0: np.ndarray
    a: np.ndarray

    def __post_init__(self):
        W0 = np.asarray(self.W0, dtype=float)
        a = np.asarray(self.a, dtype=float)
        if W0.ndim != 2 or a.ndim != 1 or W0.shape[1] != a.shape[0]:
            raise DimensionMismatch("W0 must be d x m and a length m")
        if not (np.all(np.isfinite(W0)) and np.all(np.isfinite(a))):
            raise DimensionMismatch("kernel parameters must be finite")
        W0 = W0.copy()
        a = a.copy()
        W0.setflags(write=False)
        a.setflags(write=False)
        object.__setattr__(self, "W0", W0)
        object.__setattr__(self, "a", a)

    @property
    def width(self) -> int:
        return self.a.shape[0]

    def feature_map(self, X: np.ndarray) -> np.ndarray:
        """Explicit n x (d*m) gradient features; K(X, X') = phi(X) phi(X')'."""
        X = np.asarray(X, dtype=float)
        active = (X @ self.W0 > 0.0).astype(float)  # n x m
        scaled = active * (self.a / np.sqrt(self.width))  # n x m
        return (scaled[:, :, None] * X[:, None, :]).reshape(X.shape[0], -1)

    def __call__(self, A: np.ndarray, B: np.ndarray) -> np.ndarray:
        A = np.asarray(A, dtype=float)
        B = np.asarray(B, dtype=float)
        act_a = (A @ self.W0 > 0.0).astype(float)
        act_b = (B @ self.W0 > 0.0).astype(float)
        weights = self.a ** 2 / self.width
        return ((act_a * weights) @ act_b.T) * (A @ B.T)


def ntk_kernel_eval(kernel: NtkKernel, x: np.ndarray, x_prime: np.ndarray) -> float:
    """Kernel value between two single points."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    x_prime = np.atleast_2d(np.asarray(x_prime, dtype=float))
    if x.shape[1] != kernel.W0.shape[0] or x_prime.shape[1] != kernel.W0.shape[0]:
        raise DimensionMismatch("point dimension does not match kernel weights")
    return float(kernel(x, x_prime)[0, 0])


class KernelRidgeRegressor(RegressorMixin, BaseEstimator):
    """Dual-form kernel ridge: alpha = (K + lam*I)^-1 y, prediction K(x,X) alpha.

    With lam = 0 the Gram matrix must be invertible; near-singular Grams are
    repaired by escalating jitter (1e-12 * trace/n, growing tenfold up to
    1e-6 * trace/n) before :class:`SingularGram` is raised.
    """

    def __init__(self, kernel=None, lam: float = 0.0):
        self.kernel = kernel
        self.lam = lam

    def fit(self, X, y):
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        X, y = _check_fit_inputs(X, y)
        self.n_features_in_ = X.shape[1]
        kernel = self.kernel if self.kernel is not None else LinearKernel()
        gram = kernel(X, X)
        n = gram.shape[0]
        if self.lam == 0.0:
            eigs = np.linalg.eigvalsh(0.5 * (gram + gram.T))
            if eigs[0] <= eigs[-1] * 1e-10:
                raise SingularGram(
                    "Gram matrix is numerically rank deficient; use lam > 0"
                )
        base = gram + self.lam * np.eye(n)
        scale = max(np.trace(gram) / n, 1.0)
        jitter = 0.0
        while True:
            try:
                self.dual_coef_ = solve_spd(base + jitter * np.eye(n), y)
                break
            except NotPositiveDefinite:
                jitter = 1e-12 * scale if jitter == 0.0 else jitter * 10.0
                if jitter > 1e-6 * scale:
                    raise SingularGram(
                        "Gram matrix is singular beyond jitter repair"
                    ) from None
        self.X_fit_ = X
        self.kernel_ = kernel
        return self

    def predict(self, X):
        X = _check_predict_input(X, self.n_features_in_)
        return self.kernel_(X, self.X_fit_) @ self.dual_coef_
