"""Iteratively trained networks: a 3-layer ReLU MLP and a two-layer
ReLU feature model whose (W, a) are trained jointly.

Both train full batch on squared error with Adam (beta1=0.9, beta2=0.999,
eps=1e-8) or SGD with momentum 0.9, record one loss per epoch, and are
bit-deterministic given a :class:`~rxopt.numcore.SeedStream`.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin

from .errors import DivergedLoss
from .models import _check_fit_inputs, _check_predict_input
from .numcore import SeedStream, as_stream


class _AdamState:
    def __init__(self, params: list[np.ndarray], lr: float):
        self.lr = lr
        self.b1, self.b2, self.eps = 0.9, 0.999, 1e-8
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        self.t += 1
        for i, (p, g) in enumerate(zip(params, grads)):
            self.m[i] = self.b1 * self.m[i] + (1 - self.b1) * g
            self.v[i] = self.b2 * self.v[i] + (1 - self.b2) * g * g
            mhat = self.m[i] / (1 - self.b1 ** self.t)
            vhat = self.v[i] / (1 - self.b2 ** self.t)
            p -= self.lr * mhat / (np.sqrt(vhat) + self.eps)


class _SgdState:
    def __init__(self, params: list[np.ndarray], lr: float, momentum: float = 0.9):
        self.lr = lr
        self.momentum = momentum
        self.buf = [np.zeros_like(p) for p in params]

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        for i, (p, g) in enumerate(zip(params, grads)):
            self.buf[i] = self.momentum * self.buf[i] + g
            p -= self.lr * self.buf[i]


def _make_optimizer(name: str, params: list[np.ndarray], lr: float, momentum: float):
    if name == "adam":
        return _AdamState(params, lr)
    if name == "sgd":
        return _SgdState(params, lr, momentum)
    raise ValueError(f"unknown optimizer {name!r}")


class MlpRegressor(RegressorMixin, BaseEstimator):
    """Fully connected net input -> hidden[0] -> hidden[1] -> 1 with ReLU
    after each hidden layer, trained full batch on the MSE.

    Weights start at N(0, 2/fan_in), biases at zero.  ``loss_trace_`` holds
    the training MSE at the start of each epoch (before that epoch's update).
    ReLU' at exactly 0 is taken as 0.
    """

    def __init__(
        self,
        hidden: tuple[int, ...] = (50, 50),
        epochs: int = 1000,
        learning_rate: float = 0.01,
        optimizer: str = "adam",
        momentum: float = 0.9,
        random_state: SeedStream | int = 0,
    ):
        self.hidden = hidden
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.optimizer = optimizer
        self.momentum = momentum
        self.random_state = random_state

    def _forward(self, X: np.ndarray):
        h1 = X @ self.W1_ + self.b1_
        a1 = np.maximum(h1, 0.0)
        h2 = a1 @ self.W2_ + self.b2_
        a2 = np.maximum(h2, 0.0)
        out = a2 @ self.W3_ + self.b3_
        return h1, a1, h2, a2, out[:, 0]

    def fit(self, X, y):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if any(w < 1 for w in self.hidden) or len(self.hidden) != 2:
            raise ValueError("hidden must be two positive widths")
        X, y = _check_fit_inputs(X, y)
        self.n_features_in_ = X.shape[1]
        gen = as_stream(self.random_state).generator()
        d, w1, w2 = X.shape[1], self.hidden[0], self.hidden[1]
        self.W1_ = gen.standard_normal((d, w1)) * np.sqrt(2.0 / d)
        self.b1_ = np.zeros(w1)
        self.W2_ = gen.standard_normal((w1, w2)) * np.sqrt(2.0 / w1)
        self.b2_ = np.zeros(w2)
        self.W3_ = gen.standard_normal((w2, 1)) * np.sqrt(2.0 / w2)
        self.b3_ = np.zeros(1)
        params = [self.W1_, self.b1_, self.W2_, self.b2_, self.W3_, self.b3_]
        opt = _make_optimizer(self.optimizer, params, self.learning_rate, self.momentum)
        n = X.shape[0]
        trace = np.empty(self.epochs)
        # overflow in a diverging run is reported via DivergedLoss, not a
        # numpy warning
        with np.errstate(over="ignore", invalid="ignore"):
            for epoch in range(self.epochs):
                h1, a1, h2, a2, pred = self._forward(X)
                resid = pred - y
                loss = float(np.mean(resid ** 2))
                if not np.isfinite(loss):
                    raise DivergedLoss(f"training loss diverged at epoch {epoch}")
                trace[epoch] = loss
                dout = (2.0 / n) * resid[:, None]
                gW3 = a2.T @ dout
                gb3 = dout.sum(axis=0)
                da2 = dout @ self.W3_.T
                dh2 = da2 * (h2 > 0.0)
                gW2 = a1.T @ dh2
                gb2 = dh2.sum(axis=0)
                da1 = dh2 @ self.W2_.T
                dh1 = da1 * (h1 > 0.0)
                gW1 = X.T @ dh1
                gb1 = dh1.sum(axis=0)
                opt.step(params, [gW1, gb1, gW2, gb2, gW3, gb3])
        self.loss_trace_ = trace
        return self

    def predict(self, X):
        X = _check_predict_input(X, self.n_features_in_)
        return self._forward(X)[-1]

    def parameter_gradients(self, X, y) -> list[np.ndarray]:
        """Analytic MSE gradients at the current parameters (for checking)."""
        X, y = _check_fit_inputs(X, y)
        n = X.shape[0]
        h1, a1, h2, a2, pred = self._forward(X)
        dout = (2.0 / n) * (pred - y)[:, None]
        gW3 = a2.T @ dout
        gb3 = dout.sum(axis=0)
        da2 = dout @ self.W3_.T
        dh2 = da2 * (h2 > 0.0)
        gW2 = a1.T @ dh2
        gb2 = dh2.sum(axis=0)
        da1 = dh2 @ self.W2_.T
        dh1 = da1 * (h1 > 0.0)
        gW1 = X.T @ dh1
        gb1 = dh1.sum(axis=0)
        return [gW1, gb1, gW2, gb2, gW3, gb3]

    def parameters(self) -> list[np.ndarray]:
        return [self.W1_, self.b1_, self.W2_, self.b2_, self.W3_, self.b3_]


class NtkLayerwiseRegressor(RegressorMixin, BaseEstimator):
    """Two-layer ReLU model yhat = relu(X W) a with (W, a) trained jointly.

    W (d x m) and a (m) start i.i.d. N(0, 1).  The training objective is
    MSE + lam * trace(Z1 Z1') with Z1 = relu(X W); by default lam = 0 (no
    regularization).  ``loss_trace_`` records the penalized loss at the
    start of each epoch.
    """

    def __init__(
        self,
        width: int = 50,
        lam: float = 0.0,
        epochs: int = 1000,
        learning_rate: float = 0.01,
        optimizer: str = "adam",
        momentum: float = 0.9,
        random_state: SeedStream | int = 0,
    ):
        self.width = width
        self.lam = lam
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.optimizer = optimizer
        self.momentum = momentum
        self.random_state = random_state

    def fit(self, X, y):
        if self.width < 1:
            raise ValueError("width must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        X, y = _check_fit_inputs(X, y)
        self.n_features_in_ = X.shape[1]
        gen = as_stream(self.random_state).generator()
        d, m, n = X.shape[1], self.width, X.shape[0]
        self.W_ = gen.standard_normal((d, m))
        self.a_ = gen.standard_normal(m)
        params = [self.W_, self.a_]
        opt = _make_optimizer(self.optimizer, params, self.learning_rate, self.momentum)
        trace = np.empty(self.epochs)
        with np.errstate(over="ignore", invalid="ignore"):
            for epoch in range(self.epochs):
                h = X @ self.W_
                z1 = np.maximum(h, 0.0)
                pred = z1 @ self.a_
                resid = pred - y
                penalty = self.lam * float(np.sum(z1 * z1))  # = lam * trace(Z1 Z1')
                loss = float(np.mean(resid ** 2)) + penalty
                if not np.isfinite(loss):
                    raise DivergedLoss(f"training loss diverged at epoch {epoch}")
                trace[epoch] = loss
                dz1 = (2.0 / n) * resid[:, None] * self.a_[None, :]
                if self.lam > 0:
                    dz1 = dz1 + 2.0 * self.lam * z1
                dh = dz1 * (h > 0.0)
                gW = X.T @ dh
                ga = z1.T @ ((2.0 / n) * resid)
                opt.step(params, [gW, ga])
        self.loss_trace_ = trace
        return self

    def predict(self, X):
        X = _check_predict_input(X, self.n_features_in_)
        return np.maximum(X @ self.W_, 0.0) @ self.a_

    def feature_gram(self, X) -> np.ndarray:
        """Z1 Z1' for the current weights (positive semidefinite)."""
        X = _check_predict_input(X, self.n_features_in_)
        z1 = np.maximum(X @ self.W_, 0.0)
        return z1 @ z1.T
