"""Empirical optimism estimators.

``mc_optimism`` regenerates synthetic train/test sets per run from a known
signal; ``holdout_optimism`` and ``kfold_optimism`` estimate the same
test-minus-train gap on a fixed real dataset by resampling.  Every run owns
a seed stream derived from (master_seed, run index), so estimates are
bit-identical regardless of execution order or worker count; per-run values
are stored in run order and reduced with numpy's pairwise summation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DimensionMismatch, FoldTooSmall, TestPartitionEmpty, ZeroNoiseVariance
from .models import (
    BendedRegressor,
    KernelRidgeRegressor,
    LeastSquaresRegressor,
    LinearKernel,
    LowRankRegressor,
    NtkKernel,
    RidgeRegressor,
    unpack,
)
from .nets import MlpRegressor, NtkLayerwiseRegressor
from .numcore import SeedStream, as_stream
from .signals import Dataset, DesignSpec, SignalSpec, eval_signal, sample_dataset

_MODEL_CHILD = 2  # run_stream.child(2) seeds model initialization


# ---------------------------------------------------------------------------
# Declarative model specification


MODEL_KINDS = ("ols", "ridge", "bended", "lowrank", "krr_linear", "krr_ntk", "mlp", "ntk")


@dataclass(frozen=True)
class ModelSpec:
    """Declarative model family; ``build`` instantiates a fresh estimator.

    ``lam`` is the ridge/kernel penalty, ``rank`` the truncation rank for
    ``lowrank``, ``width`` the hidden width for ``krr_ntk``/``ntk``,
    ``hidden``/``epochs``/``learning_rate``/``optimizer`` the training knobs
    for the iterative models.
    """

    kind: str = "ols"
    lam: float = 0.0
    intercept: bool = False
    rank: int = 1
    width: int = 50
    hidden: tuple[int, int] = (50, 50)
    epochs: int = 1000
    learning_rate: float = 0.01
    optimizer: str = "adam"

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.lam < 0:
            raise ValueError("lam must be >= 0")

    @property
    def needs_rng(self) -> bool:
        return self.kind in ("krr_ntk", "mlp", "ntk")

    @property
    def is_iterative(self) -> bool:
        return self.kind in ("mlp", "ntk")

    def min_train_rows(self, d: int) -> int:
        if self.kind == "ols" or (self.kind == "ridge" and self.lam == 0.0):
            return d + (1 if self.intercept else 0)
        if self.kind == "lowrank":
            return d
        if self.kind == "bended":
            return 2
        return 1

    def build(self, d: int, rng: Optional[SeedStream] = None):
        if self.kind == "ols":
            return LeastSquaresRegressor(fit_intercept=self.intercept)
        if self.kind == "ridge":
            return RidgeRegressor(lam=self.lam, fit_intercept=self.intercept)
        if self.kind == "bended":
            return BendedRegressor()
        if self.kind == "lowrank":
            return LowRankRegressor(rank=self.rank)
        if self.kind == "krr_linear":
            return KernelRidgeRegressor(kernel=LinearKernel(), lam=self.lam)
        if self.kind == "krr_ntk":
            gen = (rng or SeedStream(0)).generator()
            w0 = gen.standard_normal((d, self.width))
            a = gen.standard_normal(self.width)
            return KernelRidgeRegressor(kernel=NtkKernel(w0, a), lam=self.lam)
        if self.kind == "mlp":
            return MlpRegressor(
                hidden=self.hidden,
                epochs=self.epochs,
                learning_rate=self.learning_rate,
                optimizer=self.optimizer,
                random_state=rng if rng is not None else 0,
            )
        return NtkLayerwiseRegressor(
            width=self.width,
            lam=self.lam,
            epochs=self.epochs,
            learning_rate=self.learning_rate,
            optimizer=self.optimizer,
            random_state=rng if rng is not None else 0,
        )


# ---------------------------------------------------------------------------
# Results


@dataclass(frozen=True)
class OptimismEstimate:
    """Averaged train/test errors and their gap over Monte-Carlo runs.

    ``opt_raw`` is exactly ``err_test_mean - err_train_mean``;
    ``opt_scaled`` (= opt_raw * n_train / (2 sigma2)) is present only when
    the noise variance is known and positive.  ``stderr_opt`` is the sample
    standard error of the per-run (test - train) differences.
    """

    err_train_mean: float
    err_test_mean: float
    opt_raw: float
    opt_scaled: Optional[float]
    stderr_opt: float
    n_train: int
    n_test: int
    num_runs: int
    noise_var: Optional[float] = None

    @property
    def stderr_scaled(self) -> Optional[float]:
        if self.opt_scaled is None or not self.noise_var:
            return None
        return self.stderr_opt * self.n_train / (2.0 * self.noise_var)


def scale_optimism(opt_raw: float, n_train: int, sigma2: float) -> float:
    """opt_raw * n_train / (2 * sigma2)."""
    if sigma2 <= 0:
        raise ZeroNoiseVariance("scaling requires sigma2 > 0")
    return opt_raw * n_train / (2.0 * sigma2)


def _assemble(
    train_errs: np.ndarray,
    test_errs: np.ndarray,
    n_train: int,
    n_test: int,
    sigma2: Optional[float],
) -> OptimismEstimate:
    err_train = float(np.mean(train_errs))
    err_test = float(np.mean(test_errs))
    opt_raw = err_test - err_train
    diffs = test_errs - train_errs
    runs = diffs.shape[0]
    stderr = float(np.std(diffs, ddof=1) / np.sqrt(runs)) if runs > 1 else float("inf")
    scaled = None
    if sigma2 is not None and sigma2 > 0:
        scaled = scale_optimism(opt_raw, n_train, sigma2)
    return OptimismEstimate(
        err_train_mean=err_train,
        err_test_mean=err_test,
        opt_raw=opt_raw,
        opt_scaled=scaled,
        stderr_opt=stderr,
        n_train=n_train,
        n_test=n_test,
        num_runs=runs,
        noise_var=sigma2,
    )


def mse(model, data) -> float:
    """Mean squared prediction error of a fitted model on a dataset."""
    X, y = unpack(data)
    pred = np.asarray(model.predict(X), dtype=float)
    if pred.shape != y.shape:
        raise DimensionMismatch(f"prediction shape {pred.shape} does not match y {y.shape}")
    return float(np.mean((y - pred) ** 2))


# ---------------------------------------------------------------------------
# Synthetic-data Monte Carlo


def mc_optimism(
    signal: SignalSpec,
    design: DesignSpec,
    model: ModelSpec,
    n_train: int,
    n_test: int,
    num_runs: int,
    master_seed: int | SeedStream,
) -> OptimismEstimate:
    """Monte-Carlo expected optimism on regenerated synthetic data.

    Each run draws a fresh train and test set from its own stream, fits the
    model (iterative models are re-initialized from a per-run seed and their
    error is the pure MSE of the final-epoch parameters), and records both
    errors.  A diverged fit aborts the whole estimate rather than dropping
    the run.
    """
    if num_runs < 2:
        raise ValueError("num_runs must be >= 2")
    root = as_stream(master_seed)
    if _fast_path_applies(model, design):
        train_errs, test_errs = _fast_linear_family_runs(
            signal, design, model, n_train, n_test, num_runs, root
        )
    else:
        train_errs = np.empty(num_runs)
        test_errs = np.empty(num_runs)
        d = design.n_features
        for r in range(num_runs):
            run_stream = root.child(r)
            gen = run_stream.generator()
            train = sample_dataset(signal, design, n_train, gen)
            test = sample_dataset(signal, design, n_test, gen)
            rng = run_stream.child(_MODEL_CHILD) if model.needs_rng else None
            est = model.build(d, rng).fit(train.X, train.y)
            train_errs[r] = mse(est, train)
            test_errs[r] = mse(est, test)
    return _assemble(train_errs, test_errs, n_train, n_test, signal.noise_var)


def _fast_path_applies(model: ModelSpec, design: DesignSpec) -> bool:
    if design.dimension != 1 or design.intercept:
        return False
    if model.kind == "bended":
        return True
    return model.kind in ("ols", "ridge") and not model.intercept


def _fast_linear_family_runs(
    signal: SignalSpec,
    design: DesignSpec,
    model: ModelSpec,
    n_train: int,
    n_test: int,
    num_runs: int,
    root: SeedStream,
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized exact solves for 1-D ols/ridge/bended cells.

    Reproduces the generic path's per-run streams and draw layout exactly
    (X then noise, train then test, one generator per run); only the fit and
    error arithmetic is batched.  Agreement with the generic path is pinned
    by tests.
    """
    cov = design.covariance
    scale_x = 1.0 if cov is None else float(np.linalg.cholesky(cov)[0, 0])
    sd = np.sqrt(signal.noise_var)
    chunk = max(1, int(2_000_000 // max(n_train + n_test, 1)))
    train_errs = np.empty(num_runs)
    test_errs = np.empty(num_runs)
    xb = np.empty((chunk, n_train))
    yb = np.empty((chunk, n_train))
    xtb = np.empty((chunk, n_test))
    ytb = np.empty((chunk, n_test))
    start = 0
    while start < num_runs:
        c = min(chunk, num_runs - start)
        for i in range(c):
            gen = root.child(start + i).generator()
            x = gen.standard_normal((n_train, 1))[:, 0]
            if cov is not None:
                x = x * scale_x
            xb[i] = x
            yb[i] = eval_signal(signal, x) + sd * gen.standard_normal(n_train)
            xt = gen.standard_normal((n_test, 1))[:, 0]
            if cov is not None:
                xt = xt * scale_x
            xtb[i] = xt
            ytb[i] = eval_signal(signal, xt) + sd * gen.standard_normal(n_test)
        x, y, xt, yt = xb[:c], yb[:c], xtb[:c], ytb[:c]
        if model.kind == "bended":
            r = np.maximum(x, 0.0)
            s1 = r.sum(axis=1)
            s2 = np.einsum("ij,ij->i", r, r)
            t0 = y.sum(axis=1)
            t1 = np.einsum("ij,ij->i", r, y)
            det = n_train * s2 - s1 * s1
            degenerate = x.max(axis=1) <= 0.0
            safe_det = np.where(det > 0, det, 1.0)
            alpha = np.where(degenerate, t0 / n_train, (s2 * t0 - s1 * t1) / safe_det)
            beta = np.where(degenerate, 0.0, (n_train * t1 - s1 * t0) / safe_det)
            pred_tr = alpha[:, None] + beta[:, None] * r
            pred_te = alpha[:, None] + beta[:, None] * np.maximum(xt, 0.0)
        else:
            sxx = np.einsum("ij,ij->i", x, x)
            sxy = np.einsum("ij,ij->i", x, y)
            denom = sxx + n_train * model.lam if model.kind == "ridge" else sxx
            coef = sxy / denom
            pred_tr = coef[:, None] * x
            pred_te = coef[:, None] * xt
        train_errs[start : start + c] = np.mean((y - pred_tr) ** 2, axis=1)
        test_errs[start : start + c] = np.mean((yt - pred_te) ** 2, axis=1)
        start += c
    return train_errs, test_errs


# ---------------------------------------------------------------------------
# Real-data resampling


@dataclass(frozen=True)
class HoldOut:
    """Repeated random split; the held-out part is bootstrap-resampled.

    ``bootstrap=False`` evaluates on the held-out rows directly (plain
    repeated hold-out) instead of on a same-size resample of them.
    """

    test_fraction: float = 0.2
    num_runs: int = 10_000
    bootstrap: bool = True

    def __post_init__(self):
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError("test_fraction must lie in (0, 1)")
        if self.num_runs < 1:
            raise ValueError("num_runs must be >= 1")


@dataclass(frozen=True)
class KFold:
    """Disjoint near-equal folds; one fold is the test set and each of the
    remaining k-1 folds serves in turn as a training set."""

    k: int = 2
    num_runs: int = 10_000

    def __post_init__(self):
        if self.k < 2:
            raise ValueError("k must be >= 2")
        if self.num_runs < 1:
            raise ValueError("num_runs must be >= 1")


def holdout_optimism(
    data: Dataset,
    model: ModelSpec,
    plan: HoldOut,
    master_seed: int | SeedStream,
) -> OptimismEstimate:
    """Optimism on a fixed dataset via repeated hold-out splits."""
    X, y = data.X, data.y
    n = X.shape[0]
    n_test = int(plan.test_fraction * n)
    if n_test < 1:
        raise TestPartitionEmpty(f"test fraction {plan.test_fraction} leaves no test rows for n={n}")
    n_train = n - n_test
    if n_train < model.min_train_rows(X.shape[1]):
        raise FoldTooSmall(f"training partition of {n_train} rows is too small for {model.kind}")
    root = as_stream(master_seed)
    train_errs = np.empty(plan.num_runs)
    test_errs = np.empty(plan.num_runs)
    for r in range(plan.num_runs):
        run_stream = root.child(r)
        gen = run_stream.generator()
        perm = gen.permutation(n)
        test_idx = perm[:n_test]
        train_idx = perm[n_test:]
        if plan.bootstrap:
            test_idx = test_idx[gen.integers(0, n_test, size=n_test)]
        rng = run_stream.child(_MODEL_CHILD) if model.needs_rng else None
        est = model.build(X.shape[1], rng).fit(X[train_idx], y[train_idx])
        train_errs[r] = mse(est, (X[train_idx], y[train_idx]))
        test_errs[r] = mse(est, (X[test_idx], y[test_idx]))
    return _assemble(train_errs, test_errs, n_train, n_test, data.noise_var)


def kfold_optimism(
    data: Dataset,
    model: ModelSpec,
    plan: KFold,
    master_seed: int | SeedStream,
) -> OptimismEstimate:
    """Optimism on a fixed dataset via the rotating-fold scheme.

    Per run the rows are partitioned into k near-equal disjoint folds; fold
    0 of the permuted order is the test set, and each remaining fold is used
    as a training set on its own.  Fold-level errors enter with equal
    weights even when fold sizes differ by one row.
    """
    X, y = data.X, data.y
    n = X.shape[0]
    if plan.k > n:
        raise FoldTooSmall(f"k={plan.k} exceeds the number of rows {n}")
    min_fold = n // plan.k
    if min_fold < model.min_train_rows(X.shape[1]):
        raise FoldTooSmall(
            f"training folds of {min_fold} rows are too small for {model.kind}"
        )
    root = as_stream(master_seed)
    runs = plan.num_runs
    run_train = np.empty(runs)
    run_test = np.empty(runs)
    test_fold_size = len(np.array_split(np.arange(n), plan.k)[0])
    for r in range(runs):
        run_stream = root.child(r)
        gen = run_stream.generator()
        folds = np.array_split(gen.permutation(n), plan.k)
        test_idx = folds[0]
        fold_train = np.empty(plan.k - 1)
        fold_test = np.empty(plan.k - 1)
        for j, train_idx in enumerate(folds[1:]):
            rng = run_stream.child(_MODEL_CHILD).child(j) if model.needs_rng else None
            est = model.build(X.shape[1], rng).fit(X[train_idx], y[train_idx])
            fold_train[j] = mse(est, (X[train_idx], y[train_idx]))
            fold_test[j] = mse(est, (X[test_idx], y[test_idx]))
        # equal fold weights within a run; runs weighted equally overall
        run_train[r] = np.mean(fold_train)
        run_test[r] = np.mean(fold_test)
    return _assemble(run_train, run_test, min_fold, test_fold_size, data.noise_var)
