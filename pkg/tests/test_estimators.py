import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import rxopt.estimators as est_mod
from rxopt.errors import DimensionMismatch, DivergedLoss, FoldTooSmall, TestPartitionEmpty, ZeroNoiseVariance
from rxopt.estimators import (
    HoldOut,
    KFold,
    ModelSpec,
    holdout_optimism,
    kfold_optimism,
    mc_optimism,
    mse,
    scale_optimism,
)
from rxopt.models import LeastSquaresRegressor
from rxopt.numcore import SeedStream
from rxopt.signals import Dataset, DesignSpec, LinearSignal, PiecewiseLinearSignal, SignalSpec, sample_dataset
from rxopt.theory import scaled_optimism_piecewise


def piecewise_spec(k, sigma2):
    return SignalSpec(PiecewiseLinearSignal(k=k), noise_var=sigma2)


class TestMse:
    def test_perfect_predictor(self):
        X = np.array([[1.0], [2.0]])
        y = np.array([3.0, 6.0])
        est = LeastSquaresRegressor().fit(X, y)
        assert mse(est, (X, y)) <= 1e-28

    def test_constant_zero_predictor(self):
        class Zero:
            def predict(self, X):
                return np.zeros(len(X))

        assert mse(Zero(), (np.zeros((2, 1)), np.array([1.0, -1.0]))) == pytest.approx(1.0)

    def test_saturated_ols_interpolates(self):
        gen = np.random.default_rng(0)
        X = gen.standard_normal((3, 3))
        y = gen.standard_normal(3)
        est = LeastSquaresRegressor().fit(X, y)
        assert mse(est, (X, y)) <= 1e-16

    def test_shape_mismatch(self):
        class Bad:
            def predict(self, X):
                return np.zeros((len(X), 2))

        with pytest.raises(DimensionMismatch):
            mse(Bad(), (np.zeros((2, 1)), np.array([1.0, -1.0])))


class TestScaleOptimism:
    def test_arithmetic(self):
        assert scale_optimism(0.002, 1000, 0.01) == pytest.approx(100.0)

    def test_zero(self):
        assert scale_optimism(0.0, 123, 0.5) == 0.0

    def test_zero_noise_rejected(self):
        with pytest.raises(ZeroNoiseVariance):
            scale_optimism(0.1, 10, 0.0)

    @settings(max_examples=50, deadline=None)
    @given(
        st.floats(-1e3, 1e3),
        st.integers(1, 10_000),
        st.floats(1e-6, 1e3),
    )
    def test_roundtrip(self, opt_raw, n, sigma2):
        scaled = scale_optimism(opt_raw, n, sigma2)
        back = scaled * 2.0 * sigma2 / n
        assert back == pytest.approx(opt_raw, rel=1e-15, abs=1e-18)


class TestMcOptimism:
    def test_noiseless_wellspecified_has_zero_gap(self):
        sig = SignalSpec(LinearSignal(beta=(1.5,)), noise_var=0.0)
        est = mc_optimism(sig, DesignSpec(dimension=1), ModelSpec("ols"), 50, 50, 20, 3)
        assert abs(est.opt_raw) <= 1e-10
        assert est.opt_scaled is None

    def test_gap_identity_is_exact(self):
        est = mc_optimism(piecewise_spec(0.3, 0.1), DesignSpec(dimension=1), ModelSpec("ols"), 100, 100, 50, 4)
        assert est.opt_raw == est.err_test_mean - est.err_train_mean

    def test_seed_determinism_bitwise(self):
        kwargs = dict(n_train=80, n_test=80, num_runs=60, master_seed=9)
        a = mc_optimism(piecewise_spec(0.2, 0.05), DesignSpec(dimension=1), ModelSpec("ridge", lam=0.1), **kwargs)
        b = mc_optimism(piecewise_spec(0.2, 0.05), DesignSpec(dimension=1), ModelSpec("ridge", lam=0.1), **kwargs)
        assert a == b

    def test_fast_path_matches_generic_path(self, monkeypatch):
        sig = piecewise_spec(0.1, 0.02)
        args = (sig, DesignSpec(dimension=1))
        results = {}
        for label, fast in (("fast", True), ("generic", False)):
            if not fast:
                monkeypatch.setattr(est_mod, "_fast_path_applies", lambda m, d: False)
            for kind, lam in (("ols", 0.0), ("ridge", 0.5), ("bended", 0.0)):
                results[(label, kind)] = mc_optimism(*args, ModelSpec(kind, lam=lam), 120, 90, 40, 7)
            monkeypatch.undo()
        for kind in ("ols", "ridge", "bended"):
            fast, gen = results[("fast", kind)], results[("generic", kind)]
            assert fast.err_train_mean == pytest.approx(gen.err_train_mean, rel=1e-12)
            assert fast.err_test_mean == pytest.approx(gen.err_test_mean, rel=1e-12)
            assert fast.stderr_opt == pytest.approx(gen.stderr_opt, rel=1e-9)

    @pytest.mark.parametrize("k,num_runs", [(1.0, 2000), (0.0, 2000)])
    def test_matches_piecewise_closed_form(self, k, num_runs):
        sigma2 = 0.01
        est = mc_optimism(
            piecewise_spec(k, sigma2), DesignSpec(dimension=1), ModelSpec("ols"), 1000, 1000, num_runs, 170
        )
        want = scaled_optimism_piecewise(k, sigma2)
        tol = max(3.0 * est.stderr_scaled, 0.05 * max(want, 1.0))
        assert abs(est.opt_scaled - want) <= tol

    def test_num_runs_validated(self):
        with pytest.raises(ValueError):
            mc_optimism(piecewise_spec(0.1, 0.1), DesignSpec(dimension=1), ModelSpec("ols"), 10, 10, 1, 0)

    def test_diverged_run_aborts_estimate(self):
        sig = piecewise_spec(0.0, 0.1)
        model = ModelSpec("mlp", epochs=3000, learning_rate=1e6, optimizer="sgd")
        with pytest.raises(DivergedLoss):
            mc_optimism(sig, DesignSpec(dimension=1), model, 30, 30, 2, 5)

    def test_stderr_shrinks_with_run_count(self):
        sig = piecewise_spec(0.2, 0.05)
        ratios = []
        for seed in (1, 2, 3, 4, 5):
            a = mc_optimism(sig, DesignSpec(dimension=1), ModelSpec("ols"), 100, 100, 400, seed)
            b = mc_optimism(sig, DesignSpec(dimension=1), ModelSpec("ols"), 100, 100, 800, seed)
            ratios.append(b.stderr_opt / a.stderr_opt)
        mean_ratio = float(np.mean(ratios))
        assert (1 / np.sqrt(2)) * 0.8 <= mean_ratio <= (1 / np.sqrt(2)) * 1.25

    def test_iterative_model_runs_end_to_end(self):
        sig = piecewise_spec(0.5, 0.1)
        model = ModelSpec("ntk", width=8, epochs=30, learning_rate=0.01)
        est = mc_optimism(sig, DesignSpec(dimension=1), model, 40, 40, 3, 11)
        assert np.isfinite(est.opt_raw)

    def test_positivity_for_erm_families(self):
        for kind in ("ols", "bended"):
            for k in (0.0, 0.5, 1.0):
                est = mc_optimism(
                    piecewise_spec(k, 0.05), DesignSpec(dimension=1), ModelSpec(kind), 300, 300, 400, 23
                )
                assert est.opt_raw >= -3.0 * est.stderr_opt


def _holdout_oracle(data, plan, master_seed):
    """Brute-force re-enactment of the seeded split/bootstrap/fit loop."""
    X, y = data.X, data.y
    n = len(y)
    n_test = int(plan.test_fraction * n)
    train_errs, test_errs = [], []
    for r in range(plan.num_runs):
        gen = SeedStream(master_seed).child(r).generator()
        perm = gen.permutation(n)
        test_idx = perm[:n_test]
        train_idx = perm[n_test:]
        if plan.bootstrap:
            test_idx = test_idx[gen.integers(0, n_test, size=n_test)]
        # constant-mean model: intercept-only least squares
        mean = float(np.mean(y[train_idx]))
        train_errs.append(float(np.mean((y[train_idx] - mean) ** 2)))
        test_errs.append(float(np.mean((y[test_idx] - mean) ** 2)))
    return float(np.mean(test_errs)) - float(np.mean(train_errs))


class TestHoldout:
    def test_noiseless_linear_gap_vanishes(self):
        sig = SignalSpec(LinearSignal(beta=(2.0,)), noise_var=0.0)
        data = sample_dataset(sig, DesignSpec(dimension=1), 100, SeedStream(2))
        est = holdout_optimism(data, ModelSpec("ols"), HoldOut(0.2, 50), 3)
        assert abs(est.opt_raw) <= 1e-8

    def test_duplicated_rows_with_interpolator(self):
        X = np.ones((40, 1))
        y = np.full(40, 3.0)
        est = holdout_optimism(Dataset(X=X, y=y), ModelSpec("ols"), HoldOut(0.25, 20), 5)
        assert est.opt_raw == 0.0

    def test_matches_hand_enumerated_oracle(self):
        # 4-point data, constant-mean model realized as intercept-only OLS
        # on a zero feature column
        X = np.zeros((4, 1))
        y = np.array([0.0, 1.0, 2.0, 3.0])
        data = Dataset(X=X, y=y)
        plan = HoldOut(test_fraction=0.25, num_runs=16)
        est = holdout_optimism(data, ModelSpec("ols", intercept=True), plan, 77)
        assert est.opt_raw == pytest.approx(_holdout_oracle(data, plan, 77), rel=1e-12)

    def test_bootstrap_toggle_changes_test_draws(self):
        sig = piecewise_spec(0.2, 0.5)
        data = sample_dataset(sig, DesignSpec(dimension=1), 60, SeedStream(6))
        with_boot = holdout_optimism(data, ModelSpec("ols"), HoldOut(0.2, 40, bootstrap=True), 7)
        without = holdout_optimism(data, ModelSpec("ols"), HoldOut(0.2, 40, bootstrap=False), 7)
        assert with_boot.err_train_mean == without.err_train_mean
        assert with_boot.err_test_mean != without.err_test_mean

    def test_empty_test_partition_rejected(self):
        data = Dataset(X=np.ones((3, 1)), y=np.ones(3))
        with pytest.raises(TestPartitionEmpty):
            holdout_optimism(data, ModelSpec("ols"), HoldOut(0.05, 4), 1)

    def test_scaled_present_only_with_known_noise(self):
        sig = piecewise_spec(0.2, 0.5)
        data = sample_dataset(sig, DesignSpec(dimension=1), 60, SeedStream(8))
        assert holdout_optimism(data, ModelSpec("ols"), HoldOut(0.2, 20), 9).opt_scaled is not None
        bare = Dataset(X=data.X, y=data.y)  # noise_var unknown
        assert holdout_optimism(bare, ModelSpec("ols"), HoldOut(0.2, 20), 9).opt_scaled is None


def _kfold_oracle(data, plan, master_seed):
    X, y = data.X, data.y
    n = len(y)
    run_train, run_test = [], []
    for r in range(plan.num_runs):
        gen = SeedStream(master_seed).child(r).generator()
        folds = np.array_split(gen.permutation(n), plan.k)
        test_idx = folds[0]
        tr, te = [], []
        for train_idx in folds[1:]:
            mean = float(np.mean(y[train_idx]))
            tr.append(float(np.mean((y[train_idx] - mean) ** 2)))
            te.append(float(np.mean((y[test_idx] - mean) ** 2)))
        run_train.append(float(np.mean(tr)))
        run_test.append(float(np.mean(te)))
    return float(np.mean(run_test)) - float(np.mean(run_train))


class TestKfold:
    def test_realizable_signal_gap_vanishes(self):
        X = np.array([[1.0], [2.0], [3.0], [4.0]])
        y = 2.0 * X[:, 0]
        est = kfold_optimism(Dataset(X=X, y=y), ModelSpec("ols"), KFold(2, 8), 3)
        assert abs(est.opt_raw) <= 1e-8

    def test_training_fold_smaller_than_features_rejected(self):
        gen = np.random.default_rng(4)
        data = Dataset(X=gen.standard_normal((6, 2)), y=gen.standard_normal(6))
        with pytest.raises(FoldTooSmall):
            kfold_optimism(data, ModelSpec("ols"), KFold(6, 4), 5)

    def test_more_folds_than_rows_rejected(self):
        data = Dataset(X=np.ones((3, 1)), y=np.ones(3))
        with pytest.raises(FoldTooSmall):
            kfold_optimism(data, ModelSpec("ols"), KFold(5, 4), 5)

    def test_matches_enumeration_oracle(self):
        X = np.zeros((4, 1))
        y = np.array([0.0, 0.0, 10.0, 10.0])
        data = Dataset(X=X, y=y)
        plan = KFold(k=2, num_runs=1)
        est = kfold_optimism(data, ModelSpec("ols", intercept=True), plan, 13)
        assert est.opt_raw == pytest.approx(_kfold_oracle(data, plan, 13), rel=1e-12)

    def test_agreement_with_holdout_on_stable_model(self):
        sig = SignalSpec(LinearSignal(beta=(1.0,)), noise_var=1.0)
        data = sample_dataset(sig, DesignSpec(dimension=1), 400, SeedStream(21))
        ho = holdout_optimism(data, ModelSpec("ols"), HoldOut(0.2, 400), 31)
        k2 = kfold_optimism(data, ModelSpec("ols"), KFold(2, 400), 32)
        comb = float(np.hypot(ho.stderr_opt, k2.stderr_opt))
        assert abs(ho.opt_raw - k2.opt_raw) <= 3.0 * comb


class TestModelSpec:
    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            ModelSpec("quantile")

    def test_negative_penalty_rejected(self):
        with pytest.raises(ValueError):
            ModelSpec("ridge", lam=-1.0)

    def test_builders_produce_working_estimators(self):
        gen = np.random.default_rng(31)
        X = gen.standard_normal((30, 2))
        y = gen.standard_normal(30)
        for kind in ("ols", "ridge", "lowrank", "krr_linear", "krr_ntk", "mlp", "ntk"):
            spec = ModelSpec(kind, lam=0.1, rank=2, width=6, epochs=5)
            model = spec.build(2, SeedStream(1)).fit(X, y)
            assert np.isfinite(model.predict(X)).all()
