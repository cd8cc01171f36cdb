import numpy as np
import pytest

from rxopt.cli import main
from rxopt.dataio import load_dataset_csv
from rxopt.errors import ConfigError, EmptyFile, MissingColumn, MixedModes, NonNumericCell
from rxopt.gridrun import (
    ResultRow,
    config_from_mapping,
    emit_csv,
    parse_config_text,
    parse_results_csv,
    report_summary,
    run_grid,
)
from rxopt.theory import scaled_optimism_piecewise


class TestConfigParsing:
    def test_comments_and_repeats(self):
        text = """
        # a comment line
        k = 0.0
        k = 0.5   # trailing comment
        sigma2 = 0.01
        model = ols
        seed = 7
        """
        mapping = parse_config_text(text)
        assert mapping["k"] == ["0.0", "0.5"]
        assert mapping["seed"] == ["7"]

    def test_missing_equals_rejected(self):
        with pytest.raises(ConfigError):
            parse_config_text("just a line\n")

    def test_empty_value_rejected(self):
        with pytest.raises(ConfigError):
            parse_config_text("k = \n")

    def test_empty_grids_rejected(self):
        with pytest.raises(ConfigError):
            config_from_mapping("simulate", {"sigma2": ["0.1"], "model": ["ols"]})
        with pytest.raises(ConfigError):
            config_from_mapping("simulate", {"k": ["0.1"], "model": ["ols"]})

    def test_unknown_model_rejected(self):
        with pytest.raises(ConfigError):
            config_from_mapping(
                "simulate", {"k": ["0.1"], "sigma2": ["0.1"], "model": ["svm"]}
            )

    def test_model_lambda_product(self):
        cfg = config_from_mapping(
            "simulate",
            {"k": ["0"], "sigma2": ["0.1"], "model": ["ols", "ridge"], "lambda": ["0", "1"]},
        )
        kinds = [(m.kind, m.lam) for m in cfg.models]
        assert kinds == [("ols", 0.0), ("ridge", 0.0), ("ridge", 1.0)]

    def test_signal_families(self):
        cfg = config_from_mapping(
            "simulate",
            {
                "k": ["0.5"],
                "coeffs": ["1,0,2"],
                "bump": ["1.0,0.5"],
                "beta": ["1,2,3"],
                "sigma2": ["0.1"],
                "model": ["ols"],
            },
        )
        assert [c.kind for c in cfg.signals] == ["piecewise", "poly", "bump", "linear"]


def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(row + "\n")


class TestLoadDatasetCsv:
    def test_small_file(self, tmp_path):
        path = tmp_path / "d.csv"
        _write_csv(path, "x,y", ["1,2", "2,4", "3,6"])
        data = load_dataset_csv(str(path), "y")
        assert data.n == 3 and data.d == 1
        assert np.allclose(data.y, [2, 4, 6])
        assert data.noise_var is None

    def test_standardization(self, tmp_path):
        path = tmp_path / "d.csv"
        _write_csv(path, "a,b,y", ["1,10,0", "2,20,1", "3,30,0", "4,40,1"])
        data = load_dataset_csv(str(path), "y")
        assert np.allclose(data.X.mean(axis=0), 0.0, atol=1e-12)
        assert np.allclose(data.X.std(axis=0), 1.0, atol=1e-12)

    def test_blank_cell_reports_location(self, tmp_path):
        path = tmp_path / "d.csv"
        _write_csv(path, "x,y", ["1,2", ",4"])
        with pytest.raises(NonNumericCell) as info:
            load_dataset_csv(str(path), "y")
        assert info.value.row == 2 and info.value.column == "x"

    def test_missing_target(self, tmp_path):
        path = tmp_path / "d.csv"
        _write_csv(path, "x,y", ["1,2"])
        with pytest.raises(MissingColumn):
            load_dataset_csv(str(path), "z")

    def test_empty_file(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("")
        with pytest.raises(EmptyFile):
            load_dataset_csv(str(path), "y")

    def test_diabetes_shaped_file(self, tmp_path):
        # 442 samples, 10-dimensional input plus one target column
        gen = np.random.default_rng(0)
        X = gen.standard_normal((442, 10))
        y = X @ gen.standard_normal(10) + gen.standard_normal(442)
        path = tmp_path / "diabetes_like.csv"
        header = ",".join([f"f{i}" for i in range(10)] + ["target"])
        rows = [",".join(f"{v:.10g}" for v in np.append(X[i], y[i])) for i in range(442)]
        _write_csv(path, header, rows)
        data = load_dataset_csv(str(path), "target")
        assert data.n == 442 and data.d == 10


class TestEmitCsv:
    def test_empty_rows_gives_header_only(self, tmp_path):
        path = tmp_path / "out.csv"
        emit_csv([], str(path))
        text = path.read_text()
        assert text.count("\n") == 1
        assert text.startswith("mode,signal_kind,")

    def test_row_count(self, tmp_path):
        rows = [
            ResultRow("simulate", "piecewise", "0", 0.1, "ols", 0.0, 10, 4, opt_raw=0.5),
            ResultRow("simulate", "piecewise", "1", 0.1, "ols", 0.0, 10, 4, opt_raw=0.25),
        ]
        path = tmp_path / "out.csv"
        emit_csv(rows, str(path))
        assert path.read_text().count("\n") == 3

    def test_roundtrip_is_bit_exact(self, tmp_path):
        tricky = [1.0 / 3.0, 1e-300, 1.2345678901234567e17, -0.0, 2.5e-17]
        rows = [
            ResultRow(
                "simulate", "piecewise", "0.1", v, "ols", v, 10, 4,
                err_train_mean=v, err_test_mean=v, opt_raw=v, opt_scaled=v, stderr=abs(v),
            )
            for v in tricky
        ]
        path = tmp_path / "out.csv"
        emit_csv(rows, str(path))
        back = parse_results_csv(str(path))
        for row, rec in zip(rows, back):
            assert rec["opt_raw"] == row.opt_raw
            assert rec["sigma2"] == row.sigma2
            assert rec["theory_value"] is None


class TestRunGrid:
    def test_theory_mode_delegates_to_closed_form(self):
        cfg = config_from_mapping(
            "theory",
            {
                "k": ["0", "0.25", "0.5", "0.75", "1"],
                "sigma2": ["0.05"],
                "model": ["ols"],
                "seed": ["3"],
            },
        )
        rows = run_grid(cfg)
        for row in rows:
            want = scaled_optimism_piecewise(float(row.k_or_coeffs), 0.05)
            assert row.theory_value == want
            assert row.status == "ok"

    def test_simulate_single_cell_matches_closed_form(self):
        cfg = config_from_mapping(
            "simulate",
            {
                "k": ["0.5"],
                "sigma2": ["0.01"],
                "model": ["ols"],
                "n_train": ["1000"],
                "n_test": ["1000"],
                "num_runs": ["2000"],
                "seed": ["6"],
            },
        )
        (row,) = run_grid(cfg)
        want = scaled_optimism_piecewise(0.5, 0.01)
        se_scaled = row.stderr * row.n_train / (2 * row.sigma2)
        assert abs(row.opt_scaled - want) <= max(3 * se_scaled, 0.05 * max(want, 1.0))

    def test_compare_mode_mc_matches_theory_column(self):
        cfg = config_from_mapping(
            "compare",
            {
                "k": ["0.25"],
                "sigma2": ["0.05"],
                "model": ["ols"],
                "n_train": ["1000"],
                "n_test": ["1000"],
                "num_runs": ["2000"],
                "seed": ["6"],
            },
        )
        (row,) = run_grid(cfg)
        assert row.theory_value == pytest.approx(4.75)
        se_scaled = row.stderr * row.n_train / (2 * row.sigma2)
        assert abs(row.opt_scaled - row.theory_value) <= max(3 * se_scaled, 0.05 * row.theory_value)

    def test_grid_isolation(self):
        base = {
            "sigma2": ["0.05"],
            "model": ["ols"],
            "n_train": ["100"],
            "n_test": ["100"],
            "num_runs": ["50"],
            "seed": ["5"],
        }
        full = run_grid(config_from_mapping("simulate", {**base, "k": ["0", "0.5", "1"]}))
        partial = run_grid(config_from_mapping("simulate", {**base, "k": ["0", "1"]}))
        kept = [r for r in full if r.k_or_coeffs in ("0", "1")]
        assert [r.as_record() for r in kept] == [r.as_record() for r in partial]

    def test_cell_error_recorded_not_fatal(self):
        cfg = config_from_mapping(
            "simulate",
            {
                "k": ["0.5"],
                "beta": ["1"],
                "sigma2": ["0.1"],
                "model": ["lowrank"],
                "rank": ["4"],  # exceeds the 1-D dimension
                "n_train": ["50"],
                "n_test": ["50"],
                "num_runs": ["10"],
            },
        )
        rows = run_grid(cfg)
        assert all(r.status == "error:RankExceedsDimension" for r in rows)

    def test_thread_count_does_not_change_rows(self):
        base = {
            "k": ["0", "0.5"],
            "sigma2": ["0.05", "0.1"],
            "model": ["ols", "bended"],
            "n_train": ["100"],
            "n_test": ["100"],
            "num_runs": ["40"],
            "seed": ["9"],
        }
        one = run_grid(config_from_mapping("simulate", {**base, "threads": ["1"]}))
        many = run_grid(config_from_mapping("simulate", {**base, "threads": ["7"]}))
        assert [r.as_record() for r in one] == [r.as_record() for r in many]

    def test_realdata_mode(self, tmp_path):
        gen = np.random.default_rng(1)
        X = gen.standard_normal((80, 2))
        y = X @ np.array([1.0, -1.0]) + 0.5 * gen.standard_normal(80)
        path = tmp_path / "data.csv"
        header = "a,b,y"
        rows = [f"{X[i,0]},{X[i,1]},{y[i]}" for i in range(80)]
        _write_csv(path, header, rows)
        cfg = config_from_mapping(
            "realdata",
            {
                "dataset": [str(path)],
                "target": ["y"],
                "plan": ["both"],
                "kfolds": ["2", "4"],
                "model": ["ols"],
                "intercept": ["true"],
                "num_runs": ["30"],
                "seed": ["2"],
            },
        )
        out = run_grid(cfg)
        assert [r.signal_kind for r in out] == ["holdout", "kfold2", "kfold4"]
        for row in out:
            assert row.status == "ok"
            assert row.opt_scaled is None
            assert row.opt_per_n == pytest.approx(row.opt_raw / 80)


class TestReportSummary:
    def _rows(self, ks, lams, sigma2=0.1):
        rows = []
        for k in ks:
            for lam in lams:
                rows.append(
                    ResultRow(
                        "simulate", "piecewise", str(k), sigma2, "ridge", lam,
                        100, 10, opt_scaled=k + lam,
                    )
                )
        return rows

    def test_pivot_shape(self):
        text = report_summary(self._rows([0.0, 0.5, 1.0], [0.0, 1.0]))
        lines = text.splitlines()
        assert len(lines) == 5  # title + header + 3 parameter rows
        assert "ridge(lam=0)" in lines[1] and "ridge(lam=1)" in lines[1]

    def test_single_row(self):
        text = report_summary(self._rows([0.5], [1.0]))
        assert "1.5" in text

    def test_mixed_modes_rejected(self):
        rows = self._rows([0.0], [0.0])
        rows.append(ResultRow("theory", "piecewise", "0", 0.1, "ols", 0.0, None, None))
        with pytest.raises(MixedModes):
            report_summary(rows)

    def test_realdata_plans_get_their_own_rows(self):
        rows = [
            ResultRow("realdata", plan, "-", None, "ols", 0.0, 300, 10, opt_raw=val)
            for plan, val in (("holdout", 0.5), ("kfold2", 0.25), ("kfold4", 0.125))
        ]
        text = report_summary(rows)
        lines = text.splitlines()
        assert len(lines) == 5  # title + header + one line per plan
        assert "0.5" in text and "0.25" in text and "0.125" in text


class TestCliMain:
    def _config(self, tmp_path, extra=""):
        cfg = tmp_path / "grid.cfg"
        cfg.write_text(
            "k = 0.5\nsigma2 = 0.05\nmodel = ols\nn_train = 60\n"
            "n_test = 60\nnum_runs = 30\nseed = 4\n" + extra
        )
        return cfg

    def test_success_exit_code_and_csv(self, tmp_path, capsys):
        cfg = self._config(tmp_path)
        out = tmp_path / "rows.csv"
        code = main(["simulate", "--config", str(cfg), "--out", str(out)])
        assert code == 0
        assert out.exists()
        recs = parse_results_csv(str(out))
        assert len(recs) == 1 and recs[0]["status"] == "ok"
        assert "param" in capsys.readouterr().out

    def test_config_error_exit_code(self, tmp_path, capsys):
        bad = tmp_path / "bad.cfg"
        bad.write_text("model = ols\n")  # no signal grid
        assert main(["simulate", "--config", str(bad)]) == 1

    def test_cell_failure_exit_code(self, tmp_path, capsys):
        cfg = self._config(tmp_path, extra="model = lowrank\nrank = 3\n")
        assert main(["simulate", "--config", str(cfg), "--quiet"]) == 2

    def test_threads_flag_is_byte_invariant(self, tmp_path):
        cfg = tmp_path / "grid.cfg"
        cfg.write_text(
            "k = 0\nk = 1\nsigma2 = 0.05\nmodel = ols\nmodel = ridge\nlambda = 0.5\n"
            "n_train = 80\nn_test = 80\nnum_runs = 40\nseed = 11\n"
        )
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(["simulate", "--config", str(cfg), "--out", str(a), "--quiet", "--threads", "1"]) == 0
        assert main(["simulate", "--config", str(cfg), "--out", str(b), "--quiet", "--threads", "8"]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_realdata_end_to_end(self, tmp_path, capsys):
        gen = np.random.default_rng(3)
        X = gen.standard_normal((60, 2))
        y = X @ np.array([2.0, -1.0]) + gen.standard_normal(60)
        data_path = tmp_path / "d.csv"
        _write_csv(data_path, "a,b,y", [f"{X[i,0]},{X[i,1]},{y[i]}" for i in range(60)])
        cfg = tmp_path / "real.cfg"
        cfg.write_text(
            f"dataset = {data_path}\ntarget = y\nplan = both\nkfolds = 2\n"
            "model = ols\nintercept = true\nnum_runs = 20\nseed = 5\n"
        )
        out = tmp_path / "real_rows.csv"
        assert main(["realdata", "--config", str(cfg), "--out", str(out)]) == 0
        printed = capsys.readouterr().out
        assert "standardized" in printed
        assert "holdout" in printed and "kfold2" in printed
        recs = parse_results_csv(str(out))
        assert {r["signal_kind"] for r in recs} == {"holdout", "kfold2"}
        assert all(r["opt_scaled"] is None for r in recs)

    def test_seed_and_runs_overrides(self, tmp_path):
        cfg = self._config(tmp_path)
        out1 = tmp_path / "s1.csv"
        out2 = tmp_path / "s2.csv"
        main(["simulate", "--config", str(cfg), "--out", str(out1), "--quiet", "--seed", "99", "--runs", "20"])
        main(["simulate", "--config", str(cfg), "--out", str(out2), "--quiet", "--seed", "99", "--runs", "20"])
        assert out1.read_bytes() == out2.read_bytes()
        recs = parse_results_csv(str(out1))
        assert recs[0]["num_runs"] == 20
