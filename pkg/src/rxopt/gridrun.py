"""Experiment grid orchestration: config parsing, cell execution, CSV rows.

A grid is the Cartesian product of signal cells, noise variances, and model
cells.  Every cell derives its seed stream from the master seed and a hash
of its own coordinates, so deleting one cell from a config changes no other
cell's row and the whole grid is reproducible from the master seed alone.
Cells may execute concurrently; rows are collected by cell index and
emitted in deterministic grid order.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import os

from .dataio import load_dataset_csv
from .errors import ConfigError, IoFailure, MixedModes, RxoptError
from .estimators import HoldOut, KFold, ModelSpec, holdout_optimism, kfold_optimism, mc_optimism
from .numcore import SeedStream
from .signals import (
    DesignSpec,
    GaussianBumpSignal,
    LinearSignal,
    PiecewiseLinearSignal,
    PolynomialSignal,
    SignalSpec,
)
from . import theory as _theory

MODES = ("simulate", "theory", "compare", "realdata")

RESULT_COLUMNS = (
    "mode",
    "signal_kind",
    "k_or_coeffs",
    "sigma2",
    "model",
    "lambda",
    "n_train",
    "num_runs",
    "err_train_mean",
    "err_test_mean",
    "opt_raw",
    "opt_scaled",
    "stderr",
    "theory_value",
    "theory_stderr",
    "seed",
    "opt_per_n",
    "status",
)


@dataclass(frozen=True)
class ResultRow:
    mode: str
    signal_kind: str
    k_or_coeffs: str
    sigma2: Optional[float]
    model: str
    lam: float
    n_train: Optional[int]
    num_runs: Optional[int]
    err_train_mean: Optional[float] = None
    err_test_mean: Optional[float] = None
    opt_raw: Optional[float] = None
    opt_scaled: Optional[float] = None
    stderr: Optional[float] = None
    theory_value: Optional[float] = None
    theory_stderr: Optional[float] = None
    seed: Optional[int] = None
    opt_per_n: Optional[float] = None
    status: str = "ok"

    def as_record(self) -> dict:
        return {
            "mode": self.mode,
            "signal_kind": self.signal_kind,
            "k_or_coeffs": self.k_or_coeffs,
            "sigma2": self.sigma2,
            "model": self.model,
            "lambda": self.lam,
            "n_train": self.n_train,
            "num_runs": self.num_runs,
            "err_train_mean": self.err_train_mean,
            "err_test_mean": self.err_test_mean,
            "opt_raw": self.opt_raw,
            "opt_scaled": self.opt_scaled,
            "stderr": self.stderr,
            "theory_value": self.theory_value,
            "theory_stderr": self.theory_stderr,
            "seed": self.seed,
            "opt_per_n": self.opt_per_n,
            "status": self.status,
        }


def format_value(value) -> str:
    """CSV cell rendering: 17 significant digits for floats, empty for None."""
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def emit_csv(rows: Sequence[ResultRow], path: str) -> None:
    """Header plus one line per row; UTF-8, LF endings, lossless floats."""
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(RESULT_COLUMNS) + "\n")
            for row in rows:
                record = row.as_record()
                fh.write(",".join(format_value(record[c]) for c in RESULT_COLUMNS) + "\n")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def parse_results_csv(path: str) -> list[dict]:
    """Read back an emitted CSV; numeric fields become floats, blanks None."""
    numeric = {
        "sigma2", "lambda", "err_train_mean", "err_test_mean", "opt_raw",
        "opt_scaled", "stderr", "theory_value", "theory_stderr", "opt_per_n",
    }
    integer = {"n_train", "num_runs", "seed"}
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            out = []
            for rec in reader:
                parsed = {}
                for key, val in rec.items():
                    if val == "" or val is None:
                        parsed[key] = None
                    elif key in numeric:
                        parsed[key] = float(val)
                    elif key in integer:
                        parsed[key] = int(val)
                    else:
                        parsed[key] = val
                out.append(parsed)
            return out
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# Configuration


@dataclass(frozen=True)
class SignalCell:
    kind: str
    label: str
    shape: object


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str
    signals: tuple[SignalCell, ...]
    sigma2s: tuple[float, ...]
    models: tuple[ModelSpec, ...]
    n_train: int = 1000
    n_test: int = 1000
    num_runs: int = 10_000
    seed: int = 0
    out: Optional[str] = None
    threads: int = 1
    theory_budget: int = 200_000
    dataset_path: Optional[str] = None
    target_column: Optional[str] = None
    plan: str = "holdout"
    test_fraction: float = 0.2
    kfolds: tuple[int, ...] = (2,)
    bootstrap: bool = True

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.mode != "realdata" and not self.signals:
            raise ConfigError("signal grid is empty (provide k/coeffs/bump/beta entries)")
        if self.mode != "realdata" and not self.sigma2s:
            raise ConfigError("sigma2 grid is empty")
        if not self.models:
            raise ConfigError("model grid is empty")
        if self.mode == "realdata" and not self.dataset_path:
            raise ConfigError("realdata mode requires dataset = <csv path>")


def parse_config_text(text: str) -> dict[str, list[str]]:
    """Flat ``key = value`` lines; ``#`` starts a comment; repeats append."""
    mapping: dict[str, list[str]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip().lower()
        value = value.strip()
        if not key or not value:
            raise ConfigError(f"line {lineno}: empty key or value in {raw!r}")
        mapping.setdefault(key, []).append(value)
    return mapping


def _parse_bool(value: str) -> bool:
    low = value.lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {value!r}")


def _floats(values: list[str], key: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in values)
    except ValueError as exc:
        raise ConfigError(f"{key}: {exc}") from exc


def _signal_cells(mapping: dict[str, list[str]]) -> tuple[SignalCell, ...]:
    # labels keep the literal config tokens so rows and cell seeds read the
    # way the user wrote them
    cells: list[SignalCell] = []
    for v in mapping.get("k", []):
        cells.append(SignalCell("piecewise", v, PiecewiseLinearSignal(k=float(v))))
    for v in mapping.get("coeffs", []):
        coeffs = tuple(float(c) for c in v.split(","))
        cells.append(SignalCell("poly", v.replace(",", ";"), PolynomialSignal(coeffs=coeffs)))
    for v in mapping.get("bump", []):
        parts = [float(c) for c in v.split(",")]
        if len(parts) != 2:
            raise ConfigError(f"bump expects 'a,b', got {v!r}")
        cells.append(
            SignalCell("bump", v.replace(",", ";"), GaussianBumpSignal(a=parts[0], b=parts[1]))
        )
    for v in mapping.get("beta", []):
        beta = tuple(float(c) for c in v.split(","))
        cells.append(SignalCell("linear", v.replace(",", ";"), LinearSignal(beta=beta)))
    return tuple(cells)


def _model_cells(mapping: dict[str, list[str]]) -> tuple[ModelSpec, ...]:
    kinds = [v.lower() for v in mapping.get("model", ["ols"])]
    lams = _floats(mapping.get("lambda", ["0"]), "lambda")
    intercept = _parse_bool(mapping.get("intercept", ["false"])[-1])
    rank = int(mapping.get("rank", ["1"])[-1])
    width = int(mapping.get("width", ["50"])[-1])
    epochs = int(mapping.get("epochs", ["1000"])[-1])
    lr = float(mapping.get("learning_rate", ["0.01"])[-1])
    optimizer = mapping.get("optimizer", ["adam"])[-1].lower()
    hidden_raw = mapping.get("hidden", ["50,50"])[-1]
    hidden = tuple(int(h) for h in hidden_raw.split(","))
    if len(hidden) != 2:
        raise ConfigError("hidden expects two comma-separated widths")
    cells: list[ModelSpec] = []
    for kind in kinds:
        if kind not in ("ols", "ridge", "bended", "lowrank", "krr_linear", "krr_ntk", "mlp", "ntk"):
            raise ConfigError(f"unknown model {kind!r}")
        lam_grid = lams if kind in ("ridge", "krr_linear", "krr_ntk", "ntk") else (0.0,)
        for lam in lam_grid:
            cells.append(
                ModelSpec(
                    kind=kind,
                    lam=lam,
                    intercept=intercept,
                    rank=rank,
                    width=width,
                    hidden=hidden,  # type: ignore[arg-type]
                    epochs=epochs,
                    learning_rate=lr,
                    optimizer=optimizer,
                )
            )
    return tuple(cells)


def config_from_mapping(mode: str, mapping: dict[str, list[str]]) -> ExperimentConfig:
    def last(key: str, default: Optional[str] = None) -> Optional[str]:
        vals = mapping.get(key)
        return vals[-1] if vals else default

    try:
        kfolds = tuple(int(v) for v in mapping.get("kfolds", ["2"]))
        return ExperimentConfig(
            mode=mode,
            signals=_signal_cells(mapping),
            sigma2s=_floats(mapping.get("sigma2", []), "sigma2"),
            models=_model_cells(mapping),
            n_train=int(last("n_train", "1000")),
            n_test=int(last("n_test", "1000")),
            num_runs=int(last("num_runs", "10000")),
            seed=int(last("seed", "0")),
            out=last("out"),
            threads=int(last("threads", "1")),
            theory_budget=int(last("theory_budget", "200000")),
            dataset_path=last("dataset"),
            target_column=last("target"),
            plan=(last("plan", "holdout") or "holdout").lower(),
            test_fraction=float(last("test_fraction", "0.2")),
            kfolds=kfolds,
            bootstrap=_parse_bool(last("bootstrap", "true") or "true"),
        )
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str, mode: str) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return config_from_mapping(mode, parse_config_text(text))


# ---------------------------------------------------------------------------
# Theory targets


def _theory_target(
    cell: SignalCell,
    sigma2: float,
    model: ModelSpec,
    config: ExperimentConfig,
    stream: SeedStream,
) -> tuple[Optional[float], Optional[float]]:
    """Scaled asymptotic optimism (and its stderr) for exact-solve models.

    Iterative and randomly re-kernelized models have no fixed-population
    target and return (None, None).
    """
    if model.kind not in ("ols", "ridge", "lowrank") or sigma2 <= 0:
        return None, None
    signal = SignalSpec(shape=cell.shape, noise_var=sigma2)
    dim = getattr(cell.shape, "dimension", 1)
    design = DesignSpec(dimension=dim, intercept=model.intercept)
    if model.kind == "ols" and cell.kind == "piecewise" and not model.intercept:
        return _theory.scaled_optimism_piecewise(cell.shape.k, sigma2), 0.0
    pm = _theory.population_moments(
        signal, design, budget=config.theory_budget, rng=stream
    )
    if model.kind == "ols":
        tv = _theory.ols_optimism_asymptotic(
            pm, config.n_train, budget=config.theory_budget, rng=stream
        )
    elif model.kind == "ridge":
        tv = _theory.ridge_optimism_asymptotic(
            pm, model.lam, config.n_train, budget=config.theory_budget, rng=stream
        )
    else:
        tv = _theory.low_rank_optimism_bound(
            pm, model.rank, config.n_train, budget=config.theory_budget, rng=stream
        )
    return tv.scaled_optimism, tv.scaled_stderr


# ---------------------------------------------------------------------------
# Grid execution


def _cell_seed_stream(config: ExperimentConfig, label: str) -> SeedStream:
    return SeedStream(config.seed).child_from_text(label)


def _seed_fingerprint(stream: SeedStream) -> int:
    lo, hi = stream.path[-2], stream.path[-1]
    return (hi << 32) | lo


def _run_simulation_cell(
    config: ExperimentConfig, cell: SignalCell, sigma2: float, model: ModelSpec
) -> ResultRow:
    label = f"{config.mode}|{cell.kind}|{cell.label}|{format_value(sigma2)}|{model.kind}|{format_value(model.lam)}|{model.intercept}"
    stream = _cell_seed_stream(config, label)
    base = ResultRow(
        mode=config.mode,
        signal_kind=cell.kind,
        k_or_coeffs=cell.label,
        sigma2=sigma2,
        model=model.kind,
        lam=model.lam,
        n_train=config.n_train,
        num_runs=config.num_runs,
        seed=_seed_fingerprint(stream),
    )
    try:
        theory_value, theory_stderr = (None, None)
        if config.mode in ("theory", "compare"):
            theory_value, theory_stderr = _theory_target(
                cell, sigma2, model, config, stream.child_from_text("theory-target")
            )
        if config.mode == "theory":
            return replace(base, num_runs=None, theory_value=theory_value, theory_stderr=theory_stderr)
        signal = SignalSpec(shape=cell.shape, noise_var=sigma2)
        dim = getattr(cell.shape, "dimension", 1)
        design = DesignSpec(dimension=dim)
        est = mc_optimism(
            signal, design, model, config.n_train, config.n_test, config.num_runs, stream
        )
        return replace(
            base,
            err_train_mean=est.err_train_mean,
            err_test_mean=est.err_test_mean,
            opt_raw=est.opt_raw,
            opt_scaled=est.opt_scaled,
            stderr=est.stderr_opt,
            theory_value=theory_value,
            theory_stderr=theory_stderr,
        )
    except RxoptError as exc:
        return replace(base, status=f"error:{type(exc).__name__}")


def _run_realdata_cell(
    config: ExperimentConfig, data, model: ModelSpec, plan_label: str, plan
) -> ResultRow:
    label = f"realdata|{plan_label}|{model.kind}|{format_value(model.lam)}"
    stream = _cell_seed_stream(config, label)
    n = data.n
    base = ResultRow(
        mode="realdata",
        signal_kind=plan_label,
        k_or_coeffs="-",
        sigma2=None,
        model=model.kind,
        lam=model.lam,
        n_train=None,
        num_runs=plan.num_runs,
        seed=_seed_fingerprint(stream),
    )
    try:
        if isinstance(plan, HoldOut):
            est = holdout_optimism(data, model, plan, stream)
        else:
            est = kfold_optimism(data, model, plan, stream)
        return replace(
            base,
            n_train=est.n_train,
            err_train_mean=est.err_train_mean,
            err_test_mean=est.err_test_mean,
            opt_raw=est.opt_raw,
            opt_scaled=est.opt_scaled,
            stderr=est.stderr_opt,
            opt_per_n=est.opt_raw / n,
        )
    except RxoptError as exc:
        return replace(base, status=f"error:{type(exc).__name__}")


def run_grid(config: ExperimentConfig) -> list[ResultRow]:
    """Execute every grid cell and return rows in deterministic grid order.

    Per-cell failures are recorded in the row's status field and do not
    abort other cells.  ``config.threads`` sets the worker count (0 = auto);
    results are identical for any worker count.
    """
    tasks: list = []
    if config.mode == "realdata":
        data = load_dataset_csv(config.dataset_path, config.target_column or "y")
        plans: list[tuple[str, object]] = []
        if config.plan in ("holdout", "both"):
            plans.append(
                ("holdout", HoldOut(config.test_fraction, config.num_runs, config.bootstrap))
            )
        if config.plan in ("kfold", "both"):
            for k in config.kfolds:
                plans.append((f"kfold{k}", KFold(k, config.num_runs)))
        if not plans:
            raise ConfigError(f"unknown resampling plan {config.plan!r}")
        for plan_label, plan in plans:
            for model in config.models:
                tasks.append((_run_realdata_cell, (config, data, model, plan_label, plan)))
    else:
        for cell in config.signals:
            for sigma2 in config.sigma2s:
                for model in config.models:
                    tasks.append((_run_simulation_cell, (config, cell, sigma2, model)))

    workers = config.threads if config.threads > 0 else (os.cpu_count() or 1)
    rows: list[Optional[ResultRow]] = [None] * len(tasks)
    if workers == 1:
        for i, (fn, args) in enumerate(tasks):
            rows[i] = fn(*args)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = {pool.submit(fn, *args): i for i, (fn, args) in enumerate(tasks)}
            for fut, i in futures.items():
                rows[i] = fut.result()
    return [r for r in rows if r is not None]


# ---------------------------------------------------------------------------
# Text summary


def report_summary(rows: Sequence[ResultRow]) -> str:
    """Pivot of scaled optimism: signal parameter rows x model/lambda columns.

    Rows must share one mode.  Theory-mode cells show the theory value;
    real-data cells show raw optimism (no known noise variance) keyed by
    resampling plan instead of signal parameter.  Multiple noise levels
    produce one block per sigma2.
    """
    rows = list(rows)
    if not rows:
        return "(no rows)"
    modes = {r.mode for r in rows}
    if len(modes) > 1:
        raise MixedModes(f"cannot summarize rows from modes {sorted(modes)}")
    realdata = rows[0].mode == "realdata"

    def param_of(r: ResultRow) -> str:
        return r.signal_kind if realdata else r.k_or_coeffs

    def value_of(r: ResultRow):
        if realdata:
            return r.opt_raw
        return r.opt_scaled if r.opt_scaled is not None else r.theory_value

    sigma2s = sorted({r.sigma2 for r in rows}, key=lambda v: (v is None, v))
    blocks: list[str] = []
    for sigma2 in sigma2s:
        sub = [r for r in rows if r.sigma2 == sigma2]
        params = sorted({param_of(r) for r in sub})
        columns = sorted({(r.model, r.lam) for r in sub})
        col_labels = [f"{m}(lam={format_value(l)})" for m, l in columns]
        width = max([len(c) for c in col_labels] + [12])
        lines = []
        if realdata:
            title = "raw optimism by resampling plan"
        elif sigma2 is not None:
            title = f"sigma2 = {format_value(sigma2)}"
        else:
            title = "scaled optimism"
        lines.append(title)
        lines.append(" ".join(["param".ljust(12)] + [c.rjust(width) for c in col_labels]))
        for param in params:
            cells = []
            for key in columns:
                match = [
                    r for r in sub if param_of(r) == param and (r.model, r.lam) == key
                ]
                if not match:
                    cells.append("-".rjust(width))
                    continue
                r = match[0]
                value = value_of(r)
                if r.status != "ok":
                    cells.append(r.status.rjust(width))
                elif value is None:
                    cells.append("-".rjust(width))
                else:
                    cells.append(f"{value:.6g}".rjust(width))
            lines.append(" ".join([str(param).ljust(12)] + cells))
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks)
