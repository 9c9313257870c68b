"""Cross-validated, repeated-runs experiment protocol and its data sources.

Synthetic generators (all inputs uniform, targets plus Gaussian noise):

* ``sinc1d``: ``x ~ U(-10, 10)``, ``t = sin(x) / x`` (1 at 0).
* ``friedman1``: ``x ~ U(0, 1)^10``, ``t = 10 sin(pi x0 x1) + 20 (x2 - 0.5)^2
  + 10 x3 + 5 x4``; the last five inputs are irrelevant.
* ``linear``: ``x ~ U(-1, 1)^3``, ``t = 1 + 2 x0 - 3 x1 + 0.5 x2``.
"""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from .elm import RegressionData, predict
from .metrics import DegenerateVarianceError, r_squared, rmse
from .trainer import TrainingRunConfig, train

SYNTHETIC_KINDS = ("sinc1d", "friedman1", "linear")


def fixture_corpus_path() -> Path:
    """Path of the bundled 20-structure Li-Ge extended-XYZ corpus (synthetic energies)."""
    return Path(str(resources.files("eelm_mrfo") / "data" / "lige_fixtures.xyz"))


def synthetic_truth(kind: str, inputs: np.ndarray) -> np.ndarray:
    x = np.asarray(inputs, dtype=float)
    if kind == "sinc1d":
        return np.sinc(x[:, 0] / np.pi)
    if kind == "friedman1":
        return (10 * np.sin(np.pi * x[:, 0] * x[:, 1]) + 20 * (x[:, 2] - 0.5) ** 2
                + 10 * x[:, 3] + 5 * x[:, 4])
    if kind == "linear":
        return 1.0 + 2.0 * x[:, 0] - 3.0 * x[:, 1] + 0.5 * x[:, 2]
    raise ValueError(f"unknown synthetic dataset {kind!r}; expected one of {SYNTHETIC_KINDS}")


def synthetic_dataset(kind: str, n_samples: int, noise: float = 0.0, seed: int = 0) -> RegressionData:
    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    rng = np.random.default_rng(seed)
    if kind == "sinc1d":
        x = rng.uniform(-10.0, 10.0, size=(n_samples, 1))
    elif kind == "friedman1":
        x = rng.uniform(0.0, 1.0, size=(n_samples, 10))
    elif kind == "linear":
        x = rng.uniform(-1.0, 1.0, size=(n_samples, 3))
    else:
        raise ValueError(f"unknown synthetic dataset {kind!r}; expected one of {SYNTHETIC_KINDS}")
    t = synthetic_truth(kind, x) + noise * rng.standard_normal(n_samples)
    return RegressionData(x, t)


@dataclass(frozen=True)
class FoldPlan:
    fold_count: int = 5
    run_count: int = 20
    master_seed: int = 0

    def __post_init__(self):
        if self.fold_count < 2:
            raise ValueError("fold_count must be at least 2")
        if self.run_count < 1:
            raise ValueError("run_count must be positive")


def make_folds(n_samples: int, plan: FoldPlan, run_index: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """K-fold (train, test) index pairs for one run, reshuffled per run."""
    if n_samples < plan.fold_count:
        raise ValueError(f"{n_samples} samples cannot fill {plan.fold_count} folds")
    rng = np.random.default_rng([plan.master_seed, run_index])
    shards = np.array_split(rng.permutation(n_samples), plan.fold_count)
    folds = []
    for k, test in enumerate(shards):
        train_idx = np.concatenate([s for j, s in enumerate(shards) if j != k])
        folds.append((np.sort(train_idx), np.sort(test)))
    return folds


def cell_seed(master_seed: int, run: int, fold: int) -> int:
    """Seed shared by every model in a (run, fold) cell, so models are compared on equal terms."""
    return int(np.random.SeedSequence([master_seed, run, fold]).generate_state(1, dtype=np.uint64)[0] >> 1)


@dataclass(frozen=True)
class MinMaxScaler:
    low: np.ndarray
    span: np.ndarray

    @classmethod
    def fit(cls, x) -> "MinMaxScaler":
        x = np.asarray(x, dtype=float)
        low = x.min(axis=0)
        span = x.max(axis=0) - low
        return cls(low, np.where(span > 0, span, 1.0))

    def transform(self, x) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.low) / self.span


@dataclass(frozen=True)
class ModelEntry:
    name: str
    config: TrainingRunConfig


@dataclass
class CellResult:
    model: str
    run: int
    fold: int
    status: str = "ok"
    train_r2: float = math.nan
    test_rmse: float = math.nan
    test_r2: float = math.nan
    seconds: float = 0.0
    error: str = ""
    test_indices: np.ndarray | None = None
    predictions: np.ndarray | None = None
    actuals: np.ndarray | None = None
    manifest: dict = field(default_factory=dict)


@dataclass
class AggregateRow:
    model: str
    n_cells: int
    train_r2: float
    test_rmse: float
    test_r2: float
    train_r2_std: float
    test_rmse_std: float
    test_r2_std: float


@dataclass
class MetricsReport:
    cells: list
    aggregates: list
    rmse_units: str = ""

    def aggregate(self, model: str) -> AggregateRow:
        for row in self.aggregates:
            if row.model == model:
                return row
        raise KeyError(model)


def _safe_r2(pred, actual) -> float:
    try:
        return r_squared(pred, actual)
    except DegenerateVarianceError:
        return math.nan


def _run_cell(args) -> CellResult:
    entry, data, train_idx, test_idx, run, fold, seed, rmse_scale = args
    cell = CellResult(entry.name, run, fold, test_indices=test_idx)
    start = time.perf_counter()
    try:
        scaler = MinMaxScaler.fit(data.inputs[train_idx])
        train_data = RegressionData(scaler.transform(data.inputs[train_idx]), data.targets[train_idx])
        x_test = scaler.transform(data.inputs[test_idx])
        config = replace(entry.config, seed=seed)
        model, manifest = train(train_data, config)
        pred_train = predict(model, train_data.inputs)
        pred_test = predict(model, x_test)
        actual = data.targets[test_idx]
        cell.train_r2 = _safe_r2(pred_train, train_data.targets)
        cell.test_rmse = rmse(pred_test, actual) * rmse_scale
        cell.test_r2 = _safe_r2(pred_test, actual)
        cell.predictions = pred_test
        cell.actuals = actual
        if not (math.isfinite(cell.test_rmse)):
            raise FloatingPointError("non-finite test RMSE")
        manifest.labels = {"model": entry.name, "run": run, "fold": fold}
        cell.manifest = manifest.to_dict()
    except Exception as exc:  # one failed cell must not stop the protocol
        cell.status = "error"
        cell.error = f"{type(exc).__name__}: {exc}"
        cell.predictions = cell.actuals = None
        cell.manifest = {"model": entry.name, "run": run, "fold": fold, "seed": seed, "error": cell.error}
    cell.seconds = time.perf_counter() - start
    cell.manifest.setdefault("volatile", {})["wall_clock_seconds"] = cell.seconds
    return cell


def _mean_std(values: list) -> tuple[float, float]:
    vals = [v for v in values if math.isfinite(v)]
    if not vals:
        return math.nan, math.nan
    mean = math.fsum(vals) / len(vals)
    if len(vals) < 2:
        return mean, 0.0
    var = math.fsum((v - mean) ** 2 for v in vals) / (len(vals) - 1)
    return mean, math.sqrt(var)


def aggregate(cells: Sequence[CellResult], model_names: Sequence[str]) -> list[AggregateRow]:
    rows = []
    for name in model_names:
        ok = [c for c in cells if c.model == name and c.status == "ok"]
        tr = _mean_std([c.train_r2 for c in ok])
        rm = _mean_std([c.test_rmse for c in ok])
        te = _mean_std([c.test_r2 for c in ok])
        rows.append(AggregateRow(name, len(ok), tr[0], rm[0], te[0], tr[1], rm[1], te[1]))
    return rows


def run_protocol(data: RegressionData, models: Sequence[ModelEntry], plan: FoldPlan, *,
                 jobs: int = 1, rmse_scale: float = 1.0, rmse_units: str = "") -> MetricsReport:
    """Train and test every model on every fold of every run.

    Cells are ordered model-major, then run, then fold, whatever ``jobs`` is.
    ``rmse_scale`` multiplies reported test RMSE (1000 turns eV/atom into
    meV/atom).
    """
    names = [m.name for m in models]
    if len(set(names)) != len(names):
        raise ValueError("model names must be unique")
    fold_sets = [make_folds(data.n_samples, plan, r) for r in range(plan.run_count)]
    jobs_args = []
    for entry in models:
        for run, folds in enumerate(fold_sets):
            for fold, (train_idx, test_idx) in enumerate(folds):
                seed = cell_seed(plan.master_seed, run, fold)
                jobs_args.append((entry, data, train_idx, test_idx, run, fold, seed, rmse_scale))
    if jobs <= 1:
        cells = [_run_cell(a) for a in jobs_args]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            cells = list(pool.map(_run_cell, jobs_args))
    return MetricsReport(cells, aggregate(cells, names), rmse_units)


REPORT_COLUMNS = ["row_type", "model", "run", "fold", "status", "train_r2", "test_rmse", "test_r2",
                  "train_r2_std", "test_rmse_std", "test_r2_std", "n_cells", "error"]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_report_csv(path, report: MetricsReport) -> None:
    """One row per cell, then one aggregate row (means, with stds) per model.

    Timing is deliberately left out so identical runs give identical files.
    """
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for c in report.cells:
            w.writerow([_fmt(v) for v in ("cell", c.model, c.run, c.fold, c.status, c.train_r2,
                                          c.test_rmse, c.test_r2, None, None, None, None, c.error)])
        for a in report.aggregates:
            w.writerow([_fmt(v) for v in ("aggregate", a.model, None, None, "ok" if a.n_cells else "error",
                                          a.train_r2, a.test_rmse, a.test_r2, a.train_r2_std,
                                          a.test_rmse_std, a.test_r2_std, a.n_cells, None)])


def read_report_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_manifests(path, records: Sequence[dict]) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def write_scatter_csv(path, report: MetricsReport, model_names: Sequence[str]) -> int:
    """Predicted and actual test values per model, pooled over runs and folds.

    Rows follow run, fold, then position within the fold's test set; a
    failed cell leaves its rows empty for that model. Returns the row count.
    """
    by_model = {name: [c for c in report.cells if c.model == name] for name in model_names}
    columns = []
    for name in model_names:
        col_pred, col_act = [], []
        for c in by_model[name]:
            n = len(c.test_indices)
            if c.status == "ok":
                col_pred.extend(repr(float(v)) for v in c.predictions)
                col_act.extend(repr(float(v)) for v in c.actuals)
            else:
                col_pred.extend([""] * n)
                col_act.extend([""] * n)
        columns.extend([col_pred, col_act])
    n_rows = max((len(c) for c in columns), default=0)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"{name}_{kind}" for name in model_names for kind in ("predicted", "actual")])
        for i in range(n_rows):
            w.writerow([col[i] if i < len(col) else "" for col in columns])
    return n_rows
