import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eelm_mrfo import config as cfg
from eelm_mrfo.harness import (
    FoldPlan,
    MinMaxScaler,
    ModelEntry,
    aggregate,
    cell_seed,
    make_folds,
    read_report_csv,
    run_protocol,
    synthetic_dataset,
    synthetic_truth,
    write_report_csv,
    write_scatter_csv,
)
from eelm_mrfo.metrics import DegenerateVarianceError, r_squared, rmse
from eelm_mrfo.optimizers import OptimizerSpec
from eelm_mrfo.trainer import TrainingRunConfig


class TestMetrics:
    def test_rmse(self):
        assert rmse([1.0, 2.0], [1.0, 2.0]) == 0.0
        assert rmse([1.0, 2.0], [0.0, 2.0]) == pytest.approx(math.sqrt(0.5), rel=1e-15)

    @given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=20), st.floats(-1e3, 1e3))
    def test_constant_shift(self, t, c):
        t = np.array(t)
        assert rmse(t + c, t) == pytest.approx(abs(c), rel=1e-9, abs=1e-9)

    @given(st.lists(st.tuples(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3)), min_size=1, max_size=20),
           st.floats(-100, 100))
    def test_scale_equivariance(self, pairs, a):
        y, t = np.array(pairs).T
        assert rmse(a * y, a * t) == pytest.approx(abs(a) * rmse(y, t), rel=1e-9, abs=1e-9)

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="length mismatch"):
            rmse([1.0], [1.0, 2.0])
        with pytest.raises(ValueError):
            rmse([], [])

    def test_r_squared(self):
        assert r_squared([0.0, 1.0, 2.0], [0.0, 1.0, 2.0]) == 1.0
        assert r_squared([1.0, 1.0, 1.0], [0.0, 1.0, 2.0]) == 0.0
        assert r_squared([0.0, 1.0, 3.0], [0.0, 1.0, 2.0]) == 0.5

    def test_r_squared_degenerate(self):
        with pytest.raises(DegenerateVarianceError):
            r_squared([1.0, 2.0], [3.0, 3.0])

    @given(st.lists(st.tuples(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3)), min_size=2, max_size=20))
    def test_r_squared_at_most_one(self, pairs):
        y, t = np.array(pairs).T
        if np.ptp(t) > 1e-6:
            assert r_squared(y, t) <= 1.0


class TestSynthetic:
    def test_linear_noiseless(self):
        data = synthetic_dataset("linear", 50, 0.0, 3)
        x = data.inputs
        np.testing.assert_array_equal(data.targets, 1.0 + 2.0 * x[:, 0] - 3.0 * x[:, 1] + 0.5 * x[:, 2])

    def test_deterministic(self):
        for kind in ("sinc1d", "friedman1", "linear"):
            a, b = synthetic_dataset(kind, 30, 0.1, 5), synthetic_dataset(kind, 30, 0.1, 5)
            np.testing.assert_array_equal(a.inputs, b.inputs)
            np.testing.assert_array_equal(a.targets, b.targets)

    def test_sinc_noise_level(self):
        data = synthetic_dataset("sinc1d", 10_000, 0.05, 0)
        resid = data.targets - synthetic_truth("sinc1d", data.inputs)
        assert 0.045 <= resid.std() <= 0.055

    def test_shapes_and_truth(self):
        assert synthetic_dataset("friedman1", 7).inputs.shape == (7, 10)
        assert synthetic_truth("sinc1d", np.array([[0.0]]))[0] == 1.0
        x = np.array([[0.5, 0.5, 0.5, 0.0, 0.0] + [0.0] * 5])
        assert synthetic_truth("friedman1", x)[0] == pytest.approx(10 * math.sin(math.pi / 4))

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            synthetic_dataset("spiral", 10)
        with pytest.raises(ValueError):
            synthetic_dataset("linear", 0)


class TestFolds:
    def test_ten_samples_five_folds(self):
        folds = make_folds(10, FoldPlan(5, 1, 0), 0)
        tests = [set(te) for _, te in folds]
        assert all(len(t) == 2 for t in tests)
        assert set().union(*tests) == set(range(10))
        assert sum(len(t) for t in tests) == 10
        for tr, te in folds:
            assert set(tr) | set(te) == set(range(10)) and not set(tr) & set(te)

    @settings(max_examples=40)
    @given(st.integers(2, 200), st.integers(2, 10), st.integers(0, 2**32 - 1), st.integers(0, 50))
    def test_partition_exact(self, n, k, seed, run):
        if n < k:
            with pytest.raises(ValueError):
                make_folds(n, FoldPlan(k, 1, seed), run)
            return
        folds = make_folds(n, FoldPlan(k, 1, seed), run)
        sizes = [len(te) for _, te in folds]
        assert max(sizes) - min(sizes) <= 1
        assert sorted(np.concatenate([te for _, te in folds]).tolist()) == list(range(n))

    def test_deterministic(self):
        plan = FoldPlan(5, 3, 42)
        for (a, b), (c, d) in zip(make_folds(100, plan, 1), make_folds(100, plan, 1)):
            np.testing.assert_array_equal(a, c)
            np.testing.assert_array_equal(b, d)

    def test_runs_reshuffle(self):
        plan = FoldPlan(5, 3, 42)
        assert not np.array_equal(make_folds(100, plan, 0)[0][1], make_folds(100, plan, 1)[0][1])

    def test_plan_validation(self):
        with pytest.raises(ValueError):
            FoldPlan(1)
        with pytest.raises(ValueError):
            FoldPlan(5, 0)

    def test_cell_seed(self):
        assert cell_seed(0, 1, 2) == cell_seed(0, 1, 2)
        assert len({cell_seed(0, r, f) for r in range(5) for f in range(5)}) == 25


class TestScaler:
    def test_train_statistics_only(self):
        train = np.array([[0.0, 5.0], [2.0, 5.0]])
        s = MinMaxScaler.fit(train)
        np.testing.assert_array_equal(s.transform(train), [[0.0, 0.0], [1.0, 0.0]])
        np.testing.assert_array_equal(s.transform([[4.0, 6.0]]), [[2.0, 1.0]])


def models(hidden=5):
    return [
        ModelEntry("ELM", TrainingRunConfig(hidden, optimizer=None)),
        ModelEntry("EVO", TrainingRunConfig(hidden, optimizer=OptimizerSpec("mrfoLevy", 4, 3))),
    ]


class TestProtocol:
    def test_cell_bookkeeping(self):
        data = synthetic_dataset("linear", 12, 0.1, 0)
        report = run_protocol(data, models()[:1], FoldPlan(2, 1, 0))
        assert len(report.cells) == 2
        assert [(c.run, c.fold) for c in report.cells] == [(0, 0), (0, 1)]
        assert report.aggregate("ELM").n_cells == 2

    def test_duplicate_configs_identical(self):
        data = synthetic_dataset("sinc1d", 30, 0.05, 0)
        evo = models()[1].config
        report = run_protocol(data, [ModelEntry("A", evo), ModelEntry("B", evo)], FoldPlan(3, 2, 7))
        a, b = report.aggregate("A"), report.aggregate("B")
        assert (a.test_rmse, a.test_r2, a.train_r2) == (b.test_rmse, b.test_r2, b.train_r2)

    def test_duplicate_names_rejected(self):
        data = synthetic_dataset("linear", 12)
        with pytest.raises(ValueError):
            run_protocol(data, [models()[0], models()[0]], FoldPlan(2, 1))

    def test_failed_cells_recorded(self):
        data = synthetic_dataset("linear", 12)
        bad = ModelEntry("BAD", TrainingRunConfig(3, activation="relu", optimizer=None))
        report = run_protocol(data, [bad, models()[0]], FoldPlan(2, 1))
        assert all(c.status == "error" and "relu" in c.error for c in report.cells[:2])
        assert all(c.status == "ok" for c in report.cells[2:])
        assert math.isnan(report.aggregate("BAD").test_rmse)

    def test_aggregate_statistics(self):
        data = synthetic_dataset("sinc1d", 40, 0.05, 1)
        report = run_protocol(data, models(), FoldPlan(4, 2, 3))
        for name in ("ELM", "EVO"):
            vals = [c.test_rmse for c in report.cells if c.model == name]
            row = report.aggregate(name)
            assert row.test_rmse == pytest.approx(np.mean(vals), rel=1e-14)
            assert row.test_rmse_std == pytest.approx(np.std(vals, ddof=1), rel=1e-12)
            assert all(c.test_r2 <= 1 and c.test_rmse >= 0 for c in report.cells)

    def test_rmse_scale(self):
        data = synthetic_dataset("linear", 20, 0.1)
        a = run_protocol(data, models()[:1], FoldPlan(2, 1))
        b = run_protocol(data, models()[:1], FoldPlan(2, 1), rmse_scale=1000.0, rmse_units="meV/atom")
        assert b.aggregate("ELM").test_rmse == pytest.approx(1000 * a.aggregate("ELM").test_rmse, rel=1e-14)
        assert b.rmse_units == "meV/atom"

    def test_report_files(self, tmp_path):
        data = synthetic_dataset("sinc1d", 30, 0.05)
        report = run_protocol(data, models(), FoldPlan(3, 2, 0))
        write_report_csv(tmp_path / "r.csv", report)
        rows = read_report_csv(tmp_path / "r.csv")
        assert len(rows) == 12 + 2
        assert "seconds" not in rows[0]
        assert [r["row_type"] for r in rows[-2:]] == ["aggregate", "aggregate"]
        n = write_scatter_csv(tmp_path / "s.csv", report, ["ELM", "EVO"])
        assert n == 2 * 30
        header = (tmp_path / "s.csv").read_text().splitlines()[0]
        assert header == "ELM_predicted,ELM_actual,EVO_predicted,EVO_actual"

    def test_parallel_matches_serial(self):
        data = synthetic_dataset("sinc1d", 30, 0.05)
        serial = run_protocol(data, models(), FoldPlan(3, 1, 0), jobs=1)
        parallel = run_protocol(data, models(), FoldPlan(3, 1, 0), jobs=2)
        for a, b in zip(serial.aggregates, parallel.aggregates):
            assert abs(a.test_rmse - b.test_rmse) <= 1e-12
        assert [c.manifest["config_hash"] for c in serial.cells] == [c.manifest["config_hash"] for c in parallel.cells]

    def test_aggregate_skips_failures(self):
        from eelm_mrfo.harness import CellResult

        cells = [CellResult("M", 0, 0, test_rmse=1.0, train_r2=0.5, test_r2=0.4),
                 CellResult("M", 0, 1, status="error")]
        (row,) = aggregate(cells, ["M"])
        assert row.n_cells == 1 and row.test_rmse == 1.0 and row.test_rmse_std == 0.0


class TestConfig:
    TEXT = """
[rdf]
cutoff = 6.0   # Angstrom
pairs = Li-Li, Ge-Li
[references]
Li = -1.9
Ge = -4.5
[plan]
folds = 3
runs = 2
master_seed = 5
[dataset]
synthetic = friedman1
samples = 40
[model plain]
hidden_nodes = 7
optimizer = none
[model swarm]
hidden_nodes = 7
optimizer = pso
population = 4
iterations = 2
inertia = 0.5
penalty_grid = 0, 1e-3
[suite]
functions = sphere
dimensions = 2, 3
seeds = 4
"""

    def test_sections(self):
        parser = cfg.load(text=self.TEXT)
        rdf = cfg.rdf_config(parser)
        assert rdf.cutoff == 6.0 and rdf.pairs == (("Li", "Li"), ("Ge", "Li"))
        assert cfg.references(parser) == {"Li": -1.9, "Ge": -4.5}
        assert cfg.fold_plan(parser) == FoldPlan(3, 2, 5)
        assert cfg.fold_plan(parser, seed=9, runs=1).master_seed == 9
        plain, swarm = cfg.model_entries(parser)
        assert plain.name == "plain" and plain.config.optimizer is None
        assert swarm.config.optimizer.kind == "pso" and swarm.config.optimizer.params == {"inertia": 0.5}
        assert swarm.config.penalty_grid == (0.0, 1e-3)
        assert cfg.dataset_spec(parser).synthetic == "friedman1"
        suite = cfg.suite_spec(parser)
        assert suite.functions == ["sphere"] and suite.dimensions == [2, 3] and suite.seeds == 4

    @pytest.mark.parametrize("text, fragment", [
        ("[model x]\noptimizer = annealing\n", "unknown optimizer"),
        ("[model x]\noptimizer = pso\nmutation_rate = 0.1\n", "mutation_rate"),
        ("[model x]\noptimizer = ga\nmutation_rate = 2\n", "mutation_rate"),
        ("[rdf]\npairs = LiGe\n", "A-B"),
        ("[rdf]\nsigma = 0\n", "sigma"),
        ("[plan]\nfolds = 1\n", "fold_count"),
        ("[model x]\ninclude_biases = maybe\n", "boolean"),
        ("[rdf\n", "section header"),
    ])
    def test_errors(self, text, fragment):
        with pytest.raises(cfg.ConfigError, match=fragment):
            parser = cfg.load(text=text)
            cfg.rdf_config(parser)
            cfg.fold_plan(parser)
            cfg.model_entries(parser)

    def test_missing_file(self, tmp_path):
        with pytest.raises(cfg.ConfigError, match="not found"):
            cfg.load(tmp_path / "nope.ini")

    def test_defaults(self):
        names = [m.name for m in cfg.default_models()]
        assert names == ["ELM", "EELM-MRFO", "EELM-MRFO-LF"]

    def test_shipped_example(self):
        from importlib import resources

        parser = cfg.load(str(resources.files("eelm_mrfo") / "data" / "example.ini"))
        assert [m.name for m in cfg.model_entries(parser)] == ["ELM", "EELM-MRFO", "EELM-MRFO-LF"]
        assert cfg.rdf_config(parser) == cfg.rdf_config(cfg.load(text=""))
        assert cfg.fold_plan(parser) == FoldPlan()
