import numpy as np
import pytest

from graphactive import GraphActiveError, InvalidParameterError
from graphactive.experiments import (
    AccuracyCurve,
    ExperimentConfig,
    prepare_problem,
    run_experiment,
    run_na_comparison,
    run_trial,
)
from graphactive.instrument import counters, reset_counters


def small_cfg(**kw):
    base = dict(
        dataset="checkerboard",
        model="gr",
        acquisition="vopt",
        n_queries=12,
        n_trials=2,
        update_mode="na",
        checkerboard_n=150,
        length_scale=0.15,
        tau=1.0,
        gamma=0.1,
        per_class=3,
        seed=0,
    )
    base.update(kw)
    return ExperimentConfig(**base)


class TestConfigResolution:
    def test_dataset_defaults_applied(self):
        cfg = ExperimentConfig(dataset="checkerboard").resolved()
        assert cfg.n_queries == 200
        assert cfg.graph == "full"
        assert cfg.laplacian_kind == "unnormalized"
        cfg = ExperimentConfig(dataset="mnist").resolved()
        assert cfg.n_queries == 100
        assert cfg.graph == "knn"
        assert cfg.length_scale == 380.0
        assert cfg.laplacian_kind == "normalized"

    def test_explicit_values_win(self):
        cfg = ExperimentConfig(dataset="checkerboard", n_queries=7, laplacian_kind="normalized").resolved()
        assert cfg.n_queries == 7
        assert cfg.laplacian_kind == "normalized"

    def test_hf_mc_combination_rejected(self):
        with pytest.raises(InvalidParameterError):
            ExperimentConfig(model="hf", acquisition="mc").resolved()

    def test_mnist_without_paths_rejected(self):
        with pytest.raises(InvalidParameterError):
            prepare_problem(ExperimentConfig(dataset="mnist"))

    def test_unknown_names_rejected(self):
        for bad in (
            dict(dataset="cifar"),
            dict(model="svm"),
            dict(update_mode="magic"),
        ):
            with pytest.raises(InvalidParameterError):
                ExperimentConfig(**bad).resolved()


class TestRunTrial:
    def test_zero_queries_gives_length_one_curve(self):
        cfg = small_cfg(n_queries=0)
        r = run_trial(cfg, seed=0)
        assert len(r.accuracies) == 1
        assert r.history == []

    def test_no_query_repetition_and_curve_shape(self):
        cfg = small_cfg(n_queries=20)
        r = run_trial(cfg, seed=1)
        assert len(r.accuracies) == 21
        nodes = [h[1] for h in r.history]
        assert len(set(nodes)) == 20
        assert np.all((r.accuracies >= 0) & (r.accuracies <= 1))

    def test_na_mode_never_rebuilds_the_posterior(self):
        cfg = small_cfg(model="probit", acquisition="mc", n_queries=8, gamma=0.5)
        prepared = prepare_problem(cfg.resolved())
        reset_counters()
        run_trial(cfg, seed=0, prepared=prepared)
        assert counters.posterior_builds == 1
        assert counters.newton_solves == 1

    def test_refresh_every_triggers_scheduled_rebuilds(self):
        cfg = small_cfg(model="probit", acquisition="mc", n_queries=8, gamma=0.5, refresh_every=4)
        prepared = prepare_problem(cfg.resolved())
        reset_counters()
        run_trial(cfg, seed=0, prepared=prepared)
        assert counters.posterior_builds == 3  # initial + steps 4 and 8

    def test_retrain_mode_rebuilds_every_step(self):
        cfg = small_cfg(model="gr", n_queries=5, update_mode="retrain")
        prepared = prepare_problem(cfg.resolved())
        reset_counters()
        run_trial(cfg, seed=0, prepared=prepared)
        assert counters.posterior_builds == 6

    def test_exhausted_pool_aborts_with_context(self):
        cfg = small_cfg(checkerboard_n=12, per_class=5, n_queries=5)
        with pytest.raises(GraphActiveError, match="aborted at step"):
            run_trial(cfg, seed=0)

    def test_hf_na_trial_runs(self):
        cfg = small_cfg(model="hf", acquisition="mbr", n_queries=6)
        r = run_trial(cfg, seed=3)
        assert len(r.accuracies) == 7

    def test_probit_mean_only_retrain_for_uncertainty(self):
        cfg = small_cfg(
            model="probit", acquisition="unc", n_queries=4, update_mode="retrain", gamma=0.5
        )
        prepared = prepare_problem(cfg.resolved())
        reset_counters()
        run_trial(cfg, seed=0, prepared=prepared)
        # Mean-only rebuilds: Newton solves happen, covariance never forms.
        assert counters.newton_solves == 5


class TestRunExperiment:
    def test_deterministic_csv_bytes(self, tmp_path):
        cfg = small_cfg(n_queries=6, n_trials=2)
        a_dir = tmp_path / "a"
        b_dir = tmp_path / "b"
        prepared = prepare_problem(cfg.resolved())
        run_experiment(cfg, a_dir, prepared)
        run_experiment(cfg, b_dir, prepared)
        for name in sorted(p.name for p in a_dir.iterdir()):
            assert (a_dir / name).read_bytes() == (b_dir / name).read_bytes(), name

    def test_expected_artifacts_exist(self, tmp_path):
        cfg = small_cfg(n_queries=4, n_trials=3)
        run_experiment(cfg, tmp_path)
        names = {p.name for p in tmp_path.iterdir()}
        assert names == {
            "curve_mean.csv",
            "curve_trial_0.csv",
            "curve_trial_1.csv",
            "curve_trial_2.csv",
            "choices_trial_0.csv",
            "choices_trial_1.csv",
            "choices_trial_2.csv",
            "meta.json",
        }
        mean_lines = (tmp_path / "curve_mean.csv").read_text().strip().splitlines()
        assert mean_lines[0] == "step,accuracy"
        assert len(mean_lines) == 6  # header + 5 steps

    def test_choices_csv_has_coordinates(self, tmp_path):
        cfg = small_cfg(n_queries=3, n_trials=1)
        run_experiment(cfg, tmp_path)
        lines = (tmp_path / "choices_trial_0.csv").read_text().strip().splitlines()
        assert lines[0] == "step,node_index,x,y,label"
        parts = lines[1].split(",")
        assert len(parts) == 5
        assert 0.0 <= float(parts[2]) <= 1.0

    def test_seed_list_and_mean(self):
        cfg = small_cfg(n_queries=3, n_trials=3, seed=11)
        curve = run_experiment(cfg)
        assert curve.seeds == [11, 12, 13]
        np.testing.assert_allclose(curve.mean, curve.trials.mean(axis=0))

    def test_random_acquisition_improves_on_average(self):
        cfg = small_cfg(
            acquisition="random", n_queries=40, n_trials=3, checkerboard_n=250
        )  # trend check only: weak improvement of the trial mean
        curve = run_experiment(cfg)
        assert curve.mean[-1] >= curve.mean[0]


class TestMnistPipeline:
    def test_synthetic_idx_files_run_end_to_end(self, tmp_path):
        # Tiny synthetic digit set through the full mnist code path: IDX load,
        # balanced subsample, k-NN graph, posterior, queries.
        import struct

        rng = np.random.default_rng(0)
        digits = np.repeat(np.arange(10), 12).astype(np.uint8)
        images = rng.integers(0, 256, size=(len(digits), 4, 4), dtype=np.uint8)
        with open(tmp_path / "train-images-idx3-ubyte", "wb") as f:
            f.write(struct.pack(">iiii", 0x00000803, len(digits), 4, 4))
            f.write(images.tobytes())
        with open(tmp_path / "train-labels-idx1-ubyte", "wb") as f:
            f.write(struct.pack(">ii", 0x00000801, len(digits)))
            f.write(digits.tobytes())

        cfg = ExperimentConfig(
            dataset="mnist",
            model="probit",
            acquisition="mc",
            n_queries=5,
            n_trials=1,
            mnist_dir=str(tmp_path),
            mnist_per_digit=6,
            knn_k=5,
            length_scale=2.0,
            tau=1.0,
            gamma=0.1,
            per_class=3,
        )
        curve = run_experiment(cfg)
        assert curve.trials.shape == (1, 6)
        assert np.all((curve.trials >= 0) & (curve.trials <= 1))


class TestNaComparison:
    def test_requires_probit(self):
        with pytest.raises(InvalidParameterError):
            run_na_comparison(small_cfg(model="gr"))

    def test_supported_acquisitions_only(self):
        with pytest.raises(InvalidParameterError):
            run_na_comparison(small_cfg(model="probit", acquisition="random"))

    def test_paired_arms_and_diff(self, tmp_path):
        cfg = small_cfg(
            model="probit", acquisition="unc", n_queries=6, n_trials=2, gamma=0.5
        )
        comp = run_na_comparison(cfg, tmp_path)
        assert comp.na.trials.shape == comp.retrain.trials.shape == (2, 7)
        assert comp.per_step_abs_diff.shape == (7,)
        assert np.isfinite(comp.mean_abs_diff)
        names = {p.name for p in tmp_path.iterdir()}
        assert "curve_mean_na.csv" in names
        assert "curve_mean_retrain.csv" in names
        assert "diff.csv" in names

    def test_matched_seeds_make_retrain_control_identical(self):
        cfg = small_cfg(model="probit", acquisition="unc", n_queries=4, n_trials=1, gamma=0.5, update_mode="retrain")
        prepared = prepare_problem(cfg.resolved())
        a = run_experiment(cfg, prepared=prepared)
        b = run_experiment(cfg, prepared=prepared)
        np.testing.assert_array_equal(a.trials, b.trials)
        assert a.histories == b.histories
