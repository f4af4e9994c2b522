"""Active-learning trial orchestration, seed-averaged curves, CSV artifacts.

A trial alternates posterior updates with query selection on one dataset;
an experiment averages n_trials such runs over distinct seeds and writes
per-trial and mean accuracy curves plus query-choice logs. The paired-arm
runner contrasts rank-one ("na") posterior updates against full retraining
with matched seeds.

Everything here is deterministic in (config, seeds): reruns produce
byte-identical CSV artifacts.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from . import __version__ as _pkg_version
from .acquisition import compute_scores, select_query
from .data import Dataset, checkerboard, initial_labels, mnist_load, mnist_load_dir, mnist_subset
from .errors import GraphActiveError, InvalidParameterError
from .graphs import (
    Laplacian,
    PriorPrecision,
    build_full_graph,
    build_knn_graph,
    laplacian,
    regularized_precision,
)
from .lookahead import apply_label
from .models import (
    LabeledSet,
    NewtonConfig,
    NoiseModel,
    Posterior,
    gr_posterior,
    hf_posterior,
    predict,
    probit_laplace,
    probit_map_only_posterior,
)

MODELS = ("hf", "gr", "probit")
UPDATE_MODES = ("retrain", "na")

# Acquisition methods whose scores read the posterior covariance.
_COVARIANCE_METHODS = frozenset({"mc", "vopt", "sigmaopt", "mbr"})

_DATASET_DEFAULTS = {
    "checkerboard": dict(n_queries=200, graph="full", length_scale=0.05, laplacian_kind="unnormalized"),
    "mnist": dict(n_queries=100, graph="knn", length_scale=380.0, laplacian_kind="normalized"),
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything that determines an experiment, with dataset-driven defaults.

    Fields left as None resolve per dataset: n_queries (200 checkerboard,
    100 mnist), graph flavor (full kernel vs 15-NN), kernel length scale
    (0.15 vs 380), and Laplacian kind (unnormalized vs normalized).
    """

    dataset: str = "checkerboard"
    model: str = "probit"
    acquisition: str = "mc"
    n_queries: int | None = None
    n_trials: int = 5
    update_mode: str = "na"
    refresh_every: int = 0
    seed: int = 0
    data_seed: int = 0
    tau: float = 1.0
    gamma: float = 0.1
    noise_family: str = "gaussian-cdf"
    knn_k: int = 15
    length_scale: float | None = None
    laplacian_kind: str | None = None
    graph: str | None = None
    per_class: int = 5
    hf_jitter: float = 0.0
    warm_start: bool = True
    newton_max_iters: int = 100
    newton_grad_tol: float = 1e-8
    checkerboard_n: int = 2000
    checkerboard_grid: int = 4
    mnist_per_digit: int = 400
    mnist_images: str | None = None
    mnist_labels: str | None = None
    mnist_dir: str | None = None

    def resolved(self) -> "ExperimentConfig":
        if self.dataset not in _DATASET_DEFAULTS:
            raise InvalidParameterError(f"unknown dataset: {self.dataset!r}")
        if self.model not in MODELS:
            raise InvalidParameterError(f"unknown model: {self.model!r}")
        if self.update_mode not in UPDATE_MODES:
            raise InvalidParameterError(f"unknown update mode: {self.update_mode!r}")
        if self.n_trials < 1:
            raise InvalidParameterError("n_trials must be >= 1")
        d = _DATASET_DEFAULTS[self.dataset]
        cfg = replace(
            self,
            n_queries=self.n_queries if self.n_queries is not None else d["n_queries"],
            graph=self.graph if self.graph is not None else d["graph"],
            length_scale=self.length_scale if self.length_scale is not None else d["length_scale"],
            laplacian_kind=self.laplacian_kind if self.laplacian_kind is not None else d["laplacian_kind"],
        )
        if cfg.n_queries < 0:
            raise InvalidParameterError("n_queries must be >= 0")
        if cfg.model == "hf" and cfg.acquisition == "mc":
            raise InvalidParameterError("the mc acquisition is not defined for the hf model")
        return cfg

    def noise(self) -> NoiseModel:
        return NoiseModel(self.gamma, family=self.noise_family)

    def newton(self) -> NewtonConfig:
        return NewtonConfig(max_iters=self.newton_max_iters, grad_tol=self.newton_grad_tol)

    def trial_seeds(self) -> list[int]:
        return [self.seed + t for t in range(self.n_trials)]


@dataclass
class PreparedProblem:
    """Dataset, Laplacian, and prior built once and shared across trials."""

    dataset: Dataset
    laplacian: Laplacian
    prior: PriorPrecision | None


def build_dataset(cfg: ExperimentConfig) -> Dataset:
    if cfg.dataset == "checkerboard":
        return checkerboard(n=cfg.checkerboard_n, grid=cfg.checkerboard_grid, seed=cfg.data_seed)
    if cfg.mnist_dir is not None:
        images, digits = mnist_load_dir(cfg.mnist_dir)
    elif cfg.mnist_images is not None and cfg.mnist_labels is not None:
        images, digits = mnist_load(cfg.mnist_images, cfg.mnist_labels)
    else:
        raise InvalidParameterError(
            "mnist experiments need mnist_dir or mnist_images + mnist_labels (IDX files)"
        )
    return mnist_subset(images, digits, per_digit=cfg.mnist_per_digit, seed=cfg.data_seed)


def prepare_problem(cfg: ExperimentConfig) -> PreparedProblem:
    cfg = cfg.resolved()
    ds = build_dataset(cfg)
    if cfg.graph == "full":
        G = build_full_graph(ds.features, cfg.length_scale)
    else:
        G = build_knn_graph(ds.features, cfg.knn_k, cfg.length_scale)
    L = laplacian(G, cfg.laplacian_kind)
    prior = regularized_precision(L, cfg.tau) if cfg.model in ("gr", "probit") else None
    return PreparedProblem(dataset=ds, laplacian=L, prior=prior)


@dataclass
class TrialResult:
    accuracies: np.ndarray  # length n_queries + 1, pre-query accuracy first
    history: list  # (step, node_index, revealed_label)
    seed: int


@dataclass
class AccuracyCurve:
    """Per-trial accuracy trajectories with their mean and spread."""

    trials: np.ndarray  # (n_trials, n_queries + 1)
    mean: np.ndarray
    std: np.ndarray
    histories: list
    seeds: list

    @classmethod
    def from_trials(cls, results: list[TrialResult]) -> "AccuracyCurve":
        stack = np.vstack([r.accuracies for r in results])
        return cls(
            trials=stack,
            mean=stack.mean(axis=0),
            std=stack.std(axis=0),
            histories=[r.history for r in results],
            seeds=[r.seed for r in results],
        )

    @property
    def final_mean_accuracy(self) -> float:
        return float(self.mean[-1])


def _needs_covariance(cfg: ExperimentConfig) -> bool:
    return cfg.update_mode == "na" or cfg.acquisition in _COVARIANCE_METHODS


def _build_posterior(
    cfg: ExperimentConfig,
    prepared: PreparedProblem,
    lab: LabeledSet,
    warm_mean: np.ndarray | None = None,
) -> Posterior:
    if cfg.model == "gr":
        return gr_posterior(prepared.prior, lab, cfg.noise())
    if cfg.model == "hf":
        return hf_posterior(prepared.laplacian, lab, jitter_tau=cfg.hf_jitter)
    initial = warm_mean if cfg.warm_start else None
    if _needs_covariance(cfg):
        return probit_laplace(prepared.prior, lab, cfg.noise(), cfg.newton(), initial=initial)
    return probit_map_only_posterior(prepared.prior, lab, cfg.noise(), cfg.newton(), initial=initial)


def _accuracy(post: Posterior, ds: Dataset) -> tuple[float, np.ndarray]:
    labels, _ = predict(post)
    return float(np.mean(labels == ds.ground_truth)), labels


def run_trial(cfg: ExperimentConfig, seed: int, prepared: PreparedProblem | None = None) -> TrialResult:
    """One active-learning run: initial labels, then n_queries query/update steps.

    The accuracy curve has length n_queries + 1 and starts with the pre-query
    accuracy; a node is queried at most once; each revealed label immediately
    becomes a correct prediction (asserted every iteration).
    """
    cfg = cfg.resolved()
    if prepared is None:
        prepared = prepare_problem(cfg)
    ds = prepared.dataset
    lab = initial_labels(ds, cfg.per_class, seed)
    post = _build_posterior(cfg, prepared, lab)
    rng = np.random.default_rng([seed, 0x5EED])

    acc, labels = _accuracy(post, ds)
    accuracies = [acc]
    history: list[tuple[int, int, int]] = []
    noise = cfg.noise() if cfg.model != "hf" else None

    for step in range(1, cfg.n_queries + 1):
        try:
            scores = compute_scores(cfg.acquisition, post, noise, rng=rng)
            k = select_query(scores)
            y = int(ds.ground_truth[k])
            if cfg.update_mode == "retrain" or (
                cfg.refresh_every > 0 and step % cfg.refresh_every == 0
            ):
                post = _build_posterior(cfg, prepared, post.labeled.add(k, y), warm_mean=post.mean)
            else:
                post = apply_label(post, k, y)
        except GraphActiveError as exc:
            raise GraphActiveError(
                f"trial seed={seed} aborted at step {step} "
                f"({cfg.model}/{cfg.acquisition}): {exc}"
            ) from exc
        acc, labels = _accuracy(post, ds)
        accuracies.append(acc)
        history.append((step, int(k), y))
        assert np.array_equal(
            labels[post.labeled.indices], post.labeled.labels
        ), "revealed labels must be predicted verbatim"

    queried = [h[1] for h in history]
    assert len(set(queried)) == len(queried), "a node was queried twice"
    return TrialResult(accuracies=np.array(accuracies), history=history, seed=seed)


def _write_curve_csv(path: Path, accuracies: np.ndarray) -> None:
    with open(path, "w") as f:
        f.write("step,accuracy\n")
        for step, acc in enumerate(accuracies):
            f.write(f"{step},{float(acc)!r}\n")


def _write_choices_csv(path: Path, history, ds: Dataset) -> None:
    coords = ds.display_coords
    with open(path, "w") as f:
        f.write("step,node_index,x,y,label\n")
        for step, node, label in history:
            if coords is not None:
                x, y = coords[node]
                f.write(f"{step},{node},{float(x)!r},{float(y)!r},{label}\n")
            else:
                f.write(f"{step},{node},,,{label}\n")


def _write_meta(path: Path, cfg: ExperimentConfig, extra: dict | None = None) -> None:
    meta = {
        "config": asdict(cfg),
        "package_version": _pkg_version,
        "conventions": {
            "accuracy": "transductive over all N nodes; labeled nodes count as correct",
            "tie_rule": "argmax ties break to the smallest node index; sign(0) = +1",
        },
    }
    if extra:
        meta.update(extra)
    with open(path, "w") as f:
        json.dump(meta, f, indent=2, sort_keys=True)
        f.write("\n")


def run_experiment(
    cfg: ExperimentConfig,
    out_dir: str | Path | None = None,
    prepared: PreparedProblem | None = None,
) -> AccuracyCurve:
    """n_trials runs over distinct seeds; any failed trial aborts the whole run."""
    cfg = cfg.resolved()
    if prepared is None:
        prepared = prepare_problem(cfg)
    results = [run_trial(cfg, s, prepared) for s in cfg.trial_seeds()]
    curve = AccuracyCurve.from_trials(results)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for i, r in enumerate(results):
            _write_curve_csv(out / f"curve_trial_{i}.csv", r.accuracies)
            _write_choices_csv(out / f"choices_trial_{i}.csv", r.history, prepared.dataset)
        _write_curve_csv(out / "curve_mean.csv", curve.mean)
        _write_meta(out / "meta.json", cfg)
    return curve


@dataclass
class NaComparison:
    """Matched-seed contrast of rank-one updates vs full retraining."""

    na: AccuracyCurve
    retrain: AccuracyCurve
    per_step_abs_diff: np.ndarray
    mean_abs_diff: float


def run_na_comparison(
    cfg: ExperimentConfig,
    out_dir: str | Path | None = None,
    prepared: PreparedProblem | None = None,
) -> NaComparison:
    """Paired probit runs, one arm per update mode, sharing each trial's seed."""
    cfg = cfg.resolved()
    if cfg.model != "probit":
        raise InvalidParameterError("the update-mode comparison is defined for the probit model")
    if cfg.acquisition not in ("mc", "mbr", "unc", "vopt"):
        raise InvalidParameterError(
            f"comparison supports mc/mbr/unc/vopt, got {cfg.acquisition!r}"
        )
    if prepared is None:
        prepared = prepare_problem(cfg)
    na_curve = run_experiment(replace(cfg, update_mode="na"), prepared=prepared)
    rt_curve = run_experiment(replace(cfg, update_mode="retrain"), prepared=prepared)
    diff = np.abs(na_curve.trials - rt_curve.trials).mean(axis=0)
    comparison = NaComparison(
        na=na_curve,
        retrain=rt_curve,
        per_step_abs_diff=diff,
        mean_abs_diff=float(diff.mean()),
    )
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for i in range(cfg.n_trials):
            _write_curve_csv(out / f"curve_trial_{i}_na.csv", na_curve.trials[i])
            _write_curve_csv(out / f"curve_trial_{i}_retrain.csv", rt_curve.trials[i])
        _write_curve_csv(out / "curve_mean_na.csv", na_curve.mean)
        _write_curve_csv(out / "curve_mean_retrain.csv", rt_curve.mean)
        with open(out / "diff.csv", "w") as f:
            f.write("step,mean_abs_diff\n")
            for step, d in enumerate(diff):
                f.write(f"{step},{float(d)!r}\n")
        _write_meta(out / "meta.json", cfg, extra={"mean_abs_diff": comparison.mean_abs_diff})
    return comparison
