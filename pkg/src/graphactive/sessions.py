"""Interactive labeling sessions: state machine, persistence, concurrency.

A session wraps one active-learning run operated by a human: the service
proposes a query, the annotator submits a label, the posterior is updated by
its rank-one formulas (or full retraining when configured). Sessions are
persisted as append-only JSONL event logs (create / query / label events)
plus a periodic posterior snapshot; replaying the log reproduces the exact
posterior, so crashes lose nothing.

Within a session, mutation is serialized by a per-session lock: of two
concurrent label submissions exactly one wins and the loser gets a conflict
error. Reads return consistent snapshots.
"""

from __future__ import annotations

import base64
import io
import json
import secrets
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .acquisition import compute_scores, select_query
from .data import Dataset, checkerboard, initial_labels, mnist_load, mnist_subset
from .errors import EmptyPoolError, GraphActiveError, InvalidParameterError
from .experiments import _build_posterior  # shared model-construction logic
from .graphs import DENSE_CAP, build_full_graph, build_knn_graph, laplacian, regularized_precision
from .models import LabeledSet, NoiseModel, Posterior, predict
from .lookahead import apply_label


class UnknownSessionError(GraphActiveError):
    """No session with the given id exists."""


class SessionConflictError(GraphActiveError):
    """The requested transition is not legal in the session's current state."""


class MalformedUploadError(GraphActiveError):
    """An uploaded dataset could not be parsed."""


@dataclass(frozen=True)
class SessionConfig:
    """Session-scoped model and graph settings (a subset of experiment config)."""

    model: str = "probit"
    acquisition: str = "mc"
    update_mode: str = "na"
    tau: float = 1.0
    gamma: float = 0.1
    noise_family: str = "gaussian-cdf"
    graph: str = "full"
    knn_k: int = 15
    length_scale: float = 0.05
    laplacian_kind: str = "unnormalized"
    hf_jitter: float = 0.0
    free_labeling: bool = False
    snapshot_every: int = 10
    seed: int = 0

    def noise(self) -> NoiseModel:
        return NoiseModel(self.gamma, family=self.noise_family)


@dataclass
class SessionState:
    """One live session; all mutation goes through SessionManager."""

    id: str
    config: SessionConfig
    dataset: Dataset
    dataset_spec: dict
    has_ground_truth: bool
    laplacian_obj: object
    prior: object | None
    posterior: Posterior
    pending: int | None = None
    history: list = field(default_factory=list)  # dicts: step/index/label/ts
    accuracy_curve: list = field(default_factory=list)
    step: int = 0
    lock: threading.Lock = field(default_factory=threading.Lock)

    @property
    def completed(self) -> bool:
        return len(self.posterior.candidates()) == 0 and self.pending is None


def _parse_upload_csv(text: str) -> np.ndarray:
    try:
        buf = io.StringIO(text)
        header = buf.readline()
        if not header.strip():
            raise ValueError("empty upload")
        X = np.loadtxt(buf, delimiter=",", ndmin=2)
    except ValueError as exc:
        raise MalformedUploadError(f"could not parse feature CSV: {exc}") from exc
    if not np.all(np.isfinite(X)):
        raise MalformedUploadError("uploaded features contain non-finite values")
    return X


def _build_dataset(spec: dict) -> tuple[Dataset, bool]:
    name = spec.get("name")
    if name == "checkerboard":
        ds = checkerboard(
            n=int(spec.get("n", 2000)),
            grid=int(spec.get("grid", 4)),
            seed=int(spec.get("seed", 0)),
        )
        return ds, True
    if name == "mnist":
        images, digits = mnist_load(spec["images_path"], spec["labels_path"])
        ds = mnist_subset(
            images,
            digits,
            per_digit=int(spec.get("per_digit", 400)),
            seed=int(spec.get("seed", 0)),
        )
        return ds, True
    if name == "upload":
        X = _parse_upload_csv(spec["csv"])
        if X.shape[0] > DENSE_CAP:
            from .errors import ResourceLimitError

            raise ResourceLimitError(
                f"upload has N={X.shape[0]} rows, above the dense cap of {DENSE_CAP}"
            )
        # No oracle for uploads: ground truth is a placeholder +1 vector and
        # accuracy is never reported for it.
        ds = Dataset(
            features=X,
            ground_truth=np.ones(X.shape[0], dtype=np.int64),
            name="upload",
            display_coords=X[:, :2] if X.shape[1] >= 2 else None,
        )
        return ds, False
    raise InvalidParameterError(f"unknown dataset spec: {name!r}")


@dataclass
class _ModelBundle:
    """Adapter reusing the experiment-runner posterior construction."""

    model: str
    update_mode: str
    warm_start: bool = True
    # experiment-config fields read by _build_posterior
    gamma: float = 0.1
    noise_family: str = "gaussian-cdf"
    hf_jitter: float = 0.0
    newton_max_iters: int = 100
    newton_grad_tol: float = 1e-8
    acquisition: str = "mc"

    def noise(self) -> NoiseModel:
        return NoiseModel(self.gamma, family=self.noise_family)

    def newton(self):
        from .models import NewtonConfig

        return NewtonConfig(max_iters=self.newton_max_iters, grad_tol=self.newton_grad_tol)


class SessionManager:
    """Creates, persists, reloads, and mutates sessions under per-session locks."""

    def __init__(self, data_dir: str | Path):
        self.data_dir = Path(data_dir)
        self._sessions: dict[str, SessionState] = {}
        self._registry_lock = threading.Lock()

    # -- construction -------------------------------------------------------

    def _build_models(self, cfg: SessionConfig, ds: Dataset):
        if cfg.graph == "full":
            G = build_full_graph(ds.features, cfg.length_scale)
        else:
            G = build_knn_graph(ds.features, cfg.knn_k, cfg.length_scale)
        L = laplacian(G, cfg.laplacian_kind)
        prior = regularized_precision(L, cfg.tau) if cfg.model in ("gr", "probit") else None
        return L, prior

    def _bundle(self, cfg: SessionConfig) -> _ModelBundle:
        return _ModelBundle(
            model=cfg.model,
            update_mode=cfg.update_mode,
            gamma=cfg.gamma,
            noise_family=cfg.noise_family,
            hf_jitter=cfg.hf_jitter,
            acquisition=cfg.acquisition,
        )

    def create(
        self,
        dataset_spec: dict,
        config: SessionConfig,
        seed_labels: dict | None,
        session_id: str | None = None,
        persist: bool = True,
    ) -> SessionState:
        if config.model not in ("gr", "hf", "probit"):
            raise InvalidParameterError(f"unknown model: {config.model!r}")
        if config.model == "hf" and config.acquisition == "mc":
            raise InvalidParameterError("the mc acquisition is not defined for the hf model")
        ds, has_truth = _build_dataset(dataset_spec)
        lab = self._resolve_seed_labels(ds, has_truth, seed_labels)
        if len(lab) == 0:
            raise InvalidParameterError(
                "sessions need at least one seed label to fit the initial posterior"
            )
        L, prior = self._build_models(config, ds)
        from .experiments import PreparedProblem

        prepared = PreparedProblem(dataset=ds, laplacian=L, prior=prior)
        posterior = _build_posterior(self._bundle(config), prepared, lab)

        sid = session_id or secrets.token_hex(8)
        state = SessionState(
            id=sid,
            config=config,
            dataset=ds,
            dataset_spec=dataset_spec,
            has_ground_truth=has_truth,
            laplacian_obj=L,
            prior=prior,
            posterior=posterior,
        )
        if has_truth:
            state.accuracy_curve.append(self._accuracy(state))
        with self._registry_lock:
            self._sessions[sid] = state
        if persist:
            self._append_event(
                sid,
                {
                    "type": "create",
                    "dataset": dataset_spec,
                    "config": vars(config) if not hasattr(config, "__dataclass_fields__") else {
                        k: getattr(config, k) for k in config.__dataclass_fields__
                    },
                    "seed_labels": {
                        "indices": lab.indices.tolist(),
                        "labels": lab.labels.tolist(),
                    },
                    "ts": time.time(),
                },
            )
        return state

    def _resolve_seed_labels(self, ds: Dataset, has_truth: bool, seed_labels: dict | None) -> LabeledSet:
        if seed_labels is None:
            return LabeledSet.empty()
        if "indices" in seed_labels:
            idx = np.asarray(seed_labels["indices"], dtype=np.int64)
            labels = np.asarray(seed_labels["labels"], dtype=np.int64)
            if idx.size and (idx.min() < 0 or idx.max() >= ds.n):
                raise InvalidParameterError("seed label index out of range")
            return LabeledSet(idx, labels)
        per_class = int(seed_labels.get("per_class", 0))
        if per_class > 0 and not has_truth:
            raise InvalidParameterError(
                "per-class seeding needs ground truth; uploads must provide explicit labels"
            )
        return initial_labels(ds, per_class, int(seed_labels.get("seed", 0)))

    # -- persistence --------------------------------------------------------

    def _events_path(self, sid: str) -> Path:
        return self.data_dir / f"{sid}.events.jsonl"

    def _snapshot_path(self, sid: str) -> Path:
        return self.data_dir / f"{sid}.snapshot.npz"

    def _append_event(self, sid: str, event: dict) -> None:
        self.data_dir.mkdir(parents=True, exist_ok=True)
        with open(self._events_path(sid), "a") as f:
            f.write(json.dumps(event, sort_keys=True) + "\n")

    def _maybe_snapshot(self, state: SessionState) -> None:
        every = state.config.snapshot_every
        if every <= 0 or state.step % every != 0:
            return
        post = state.posterior
        self.data_dir.mkdir(parents=True, exist_ok=True)
        np.savez_compressed(
            self._snapshot_path(state.id),
            step=state.step,
            mean=post.mean,
            covariance=post.covariance if post.covariance is not None else np.empty(0),
            labeled_indices=post.labeled.indices,
            labeled_labels=post.labeled.labels,
            index_map=post.index_map,
            accuracy_curve=np.asarray(state.accuracy_curve, dtype=float),
        )

    def load(self, sid: str) -> SessionState:
        """Rebuild a session from its event log, fast-forwarded by a snapshot.

        When a posterior snapshot is present and consistent with the log, only
        the label events after its step are replayed; otherwise the whole log
        replays from scratch. Both paths reproduce the posterior exactly (the
        same floating-point updates run in the same order).
        """
        path = self._events_path(sid)
        if not path.exists():
            raise UnknownSessionError(f"no persisted session {sid!r}")
        events = [json.loads(line) for line in path.read_text().splitlines() if line.strip()]
        if not events or events[0]["type"] != "create":
            raise GraphActiveError(f"corrupt event log for session {sid!r}")
        create = events[0]
        config = SessionConfig(**create["config"])
        state = self.create(
            create["dataset"],
            config,
            seed_labels=create["seed_labels"],
            session_id=sid,
            persist=False,
        )
        label_events = [ev for ev in events[1:] if ev["type"] == "label"]
        resume_step = self._restore_snapshot(state, label_events)
        for ev in events[1:]:
            if ev["type"] == "query":
                state.pending = int(ev["index"])
            elif ev["type"] == "label":
                state.pending = None
                if int(ev["step"]) <= resume_step:
                    continue
                self._apply_label_event(state, int(ev["index"]), int(ev["label"]))
        return state

    def _restore_snapshot(self, state: SessionState, label_events: list) -> int:
        """Load the posterior snapshot if it matches the log; return its step."""
        path = self._snapshot_path(state.id)
        if not path.exists():
            return 0
        try:
            snap = np.load(path)
            step = int(snap["step"])
        except (OSError, ValueError, KeyError):
            return 0
        if step <= 0 or step > len(label_events):
            return 0
        labeled = LabeledSet(snap["labeled_indices"], snap["labeled_labels"])
        cov = snap["covariance"]
        state.posterior = Posterior(
            kind=state.posterior.kind,
            mean=snap["mean"],
            covariance=cov if cov.size else None,
            labeled=labeled,
            n_total=state.dataset.n,
            index_map=snap["index_map"],
            noise=state.posterior.noise,
        )
        # Rebuild the bookkeeping that accompanies the restored posterior.
        for ev in label_events[:step]:
            state.step += 1
            state.history.append(
                {"step": state.step, "index": int(ev["index"]), "label": int(ev["label"]), "ts": ev.get("ts", 0.0)}
            )
        if state.has_ground_truth and "accuracy_curve" in snap:
            state.accuracy_curve = snap["accuracy_curve"].tolist()
        return step

    def _apply_label_event(self, state: SessionState, index: int, label: int) -> None:
        cfg = state.config
        if cfg.update_mode == "retrain":
            from .experiments import PreparedProblem

            prepared = PreparedProblem(
                dataset=state.dataset, laplacian=state.laplacian_obj, prior=state.prior
            )
            state.posterior = _build_posterior(
                self._bundle(cfg),
                prepared,
                state.posterior.labeled.add(index, label),
                warm_mean=state.posterior.mean,
            )
        else:
            state.posterior = apply_label(state.posterior, index, label)
        state.step += 1
        state.history.append(
            {"step": state.step, "index": index, "label": label, "ts": time.time()}
        )
        if state.has_ground_truth:
            state.accuracy_curve.append(self._accuracy(state))

    # -- queries ------------------------------------------------------------

    def get(self, sid: str) -> SessionState:
        with self._registry_lock:
            state = self._sessions.get(sid)
        if state is None:
            state = self.load(sid)
        return state

    def _accuracy(self, state: SessionState) -> float:
        labels, _ = predict(state.posterior)
        return float(np.mean(labels == state.dataset.ground_truth))

    def next_query(self, state: SessionState) -> dict:
        """Score the pool, mark the best candidate pending, describe it."""
        with state.lock:
            if state.pending is not None:
                raise SessionConflictError(
                    f"query {state.pending} is already pending a label"
                )
            cfg = state.config
            try:
                rng = np.random.default_rng([cfg.seed, state.step])
                noise = cfg.noise() if cfg.model != "hf" else None
                scores = compute_scores(cfg.acquisition, state.posterior, noise, rng=rng)
                k = select_query(scores)
            except EmptyPoolError:
                return {"completed": True, "index": None}
            state.pending = k
            self._append_event(state.id, {"type": "query", "step": state.step + 1, "index": k, "ts": time.time()})
            top = sorted(scores.scores.items(), key=lambda kv: (-kv[1], kv[0]))[:10]
            labels, probs = predict(state.posterior)
            out = {
                "completed": False,
                "index": k,
                "scores_top10": [{"index": int(i), "score": float(v)} for i, v in top],
                "predictions": labels.tolist(),
                "probabilities": np.round(probs, 6).tolist(),
            }
            coords = state.dataset.display_coords
            out["coords"] = coords[k].tolist() if coords is not None else None
            out["image_b64"] = self._image_payload(state, k)
            return out

    def _image_payload(self, state: SessionState, k: int) -> str | None:
        if state.dataset.name != "mnist":
            return None
        pixels = np.clip(state.dataset.features[k] * 255.0, 0, 255).astype(np.uint8)
        return base64.b64encode(pixels.tobytes()).decode("ascii")

    def submit_label(self, state: SessionState, index: int, label: int) -> dict:
        """Fold a label in; only the pending index is accepted unless free labeling."""
        if label not in (-1, 1):
            raise InvalidParameterError(f"label must be -1 or +1, got {label}")
        with state.lock:
            if state.config.free_labeling:
                if index in state.posterior.labeled:
                    raise SessionConflictError(f"node {index} is already labeled")
            elif state.pending is None or index != state.pending:
                raise SessionConflictError(
                    f"node {index} is not the pending query"
                    + (f" (pending: {state.pending})" if state.pending is not None else " (none pending)")
                )
            before_labels, _ = predict(state.posterior)
            self._apply_label_event(state, index, label)
            state.pending = None
            self._append_event(
                state.id,
                {"type": "label", "step": state.step, "index": index, "label": label, "ts": time.time()},
            )
            self._maybe_snapshot(state)
            after_labels, _ = predict(state.posterior)
            return {
                "step": state.step,
                "accuracy": state.accuracy_curve[-1] if state.has_ground_truth else None,
                "changed": int(np.sum(after_labels != before_labels)),
                "completed": state.completed,
            }

    def snapshot(self, state: SessionState) -> dict:
        """Read-only view of the full session state."""
        with state.lock:
            labels, probs = predict(state.posterior)
            coords = state.dataset.display_coords
            return {
                "id": state.id,
                "dataset": {
                    "name": state.dataset.name,
                    "n": state.dataset.n,
                    "display_coords": coords.tolist() if coords is not None else None,
                },
                "model": state.config.model,
                "acquisition": state.config.acquisition,
                "update_mode": state.config.update_mode,
                "step": state.step,
                "pending": state.pending,
                "history": list(state.history),
                "accuracy_curve": list(state.accuracy_curve),
                "predictions": labels.tolist(),
                "probabilities": np.round(probs, 6).tolist(),
                "labeled_indices": state.posterior.labeled.indices.tolist(),
                "labeled_labels": state.posterior.labeled.labels.tolist(),
                "completed": state.completed,
            }

    def export_csv(self, state: SessionState) -> str:
        """History block, then one prediction row per node."""
        with state.lock:
            labels, probs = predict(state.posterior)
            lines = ["# history", "step,node_index,label"]
            for h in state.history:
                lines.append(f"{h['step']},{h['index']},{h['label']}")
            lines.append("")
            lines.append("# predictions")
            lines.append("node_index,predicted_label,probability")
            for i in range(state.dataset.n):
                lines.append(f"{i},{labels[i]},{probs[i]:.6f}")
            return "\n".join(lines) + "\n"
