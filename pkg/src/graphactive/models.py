"""Posterior models over graph priors: Gaussian regression, harmonic, probit.

Three posteriors share the objective 0.5 <u, Q u> + sum_j loss(u_j, y_j) with
Q the regularized graph precision:

* gr  - quadratic loss; the posterior is exactly Gaussian.
* hf  - zero-noise conditional model on {0,1} labels; the mean is harmonic on
        the unlabeled block and the covariance is the inverse unlabeled
        sub-Laplacian.
* probit - CDF-likelihood loss; the posterior is non-Gaussian and is
        approximated by a Gaussian centered at the MAP estimate with the
        inverse objective Hessian as covariance.

All functions are pure: they take immutable inputs and return new values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.csgraph as csgraph
import scipy.special as special

from .errors import (
    ComponentWithoutLabelError,
    ConvergenceError,
    InvalidParameterError,
)
from .graphs import Laplacian, PriorPrecision
from .instrument import counters

# Probability clip for reported class probabilities at labeled / saturated nodes.
PROB_CLIP = 1e-6

_SQRT2 = math.sqrt(2.0)
_SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)

GAUSSIAN_FAMILY = "gaussian-cdf"
LOGISTIC_FAMILY = "logistic-cdf"


@dataclass(frozen=True)
class LabeledSet:
    """Ordered set of distinct labeled node indices with labels in {-1, +1}."""

    indices: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        lab = np.asarray(self.labels, dtype=np.int64)
        if idx.ndim != 1 or lab.ndim != 1 or idx.shape != lab.shape:
            raise InvalidParameterError("indices and labels must be 1-D and equal length")
        if len(np.unique(idx)) != len(idx):
            raise InvalidParameterError("labeled indices must be distinct")
        if len(lab) and not np.all(np.isin(lab, (-1, 1))):
            raise InvalidParameterError("labels must be -1 or +1")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "labels", lab)

    @classmethod
    def empty(cls) -> "LabeledSet":
        return cls(np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64))

    @classmethod
    def of(cls, pairs) -> "LabeledSet":
        """Build from an iterable of (index, label) pairs."""
        pairs = list(pairs)
        idx = np.array([p[0] for p in pairs], dtype=np.int64)
        lab = np.array([p[1] for p in pairs], dtype=np.int64)
        return cls(idx, lab)

    def add(self, k: int, y: int) -> "LabeledSet":
        if k in self:
            raise InvalidParameterError(f"node {k} is already labeled")
        return LabeledSet(np.append(self.indices, k), np.append(self.labels, y))

    def labels01(self) -> np.ndarray:
        """Labels mapped {-1,+1} -> {0,1} as floats."""
        return (self.labels.astype(float) + 1.0) / 2.0

    def __len__(self) -> int:
        return len(self.indices)

    def __contains__(self, k) -> bool:
        return bool(np.isin(k, self.indices))


@dataclass(frozen=True)
class NoiseModel:
    """Observation-noise scale and CDF family for the label likelihood.

    gamma == 0 is permitted only for the harmonic model's gamma -> 0 limit;
    quadratic and probit losses require gamma > 0.
    """

    gamma: float
    family: str = GAUSSIAN_FAMILY

    def __post_init__(self):
        if self.gamma < 0:
            raise InvalidParameterError(f"gamma must be nonnegative, got {self.gamma}")
        if self.family not in (GAUSSIAN_FAMILY, LOGISTIC_FAMILY):
            raise InvalidParameterError(f"unknown noise family: {self.family!r}")

    def require_positive_gamma(self) -> None:
        if self.gamma <= 0:
            raise InvalidParameterError("this model requires gamma > 0")


@dataclass(frozen=True)
class NewtonConfig:
    """Damped-Newton controls for the probit MAP solve."""

    max_iters: int = 100
    grad_tol: float = 1e-8
    max_halvings: int = 30

    def __post_init__(self):
        if self.max_iters < 1:
            raise InvalidParameterError("max_iters must be >= 1")
        if self.grad_tol <= 0:
            raise InvalidParameterError("grad_tol must be positive")


@dataclass
class NewtonInfo:
    """Diagnostics from a damped-Newton solve."""

    iterations: int
    grad_norm: float
    objectives: list
    converged: bool


@dataclass(frozen=True)
class Posterior:
    """Gaussian (or Gaussian-approximated) posterior over node values.

    For the harmonic model the mean and covariance cover only the unlabeled
    block and ``index_map`` gives the global node index of each row; for the
    other models rows are global and ``index_map`` is the identity. The
    covariance may be None for mean-only retrains that no consumer of
    variances will touch.
    """

    kind: str  # "gr" | "hf" | "probit"
    mean: np.ndarray
    covariance: np.ndarray | None
    labeled: LabeledSet
    n_total: int
    index_map: np.ndarray
    noise: NoiseModel | None = None

    def candidates(self) -> np.ndarray:
        """Global indices of currently unlabeled nodes, ascending."""
        if self.kind == "hf":
            return self.index_map
        return np.setdiff1d(np.arange(self.n_total), self.labeled.indices)

    def local_index(self, k: int) -> int:
        """Row of global node k inside mean/covariance."""
        if not 0 <= k < self.n_total:
            raise InvalidParameterError(f"node index {k} out of range [0, {self.n_total})")
        if self.kind != "hf":
            return int(k)
        pos = int(np.searchsorted(self.index_map, k))
        if pos >= len(self.index_map) or self.index_map[pos] != k:
            raise InvalidParameterError(f"node {k} is not in the unlabeled block")
        return pos

    def require_covariance(self) -> np.ndarray:
        if self.covariance is None:
            raise InvalidParameterError("this operation needs a posterior covariance")
        return self.covariance


# ---------------------------------------------------------------------------
# Loss derivatives


def _gaussian_ratio(z):
    """pdf/CDF ratio of the standard normal, stable far into the left tail."""
    return _SQRT_2_OVER_PI / special.erfcx(-np.asarray(z, dtype=float) / _SQRT2)


@dataclass(frozen=True)
class Loss:
    """First/second derivatives and value of a label loss, vectorized in x."""

    grad: callable
    curvature: callable
    value: callable


def probit_grad(x, y, noise: NoiseModel):
    """d/dx of the probit loss -log CDF(x*y / gamma)."""
    noise.require_positive_gamma()
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    z = x * y / noise.gamma
    if noise.family == GAUSSIAN_FAMILY:
        return -y * _gaussian_ratio(z) / noise.gamma
    return -y * special.expit(-z) / noise.gamma


def probit_curvature(x, y, noise: NoiseModel):
    """d^2/dx^2 of the probit loss; strictly positive by log-concavity."""
    noise.require_positive_gamma()
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    z = x * y / noise.gamma
    g2 = noise.gamma * noise.gamma
    if noise.family == GAUSSIAN_FAMILY:
        r = _gaussian_ratio(z)
        return r * (r + z) / g2
    return special.expit(z) * special.expit(-z) / g2


def probit_loss_value(x, y, noise: NoiseModel):
    """The probit loss -log CDF(x*y / gamma), evaluated stably."""
    noise.require_positive_gamma()
    z = np.asarray(x, dtype=float) * np.asarray(y, dtype=float) / noise.gamma
    if noise.family == GAUSSIAN_FAMILY:
        return -special.log_ndtr(z)
    return -special.log_expit(z)


def probit_loss(noise: NoiseModel) -> Loss:
    return Loss(
        grad=lambda x, y: probit_grad(x, y, noise),
        curvature=lambda x, y: probit_curvature(x, y, noise),
        value=lambda x, y: probit_loss_value(x, y, noise),
    )


def quadratic_loss(gamma: float) -> Loss:
    """Quadratic label loss (x - y)^2 / (2 gamma^2) in derivative form.

    Feeding this into the probit machinery reproduces the Gaussian-regression
    posterior exactly; Newton converges in a single step from zero.
    """
    if gamma <= 0:
        raise InvalidParameterError("quadratic loss requires gamma > 0")
    g2 = gamma * gamma
    return Loss(
        grad=lambda x, y: (np.asarray(x, dtype=float) - y) / g2,
        curvature=lambda x, y: np.full(np.broadcast(x, y).shape, 1.0 / g2),
        value=lambda x, y: (np.asarray(x, dtype=float) - y) ** 2 / (2.0 * g2),
    )


# ---------------------------------------------------------------------------
# Posteriors


def _chol(A: np.ndarray):
    counters.cholesky_factorizations += 1
    return scipy.linalg.cho_factor(A, lower=True)


def gr_posterior(Lt: PriorPrecision, lab: LabeledSet, noise: NoiseModel) -> Posterior:
    """Exact Gaussian posterior for the quadratic-loss model.

    Precision = prior precision plus 1/gamma^2 on labeled diagonal entries;
    mean solves that system against the scaled label indicator.
    """
    noise.require_positive_gamma()
    if len(lab) == 0:
        raise InvalidParameterError("gr_posterior requires at least one label")
    n = Lt.n
    g2 = noise.gamma * noise.gamma
    A = Lt.dense().copy()
    A[lab.indices, lab.indices] += 1.0 / g2
    factor = _chol(A)
    C = scipy.linalg.cho_solve(factor, np.eye(n))
    b = np.zeros(n)
    b[lab.indices] = lab.labels / g2
    m = scipy.linalg.cho_solve(factor, b)
    counters.posterior_builds += 1
    return Posterior(
        kind="gr",
        mean=m,
        covariance=C,
        labeled=lab,
        n_total=n,
        index_map=np.arange(n),
        noise=noise,
    )


def _components_without_label(weights: sp.csr_matrix, lab: LabeledSet):
    n_comp, assignment = csgraph.connected_components(weights, directed=False)
    labeled_comps = set(assignment[lab.indices].tolist())
    missing = [c for c in range(n_comp) if c not in labeled_comps]
    return missing, assignment


def hf_posterior(L: Laplacian, lab: LabeledSet, jitter_tau: float = 0.0) -> Posterior:
    """Harmonic-interpolation posterior on the unlabeled block.

    Labels are mapped to {0,1}; the mean solves the unlabeled sub-Laplacian
    system and the covariance is its inverse. A component with no labeled
    node makes that system singular, which is reported as an error naming an
    offending component unless a positive ``jitter_tau`` adds jitter_tau^2 I.
    """
    if len(lab) == 0:
        raise InvalidParameterError("hf_posterior requires at least one label")
    n = L.matrix.shape[0]
    unlabeled = np.setdiff1d(np.arange(n), lab.indices)
    if len(unlabeled) == 0:
        raise InvalidParameterError("hf_posterior needs at least one unlabeled node")

    if jitter_tau == 0.0:
        # Proactive singularity diagnosis beats a raw factorization failure;
        # the off-diagonal structure of L is the adjacency pattern.
        A_pattern = L.matrix.copy()
        A_pattern.setdiag(0)
        A_pattern.eliminate_zeros()
        missing, assignment = _components_without_label(abs(A_pattern), lab)
        if missing:
            comp = missing[0]
            members = np.flatnonzero(assignment == comp)
            raise ComponentWithoutLabelError(
                f"connected component {comp} ({len(members)} nodes, e.g. node "
                f"{int(members[0])}) contains no labeled node; the unlabeled "
                "sub-Laplacian is singular (set jitter_tau > 0 to regularize)"
            )

    A = L.matrix[unlabeled][:, unlabeled].toarray()
    if jitter_tau > 0.0:
        A[np.diag_indices_from(A)] += jitter_tau * jitter_tau
    factor = _chol(A)
    C = scipy.linalg.cho_solve(factor, np.eye(len(unlabeled)))
    cross = L.matrix[unlabeled][:, lab.indices].toarray()
    # LU for the mean: it lands exactly on the simple rationals of textbook
    # instances (e.g. the midpoint 1/2), which the >= 1/2 tie rule observes.
    m = -np.linalg.solve(A, cross @ lab.labels01())
    counters.posterior_builds += 1
    return Posterior(
        kind="hf",
        mean=m,
        covariance=C,
        labeled=lab,
        n_total=n,
        index_map=unlabeled,
        noise=None,
    )


def probit_objective(Lt: PriorPrecision, lab: LabeledSet, u: np.ndarray, loss: Loss) -> float:
    """Value of the penalized objective 0.5 <u, Q u> + sum_j loss(u_j, y_j)."""
    quad = 0.5 * float(u @ (Lt.matrix @ u))
    if len(lab) == 0:
        return quad
    return quad + float(np.sum(loss.value(u[lab.indices], lab.labels.astype(float))))


def probit_map(
    Lt: PriorPrecision,
    lab: LabeledSet,
    noise: NoiseModel | None = None,
    cfg: NewtonConfig | None = None,
    initial: np.ndarray | None = None,
    loss: Loss | None = None,
    full_output: bool = False,
):
    """MAP estimate by damped Newton from zero (or ``initial``).

    Takes full Newton steps, halving the step while the objective increases
    (up to cfg.max_halvings); stops when the gradient infinity-norm falls
    below cfg.grad_tol. The objective is strictly convex, so the iteration is
    globally convergent; failure to converge within max_iters raises.
    """
    if loss is None:
        if noise is None:
            raise InvalidParameterError("probit_map needs a noise model or a loss")
        loss = probit_loss(noise)
    if len(lab) == 0:
        raise InvalidParameterError("probit_map requires at least one label")
    cfg = cfg or NewtonConfig()
    n = Lt.n
    idx = lab.indices
    y = lab.labels.astype(float)
    u = np.zeros(n) if initial is None else np.asarray(initial, dtype=float).copy()

    counters.newton_solves += 1
    J = probit_objective(Lt, lab, u, loss)
    objectives = [J]
    iterations = 0
    grad_norm = np.inf
    for _ in range(cfg.max_iters):
        g = Lt.matrix @ u
        g[idx] += loss.grad(u[idx], y)
        grad_norm = float(np.abs(g).max())
        if grad_norm <= cfg.grad_tol:
            info = NewtonInfo(iterations, grad_norm, objectives, True)
            return (u, info) if full_output else u
        H = Lt.dense().copy()
        H[idx, idx] += loss.curvature(u[idx], y)
        delta = scipy.linalg.cho_solve(_chol(H), g)
        # Accept within a machine-precision slack so that 1-ulp objective
        # noise near the optimum cannot reject an essentially exact step.
        slack = 1e-14 * (1.0 + abs(J))
        step = 1.0
        u_new = u - delta
        J_new = probit_objective(Lt, lab, u_new, loss)
        for _ in range(cfg.max_halvings):
            if J_new <= J + slack:
                break
            step *= 0.5
            u_new = u - step * delta
            J_new = probit_objective(Lt, lab, u_new, loss)
        u, J = u_new, J_new
        objectives.append(J)
        iterations += 1

    g = Lt.matrix @ u
    g[idx] += loss.grad(u[idx], y)
    grad_norm = float(np.abs(g).max())
    if grad_norm <= cfg.grad_tol:
        info = NewtonInfo(iterations, grad_norm, objectives, True)
        return (u, info) if full_output else u
    raise ConvergenceError(
        f"Newton did not reach grad_tol={cfg.grad_tol} within "
        f"{cfg.max_iters} iterations (|grad|_inf = {grad_norm:.3e})",
        grad_norm=grad_norm,
    )


def probit_laplace(
    Lt: PriorPrecision,
    lab: LabeledSet,
    noise: NoiseModel,
    cfg: NewtonConfig | None = None,
    initial: np.ndarray | None = None,
    loss: Loss | None = None,
) -> Posterior:
    """Gaussian approximation centered at the MAP with inverse-Hessian covariance."""
    loss = loss or probit_loss(noise)
    u_hat = probit_map(Lt, lab, noise, cfg, initial=initial, loss=loss)
    H = Lt.dense().copy()
    H[lab.indices, lab.indices] += loss.curvature(u_hat[lab.indices], lab.labels.astype(float))
    C = scipy.linalg.cho_solve(_chol(H), np.eye(Lt.n))
    counters.posterior_builds += 1
    return Posterior(
        kind="probit",
        mean=u_hat,
        covariance=C,
        labeled=lab,
        n_total=Lt.n,
        index_map=np.arange(Lt.n),
        noise=noise,
    )


def probit_map_only_posterior(
    Lt: PriorPrecision,
    lab: LabeledSet,
    noise: NoiseModel,
    cfg: NewtonConfig | None = None,
    initial: np.ndarray | None = None,
) -> Posterior:
    """Mean-only probit posterior for consumers that never read variances."""
    u_hat = probit_map(Lt, lab, noise, cfg, initial=initial)
    counters.posterior_builds += 1
    return Posterior(
        kind="probit",
        mean=u_hat,
        covariance=None,
        labeled=lab,
        n_total=Lt.n,
        index_map=np.arange(Lt.n),
        noise=noise,
    )


# ---------------------------------------------------------------------------
# Prediction


def _cdf(z, family: str):
    if family == GAUSSIAN_FAMILY:
        return special.ndtr(z)
    return special.expit(z)


def predict(post: Posterior) -> tuple[np.ndarray, np.ndarray]:
    """Predicted labels (+-1) and class-(+1) probabilities for all N nodes.

    Sign ties go to +1 (harmonic threshold: mean >= 1/2). Labeled nodes keep
    their revealed labels with probabilities clipped to {eps, 1-eps}.
    """
    n = post.n_total
    labels = np.ones(n, dtype=np.int64)
    probs = np.full(n, 0.5)

    if post.kind == "hf":
        m = post.mean
        labels[post.index_map] = np.where(m >= 0.5, 1, -1)
        probs[post.index_map] = np.clip(m, PROB_CLIP, 1.0 - PROB_CLIP)
    elif post.kind == "gr":
        noise = post.noise
        C = post.require_covariance()
        z = post.mean / np.sqrt(np.diag(C) + noise.gamma * noise.gamma)
        labels[:] = np.where(post.mean >= 0, 1, -1)
        probs[:] = _cdf(z, noise.family)
    else:  # probit
        noise = post.noise
        labels[:] = np.where(post.mean >= 0, 1, -1)
        probs[:] = _cdf(post.mean / noise.gamma, noise.family)

    li = post.labeled.indices
    if len(li):
        labels[li] = post.labeled.labels
        probs[li] = np.where(post.labeled.labels > 0, 1.0 - PROB_CLIP, PROB_CLIP)
    return labels, probs
