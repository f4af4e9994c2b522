"""Rank-one look-ahead updates of posterior mean and covariance.

Adding one hypothetical label (k, y) perturbs the posterior precision by a
rank-one term, so the look-ahead mean and covariance follow from
Sherman-Morrison in O(N) / O(N^2) without refactorizing. For the Gaussian and
harmonic models the update is exact; for the probit model it is a single
Newton step on the augmented objective, started from the current MAP
estimate, with the covariance curvature evaluated at the updated mean entry.
A from-scratch retraining oracle is provided for validation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError, InvalidQueryError
from .graphs import Laplacian, PriorPrecision
from .instrument import counters
from .models import (
    LabeledSet,
    NewtonConfig,
    NoiseModel,
    Posterior,
    gr_posterior,
    hf_posterior,
    probit_curvature,
    probit_grad,
    probit_laplace,
)


@dataclass(frozen=True)
class LookaheadResult:
    """Posterior parameters after hypothetically labeling node k with y.

    ``covariance`` is None in mean-only mode. For the harmonic model the
    queried row/column is removed and ``index_map`` gives the remaining
    unlabeled block's global indices.
    """

    mean: np.ndarray
    covariance: np.ndarray | None
    k: int
    y: int
    index_map: np.ndarray | None = None


def _check_unlabeled(post: Posterior, k: int) -> int:
    if k in post.labeled:
        raise InvalidQueryError(f"node {k} is already labeled")
    return post.local_index(k)


def newton_mean_update(
    post: Posterior, k: int, y: int, noise: NoiseModel | None = None
) -> np.ndarray:
    """One-Newton-step look-ahead mean for the probit posterior.

    Runs in O(N) given the stored covariance: the update direction is the
    k-th covariance column scaled by grad/(1 + C_kk * curvature) at the
    current mean entry.
    """
    if post.kind != "probit":
        raise InvalidParameterError("newton_mean_update applies to probit posteriors")
    j = _check_unlabeled(post, k)
    noise = noise or post.noise
    C = post.require_covariance()
    u_k = post.mean[j]
    g = float(probit_grad(u_k, y, noise))
    c = float(probit_curvature(u_k, y, noise))
    scale = g / (1.0 + C[j, j] * c)
    return post.mean - scale * C[:, j]


def newton_cov_update(
    post: Posterior,
    k: int,
    y: int,
    updated_mean: np.ndarray,
    noise: NoiseModel | None = None,
    curvature_at: str = "updated",
) -> np.ndarray:
    """Rank-one look-ahead covariance for the probit posterior.

    The curvature is evaluated at the updated mean entry (``curvature_at=
    "updated"``); ``"current"`` evaluates at the present MAP entry instead,
    kept as a cheaper ablation. The formula is the exact inverse of the
    rank-one-perturbed precision for the chosen curvature value.
    """
    if post.kind != "probit":
        raise InvalidParameterError("newton_cov_update applies to probit posteriors")
    j = _check_unlabeled(post, k)
    noise = noise or post.noise
    C = post.require_covariance()
    if curvature_at == "updated":
        point = updated_mean[j]
    elif curvature_at == "current":
        point = post.mean[j]
    else:
        raise InvalidParameterError(f"curvature_at must be 'updated' or 'current', got {curvature_at!r}")
    c = float(probit_curvature(point, y, noise))
    col = C[:, j]
    counters.lookahead_covariances += 1
    return C - (c / (1.0 + C[j, j] * c)) * np.outer(col, col)


def probit_lookahead(
    post: Posterior,
    k: int,
    y: int,
    noise: NoiseModel | None = None,
    include_covariance: bool = True,
    curvature_at: str = "updated",
) -> LookaheadResult:
    """Mean (and optionally covariance) Newton look-ahead for probit."""
    m = newton_mean_update(post, k, y, noise)
    C = None
    if include_covariance:
        C = newton_cov_update(post, k, y, m, noise, curvature_at=curvature_at)
    return LookaheadResult(mean=m, covariance=C, k=k, y=y, index_map=post.index_map)


def gr_lookahead(
    post: Posterior,
    k: int,
    y: int,
    noise: NoiseModel | None = None,
    include_covariance: bool = True,
) -> LookaheadResult:
    """Exact Gaussian-regression look-ahead (conditioning on one new label).

    The covariance update does not depend on the hypothesized label.
    """
    if post.kind != "gr":
        raise InvalidParameterError("gr_lookahead applies to gr posteriors")
    j = _check_unlabeled(post, k)
    noise = noise or post.noise
    noise.require_positive_gamma()
    C = post.require_covariance()
    denom = noise.gamma * noise.gamma + C[j, j]
    col = C[:, j]
    m = post.mean - ((post.mean[j] - y) / denom) * col
    Cnew = None
    if include_covariance:
        counters.lookahead_covariances += 1
        Cnew = C - np.outer(col, col) / denom
    return LookaheadResult(mean=m, covariance=Cnew, k=k, y=y, index_map=post.index_map)


def hf_lookahead(
    post: Posterior, k: int, y01: float, include_covariance: bool = True
) -> LookaheadResult:
    """Exact harmonic look-ahead: condition on node k = y01, then drop it.

    This is the zero-noise limit of the Gaussian update on the conditional
    model; before deletion the mean entry at k equals y01 exactly.
    """
    if post.kind != "hf":
        raise InvalidParameterError("hf_lookahead applies to hf posteriors")
    if y01 not in (0, 1):
        raise InvalidParameterError(f"hf_lookahead takes a {{0,1}} label, got {y01}")
    j = _check_unlabeled(post, k)
    C = post.require_covariance()
    col = C[:, j]
    pivot = C[j, j]
    m = post.mean - ((post.mean[j] - y01) / pivot) * col
    m = np.delete(m, j)
    Cnew = None
    if include_covariance:
        counters.lookahead_covariances += 1
        Cnew = C - np.outer(col, col) / pivot
        Cnew = np.delete(np.delete(Cnew, j, axis=0), j, axis=1)
    return LookaheadResult(
        mean=m,
        covariance=Cnew,
        k=k,
        y=int(y01),
        index_map=np.delete(post.index_map, j),
    )


# ---------------------------------------------------------------------------
# Applying an accepted label (same formulas, returning a full Posterior)


def apply_label(
    post: Posterior,
    k: int,
    y: int,
    noise: NoiseModel | None = None,
    curvature_at: str = "updated",
) -> Posterior:
    """Fold a revealed label (+-1) into the posterior by its rank-one update."""
    if post.kind == "gr":
        res = gr_lookahead(post, k, y, noise)
    elif post.kind == "hf":
        res = hf_lookahead(post, k, (y + 1) // 2)
    else:
        res = probit_lookahead(post, k, y, noise, curvature_at=curvature_at)
    return Posterior(
        kind=post.kind,
        mean=res.mean,
        covariance=res.covariance,
        labeled=post.labeled.add(k, y),
        n_total=post.n_total,
        index_map=res.index_map,
        noise=post.noise,
    )


def retrain_lookahead(
    kind: str,
    operator,
    lab: LabeledSet,
    k: int,
    y: int,
    noise: NoiseModel | None = None,
    cfg: NewtonConfig | None = None,
    jitter_tau: float = 0.0,
    initial: np.ndarray | None = None,
) -> Posterior:
    """From-scratch posterior with (k, y) appended: the retraining oracle.

    ``operator`` is the PriorPrecision for gr/probit or the Laplacian for hf;
    ``y`` is always a +-1 label. Serves as ground truth for validating the
    rank-one updates and as the true-update arm of experiments.
    """
    if k in lab:
        raise InvalidQueryError(f"node {k} is already labeled")
    newlab = lab.add(k, y)
    kind = kind.lower()
    if kind == "gr":
        if not isinstance(operator, PriorPrecision):
            raise InvalidParameterError("gr retraining needs a PriorPrecision")
        return gr_posterior(operator, newlab, noise)
    if kind == "hf":
        if not isinstance(operator, Laplacian):
            raise InvalidParameterError("hf retraining needs a Laplacian")
        return hf_posterior(operator, newlab, jitter_tau=jitter_tau)
    if kind == "probit":
        if not isinstance(operator, PriorPrecision):
            raise InvalidParameterError("probit retraining needs a PriorPrecision")
        return probit_laplace(operator, newlab, noise, cfg, initial=initial)
    raise InvalidParameterError(f"unknown model kind: {kind!r}")
