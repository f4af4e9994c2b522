"""Acquisition functions scoring unlabeled candidates for the next query.

All six methods consume an immutable posterior and return scores oriented so
that higher is better; risk- and margin-based scores are negated internally.
Scoring is a pure sweep over the candidate pool (the full unlabeled set) and
candidates may be evaluated in any order; selection is deterministic with
ties broken toward the smallest node index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.special as special

from .errors import EmptyPoolError, InvalidParameterError
from .instrument import counters
from .models import (
    GAUSSIAN_FAMILY,
    PROB_CLIP,
    NoiseModel,
    Posterior,
    predict,
    probit_curvature,
    probit_grad,
)

_MBR_CHUNK = 512

METHODS = ("mc", "vopt", "sigmaopt", "mbr", "unc", "random")


@dataclass(frozen=True)
class AcquisitionScores:
    """Per-candidate scores; the maximizer is the query choice."""

    method: str
    scores: dict
    orientation: str = "maximize"


def select_query(s: AcquisitionScores) -> int:
    """Index with the maximal score; ties broken by smallest node index."""
    if not s.scores:
        raise EmptyPoolError("no unlabeled candidates to select from")
    best_k = None
    best_v = -np.inf
    for k in sorted(s.scores):
        v = s.scores[k]
        if v > best_v:
            best_k, best_v = k, v
    return int(best_k)


def _effective_gamma2(post: Posterior, noise: NoiseModel | None) -> float:
    if post.kind == "hf":
        return noise.gamma * noise.gamma if noise is not None else 0.0
    noise = noise if noise is not None else post.noise
    if noise is None:
        raise InvalidParameterError("posterior carries no noise model; pass one explicitly")
    noise.require_positive_gamma()
    return noise.gamma * noise.gamma


def _candidate_rows(post: Posterior) -> tuple[np.ndarray, np.ndarray]:
    cand = post.candidates()
    if post.kind == "hf":
        local = np.arange(len(cand))
    else:
        local = cand
    return cand, local


def vopt_scores(post: Posterior, noise: NoiseModel | None = None) -> AcquisitionScores:
    """Variance-reduction score: squared column norm over (gamma^2 + C_kk)."""
    cand, local = _candidate_rows(post)
    C = post.require_covariance()
    g2 = _effective_gamma2(post, noise)
    cols = C[:, local]
    vals = np.einsum("ij,ij->j", cols, cols) / (g2 + C[local, local])
    return AcquisitionScores("VOpt", dict(zip(cand.tolist(), vals.tolist())))


def sigmaopt_scores(post: Posterior, noise: NoiseModel | None = None) -> AcquisitionScores:
    """Sum-of-column score: <1, C_:k> over (gamma^2 + C_kk)."""
    cand, local = _candidate_rows(post)
    C = post.require_covariance()
    g2 = _effective_gamma2(post, noise)
    colsums = C.sum(axis=0)[local]
    vals = colsums / (g2 + C[local, local])
    return AcquisitionScores("SigmaOpt", dict(zip(cand.tolist(), vals.tolist())))


def uncertainty_scores(post: Posterior) -> AcquisitionScores:
    """Minimum-margin score: distance of the mean to the decision boundary."""
    cand, local = _candidate_rows(post)
    m = post.mean[local]
    boundary = 0.5 if post.kind == "hf" else 0.0
    vals = -np.abs(m - boundary)
    return AcquisitionScores("Uncertainty", dict(zip(cand.tolist(), vals.tolist())))


def mc_scores(post: Posterior, noise: NoiseModel | None = None) -> AcquisitionScores:
    """Norm of the rank-one mean update, minimized over the hypothesized label.

    Not defined for the harmonic conditional model.
    """
    if post.kind == "hf":
        raise InvalidParameterError("mc_scores is not defined for the hf conditional model")
    cand, local = _candidate_rows(post)
    C = post.require_covariance()
    m = post.mean[local]
    diag = C[local, local]
    noise = noise or post.noise

    if post.kind == "probit":
        mags = []
        for y in (1.0, -1.0):
            g = np.abs(probit_grad(m, y, noise))
            c = probit_curvature(m, y, noise)
            mags.append(g / (1.0 + diag * c))
        step = np.minimum(mags[0], mags[1])
    else:  # gr: quadratic-loss derivatives
        noise.require_positive_gamma()
        g2 = noise.gamma * noise.gamma
        denom = 1.0 + diag / g2
        mags = [np.abs(m - y) / g2 / denom for y in (1.0, -1.0)]
        step = np.minimum(mags[0], mags[1])

    cols = C[:, local]
    colnorms = np.sqrt(np.einsum("ij,ij->j", cols, cols))
    vals = step * colnorms
    return AcquisitionScores("MC", dict(zip(cand.tolist(), vals.tolist())))


def mbr_scores(post: Posterior, noise: NoiseModel | None = None) -> AcquisitionScores:
    """Expected post-query classification risk, negated.

    For each candidate k and each hypothesized label, the look-ahead mean is
    formed by the rank-one update (mean only; no look-ahead covariance is
    materialized), converted to class probabilities by the model's prediction
    rule, and the risk sum_i min(p_i, 1-p_i) is weighted by the current
    predictive probability of each label. O(N) per candidate.
    """
    cand, local = _candidate_rows(post)
    if len(cand) == 0:
        raise EmptyPoolError("no unlabeled candidates to score")
    C = post.require_covariance()
    mean = post.mean
    noise = noise if noise is not None else post.noise

    _, current_probs = predict(post)
    q = current_probs[cand]

    diag = C[local, local]
    cdiag = np.diag(C)

    # Rows whose probability is pinned by an existing label. For hf the block
    # holds only unlabeled rows, so the labeled contribution is a constant.
    if post.kind == "hf":
        pinned_rows = np.empty(0, dtype=np.int64)
        pinned_const = len(post.labeled) * PROB_CLIP
    else:
        pinned_rows = post.labeled.indices
        pinned_const = 0.0

    g2 = _effective_gamma2(post, noise)
    risks = {1.0: np.empty(len(cand)), -1.0: np.empty(len(cand))}

    for start in range(0, len(cand), _MBR_CHUNK):
        stop = min(start + _MBR_CHUNK, len(cand))
        loc = local[start:stop]
        cols = C[:, loc]
        m_loc = mean[loc]
        d_loc = diag[start:stop]
        for y in (1.0, -1.0):
            if post.kind == "probit":
                g = probit_grad(m_loc, y, noise)
                c = probit_curvature(m_loc, y, noise)
                scale = g / (1.0 + d_loc * c)
                M = mean[:, None] - cols * scale[None, :]
                z = M / noise.gamma
                P = special.ndtr(z) if noise.family == GAUSSIAN_FAMILY else special.expit(z)
            elif post.kind == "gr":
                scale = (m_loc - y) / (g2 + d_loc)
                M = mean[:, None] - cols * scale[None, :]
                var = cdiag[:, None] - (cols * cols) / (g2 + d_loc)[None, :]
                z = M / np.sqrt(var + g2)
                P = special.ndtr(z) if noise.family == GAUSSIAN_FAMILY else special.expit(z)
            else:  # hf
                y01 = (y + 1.0) / 2.0
                scale = (m_loc - y01) / d_loc
                M = mean[:, None] - cols * scale[None, :]
                P = np.clip(M, PROB_CLIP, 1.0 - PROB_CLIP)
            counters.risk_sweep_cells += M.size
            R = np.minimum(P, 1.0 - P)
            if len(pinned_rows):
                R[pinned_rows, :] = PROB_CLIP
            R[loc, np.arange(stop - start)] = PROB_CLIP  # queried node becomes labeled
            risks[y][start:stop] = R.sum(axis=0) + pinned_const

    expected = q * risks[1.0] + (1.0 - q) * risks[-1.0]
    vals = -expected
    return AcquisitionScores("MBR", dict(zip(cand.tolist(), vals.tolist())))


def random_scores(unlabeled, rng) -> AcquisitionScores:
    """I.i.d. uniform scores from a seeded generator; argmax is a uniform query."""
    cand = np.asarray(unlabeled, dtype=np.int64)
    if len(cand) == 0:
        raise EmptyPoolError("no unlabeled candidates to score")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    vals = rng.uniform(0.0, 1.0, size=len(cand))
    return AcquisitionScores("Random", dict(zip(cand.tolist(), vals.tolist())))


def compute_scores(
    method: str,
    post: Posterior,
    noise: NoiseModel | None = None,
    rng=None,
) -> AcquisitionScores:
    """Dispatch one of the six methods by its config name."""
    method = method.lower()
    if method == "vopt":
        return vopt_scores(post, noise)
    if method == "sigmaopt":
        return sigmaopt_scores(post, noise)
    if method == "unc":
        return uncertainty_scores(post)
    if method == "mc":
        return mc_scores(post, noise)
    if method == "mbr":
        return mbr_scores(post, noise)
    if method == "random":
        if rng is None:
            raise InvalidParameterError("random acquisition needs an rng or seed")
        return random_scores(post.candidates(), rng)
    raise InvalidParameterError(f"unknown acquisition method: {method!r}")
