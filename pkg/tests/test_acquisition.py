import dataclasses

import numpy as np
import pytest

from graphactive import (
    AcquisitionScores,
    EmptyPoolError,
    InvalidParameterError,
    LabeledSet,
    NoiseModel,
    Posterior,
    compute_scores,
    gr_posterior,
    hf_posterior,
    laplacian,
    mbr_scores,
    mc_scores,
    newton_mean_update,
    predict,
    probit_laplace,
    random_scores,
    regularized_precision,
    select_query,
    sigmaopt_scores,
    uncertainty_scores,
    vopt_scores,
)
from graphactive.instrument import counters
from graphactive.models import PROB_CLIP

from conftest import path_graph, random_labeled, random_prior

GAUSS = NoiseModel(1.0)


def forced_gr(mean, cov, labeled=None, noise=GAUSS):
    mean = np.asarray(mean, dtype=float)
    n = len(mean)
    return Posterior(
        kind="gr",
        mean=mean,
        covariance=np.asarray(cov, dtype=float),
        labeled=labeled or LabeledSet.empty(),
        n_total=n,
        index_map=np.arange(n),
        noise=noise,
    )


class TestSelectQuery:
    def test_tie_breaks_to_smallest_index(self):
        s = AcquisitionScores("VOpt", {3: 0.5, 7: 0.5})
        assert select_query(s) == 3

    def test_plain_argmax(self):
        s = AcquisitionScores("VOpt", {2: 1.0, 5: 0.9})
        assert select_query(s) == 2

    def test_single_candidate(self):
        assert select_query(AcquisitionScores("MC", {4: -2.0})) == 4

    def test_empty_pool_error(self):
        with pytest.raises(EmptyPoolError):
            select_query(AcquisitionScores("MC", {}))

    def test_argmax_invariant_under_positive_scaling(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            keys = rng.choice(100, size=12, replace=False)
            vals = rng.normal(size=12)
            s = AcquisitionScores("VOpt", dict(zip(keys.tolist(), vals.tolist())))
            for alpha in (0.25, 3.0, 1e4):
                scaled = AcquisitionScores(
                    "VOpt", {k: alpha * v for k, v in s.scores.items()}
                )
                assert select_query(scaled) == select_query(s)


class TestVOpt:
    def test_isotropic_covariance_ties(self):
        post = forced_gr([0.0, 0.0, 0.0], 2.0 * np.eye(3))
        s = vopt_scores(post, GAUSS)
        vals = list(s.scores.values())
        assert vals[0] == pytest.approx(4.0 / 3.0)
        assert all(v == pytest.approx(vals[0]) for v in vals)
        assert select_query(s) == 0

    def test_two_by_two_hand_value(self):
        # Oracle: direct arithmetic on [[2,1],[1,2]] with gamma = 1:
        # column norm^2 = 5, denominator = 1 + 2 = 3.
        post = forced_gr([0.0, 0.0], [[2.0, 1.0], [1.0, 2.0]])
        s = vopt_scores(post, GAUSS)
        assert s.scores[0] == pytest.approx(5.0 / 3.0)
        assert s.scores[1] == pytest.approx(5.0 / 3.0)

    def test_scores_strictly_positive(self):
        rng = np.random.default_rng(1)
        P = random_prior(rng, 20)
        lab = random_labeled(rng, 20, 5)
        post = gr_posterior(P, lab, GAUSS)
        s = vopt_scores(post)
        diag = np.diag(post.covariance)
        for k, v in s.scores.items():
            assert v > 0
            assert v >= diag[k] ** 2 / (1.0 + diag[k]) - 1e-15

    def test_hf_uses_zero_gamma(self):
        L = laplacian(path_graph(4), "unnormalized")
        post = hf_posterior(L, LabeledSet.of([(0, 1)]))
        s = vopt_scores(post)
        C = post.covariance
        for pos, k in enumerate(post.index_map):
            expected = (C[:, pos] @ C[:, pos]) / C[pos, pos]
            assert s.scores[int(k)] == pytest.approx(expected)


class TestSigmaOpt:
    def test_identity_covariance(self):
        post = forced_gr([0.0, 0.0], np.eye(2))
        s = sigmaopt_scores(post, GAUSS)
        assert s.scores[0] == pytest.approx(0.5)
        assert s.scores[1] == pytest.approx(0.5)

    def test_two_by_two_hand_value(self):
        post = forced_gr([0.0, 0.0], [[2.0, 1.0], [1.0, 2.0]])
        s = sigmaopt_scores(post, GAUSS)
        assert s.scores[0] == pytest.approx(1.0)
        assert s.scores[1] == pytest.approx(1.0)

    def test_nonnegative_for_nonnegative_covariance(self):
        rng = np.random.default_rng(2)
        M = rng.uniform(0.1, 1.0, size=(6, 6))
        C = M @ M.T  # entrywise positive and PSD
        post = forced_gr(np.zeros(6), C)
        assert all(v >= 0 for v in sigmaopt_scores(post, GAUSS).scores.values())


class TestUncertainty:
    def test_boundary_point_is_maximal(self):
        post = forced_gr([0.9, 0.0, -2.0], np.eye(3))
        s = uncertainty_scores(post)
        assert select_query(s) == 1

    def test_smallest_magnitude_wins(self):
        post = forced_gr([0.9, -0.1, 2.0], np.eye(3))
        assert select_query(uncertainty_scores(post)) == 1

    def test_hf_margin_around_half(self):
        L = laplacian(path_graph(5), "unnormalized")
        post = hf_posterior(L, LabeledSet.of([(0, -1), (4, 1)]))
        s = uncertainty_scores(post)
        # Means along the path are 1/4, 1/2, 3/4; the middle is closest to 1/2.
        assert select_query(s) == 2


class TestModelChange:
    def test_probit_boundary_symmetry(self):
        rng = np.random.default_rng(3)
        P = random_prior(rng, 6)
        lab = random_labeled(rng, 6, 2)
        post = probit_laplace(P, lab, GAUSS)
        k = int(post.candidates()[0])
        forced = dataclasses.replace(post, mean=np.zeros(6))
        s = mc_scores(forced, GAUSS)
        from graphactive import probit_curvature, probit_grad

        g = abs(float(probit_grad(0.0, 1, GAUSS)))
        c = float(probit_curvature(0.0, 1, GAUSS))
        C = post.covariance
        expected = g / (1.0 + C[k, k] * c) * np.linalg.norm(C[:, k])
        assert s.scores[k] == pytest.approx(expected, rel=1e-12)

    def test_gr_perfectly_fit_point_scores_zero(self):
        post = forced_gr([1.0, -1.0, 0.3], np.eye(3))
        s = mc_scores(post, GAUSS)
        assert s.scores[0] == pytest.approx(0.0, abs=1e-15)
        assert s.scores[1] == pytest.approx(0.0, abs=1e-15)
        assert s.scores[2] > 0

    def test_gr_score_continuous_in_mean(self):
        # The min over the two hypothesized labels switches at mean 0; the
        # piecewise formula must agree from both sides.
        cov = np.eye(1) * 0.7
        grid = np.linspace(-0.01, 0.01, 101)
        vals = []
        for m in grid:
            post = forced_gr([m], cov)
            vals.append(mc_scores(post, GAUSS).scores[0])
        vals = np.array(vals)
        jumps = np.abs(np.diff(vals))
        assert jumps.max() <= 2e-4

    def test_probit_matches_full_vector_oracle(self):
        # Oracle: explicitly form both one-step look-ahead means and take the
        # min replaced-norm, per candidate.
        L = laplacian(path_graph(3), "unnormalized")
        P = regularized_precision(L, 1.0)
        lab = LabeledSet.of([(0, 1)])
        noise = NoiseModel(0.8)
        post = probit_laplace(P, lab, noise)
        s = mc_scores(post, noise)
        for k in post.candidates():
            norms = []
            for y in (1, -1):
                m = newton_mean_update(post, int(k), y, noise)
                norms.append(np.linalg.norm(m - post.mean))
            assert s.scores[int(k)] == pytest.approx(min(norms), rel=1e-10)

    def test_hf_rejected(self):
        L = laplacian(path_graph(3), "unnormalized")
        post = hf_posterior(L, LabeledSet.of([(0, 1)]))
        with pytest.raises(InvalidParameterError):
            mc_scores(post)


class TestMbr:
    def test_hf_path3_hand_computed_risk(self):
        # Oracle: only the middle node is unlabeled; after pinning it to
        # either label every node's probability is clipped, so the expected
        # risk is 3 * clip for both hypotheses and the score is its negative.
        L = laplacian(path_graph(3), "unnormalized")
        post = hf_posterior(L, LabeledSet.of([(0, -1), (2, 1)]))
        s = mbr_scores(post)
        assert s.scores[1] == pytest.approx(-3.0 * PROB_CLIP, rel=1e-9)

    def test_saturated_probabilities_tie_to_lowest_index(self):
        # Means far from the boundary: every probability clips, risks tie.
        post = forced_gr([30.0, -30.0, 30.0], 0.01 * np.eye(3))
        s = mbr_scores(post, NoiseModel(0.1))
        assert select_query(s) == 0
        vals = np.array(list(s.scores.values()))
        assert np.abs(vals - vals[0]).max() <= 1e-12

    def test_expectation_weights_are_probabilities(self):
        rng = np.random.default_rng(4)
        P = random_prior(rng, 12)
        lab = random_labeled(rng, 12, 4)
        post = probit_laplace(P, lab, NoiseModel(0.5))
        _, probs = predict(post)
        q = probs[post.candidates()]
        assert np.all(q >= 0.0) and np.all(q <= 1.0)

    def test_mean_only_sweep_never_materializes_covariances(self):
        rng = np.random.default_rng(5)
        P = random_prior(rng, 25)
        lab = random_labeled(rng, 25, 6)
        for post in (
            probit_laplace(P, lab, NoiseModel(0.5)),
            gr_posterior(P, lab, NoiseModel(0.5)),
        ):
            chol_before = counters.cholesky_factorizations
            counters.lookahead_covariances = 0
            counters.risk_sweep_cells = 0
            mbr_scores(post)
            assert counters.lookahead_covariances == 0
            assert counters.cholesky_factorizations == chol_before
            n_cand = len(post.candidates())
            assert counters.risk_sweep_cells == 2 * 25 * n_cand

    def test_probit_risk_matches_direct_recomputation(self):
        # Oracle: per-candidate loop building the look-ahead mean via the
        # public update and summing min(p, 1-p) with pinned rows.
        rng = np.random.default_rng(6)
        P = random_prior(rng, 10)
        lab = random_labeled(rng, 10, 3)
        noise = NoiseModel(0.7)
        post = probit_laplace(P, lab, noise)
        s = mbr_scores(post, noise)
        _, probs = predict(post)
        from scipy.special import ndtr

        for k in post.candidates():
            k = int(k)
            q = probs[k]
            risks = {}
            for y in (1, -1):
                m = newton_mean_update(post, k, y, noise)
                p = ndtr(m / noise.gamma)
                r = np.minimum(p, 1.0 - p)
                r[lab.indices] = PROB_CLIP
                r[k] = PROB_CLIP
                risks[y] = r.sum()
            expected = -(q * risks[1] + (1.0 - q) * risks[-1])
            assert s.scores[k] == pytest.approx(expected, rel=1e-10)


class TestRandom:
    def test_fixed_seed_reproducible(self):
        cand = np.arange(10, 20)
        a = random_scores(cand, 42)
        b = random_scores(cand, 42)
        assert a.scores == b.scores

    def test_uniform_selection_concentration(self):
        # Oracle: binomial concentration, 10^4 draws over 10 candidates.
        rng = np.random.default_rng(123)
        counts = np.zeros(10, dtype=int)
        cand = np.arange(10)
        for _ in range(10_000):
            s = random_scores(cand, rng)
            counts[select_query(s)] += 1
        assert counts.sum() == 10_000
        assert np.all(np.abs(counts - 1000) <= 150)

    def test_empty_pool_error(self):
        with pytest.raises(EmptyPoolError):
            random_scores(np.array([], dtype=int), 0)


class TestDispatchAndPurity:
    def test_all_methods_share_posterior_without_mutation(self):
        rng = np.random.default_rng(7)
        P = random_prior(rng, 15)
        lab = random_labeled(rng, 15, 4)
        noise = NoiseModel(0.6)
        post = probit_laplace(P, lab, noise)
        mean_copy = post.mean.copy()
        cov_copy = post.covariance.copy()
        for method in ("mc", "vopt", "sigmaopt", "mbr", "unc", "random"):
            s = compute_scores(method, post, noise, rng=0)
            assert set(s.scores) == set(post.candidates().tolist())
            assert all(np.isfinite(v) for v in s.scores.values())
        np.testing.assert_array_equal(post.mean, mean_copy)
        np.testing.assert_array_equal(post.covariance, cov_copy)

    def test_unknown_method_rejected(self):
        rng = np.random.default_rng(8)
        P = random_prior(rng, 5)
        post = gr_posterior(P, random_labeled(rng, 5, 2), GAUSS)
        with pytest.raises(InvalidParameterError):
            compute_scores("entropy", post, GAUSS)
