"""Selection, partitioning, the source-free bootstrap, and the consistency
diagnostic, against loop-based oracles."""

import numpy as np
import pytest

import oracles
from activeadapt.classifier import Classifier
from activeadapt.gmm import GmmParams
from activeadapt.sampler import (
    SfdaConfig,
    consistency_rate,
    loss_quantile_split,
    partition_unlabeled,
    select_active_batch,
    sfda_bootstrap,
)
from activeadapt.scoring import Category, centroids_from_features, compute_centroids

from test_classifier import random_model

WELL_SEPARATED = GmmParams(
    pi=np.array([0.25, 0.25, 0.25, 0.25]),
    mu=np.array([0.0, 1.0, 3.0, 6.0]),
    sigma2=np.array([0.05, 0.05, 0.05, 0.05]),
)


def diag_model(C, scale=2.0, bias=None):
    """d_in = d_feat = C; confidence of x = a*e_c at class c grows with a."""
    return Classifier(
        W_hidden=np.eye(C) * 2.0,
        b_hidden=np.zeros(C),
        W_out=np.eye(C) * scale,
        b_out=np.zeros(C) if bias is None else np.asarray(bias, dtype=float),
    )


class TestSelectActiveBatch:
    def test_zero_budget(self):
        assert select_active_batch([1, 2], [0.5, 3.1], WELL_SEPARATED, 0) == []

    def test_budget_exceeding_pool_returns_all_sorted(self):
        ids = [10, 11, 12]
        scores = [0.0, 3.0, 6.0]  # component posteriors peak at 1st, 3rd, 4th
        got = select_active_batch(ids, scores, WELL_SEPARATED, 99)
        assert sorted(got) == ids
        assert got[0] == 11  # the score at the UI mean ranks first

    def test_tie_break_by_smaller_id(self):
        """Identical scores give identical posteriors; order falls back to
        ascending id."""
        ids = [4, 0, 2, 9, 7]
        scores = [3.0, 0.1, 1.0, 3.0, 0.4]
        got = select_active_batch(ids, scores, WELL_SEPARATED, 2)
        assert got == [4, 9]

    def test_matches_sort_oracle(self):
        rng = np.random.default_rng(0)
        ids = rng.permutation(50).tolist()
        scores = rng.uniform(-0.5, 7.0, 50)
        for b in (0, 1, 5, 50):
            got = select_active_batch(ids, scores, WELL_SEPARATED, b)
            post = [
                oracles.component_posterior(
                    s, WELL_SEPARATED.pi, WELL_SEPARATED.mu, WELL_SEPARATED.sigma2
                )[2]
                for s in scores
            ]
            assert got == oracles.select_top_b(ids, post, b)

    def test_selected_have_maximal_posterior(self):
        rng = np.random.default_rng(1)
        ids = np.arange(30)
        scores = rng.uniform(0, 6.5, 30)
        got = select_active_batch(ids, scores, WELL_SEPARATED, 10)
        from activeadapt.gmm import component_posteriors

        post = component_posteriors(scores, WELL_SEPARATED)[:, 2]
        lookup = dict(zip(ids.tolist(), post))
        worst_selected = min(lookup[i] for i in got)
        best_rest = max((lookup[i] for i in ids if i not in got), default=-1)
        assert worst_selected >= best_rest - 1e-15


class TestPartition:
    def test_dominant_component(self):
        model = diag_model(3)
        X = np.vstack([2.5 * np.eye(3), 0.05 * np.eye(3)])
        y_anchor = [0, 1, 2, 0, 1, 2]
        cs = compute_centroids(model, X, y_anchor)
        # scores near 0 fall in the first (CC) component of this mixture
        got = partition_unlabeled([0, 1, 2], 2.5 * np.eye(3), model, cs, WELL_SEPARATED, k=1)
        assert all(got.category[i] == Category.CC for i in range(3))

    def test_empty_pool(self):
        model = diag_model(3)
        cs = centroids_from_features(np.eye(3), [0, 1, 2], C=3)
        got = partition_unlabeled(
            np.zeros(0, dtype=int), np.zeros((0, 3)), model, cs, WELL_SEPARATED, k=1
        )
        assert got.category == {}
        assert got.sizes == {"CC": 0, "UC": 0, "UI": 0, "CI": 0}

    def test_matches_per_sample_oracle(self):
        """Twenty samples against a fully independent scoring + posterior
        argmax pipeline."""
        rng = np.random.default_rng(5)
        model = random_model(rng, d_in=4, d_feat=6, C=3)
        X_lab = rng.standard_normal((9, 4))
        y_lab = np.array([0, 1, 2] * 3)
        cs = compute_centroids(model, X_lab, y_lab)
        ids = rng.permutation(100)[:20]
        X = rng.standard_normal((20, 4))
        params = GmmParams(
            pi=np.array([0.4, 0.3, 0.2, 0.1]),
            mu=np.array([0.2, 0.8, 1.6, 3.0]),
            sigma2=np.array([0.05, 0.1, 0.3, 0.5]),
        )
        got = partition_unlabeled(ids, X, model, cs, params, k=2)

        oracle_centroids = [list(row) for row in cs.A]
        for i, x in zip(ids, X):
            score, _ = oracles.unlabeled_pipeline(model, oracle_centroids, x, k=2)
            post = oracles.component_posterior(score, params.pi, params.mu, params.sigma2)
            want = Category(1 + max(range(4), key=lambda k: (post[k], -k)))
            assert got.category[int(i)] == want

    def test_total_and_disjoint(self):
        rng = np.random.default_rng(6)
        model = random_model(rng, d_in=4, d_feat=6, C=3)
        cs = compute_centroids(model, rng.standard_normal((6, 4)), [0, 1, 2, 0, 1, 2])
        ids = np.arange(40)
        got = partition_unlabeled(ids, rng.standard_normal((40, 4)), model, cs, WELL_SEPARATED, 2)
        assert sorted(got.category) == ids.tolist()
        assert sum(got.sizes.values()) == 40


class TestSfdaBootstrap:
    def test_no_relaxation_when_confident(self):
        """Every class confidently predicted at >= 0.95 keeps t_v at 0.95."""
        model = diag_model(3, scale=8.0)
        X = np.vstack([3.0 * np.eye(3)] * 4)
        ids = np.arange(12)
        assert model.predict_proba(X).max(axis=1).min() >= 0.95
        res = sfda_bootstrap(model, ids, X, SfdaConfig(), b=2, k=1)
        assert res.t_v == 0.95
        assert len(res.pseudo_labeled) == 12

    def test_relaxation_until_coverage(self):
        """A class whose best confidence sits below 0.95 forces t_v down in
        0.1 steps until it joins the proxy set."""
        model = diag_model(3, scale=8.0)
        X = np.vstack([3.0 * np.eye(3), [[0.12, 0, 0]], [[0, 0.12, 0]]])
        # class 2 only has the one confident sample; drop it to mid confidence
        X[2] = [0, 0, 0.16]
        ids = np.arange(5)
        P = model.predict_proba(X)
        conf2 = P[2].max()
        assert conf2 < 0.95
        res = sfda_bootstrap(model, ids, X, SfdaConfig(), b=1, k=1)
        # expected t_v from the independent sweep
        t = 0.95
        while conf2 < t:
            t -= 0.1
        assert res.t_v == pytest.approx(t)
        assert 2 in [i for i, _ in res.pseudo_labeled]

    def test_never_covered_class_errors(self):
        model = diag_model(3, bias=[0.0, 0.0, -50.0])  # class 2 never argmax
        X = np.random.default_rng(0).standard_normal((10, 3))
        with pytest.raises(ValueError):
            sfda_bootstrap(model, np.arange(10), X, SfdaConfig(), b=1, k=1)

    def test_empty_pool_rejected(self):
        model = diag_model(3)
        with pytest.raises(ValueError):
            sfda_bootstrap(model, [], np.zeros((0, 3)), SfdaConfig(), b=1, k=1)

    def test_matches_threshold_sweep_oracle(self):
        """Full agreement with a brute-force reimplementation of both
        relaxation schedules on a random 20-sample pool."""
        rng = np.random.default_rng(42)
        model = random_model(rng, d_in=4, d_feat=6, C=3)
        X = 2.0 * rng.standard_normal((20, 4))
        ids = rng.permutation(200)[:20]
        k = 2
        res = sfda_bootstrap(model, ids, X, SfdaConfig(), b=4, k=k)

        P = model.predict_proba(X)
        maxp = P.max(axis=1).tolist()
        pred = P.argmax(axis=1).tolist()
        sweep_tv = 0.95
        while True:
            proxy = [i for i in range(20) if maxp[i] >= sweep_tv]
            if {pred[i] for i in proxy} == {0, 1, 2}:
                break
            sweep_tv -= 0.1
        oracle_centroids = oracles.class_centroids(
            [oracles.forward_probs(model, X[i])[0] for i in proxy],
            [pred[i] for i in proxy],
            C=3,
        )
        inconsistent = []
        for i in range(20):
            feat, _ = oracles.forward_probs(model, X[i])
            inconsistent.append(oracles.sim_label(feat, oracle_centroids, k) != pred[i])
        t_v, proxy_idx, t_c, active = oracles.sfda_sweep(
            maxp, pred, inconsistent, ids.tolist(), C=3, b=4
        )
        assert res.t_v == pytest.approx(t_v)
        assert res.t_c == pytest.approx(t_c)
        assert [i for i, _ in res.pseudo_labeled] == [int(ids[i]) for i in proxy_idx]
        assert res.active_ids == active


class TestConsistencyRate:
    def setup_method(self):
        self.model = diag_model(3)
        F = np.eye(3)
        self.cs = centroids_from_features(F, [0, 1, 2], C=3)

    def test_all_consistent(self):
        X = 2.0 * np.eye(3)
        assert consistency_rate(X, self.model, self.cs, k=1) == 1.0

    def test_counting(self):
        """3 of 4 samples predict their similarity-based label: the output
        head routes feature 2 to class 0, so feature-2-dominant samples are
        inconsistent."""
        model = diag_model(3)
        model.W_out = np.array([[2.0, 0, 0], [0, 2.0, 0], [2.0, 0, 0]])
        X = np.vstack([2.0 * np.eye(3), [[2.0, 0.0, 0.0]]])
        rate = consistency_rate(X, model, self.cs, k=1)
        pred = model.predict(X)
        assert pred.tolist() == [0, 1, 0, 0]
        assert rate == pytest.approx(0.75)

    def test_none_consistent(self):
        model = diag_model(3, bias=[0.0, 50.0, 0.0])
        X = np.vstack([2.0 * np.eye(3)[[0, 2]]])
        assert consistency_rate(X, model, self.cs, k=1) == 0.0

    def test_empty_subset_rejected(self):
        with pytest.raises(ValueError):
            consistency_rate(np.zeros((0, 3)), self.model, self.cs, k=1)


class TestLossQuantileSplit:
    def test_median_split(self):
        low, high = loss_quantile_split([1.0, 2.0, 3.0, 4.0], 0.5)
        assert low.tolist() == [True, True, False, False]
        assert high.tolist() == [False, False, True, True]

    def test_masks_partition(self):
        rng = np.random.default_rng(3)
        losses = rng.exponential(1.0, 101)
        for q in (0.25, 0.5, 0.75):
            low, high = loss_quantile_split(losses, q)
            assert (low ^ high).all()

    def test_bad_inputs(self):
        with pytest.raises(ValueError):
            loss_quantile_split([], 0.5)
        with pytest.raises(ValueError):
            loss_quantile_split([1.0], 1.5)
