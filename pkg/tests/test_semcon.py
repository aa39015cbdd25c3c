"""Contrastive learning: pseudo-topics, pair formation, loss closed forms."""

import math

import numpy as np
import pytest

from ligram import autodiff as ad
from ligram.errors import NumericsError
from ligram.semcon import assign_pseudo_topics, contrastive_loss, form_pairs

from conftest import brute_force_contrastive


class TestPseudoTopics:
    def test_argmax(self):
        out = assign_pseudo_topics(np.array([[3.0, 1.0, 0.0]]))
        assert out.topics.tolist() == [0]

    def test_shift_invariance(self, rng):
        logits = rng.normal(size=(12, 5))
        base = assign_pseudo_topics(logits)
        shifted = assign_pseudo_topics(logits + 10.0)
        np.testing.assert_array_equal(base.topics, shifted.topics)

    def test_uniform_ties_to_lowest_index(self):
        out = assign_pseudo_topics(np.zeros((2, 4)))
        assert out.topics.tolist() == [0, 0]

    def test_distributions_on_simplex(self, rng):
        out = assign_pseudo_topics(rng.normal(size=(9, 6)) * 10)
        assert np.all(out.probabilities >= 0)
        np.testing.assert_allclose(out.probabilities.sum(axis=1), np.ones(9), atol=1e-9)

    def test_rejects_single_class(self):
        with pytest.raises(NumericsError):
            assign_pseudo_topics(np.zeros((3, 1)))


class TestFormPairs:
    def _assignment(self, topics):
        topics = np.asarray(topics)
        probs = np.eye(int(topics.max()) + 1)[topics]
        from ligram.semcon import TopicAssignment

        return TopicAssignment(probabilities=probs, topics=topics)

    def test_definition(self):
        pairs = form_pairs(self._assignment([0, 0, 1]))
        assert pairs.positives(1) == [0]
        assert pairs.candidates(1) == [0, 2]

    def test_all_same_topic(self):
        pairs = form_pairs(self._assignment([2, 2, 2, 2]))
        for i in range(4):
            assert len(pairs.positives(i)) == 3
            assert len(pairs.candidates(i)) == 3

    def test_all_distinct_topics(self):
        pairs = form_pairs(self._assignment([0, 1, 2]))
        assert all(pairs.positives(i) == [] for i in range(3))

    def test_scope_restriction(self):
        pairs = form_pairs(self._assignment([0, 0, 0, 1]), scope=[1, 3])
        assert pairs.scope.tolist() == [1, 3]
        assert pairs.positives(0) == []
        assert pairs.candidates(0) == [3]

    def test_self_excluded(self, rng):
        topics = rng.integers(0, 3, size=10)
        pairs = form_pairs(self._assignment(topics))
        for i in range(10):
            assert i not in pairs.candidates(i)
            assert set(pairs.positives(i)) <= set(pairs.candidates(i))


def loss_value(x, topics, temperature=1.0, scope=None):
    from ligram.semcon import TopicAssignment

    topics = np.asarray(topics)
    assignment = TopicAssignment(
        probabilities=np.eye(int(topics.max()) + 1)[topics], topics=topics
    )
    pairs = form_pairs(assignment, scope)
    tensor = ad.parameter(np.asarray(x, dtype=np.float64))
    return contrastive_loss(tensor, pairs, temperature), tensor


class TestContrastiveLoss:
    def test_identical_embeddings_closed_form(self):
        for n in (3, 5, 10):
            x = np.tile(np.array([1.0, 2.0, 2.0]), (n, 1))
            loss, _ = loss_value(x, [0] * n)
            assert loss.item() == pytest.approx(math.log(n - 1), abs=1e-9)

    def test_one_positive_one_negative_hand_value(self):
        # doc0's positive has cosine 1, its negative cosine -1
        x = np.array([[1.0, 0.0], [1.0, 0.0], [-1.0, 0.0]])
        topics = [0, 0, 1]
        loss, _ = loss_value(x, topics)
        l_0 = math.log(1 + math.exp(-2))
        l_1 = l_0
        l_2 = 0.0
        assert loss.item() == pytest.approx((l_0 + l_1 + l_2) / 3, abs=1e-10)

    def test_all_positive_sets_empty(self, rng):
        x = rng.normal(size=(4, 3))
        loss, _ = loss_value(x, [0, 1, 2, 3])
        assert loss.item() == 0.0

    def test_matches_double_loop_oracle(self, rng):
        for _ in range(5):
            x = rng.normal(size=(7, 5))
            topics = rng.integers(0, 3, size=7)
            loss, _ = loss_value(x, topics)
            expected = brute_force_contrastive(x, topics)
            assert loss.item() == pytest.approx(expected, abs=1e-10)

    def test_scope_matches_oracle(self, rng):
        x = rng.normal(size=(8, 4))
        topics = rng.integers(0, 2, size=8)
        scope = [0, 2, 3, 6, 7]
        loss, _ = loss_value(x, topics, scope=scope)
        expected = brute_force_contrastive(x, topics, scope=scope)
        assert loss.item() == pytest.approx(expected, abs=1e-10)

    def test_temperature_scales_similarities(self, rng):
        x = rng.normal(size=(6, 4))
        topics = rng.integers(0, 2, size=6)
        loss, _ = loss_value(x, topics, temperature=0.35)
        expected = brute_force_contrastive(x, topics, temperature=0.35)
        assert loss.item() == pytest.approx(expected, abs=1e-10)

    def test_invalid_temperature(self, rng):
        x = rng.normal(size=(3, 2))
        with pytest.raises(NumericsError, match="temperature"):
            loss_value(x, [0, 0, 1], temperature=0.0)

    def test_gradient_check(self, rng):
        x = ad.parameter(rng.normal(size=(5, 4)))
        topics = np.array([0, 0, 1, 1, 0])
        from ligram.semcon import TopicAssignment

        pairs = form_pairs(
            TopicAssignment(probabilities=np.eye(2)[topics], topics=topics)
        )

        def f():
            return contrastive_loss(x, pairs, temperature=0.8)

        report = ad.check_gradients(f, {"x": x}, step=1e-6)
        assert report.max_rel_error < 1e-4


class TestMonotonicity:
    """Direction probes on the per-document loss as a function of one
    similarity entry, via the internal similarity-level helper."""

    def _per_doc_losses(self, sims, pairs):
        from ligram.semcon import _loss_from_similarities

        tensor = ad.constant(np.asarray(sims, dtype=np.float64))
        _, per_doc = _loss_from_similarities(tensor, pairs)
        return per_doc

    def _pairs_for(self, topics):
        from ligram.semcon import TopicAssignment

        topics = np.asarray(topics)
        return form_pairs(
            TopicAssignment(probabilities=np.eye(int(topics.max()) + 1)[topics],
                            topics=topics)
        )

    def test_raising_negative_similarity_raises_loss(self, rng):
        for _ in range(100):
            n = int(rng.integers(3, 8))
            topics = rng.integers(0, 2, size=n)
            if len(set(topics.tolist())) < 2:
                topics[0] = 1 - topics[0]
            pairs = self._pairs_for(topics)
            sims = rng.uniform(-1, 1, size=(n, n))
            sims = (sims + sims.T) / 2
            i = int(rng.integers(0, n))
            negatives = [
                j for j in range(n) if j != i and topics[j] != topics[i]
            ]
            positives = [j for j in range(n) if j != i and topics[j] == topics[i]]
            if not negatives or not positives:
                continue
            j = negatives[int(rng.integers(0, len(negatives)))]
            base = self._per_doc_losses(sims, pairs)[i]
            bumped = sims.copy()
            bumped[i, j] += float(rng.uniform(0.01, 0.5))
            after = self._per_doc_losses(bumped, pairs)[i]
            assert after > base

    def test_raising_positive_similarity_lowers_loss(self, rng):
        # one positive per document (paired topics) keeps the positive's
        # softmax weight below 1/|P|, where the direction is guaranteed
        for _ in range(100):
            n_pairs = int(rng.integers(2, 5))
            topics = np.repeat(np.arange(n_pairs), 2)
            pairs = self._pairs_for(topics)
            n = topics.size
            sims = rng.uniform(-1, 1, size=(n, n))
            sims = (sims + sims.T) / 2
            i = int(rng.integers(0, n))
            partner = [j for j in range(n) if j != i and topics[j] == topics[i]][0]
            base = self._per_doc_losses(sims, pairs)[i]
            bumped = sims.copy()
            bumped[i, partner] += float(rng.uniform(0.01, 0.5))
            after = self._per_doc_losses(bumped, pairs)[i]
            assert after < base
