"""Acceptance suite: one test per release criterion, each printing a
PASS line with its measured figure (run with -v or -s for the report).

All fixtures are synthetic and desk-scale; every tolerance is pinned here.
"""

import dataclasses
import math
import time

import numpy as np
import pytest

from ligram import autodiff as ad
from ligram.config import RunConfig
from ligram.corpus import (
    Corpus,
    assign_splits,
    build_vocabularies,
    deduplicate,
    filter_low_frequency,
)
from ligram.graphs import (
    SparseMatrix,
    build_graph_bundle,
    compute_document_pmi,
    compute_windowed_pmi,
    normalize_adjacency,
)
from ligram.model import full_forward, init_parameters, predict, prepare_graphs
from ligram.semcon import TopicAssignment, contrastive_loss, form_pairs, \
    _loss_from_similarities
from ligram.synthetic import SyntheticSpec, generate_synthetic_corpus
from ligram.training import (
    OptimizerState,
    adamw_step,
    cross_entropy_loss,
    evaluate,
    gradient_check_report,
    train,
)

from conftest import (
    brute_force_contrastive,
    brute_force_pmi,
    built_corpus,
    dense_normalize,
    doc,
)


def report(criterion: str, detail: str) -> None:
    print(f"{criterion}: PASS ({detail})")


def random_token_corpus(rng, max_docs=30, max_len=15, vocab=10):
    tokens = [f"w{k}" for k in range(vocab)]
    n_docs = int(rng.integers(1, max_docs + 1))
    docs = []
    for i in range(n_docs):
        length = int(rng.integers(0, max_len + 1))
        picks = [tokens[int(rng.integers(0, vocab))] for _ in range(length)]
        docs.append(doc(i, picks, label="x"))
    return built_corpus(*docs)


def test_p1_pmi_oracle_equivalence():
    rng = np.random.default_rng(101)
    started = time.perf_counter()
    worst = 0.0
    for _ in range(25):
        corpus = random_token_corpus(rng)
        sequences = [list(d.morphemes) for d in corpus.documents]
        window = int(rng.integers(1, 8))
        windowed = compute_windowed_pmi(corpus, "morpheme", window).to_dense()
        expected_w = brute_force_pmi(sequences, corpus.morpheme_vocab, "window", window)
        np.testing.assert_allclose(windowed, expected_w, atol=1e-12)
        worst = max(worst, float(np.abs(windowed - expected_w).max()))
        documentwise = compute_document_pmi(corpus, "morpheme").to_dense()
        expected_d = brute_force_pmi(sequences, corpus.morpheme_vocab, "document")
        np.testing.assert_allclose(documentwise, expected_d, atol=1e-12)
        worst = max(worst, float(np.abs(documentwise - expected_d).max()))
    elapsed = time.perf_counter() - started
    assert elapsed < 10.0
    report("P1", f"25 corpora, max abs dev {worst:.2e}, {elapsed:.2f}s")


def test_p2_normalization_oracle():
    rng = np.random.default_rng(202)
    worst = 0.0
    for _ in range(50):
        n = int(rng.integers(1, 21))
        dense = rng.random((n, n)) * (rng.random((n, n)) < 0.4)
        dense = np.triu(dense, 1)
        dense = dense + dense.T
        rows, cols = np.nonzero(dense)
        sparse = SparseMatrix.from_triples(n, n, rows, cols, dense[rows, cols])
        result = normalize_adjacency(sparse).to_dense()
        deviation = float(np.abs(result - dense_normalize(dense)).max())
        worst = max(worst, deviation)
        assert deviation <= 1e-12
    report("P2", f"50 matrices <= 20x20, max abs dev {worst:.2e}")


def gradcheck_fixture():
    spec = SyntheticSpec(
        n_classes=3,
        docs_per_class=3,
        vocab_per_class=6,
        overlap=0.25,
        shared_vocab=4,
        doc_len_min=3,
        doc_len_max=6,
        entities_per_class=3,
        embedding_dim=5,
    )
    corpus, morph, ents = generate_synthetic_corpus(spec, seed=303)
    corpus = Corpus(documents=corpus.documents[:8])  # 3/3/2 class split
    corpus = build_vocabularies(corpus)
    config = RunConfig(
        hidden=6,
        dropout=0.0,
        contrastive_weight=0.7,
        min_freq=1,
        seed=303,
    )
    bundle = build_graph_bundle(
        corpus, morph, ents, window=config.window,
        entity_min_sim=config.entity_min_sim, kinds=config.enabled_kinds,
    )
    return corpus, bundle, config


def test_p3_full_gradient_check():
    started = time.perf_counter()
    corpus, bundle, config = gradcheck_fixture()
    assert len(corpus) == 8 and corpus.n_classes == 3
    result = gradient_check_report(corpus, bundle, config, step=1e-5)
    elapsed = time.perf_counter() - started
    assert result.max_rel_error < 1e-4
    assert elapsed < 60.0
    report(
        "P3",
        f"{result.n_checked} entries, max rel err {result.max_rel_error:.2e}, "
        f"{elapsed:.1f}s",
    )


def test_p4_pooling_and_document_graph_invariants():
    checked_rows = 0
    edge_count = 0
    for seed, delta in ((41, 2.7), (42, 0.5), (43, 1.5)):
        spec = SyntheticSpec(
            n_classes=3, docs_per_class=8, vocab_per_class=10, overlap=0.3,
            shared_vocab=8, embedding_dim=12, entity_density=0.7,
        )
        corpus, morph, ents = generate_synthetic_corpus(spec, seed)
        # duplicated documents guarantee dot products at the upper bound
        clones = [
            dataclasses.replace(corpus.documents[k], id=f"clone{k}") for k in (0, 5)
        ]
        corpus = build_vocabularies(
            Corpus(documents=list(corpus.documents) + clones)
        )
        bundle = build_graph_bundle(corpus, morph, ents, window=5, entity_min_sim=0.5)
        prepared = prepare_graphs(bundle, ("morpheme", "pos", "entity"), np.float32)
        hyper = RunConfig(hidden=12, dropout=0.0, doc_threshold=delta, min_freq=1,
                          seed=seed).hyper()
        rng = np.random.default_rng(seed)
        params = init_parameters(prepared, hyper.hidden, corpus.n_classes, rng,
                                 np.float32)
        fwd = full_forward(prepared, params, hyper, train=False)
        h = hyper.hidden
        values = fwd.doc_embeddings.values
        block_norms = np.stack(
            [np.linalg.norm(values[:, b * h : (b + 1) * h], axis=1) for b in range(3)],
            axis=1,
        )
        for row in block_norms:
            for norm in row:
                assert norm == 0.0 or abs(norm - 1.0) <= 1e-6
        full_rows = np.all(block_norms > 0, axis=1)
        row_norms = np.linalg.norm(values[full_rows], axis=1)
        np.testing.assert_allclose(row_norms, math.sqrt(3), atol=1e-6)
        checked_rows += int(values.shape[0])
        graph = fwd.doc_graph
        assert graph.nnz > 0
        assert np.all(graph.weights >= delta)
        assert np.all(graph.weights <= 3.0 + 1e-5)  # float32 rounding headroom
        dense = graph.to_dense()
        np.testing.assert_array_equal(dense, dense.T)
        edge_count += graph.nnz
    report("P4", f"{checked_rows} documents across 3 fixtures, {edge_count} edges checked")


def test_p5_contrastive_closed_forms_and_monotonicity():
    # closed form: identical embeddings sharing one pseudo-topic
    for n in (3, 5, 10):
        x = ad.parameter(np.tile(np.array([0.5, -1.0, 2.0]), (n, 1)))
        pairs = form_pairs(
            TopicAssignment(probabilities=np.ones((n, 2)) / 2, topics=np.zeros(n, int))
        )
        loss = contrastive_loss(x, pairs, temperature=1.0)
        assert loss.item() == pytest.approx(math.log(n - 1), abs=1e-9)
    # 7-document random fixture against the double-loop oracle
    rng = np.random.default_rng(505)
    for _ in range(5):
        x = rng.normal(size=(7, 6))
        topics = rng.integers(0, 3, size=7)
        pairs = form_pairs(
            TopicAssignment(probabilities=np.eye(3)[topics], topics=topics)
        )
        ours = contrastive_loss(ad.parameter(x), pairs, temperature=1.0).item()
        assert ours == pytest.approx(brute_force_contrastive(x, topics), abs=1e-10)
    # monotonicity probes: 100 each direction
    negative_probes = 0
    while negative_probes < 100:
        n = int(rng.integers(4, 9))
        topics = rng.integers(0, 2, size=n)
        if len(set(topics.tolist())) < 2:
            continue
        sims = rng.uniform(-1, 1, size=(n, n))
        sims = (sims + sims.T) / 2
        pairs = form_pairs(TopicAssignment(np.eye(2)[topics], topics))
        i = int(rng.integers(0, n))
        negatives = [j for j in range(n) if j != i and topics[j] != topics[i]]
        positives = [j for j in range(n) if j != i and topics[j] == topics[i]]
        if not negatives or not positives:
            continue
        j = negatives[int(rng.integers(0, len(negatives)))]
        base = _loss_from_similarities(ad.constant(sims), pairs)[1][i]
        bumped = sims.copy()
        bumped[i, j] += float(rng.uniform(0.01, 0.5))
        assert _loss_from_similarities(ad.constant(bumped), pairs)[1][i] > base
        negative_probes += 1
    positive_probes = 0
    while positive_probes < 100:
        n_pairs = int(rng.integers(2, 5))
        topics = np.repeat(np.arange(n_pairs), 2)
        n = topics.size
        sims = rng.uniform(-1, 1, size=(n, n))
        sims = (sims + sims.T) / 2
        pairs = form_pairs(TopicAssignment(np.eye(n_pairs)[topics], topics))
        i = int(rng.integers(0, n))
        partner = [j for j in range(n) if j != i and topics[j] == topics[i]][0]
        base = _loss_from_similarities(ad.constant(sims), pairs)[1][i]
        bumped = sims.copy()
        bumped[i, partner] += float(rng.uniform(0.01, 0.5))
        assert _loss_from_similarities(ad.constant(bumped), pairs)[1][i] < base
        positive_probes += 1
    report("P5", "closed forms at 1e-9/1e-10, 200 monotonicity probes")


def p67_pipeline(spec, generation_seed, per_class, min_freq=5):
    corpus, morph, ents = generate_synthetic_corpus(spec, generation_seed)
    corpus = deduplicate(corpus)
    corpus = filter_low_frequency(corpus, min_freq)
    corpus = build_vocabularies(corpus)
    corpus = assign_splits(corpus, per_class=per_class, seed=generation_seed)
    return corpus, morph, ents


def test_p6_loss_values_and_zero_weight_trace():
    for c in (2, 7, 8):
        logits = ad.constant(np.zeros((1, c)))
        value = cross_entropy_loss(logits, np.array([0]), np.array([0])).item()
        assert value == pytest.approx(math.log(c), abs=1e-9)
    spec = SyntheticSpec(n_classes=3, docs_per_class=10, vocab_per_class=10,
                         overlap=0.3, shared_vocab=8, embedding_dim=12)
    corpus, morph, ents = p67_pipeline(spec, 606, per_class=4, min_freq=1)
    bundle = build_graph_bundle(corpus, morph, ents)
    base = dict(hidden=12, max_epochs=25, eval_every=5, min_freq=1, seed=606)
    run_zero = train(corpus, bundle, RunConfig(**base, contrastive_weight=0.0))
    run_off = train(corpus, bundle, RunConfig(**base, use_semcon=False))
    zero_trace = [(h.loss, h.loss_ce, h.loss_con) for h in run_zero.history]
    off_trace = [(h.loss, h.loss_ce, h.loss_con) for h in run_off.history]
    assert zero_trace == off_trace  # bit-for-bit
    report("P6", "ln C at 1e-9 for C in {2,7,8}; 25-epoch traces bit-identical")


def test_p7_end_to_end_learning():
    started = time.perf_counter()
    spec = SyntheticSpec(n_classes=3, docs_per_class=40, vocab_per_class=30,
                         overlap=0.0, embedding_dim=32)
    corpus, morph, ents = p67_pipeline(spec, 17, per_class=20, min_freq=5)
    bundle = build_graph_bundle(corpus, morph, ents)
    config = RunConfig(max_epochs=200, seed=17, min_freq=5)
    runs = [train(corpus, bundle, config) for _ in range(2)]
    elapsed = time.perf_counter() - started
    histories = [[(h.loss, h.loss_ce, h.loss_con) for h in r.history] for r in runs]
    assert histories[0] == histories[1]
    test_report = evaluate(runs[0].params, bundle, corpus, "test", config.hyper(),
                           epoch=runs[0].best_epoch)
    assert test_report.accuracy >= 0.95
    assert test_report.macro_f1 >= 0.95
    assert elapsed < 120.0
    report(
        "P7",
        f"test acc {test_report.accuracy:.4f}, macro-F1 {test_report.macro_f1:.4f}, "
        f"two identical runs in {elapsed:.1f}s",
    )


def test_p8_semcon_ablation_direction():
    spec = SyntheticSpec(
        n_classes=3,
        docs_per_class=30,
        vocab_per_class=12,
        overlap=0.5,
        shared_vocab=12,
        embedding_dim=16,
        entities_per_class=4,
        entities_per_doc=2,
        entity_density=0.9,
        embedding_noise=0.9,
    )
    full_scores, ablated_scores = [], []
    for seed in (1, 2, 3, 4, 5):
        corpus, morph, ents = p67_pipeline(spec, 800 + seed, per_class=6, min_freq=2)
        bundle = build_graph_bundle(corpus, morph, ents)
        base = dict(hidden=32, max_epochs=80, eval_every=5, min_freq=2, seed=seed)
        for scores, semcon in ((full_scores, True), (ablated_scores, False)):
            config = RunConfig(**base, use_semcon=semcon)
            run = train(corpus, bundle, config)
            result = evaluate(run.params, bundle, corpus, "test", config.hyper())
            scores.append(result.macro_f1)
    full_mean = float(np.mean(full_scores))
    ablated_mean = float(np.mean(ablated_scores))
    assert full_mean >= ablated_mean - 0.02
    report("P8", f"full {full_mean:.4f} vs w/o SemCon {ablated_mean:.4f} over 5 seeds")


def test_p9_permutation_equivariance():
    spec = SyntheticSpec(n_classes=3, docs_per_class=14, vocab_per_class=12,
                         overlap=0.2, shared_vocab=8, embedding_dim=12)
    corpus, morph, ents = p67_pipeline(spec, 909, per_class=6, min_freq=1)
    bundle = build_graph_bundle(corpus, morph, ents)
    config = RunConfig(hidden=16, max_epochs=40, min_freq=1, seed=909)
    run = train(corpus, bundle, config)
    prepared = prepare_graphs(bundle, run.params.kinds, np.float32)
    base_fwd = full_forward(prepared, run.params, config.hyper(), train=False)
    base_pred, _ = predict(base_fwd.logits)
    base_metrics = evaluate(run.params, bundle, corpus, "test", config.hyper())

    perm = np.random.default_rng(99).permutation(len(corpus))
    shuffled = Corpus(
        documents=[corpus.documents[p] for p in perm],
        class_names=corpus.class_names,
        morpheme_vocab=corpus.morpheme_vocab,
        pos_vocab=corpus.pos_vocab,
        entity_vocab=corpus.entity_vocab,
    )
    shuffled_bundle = build_graph_bundle(shuffled, morph, ents)
    shuffled_prepared = prepare_graphs(shuffled_bundle, run.params.kinds, np.float32)
    shuffled_fwd = full_forward(shuffled_prepared, run.params, config.hyper(), train=False)
    # document embeddings and the document graph permute exactly
    np.testing.assert_array_equal(
        shuffled_fwd.doc_embeddings.values, base_fwd.doc_embeddings.values[perm]
    )
    np.testing.assert_array_equal(
        shuffled_fwd.doc_graph.to_dense(),
        base_fwd.doc_graph.to_dense()[np.ix_(perm, perm)],
    )
    shuffled_pred, _ = predict(shuffled_fwd.logits)
    np.testing.assert_array_equal(shuffled_pred, base_pred[perm])
    shuffled_metrics = evaluate(run.params, shuffled_bundle, shuffled, "test",
                                config.hyper())
    assert shuffled_metrics.accuracy == base_metrics.accuracy
    assert shuffled_metrics.macro_f1 == base_metrics.macro_f1
    np.testing.assert_array_equal(shuffled_metrics.confusion, base_metrics.confusion)
    report("P9", f"{len(corpus)} documents shuffled, predictions and metrics exact")


def test_p10_adamw_trajectory():
    from ligram.model import ModelParameters

    tensor = ad.parameter(np.array([[1.0]]))
    params = ModelParameters(kinds=(), hidden=1, n_classes=1,
                             weights={"doc.w1": tensor, "doc.w2": ad.parameter(np.zeros((1, 1)))})
    state = OptimizerState.for_params(params)
    lr, wd = 5e-4, 1e-3
    grads = [1.0, -0.4, 0.9]
    observed = []
    for g in grads:
        tensor.grad = np.array([[g]])
        adamw_step(params, state, lr=lr, weight_decay=wd)
        observed.append(float(tensor.values[0, 0]))
    value, m, v = 1.0, 0.0, 0.0
    b1, b2, eps = 0.9, 0.999, 1e-8
    expected = []
    for t, g in enumerate(grads, start=1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        value = value - lr * (m / (1 - b1**t)) / (math.sqrt(v / (1 - b2**t)) + eps) \
            - lr * wd * value
        expected.append(value)
    np.testing.assert_allclose(observed, expected, atol=1e-10)
    assert observed[0] == pytest.approx(0.99949950, abs=1e-8)
    report("P10", f"3-step trajectory at 1e-10, first step {observed[0]:.8f}")
