"""Shared fixture builders and independent oracles used across test modules."""

from __future__ import annotations

import math

import numpy as np
import pytest

from ligram.corpus import AnnotatedDocument, Corpus, assign_splits, build_vocabularies
from ligram.graphs import build_graph_bundle
from ligram.synthetic import SyntheticSpec, generate_synthetic_corpus


def doc(i, morphemes, pos=None, entities=(), label=None, split=None) -> AnnotatedDocument:
    pos = tuple(pos) if pos is not None else tuple(f"T{k % 3}" for k in range(len(morphemes)))
    return AnnotatedDocument(
        id=f"d{i}",
        morphemes=tuple(morphemes),
        pos_tags=pos,
        entities=tuple(entities),
        label=label,
        split=split,
    )


def corpus_of(*documents) -> Corpus:
    return Corpus(documents=list(documents))


def built_corpus(*documents) -> Corpus:
    return build_vocabularies(corpus_of(*documents))


def synthetic_pipeline(spec: SyntheticSpec, seed: int, per_class: int | None = None):
    """Generate, index, and split a synthetic corpus along with its tables."""
    corpus, morph, ents = generate_synthetic_corpus(spec, seed)
    corpus = build_vocabularies(corpus)
    if per_class is not None:
        corpus = assign_splits(corpus, per_class=per_class, seed=seed)
    return corpus, morph, ents


def synthetic_bundle(
    spec: SyntheticSpec,
    seed: int,
    per_class: int | None = None,
    window: int = 5,
    min_sim: float = 0.5,
    kinds=("morpheme", "pos", "entity"),
):
    corpus, morph, ents = synthetic_pipeline(spec, seed, per_class)
    bundle = build_graph_bundle(
        corpus, morph, ents, window=window, entity_min_sim=min_sim, kinds=tuple(kinds)
    )
    return corpus, bundle


# ---------------------------------------------------------------------------
# Independent oracles (kept deliberately naive).


def brute_force_pmi(token_lists, vocab, unit="window", window=5) -> np.ndarray:
    """Dense positive-PMI matrix by direct window/document enumeration."""
    units = []
    for tokens in token_lists:
        if unit == "document":
            units.append(set(tokens))
        else:
            count = max(1, len(tokens) - window + 1)
            for start in range(count):
                units.append(set(tokens[start : start + window]))
    total = len(units)
    size = len(vocab)
    dense = np.zeros((size, size))
    items = list(vocab.items())
    for a, ia in items:
        for b, ib in items:
            if ia == ib:
                continue
            c_a = sum(1 for u in units if a in u)
            c_b = sum(1 for u in units if b in u)
            c_ab = sum(1 for u in units if a in u and b in u)
            if c_a and c_b and c_ab:
                score = math.log(c_ab * total / (c_a * c_b))
                if score > 0:
                    dense[ia, ib] = score
    return dense


def dense_normalize(adjacency: np.ndarray) -> np.ndarray:
    """Dense D^-1/2 (A + I) D^-1/2 with D the degree matrix of A + I."""
    augmented = adjacency + np.eye(adjacency.shape[0])
    inv_sqrt = np.diag(1.0 / np.sqrt(augmented.sum(axis=1)))
    return inv_sqrt @ augmented @ inv_sqrt


def brute_force_tfidf(token_lists, vocab) -> np.ndarray:
    """Dense TF-IDF matrix: raw counts times ln(N / df)."""
    n_docs = len(token_lists)
    dense = np.zeros((n_docs, len(vocab)))
    df = {t: sum(1 for toks in token_lists if t in toks) for t in vocab}
    for i, tokens in enumerate(token_lists):
        for t in set(tokens):
            dense[i, vocab[t]] = tokens.count(t) * math.log(n_docs / df[t])
    return dense


def brute_force_contrastive(x, topics, temperature=1.0, scope=None) -> float:
    """Double-loop evaluation of the contrastive objective."""
    x = np.asarray(x, dtype=np.float64)
    if scope is None:
        scope = list(range(x.shape[0]))
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    safe = np.where(norms > 0, norms, 1.0)
    unit = np.where(norms > 0, x / safe, 0.0)
    total = 0.0
    for pos_i, i in enumerate(scope):
        candidates = [j for k, j in enumerate(scope) if k != pos_i]
        positives = [j for j in candidates if topics[j] == topics[i]]
        if not positives or not candidates:
            continue
        loss_i = 0.0
        for p in positives:
            numer = math.exp(float(unit[i] @ unit[p]) / temperature)
            denom = sum(
                math.exp(float(unit[i] @ unit[a]) / temperature) for a in candidates
            )
            loss_i += -math.log(numer / denom)
        total += loss_i / len(positives)
    return total / len(scope)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
