"""Deterministic synthetic corpora and embedding tables for tests and demos.

Each class owns a morpheme block and an entity pool; ``overlap`` is the
probability that a token is drawn from a class-shared pool instead, so 0
gives linearly separable classes and 1 makes every class share one
vocabulary. Embeddings are unit vectors scattered around per-class center
directions. Identical (spec, seed) pairs produce byte-identical files.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import AnnotatedDocument, Corpus
from .embeddings import EmbeddingTable
from .errors import CorpusError

DEFAULT_POS_TAGS = ("NNG", "JKS", "VV", "EF", "MM", "JX", "EC", "NNP")


@dataclass
class SyntheticSpec:
    n_classes: int = 3
    docs_per_class: int = 20
    vocab_per_class: int = 30
    overlap: float = 0.0
    shared_vocab: int = 30
    doc_len_min: int = 5
    doc_len_max: int = 12
    entities_per_class: int = 5
    entities_per_doc: int = 2
    entity_density: float = 0.6
    embedding_dim: int = 32
    embedding_noise: float = 0.25
    pos_tags: tuple[str, ...] = DEFAULT_POS_TAGS

    def validate(self) -> None:
        if self.n_classes < 1 or self.docs_per_class < 1:
            raise CorpusError("synthetic spec needs at least one class and one document")
        if self.vocab_per_class < 1:
            raise CorpusError("vocab_per_class must be >= 1")
        if not 0.0 <= self.overlap <= 1.0:
            raise CorpusError(f"overlap must be in [0, 1], got {self.overlap}")
        if self.overlap > 0 and self.shared_vocab < 1:
            raise CorpusError("overlap > 0 requires a nonempty shared vocabulary")
        if not 1 <= self.doc_len_min <= self.doc_len_max:
            raise CorpusError("doc length range must satisfy 1 <= min <= max")
        if not 0.0 <= self.entity_density <= 1.0:
            raise CorpusError(f"entity_density must be in [0, 1], got {self.entity_density}")
        if self.embedding_dim < 1:
            raise CorpusError("embedding_dim must be >= 1")
        if not self.pos_tags:
            raise CorpusError("pos_tags must be nonempty")


def _unit(vec: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(vec)
    return vec / norm if norm > 0 else vec


def _scattered_unit(
    rng: np.random.Generator, center: np.ndarray, noise: float, dim: int
) -> np.ndarray:
    return _unit(center + rng.normal(0.0, noise / np.sqrt(dim), size=dim))


def generate_synthetic_corpus(
    spec: SyntheticSpec, seed: int
) -> tuple[Corpus, EmbeddingTable, EmbeddingTable]:
    """Create (corpus, morpheme table, entity table), all labeled, splits unset."""
    spec.validate()
    rng = np.random.default_rng(seed)
    class_vocab = [
        [f"m{c}_{k}" for k in range(spec.vocab_per_class)] for c in range(spec.n_classes)
    ]
    shared = [f"ms_{k}" for k in range(spec.shared_vocab)] if spec.overlap > 0 else []
    entity_pools = [
        [f"ent{c}_{k}" for k in range(spec.entities_per_class)]
        for c in range(spec.n_classes)
    ]
    tags = spec.pos_tags
    documents = []
    for c in range(spec.n_classes):
        for d in range(spec.docs_per_class):
            length = int(rng.integers(spec.doc_len_min, spec.doc_len_max + 1))
            tag_offset = int(rng.integers(0, len(tags)))
            morphemes = []
            for _ in range(length):
                if shared and rng.random() < spec.overlap:
                    morphemes.append(shared[int(rng.integers(0, len(shared)))])
                else:
                    morphemes.append(
                        class_vocab[c][int(rng.integers(0, spec.vocab_per_class))]
                    )
            pos_tags = tuple(tags[(tag_offset + t) % len(tags)] for t in range(length))
            entities = []
            for _ in range(spec.entities_per_doc):
                if entity_pools[c] and rng.random() < spec.entity_density:
                    entities.append(
                        entity_pools[c][int(rng.integers(0, len(entity_pools[c])))]
                    )
            documents.append(
                AnnotatedDocument(
                    id=f"c{c}_d{d}",
                    morphemes=tuple(morphemes),
                    pos_tags=pos_tags,
                    entities=tuple(entities),
                    label=f"class_{c}",
                    split=None,
                )
            )
    dim = spec.embedding_dim
    class_centers = [_unit(rng.normal(size=dim)) for _ in range(spec.n_classes)]
    shared_center = _unit(rng.normal(size=dim))
    morpheme_rows: dict[str, np.ndarray] = {}
    for c in range(spec.n_classes):
        for token in class_vocab[c]:
            morpheme_rows[token] = _scattered_unit(
                rng, class_centers[c], spec.embedding_noise, dim
            ).astype(np.float32)
    for token in shared:
        morpheme_rows[token] = _scattered_unit(
            rng, shared_center, spec.embedding_noise, dim
        ).astype(np.float32)
    entity_centers = [_unit(rng.normal(size=dim)) for _ in range(spec.n_classes)]
    entity_rows: dict[str, np.ndarray] = {}
    for c in range(spec.n_classes):
        for token in entity_pools[c]:
            entity_rows[token] = _scattered_unit(
                rng, entity_centers[c], spec.embedding_noise, dim
            ).astype(np.float32)
    corpus = Corpus(documents=documents)
    return (
        corpus,
        EmbeddingTable(dim=dim, rows=morpheme_rows),
        EmbeddingTable(dim=dim, rows=entity_rows),
    )
