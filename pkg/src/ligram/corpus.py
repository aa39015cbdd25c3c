"""Corpus loading, validation, filtering, vocabulary indexing, and split assignment.

The on-disk corpus format is UTF-8 JSON lines. Each line is an object with
keys ``id`` (string), ``morphemes`` (array of strings), ``pos`` (array of
strings, same length), ``entities`` (array of strings), ``label`` (string or
null) and ``split`` (one of ``train``/``val``/``test``/``unlabeled``, or null
for "not yet assigned").
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import CorpusError

SPLITS = ("train", "val", "test", "unlabeled")

_REQUIRED_KEYS = ("id", "morphemes", "pos", "entities", "label", "split")


@dataclass(frozen=True)
class AnnotatedDocument:
    """One short text with aligned morpheme/POS sequences and entity mentions.

    ``entities`` keeps input order but drops duplicates; membership is what
    matters downstream. ``label`` must be present for train/val documents.
    """

    id: str
    morphemes: tuple[str, ...]
    pos_tags: tuple[str, ...]
    entities: tuple[str, ...] = ()
    label: str | None = None
    split: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "morphemes", tuple(self.morphemes))
        object.__setattr__(self, "pos_tags", tuple(self.pos_tags))
        object.__setattr__(self, "entities", tuple(dict.fromkeys(self.entities)))
        if len(self.morphemes) != len(self.pos_tags):
            raise CorpusError(
                f"document {self.id!r}: {len(self.morphemes)} morphemes but "
                f"{len(self.pos_tags)} pos tags"
            )
        if self.split is not None and self.split not in SPLITS:
            raise CorpusError(f"document {self.id!r}: unknown split tag {self.split!r}")
        if self.split in ("train", "val") and self.label is None:
            raise CorpusError(
                f"document {self.id!r}: split {self.split!r} requires a label"
            )


@dataclass
class Corpus:
    """An ordered document collection plus (optionally built) vocabularies.

    Vocabularies map tokens to dense indices ``0..|V|-1`` in first-occurrence
    order and are only valid for the exact document list they were built
    from; operations that change document content return a corpus with the
    vocabularies cleared.
    """

    documents: list[AnnotatedDocument]
    class_names: list[str] = field(default_factory=list)
    morpheme_vocab: dict[str, int] = field(default_factory=dict)
    pos_vocab: dict[str, int] = field(default_factory=dict)
    entity_vocab: dict[str, int] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.documents)

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def class_index(self, label: str) -> int:
        try:
            return self.class_names.index(label)
        except ValueError:
            raise CorpusError(f"unknown class label {label!r}") from None

    def label_indices(self) -> np.ndarray:
        """Per-document class index, -1 where the document is unlabeled."""
        lookup = {name: i for i, name in enumerate(self.class_names)}
        return np.array(
            [lookup[d.label] if d.label is not None else -1 for d in self.documents],
            dtype=np.int64,
        )

    def split_indices(self, split: str) -> np.ndarray:
        if split not in SPLITS:
            raise CorpusError(f"unknown split tag {split!r}")
        return np.array(
            [i for i, d in enumerate(self.documents) if d.split == split],
            dtype=np.int64,
        )

    def vocab_for(self, kind: str) -> dict[str, int]:
        if kind == "morpheme":
            return self.morpheme_vocab
        if kind == "pos":
            return self.pos_vocab
        if kind == "entity":
            return self.entity_vocab
        raise CorpusError(f"unknown vocabulary kind {kind!r}")


def _parse_line(line: str, lineno: int) -> AnnotatedDocument:
    try:
        record = json.loads(line)
    except json.JSONDecodeError as exc:
        raise CorpusError(f"line {lineno}: invalid JSON ({exc.msg})") from None
    if not isinstance(record, dict):
        raise CorpusError(f"line {lineno}: expected a JSON object")
    for key in _REQUIRED_KEYS:
        if key not in record:
            raise CorpusError(f"line {lineno}: missing key {key!r}")
    if not isinstance(record["id"], str):
        raise CorpusError(f"line {lineno}: 'id' must be a string")
    for key in ("morphemes", "pos", "entities"):
        value = record[key]
        if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
            raise CorpusError(f"line {lineno}: {key!r} must be an array of strings")
    for key in ("label", "split"):
        if record[key] is not None and not isinstance(record[key], str):
            raise CorpusError(f"line {lineno}: {key!r} must be a string or null")
    try:
        return AnnotatedDocument(
            id=record["id"],
            morphemes=tuple(record["morphemes"]),
            pos_tags=tuple(record["pos"]),
            entities=tuple(record["entities"]),
            label=record["label"],
            split=record["split"],
        )
    except CorpusError as exc:
        raise CorpusError(f"line {lineno}: {exc}") from None


def load_corpus(path: str | Path) -> Corpus:
    """Load a JSONL corpus file.

    Input order is preserved and vocabularies are left unbuilt (see
    :func:`build_vocabularies`). Raises :class:`CorpusError` naming the line
    for malformed records, duplicate ids, misaligned morpheme/POS sequences,
    or unknown split tags.
    """
    path = Path(path)
    if not path.is_file():
        raise CorpusError(f"corpus file not found: {path}")
    documents: list[AnnotatedDocument] = []
    seen_ids: dict[str, int] = {}
    with path.open("r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            doc = _parse_line(line, lineno)
            if doc.id in seen_ids:
                raise CorpusError(
                    f"line {lineno}: duplicate id {doc.id!r} "
                    f"(first seen on line {seen_ids[doc.id]})"
                )
            seen_ids[doc.id] = lineno
            documents.append(doc)
    return Corpus(documents=documents)


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    """Write a corpus back out as JSONL (deterministic byte-for-byte)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as handle:
        for doc in corpus.documents:
            record = {
                "id": doc.id,
                "morphemes": list(doc.morphemes),
                "pos": list(doc.pos_tags),
                "entities": list(doc.entities),
                "label": doc.label,
                "split": doc.split,
            }
            handle.write(json.dumps(record, ensure_ascii=False, separators=(",", ":")))
            handle.write("\n")


def deduplicate(corpus: Corpus) -> Corpus:
    """Collapse documents with identical morpheme sequences onto the first one.

    Survivor order is preserved. The morpheme sequence (not the raw id or
    entity set) is the duplicate key, since it is the unit every later stage
    consumes.
    """
    seen: set[tuple[str, ...]] = set()
    survivors = []
    for doc in corpus.documents:
        if doc.morphemes in seen:
            continue
        seen.add(doc.morphemes)
        survivors.append(doc)
    return Corpus(documents=survivors)


def filter_low_frequency(corpus: Corpus, min_freq: int = 5) -> Corpus:
    """Drop morphemes occurring fewer than ``min_freq`` times corpus-wide.

    Removal is positional: the POS tag aligned with a dropped morpheme is
    dropped too, so sequences stay aligned. Documents that end up empty are
    retained (with zero feature contribution) so document indices stay
    stable.
    """
    if min_freq < 1:
        raise CorpusError(f"min_freq must be >= 1, got {min_freq}")
    counts: Counter[str] = Counter()
    for doc in corpus.documents:
        counts.update(doc.morphemes)
    keep = {m for m, c in counts.items() if c >= min_freq}
    filtered = []
    for doc in corpus.documents:
        pairs = [
            (m, p) for m, p in zip(doc.morphemes, doc.pos_tags) if m in keep
        ]
        filtered.append(
            replace(
                doc,
                morphemes=tuple(m for m, _ in pairs),
                pos_tags=tuple(p for _, p in pairs),
            )
        )
    return Corpus(documents=filtered)


def build_vocabularies(corpus: Corpus) -> Corpus:
    """Assign dense first-occurrence indices to morphemes, POS tags, and entities.

    Class names are collected in first-occurrence order over labeled
    documents. Raises :class:`CorpusError` when no document carries a label.
    """
    morpheme_vocab: dict[str, int] = {}
    pos_vocab: dict[str, int] = {}
    entity_vocab: dict[str, int] = {}
    class_names: list[str] = []
    for doc in corpus.documents:
        for m in doc.morphemes:
            if m not in morpheme_vocab:
                morpheme_vocab[m] = len(morpheme_vocab)
        for p in doc.pos_tags:
            if p not in pos_vocab:
                pos_vocab[p] = len(pos_vocab)
        for e in doc.entities:
            if e not in entity_vocab:
                entity_vocab[e] = len(entity_vocab)
        if doc.label is not None and doc.label not in class_names:
            class_names.append(doc.label)
    if not class_names:
        raise CorpusError("corpus has zero labeled documents")
    return Corpus(
        documents=list(corpus.documents),
        class_names=class_names,
        morpheme_vocab=morpheme_vocab,
        pos_vocab=pos_vocab,
        entity_vocab=entity_vocab,
    )


def assign_splits(corpus: Corpus, per_class: int = 40, seed: int = 0) -> Corpus:
    """Sample ``per_class`` labeled documents per class into train/val splits.

    The first half of each class sample becomes ``train``, the second half
    ``val``; every remaining labeled document becomes ``test`` and unlabeled
    documents are tagged ``unlabeled``. Sampling is without replacement from
    a generator seeded with ``seed``, so the split is reproducible.
    """
    if per_class < 2:
        raise CorpusError(f"per_class must be >= 2, got {per_class}")
    by_class: dict[str, list[int]] = {}
    for i, doc in enumerate(corpus.documents):
        if doc.label is not None:
            by_class.setdefault(doc.label, []).append(i)
    if not by_class:
        raise CorpusError("corpus has zero labeled documents")
    class_order = corpus.class_names or list(by_class)
    rng = np.random.default_rng(seed)
    assignment: dict[int, str] = {}
    for name in class_order:
        candidates = by_class.get(name, [])
        if len(candidates) < per_class:
            raise CorpusError(
                f"class {name!r} has {len(candidates)} labeled documents, "
                f"needs {per_class}"
            )
        sample = rng.choice(len(candidates), size=per_class, replace=False)
        chosen = [candidates[int(k)] for k in sample]
        half = per_class // 2
        for idx in chosen[:half]:
            assignment[idx] = "train"
        for idx in chosen[half:]:
            assignment[idx] = "val"
    documents = []
    for i, doc in enumerate(corpus.documents):
        if doc.label is None:
            split = "unlabeled"
        else:
            split = assignment.get(i, "test")
        documents.append(replace(doc, split=split))
    return Corpus(
        documents=documents,
        class_names=list(corpus.class_names),
        morpheme_vocab=dict(corpus.morpheme_vocab),
        pos_vocab=dict(corpus.pos_vocab),
        entity_vocab=dict(corpus.entity_vocab),
    )
