"""Heterogeneous subgraph construction: PMI and cosine adjacencies, one-hot
and embedding features, TF-IDF / entity-membership attention vectors, and
symmetric adjacency normalization.

All PMI edges use the natural log and the positive-PMI convention: zero or
negative scores produce no edge, keeping every adjacency weight strictly
positive so that degree-based normalization stays well defined.
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .corpus import Corpus
from .embeddings import EmbeddingTable
from .errors import GraphError

log = logging.getLogger("ligram")

KINDS = ("morpheme", "pos", "entity")


@dataclass(frozen=True)
class SparseMatrix:
    """Immutable sparse matrix in canonical (row, col)-sorted triple form."""

    n_rows: int
    n_cols: int
    rows: np.ndarray
    cols: np.ndarray
    weights: np.ndarray

    @classmethod
    def from_triples(cls, n_rows, n_cols, rows, cols, weights) -> "SparseMatrix":
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        weights = np.asarray(weights, dtype=np.float64)
        if not (rows.shape == cols.shape == weights.shape) or rows.ndim != 1:
            raise GraphError("triple arrays must be 1-D and equally sized")
        if rows.size:
            if rows.min() < 0 or rows.max() >= n_rows or cols.min() < 0 or cols.max() >= n_cols:
                raise GraphError(f"entry index out of range for {n_rows}x{n_cols}")
            if not np.all(np.isfinite(weights)):
                raise GraphError("non-finite entry weight")
            order = np.lexsort((cols, rows))
            rows, cols, weights = rows[order], cols[order], weights[order]
            flat = rows * n_cols + cols
            if np.any(np.diff(flat) == 0):
                raise GraphError("duplicate (row, col) entry")
        return cls(n_rows=int(n_rows), n_cols=int(n_cols), rows=rows, cols=cols, weights=weights)

    @classmethod
    def empty(cls, n_rows: int, n_cols: int) -> "SparseMatrix":
        z = np.zeros(0)
        return cls.from_triples(n_rows, n_cols, z, z, z)

    @property
    def nnz(self) -> int:
        return int(self.rows.size)

    def entries(self):
        for r, c, w in zip(self.rows, self.cols, self.weights):
            yield int(r), int(c), float(w)

    def to_csr(self, dtype=np.float64) -> sp.csr_matrix:
        return sp.csr_matrix(
            (self.weights.astype(dtype), (self.rows, self.cols)),
            shape=(self.n_rows, self.n_cols),
        )

    def to_dense(self, dtype=np.float64) -> np.ndarray:
        out = np.zeros((self.n_rows, self.n_cols), dtype=dtype)
        out[self.rows, self.cols] = self.weights
        return out


@dataclass(frozen=True)
class Subgraph:
    """One heterogeneous subgraph: node features plus raw and normalized adjacency."""

    kind: str
    features: np.ndarray
    adjacency: SparseMatrix
    normalized: SparseMatrix

    @property
    def n_nodes(self) -> int:
        return self.adjacency.n_rows

    @property
    def feature_dim(self) -> int:
        return int(self.features.shape[1])


@dataclass(frozen=True)
class AttentionVectors:
    """Per-document sparse relevance vectors over one node vocabulary."""

    kind: str
    n_docs: int
    n_nodes: int
    doc_indices: np.ndarray
    node_indices: np.ndarray
    weights: np.ndarray

    @classmethod
    def from_triples(cls, kind, n_docs, n_nodes, docs, nodes, weights) -> "AttentionVectors":
        matrix = SparseMatrix.from_triples(n_docs, n_nodes, docs, nodes, weights)
        return cls(
            kind=kind,
            n_docs=matrix.n_rows,
            n_nodes=matrix.n_cols,
            doc_indices=matrix.rows,
            node_indices=matrix.cols,
            weights=matrix.weights,
        )

    def to_csr(self, dtype=np.float64) -> sp.csr_matrix:
        return sp.csr_matrix(
            (self.weights.astype(dtype), (self.doc_indices, self.node_indices)),
            shape=(self.n_docs, self.n_nodes),
        )

    def document_vector(self, doc_index: int) -> np.ndarray:
        out = np.zeros(self.n_nodes)
        mask = self.doc_indices == doc_index
        out[self.node_indices[mask]] = self.weights[mask]
        return out


def _symmetric_from_pairs(n: int, pair_weights: dict[tuple[int, int], float]) -> SparseMatrix:
    rows, cols, weights = [], [], []
    for (i, j), w in pair_weights.items():
        rows.extend((i, j))
        cols.extend((j, i))
        weights.extend((w, w))
    return SparseMatrix.from_triples(n, n, rows, cols, weights)


def _positive_pmi(
    n_nodes: int,
    singles: Counter,
    pairs: Counter,
    total_units: int,
) -> SparseMatrix:
    kept: dict[tuple[int, int], float] = {}
    for (i, j), c_ij in pairs.items():
        score = math.log(c_ij * total_units / (singles[i] * singles[j]))
        if score > 0.0:
            kept[(i, j)] = score
    return _symmetric_from_pairs(n_nodes, kept)


def _token_ids(doc_tokens, vocab, kind: str):
    try:
        return [vocab[t] for t in doc_tokens]
    except KeyError as exc:
        raise GraphError(
            f"{kind} token {exc.args[0]!r} not in vocabulary; run build_vocabularies "
            "after filtering"
        ) from None


def compute_windowed_pmi(corpus: Corpus, kind: str = "morpheme", window: int = 5) -> SparseMatrix:
    """Positive PMI over sliding co-occurrence windows.

    A width-``window`` window slides over each document's token sequence; a
    document shorter than the window contributes exactly one window. Token
    presence per window is binary. With W total windows, the edge weight for
    a pair is ln(p(i,j) / (p(i) p(j))), kept only when strictly positive.
    """
    if window < 1:
        raise GraphError(f"window must be >= 1, got {window}")
    if not corpus.documents:
        raise GraphError("cannot compute PMI over an empty corpus")
    vocab = corpus.vocab_for(kind)
    singles: Counter = Counter()
    pairs: Counter = Counter()
    total_windows = 0
    for doc in corpus.documents:
        tokens = doc.morphemes if kind == "morpheme" else doc.pos_tags
        ids = _token_ids(tokens, vocab, kind)
        n_windows = max(1, len(ids) - window + 1)
        total_windows += n_windows
        for start in range(n_windows):
            present = sorted(set(ids[start : start + window]))
            singles.update(present)
            pairs.update(combinations(present, 2))
    return _positive_pmi(len(vocab), singles, pairs, total_windows)


def compute_document_pmi(corpus: Corpus, kind: str = "pos") -> SparseMatrix:
    """Positive PMI with the whole document as the co-occurrence unit."""
    if not corpus.documents:
        raise GraphError("cannot compute PMI over an empty corpus")
    vocab = corpus.vocab_for(kind)
    singles: Counter = Counter()
    pairs: Counter = Counter()
    for doc in corpus.documents:
        tokens = doc.morphemes if kind == "morpheme" else doc.pos_tags
        present = sorted(set(_token_ids(tokens, vocab, kind)))
        singles.update(present)
        pairs.update(combinations(present, 2))
    return _positive_pmi(len(vocab), singles, pairs, len(corpus.documents))


def normalize_adjacency(a: SparseMatrix) -> SparseMatrix:
    """Symmetric degree normalization with unit self-loops added first.

    Returns D^{-1/2} (A + I) D^{-1/2} where D is the diagonal degree matrix
    of A + I. The input must be square and symmetric.
    """
    if a.n_rows != a.n_cols:
        raise GraphError(f"adjacency must be square, got {a.n_rows}x{a.n_cols}")
    n = a.n_rows
    degrees = np.ones(n, dtype=np.float64)
    np.add.at(degrees, a.rows, a.weights)
    if np.any(degrees <= 0):
        raise GraphError("adjacency has nonpositive augmented degree")
    inv_sqrt = 1.0 / np.sqrt(degrees)
    diagonal = a.rows == a.cols
    diag_extra = np.zeros(n, dtype=np.float64)
    diag_extra[a.rows[diagonal]] = a.weights[diagonal]
    off_rows = a.rows[~diagonal]
    off_cols = a.cols[~diagonal]
    off_weights = a.weights[~diagonal] * inv_sqrt[off_rows] * inv_sqrt[off_cols]
    diag_indices = np.arange(n, dtype=np.int64)
    diag_weights = (1.0 + diag_extra) * inv_sqrt * inv_sqrt
    return SparseMatrix.from_triples(
        n,
        n,
        np.concatenate([off_rows, diag_indices]),
        np.concatenate([off_cols, diag_indices]),
        np.concatenate([off_weights, diag_weights]),
    )


def build_morpheme_graph(
    corpus: Corpus,
    embeddings: EmbeddingTable,
    window: int = 5,
    missing: str = "error",
) -> Subgraph:
    """Morpheme subgraph: pretrained embedding features, windowed-PMI edges.

    ``missing`` controls what happens when a vocabulary morpheme has no
    embedding row: ``"error"`` raises, ``"zero-vector"`` substitutes a zero
    row and logs a warning.
    """
    if missing not in ("error", "zero-vector"):
        raise GraphError(f"unknown missing-embedding policy {missing!r}")
    vocab = corpus.morpheme_vocab
    if not vocab:
        raise GraphError("morpheme vocabulary is empty; run build_vocabularies")
    features = np.zeros((len(vocab), embeddings.dim), dtype=np.float32)
    absent = []
    for token, idx in vocab.items():
        if token in embeddings:
            features[idx] = embeddings.vector(token)
        elif missing == "error":
            raise GraphError(f"morpheme {token!r} has no embedding row")
        else:
            absent.append(token)
    if absent:
        log.warning(
            "%d morphemes missing from the embedding table, using zero vectors "
            "(first few: %s)",
            len(absent),
            ", ".join(absent[:5]),
        )
    adjacency = compute_windowed_pmi(corpus, "morpheme", window)
    return Subgraph(
        kind="morpheme",
        features=features,
        adjacency=adjacency,
        normalized=normalize_adjacency(adjacency),
    )


def build_pos_graph(corpus: Corpus) -> Subgraph:
    """POS subgraph: one-hot features, document-level PMI edges."""
    if not corpus.pos_vocab:
        raise GraphError("pos vocabulary is empty; run build_vocabularies")
    n = len(corpus.pos_vocab)
    adjacency = compute_document_pmi(corpus, "pos")
    return Subgraph(
        kind="pos",
        features=np.eye(n, dtype=np.float32),
        adjacency=adjacency,
        normalized=normalize_adjacency(adjacency),
    )


def build_entity_graph(
    corpus: Corpus,
    entity_embeddings: EmbeddingTable | None,
    min_sim: float = 0.5,
) -> Subgraph:
    """Entity subgraph: embedding features, thresholded all-pairs cosine edges.

    Every vocabulary entity must have an embedding row with nonzero norm.
    Edges keep the cosine value itself as weight when it is at least
    ``min_sim``; the diagonal is excluded. An empty entity vocabulary yields
    a degenerate zero-node graph that still flows through the model.
    """
    if not -1.0 <= min_sim <= 1.0:
        raise GraphError(f"min_sim must be in [-1, 1], got {min_sim}")
    vocab = corpus.entity_vocab
    n = len(vocab)
    dim = entity_embeddings.dim if entity_embeddings is not None else 1
    features = np.zeros((n, dim), dtype=np.float32)
    if n and entity_embeddings is None:
        raise GraphError("corpus has entities but no entity embedding table given")
    for token, idx in vocab.items():
        features[idx] = entity_embeddings.vector(token)
    norms = np.linalg.norm(features.astype(np.float64), axis=1)
    if n:
        dead = np.flatnonzero(norms == 0)
        if dead.size:
            by_index = {i: t for t, i in vocab.items()}
            raise GraphError(f"entity {by_index[int(dead[0])]!r} has a zero-norm vector")
    rows, cols, weights = [], [], []
    if n:
        unit = features.astype(np.float64) / norms[:, None]
        block = 512
        for start in range(0, n, block):
            sims = np.clip(unit[start : start + block] @ unit.T, -1.0, 1.0)
            for local_i in range(sims.shape[0]):
                i = start + local_i
                keep = np.flatnonzero((sims[local_i] >= min_sim) & (sims[local_i] != 0.0))
                for j in keep:
                    if i == j:
                        continue
                    rows.append(i)
                    cols.append(int(j))
                    weights.append(float(sims[local_i, j]))
    adjacency = SparseMatrix.from_triples(n, n, rows, cols, weights)
    return Subgraph(
        kind="entity",
        features=features,
        adjacency=adjacency,
        normalized=normalize_adjacency(adjacency),
    )


def compute_tfidf_attention(corpus: Corpus, kind: str) -> AttentionVectors:
    """TF-IDF attention: raw term count times ln(N / document frequency).

    Zero-weight entries (absent tokens, or tokens present in every document)
    are omitted from the sparse vectors.
    """
    if kind not in ("morpheme", "pos"):
        raise GraphError(f"tf-idf attention is defined for morpheme/pos, not {kind!r}")
    vocab = corpus.vocab_for(kind)
    n_docs = len(corpus.documents)
    doc_counts = []
    df: Counter = Counter()
    for doc in corpus.documents:
        tokens = doc.morphemes if kind == "morpheme" else doc.pos_tags
        counts = Counter(_token_ids(tokens, vocab, kind))
        doc_counts.append(counts)
        df.update(counts.keys())
    docs, nodes, weights = [], [], []
    for i, counts in enumerate(doc_counts):
        for token_id, tf in counts.items():
            weight = tf * math.log(n_docs / df[token_id])
            if weight != 0.0:
                docs.append(i)
                nodes.append(token_id)
                weights.append(weight)
    return AttentionVectors.from_triples(kind, n_docs, len(vocab), docs, nodes, weights)


def compute_entity_attention(corpus: Corpus) -> AttentionVectors:
    """Binary entity attention: 1 iff the entity appears in the document."""
    vocab = corpus.entity_vocab
    docs, nodes, weights = [], [], []
    for i, doc in enumerate(corpus.documents):
        for entity in doc.entities:
            docs.append(i)
            nodes.append(vocab[entity])
            weights.append(1.0)
    return AttentionVectors.from_triples(
        "entity", len(corpus.documents), len(vocab), docs, nodes, weights
    )


@dataclass
class GraphBundle:
    """The three subgraphs plus per-kind document attention vectors."""

    subgraphs: dict[str, Subgraph]
    attention: dict[str, AttentionVectors]
    n_docs: int


def build_graph_bundle(
    corpus: Corpus,
    morpheme_embeddings: EmbeddingTable | None,
    entity_embeddings: EmbeddingTable | None,
    window: int = 5,
    entity_min_sim: float = 0.5,
    missing: str = "error",
    kinds: tuple[str, ...] = KINDS,
) -> GraphBundle:
    """Construct the requested subgraphs and their attention vectors."""
    subgraphs: dict[str, Subgraph] = {}
    attention: dict[str, AttentionVectors] = {}
    if "morpheme" in kinds:
        if morpheme_embeddings is None:
            raise GraphError("morpheme graph requires a morpheme embedding table")
        subgraphs["morpheme"] = build_morpheme_graph(
            corpus, morpheme_embeddings, window, missing
        )
        attention["morpheme"] = compute_tfidf_attention(corpus, "morpheme")
    if "pos" in kinds:
        subgraphs["pos"] = build_pos_graph(corpus)
        attention["pos"] = compute_tfidf_attention(corpus, "pos")
    if "entity" in kinds:
        subgraphs["entity"] = build_entity_graph(corpus, entity_embeddings, entity_min_sim)
        attention["entity"] = compute_entity_attention(corpus)
    if not subgraphs:
        raise GraphError("no subgraph kinds requested")
    return GraphBundle(subgraphs=subgraphs, attention=attention, n_docs=len(corpus.documents))


@dataclass
class GraphStats:
    """Size report plus the rough operation-count estimate for one forward pass."""

    n_docs: int
    hidden: int
    n_nodes: dict[str, int]
    n_edges: dict[str, int]
    feature_dims: dict[str, int]
    estimated_ops: float

    def to_dict(self) -> dict:
        return {
            "n_docs": self.n_docs,
            "hidden": self.hidden,
            "n_nodes": dict(self.n_nodes),
            "n_edges": dict(self.n_edges),
            "feature_dims": dict(self.feature_dims),
            "estimated_ops": self.estimated_ops,
        }

    def format_table(self) -> str:
        lines = [f"{'subgraph':<10} {'nodes':>8} {'edges':>10} {'feat dim':>9}"]
        for kind in self.n_nodes:
            lines.append(
                f"{kind:<10} {self.n_nodes[kind]:>8} {self.n_edges[kind]:>10} "
                f"{self.feature_dims[kind]:>9}"
            )
        lines.append(f"documents: {self.n_docs}, hidden: {self.hidden}")
        lines.append(f"estimated ops per forward pass: {self.estimated_ops:.3e}")
        return "\n".join(lines)


def graph_stats(bundle: GraphBundle, hidden: int) -> GraphStats:
    """Purely informational size/cost report.

    The cost estimate is sum over subgraphs of E*(d_in + hidden), plus
    2 * (total nodes) * hidden^2 for the weight transforms, plus
    2 * n_docs^2 * hidden for document-graph construction and pairwise
    contrastive similarity.
    """
    n_nodes, n_edges, dims = {}, {}, {}
    ops = 0.0
    total_nodes = 0
    for kind in KINDS:
        if kind not in bundle.subgraphs:
            continue
        g = bundle.subgraphs[kind]
        n_nodes[kind] = g.n_nodes
        n_edges[kind] = g.adjacency.nnz
        dims[kind] = g.feature_dim
        ops += g.adjacency.nnz * (g.feature_dim + hidden)
        total_nodes += g.n_nodes
    ops += 2.0 * total_nodes * hidden * hidden
    ops += 2.0 * bundle.n_docs * bundle.n_docs * hidden
    return GraphStats(
        n_docs=bundle.n_docs,
        hidden=hidden,
        n_nodes=n_nodes,
        n_edges=n_edges,
        feature_dims=dims,
        estimated_ops=ops,
    )


# ---------------------------------------------------------------------------
# Graph-bundle artifact directory: one plain-text triple file per matrix.


def write_sparse(path: str | Path, matrix: SparseMatrix) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as handle:
        handle.write(f"{matrix.n_rows} {matrix.n_cols} {matrix.nnz}\n")
        for r, c, w in zip(matrix.rows, matrix.cols, matrix.weights):
            handle.write(f"{r} {c} {w:.17g}\n")


def read_sparse(path: str | Path) -> SparseMatrix:
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise GraphError(f"{path}: empty sparse matrix file")
    try:
        n_rows, n_cols, n_entries = (int(v) for v in lines[0].split())
    except ValueError:
        raise GraphError(f"{path}: malformed header {lines[0]!r}") from None
    if len(lines) - 1 != n_entries:
        raise GraphError(f"{path}: header declares {n_entries} entries, found {len(lines) - 1}")
    rows, cols, weights = [], [], []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split()
        if len(parts) != 3:
            raise GraphError(f"{path}: malformed entry on line {lineno}")
        rows.append(int(parts[0]))
        cols.append(int(parts[1]))
        weights.append(float(parts[2]))
    return SparseMatrix.from_triples(n_rows, n_cols, rows, cols, weights)


def save_bundle(bundle: GraphBundle, directory: str | Path) -> None:
    """Write adjacency, normalized adjacency, and attention triples per kind."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for kind, g in bundle.subgraphs.items():
        write_sparse(directory / f"{kind}.adj", g.adjacency)
        write_sparse(directory / f"{kind}.norm", g.normalized)
        att = bundle.attention[kind]
        write_sparse(
            directory / f"{kind}.attn",
            SparseMatrix.from_triples(
                att.n_docs, att.n_nodes, att.doc_indices, att.node_indices, att.weights
            ),
        )


def load_bundle_matrices(directory: str | Path) -> dict[str, dict[str, SparseMatrix]]:
    """Read a bundle directory back as plain matrices (no features)."""
    directory = Path(directory)
    out: dict[str, dict[str, SparseMatrix]] = {}
    for kind in KINDS:
        if not (directory / f"{kind}.adj").is_file():
            continue
        out[kind] = {
            "adjacency": read_sparse(directory / f"{kind}.adj"),
            "normalized": read_sparse(directory / f"{kind}.norm"),
            "attention": read_sparse(directory / f"{kind}.attn"),
        }
    return out
