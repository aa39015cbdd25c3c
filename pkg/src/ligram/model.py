"""Forward pass: per-subgraph GCN encoding, TF-IDF/entity pooling,
document-graph construction, and the document-level classifier GCN.

Layer form for every encoder (no biases, no activation after the second
layer):

    H = A_norm . ReLU(A_norm . drop(X) . W1) . W2

The document graph is rebuilt from the current document embeddings on every
forward pass and treated as a constant during backward: the edge threshold
is non-differentiable, so no gradient flows through the adjacency.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import autodiff as ad
from .autodiff import Tensor
from .config import Hyperparams
from .errors import NumericsError
from .graphs import KINDS, GraphBundle, SparseMatrix, normalize_adjacency


@dataclass(frozen=True)
class PreparedKind:
    """One subgraph cast into compute form: dense features plus CSR constants."""

    features: np.ndarray
    norm_csr: sp.csr_matrix
    attention_csr: sp.csr_matrix
    input_dim: int


@dataclass(frozen=True)
class PreparedGraphs:
    kinds: tuple[str, ...]
    per_kind: dict[str, PreparedKind]
    n_docs: int
    dtype: np.dtype


def prepare_graphs(bundle: GraphBundle, kinds, dtype=np.float32) -> PreparedGraphs:
    """Select the enabled subgraphs and cast features to the compute dtype.

    Sparse constants stay float64 so sparse products accumulate at 64-bit
    regardless of the storage dtype.
    """
    kinds = tuple(k for k in KINDS if k in kinds)
    if not kinds:
        raise NumericsError("at least one subgraph kind must be enabled")
    per_kind = {}
    for kind in kinds:
        g = bundle.subgraphs[kind]
        per_kind[kind] = PreparedKind(
            features=np.asarray(g.features, dtype=dtype),
            norm_csr=g.normalized.to_csr(np.float64),
            attention_csr=bundle.attention[kind].to_csr(np.float64),
            input_dim=g.feature_dim,
        )
    return PreparedGraphs(
        kinds=kinds, per_kind=per_kind, n_docs=bundle.n_docs, dtype=np.dtype(dtype)
    )


@dataclass
class ModelParameters:
    """All learnable weight matrices, keyed by a stable name.

    Subgraph encoders use ``<kind>.w1`` / ``<kind>.w2``; the document-level
    classifier uses ``doc.w1`` / ``doc.w2``. The parameter order (and hence
    the seeded initialization order) is the kind order followed by the
    document weights.
    """

    kinds: tuple[str, ...]
    hidden: int
    n_classes: int
    weights: dict[str, Tensor]

    def named(self) -> list[tuple[str, Tensor]]:
        names = []
        for kind in self.kinds:
            names.extend((f"{kind}.w1", f"{kind}.w2"))
        names.extend(("doc.w1", "doc.w2"))
        return [(n, self.weights[n]) for n in names]

    def tensors(self) -> list[Tensor]:
        return [t for _, t in self.named()]

    def zero_grads(self) -> None:
        ad.zero_grads(self.tensors())

    def copy(self) -> "ModelParameters":
        out = {}
        for name, t in self.weights.items():
            clone = ad.parameter(t.values.copy())
            out[name] = clone
        return ModelParameters(
            kinds=self.kinds, hidden=self.hidden, n_classes=self.n_classes, weights=out
        )

    @property
    def doc_input_width(self) -> int:
        return len(self.kinds) * self.hidden


def _glorot(rng: np.random.Generator, n_in: int, n_out: int, dtype) -> Tensor:
    limit = np.sqrt(6.0 / (n_in + n_out))
    values = rng.uniform(-limit, limit, size=(n_in, n_out)).astype(dtype)
    return ad.parameter(values)


def init_parameters(
    prepared: PreparedGraphs,
    hidden: int,
    n_classes: int,
    rng: np.random.Generator,
    dtype=np.float32,
) -> ModelParameters:
    """Seeded uniform Glorot initialization in a fixed parameter order."""
    weights: dict[str, Tensor] = {}
    for kind in prepared.kinds:
        d_in = prepared.per_kind[kind].input_dim
        weights[f"{kind}.w1"] = _glorot(rng, d_in, hidden, dtype)
        weights[f"{kind}.w2"] = _glorot(rng, hidden, hidden, dtype)
    width = len(prepared.kinds) * hidden
    weights["doc.w1"] = _glorot(rng, width, hidden, dtype)
    weights["doc.w2"] = _glorot(rng, hidden, n_classes, dtype)
    return ModelParameters(
        kinds=prepared.kinds, hidden=hidden, n_classes=n_classes, weights=weights
    )


def subgraph_gcn_forward(
    pk: PreparedKind,
    w1: Tensor,
    w2: Tensor,
    dropout_rate: float,
    rng: np.random.Generator | None,
    train: bool,
) -> Tensor:
    """Two-layer GCN over one subgraph; dropout applies to the input features."""
    x = ad.constant(pk.features)
    x = ad.dropout(x, dropout_rate, rng, train)
    hidden = ad.relu(ad.sparse_dense_matmul(pk.norm_csr, ad.matmul(x, w1)))
    return ad.matmul(ad.sparse_dense_matmul(pk.norm_csr, hidden), w2)


def pool_documents(node_embeddings: Tensor, attention_csr: sp.csr_matrix) -> Tensor:
    """Attention-weighted pooling of node embeddings into unit document rows.

    Documents whose attention vector is empty (no surviving tokens, no
    entities) pool to the zero row via the normalization guard.
    """
    pooled = ad.sparse_dense_matmul(attention_csr, node_embeddings)
    return ad.l2_normalize_rows(pooled)


def concat_document_embeddings(blocks: list[Tensor]) -> Tensor:
    """Fixed-order column concatenation of the pooled per-kind blocks."""
    if len(blocks) == 1:
        return blocks[0]
    return ad.concat_cols(blocks)


def build_document_graph(
    doc_embeddings: np.ndarray, threshold: float, block_size: int = 256
) -> SparseMatrix:
    """Thresholded dot-product document graph, diagonal excluded.

    Works on detached values (no gradient flows through the result) and
    processes rows blockwise to bound memory. Candidate pairs come from the
    blocked product, but each kept weight is recomputed as a plain vector
    dot: the blocked kernel's rounding depends on row position, and the
    per-pair dot keeps edge weights exactly invariant under document
    permutation.
    """
    x = np.ascontiguousarray(doc_embeddings)
    n = x.shape[0]
    margin = 1e-9 * max(1.0, abs(threshold))
    rows, cols, weights = [], [], []
    for start in range(0, n, block_size):
        sims = x[start : start + block_size] @ x.T
        for local_i in range(sims.shape[0]):
            i = start + local_i
            for j in np.flatnonzero(sims[local_i] >= threshold - margin):
                j = int(j)
                if i == j:
                    continue
                weight = float(np.dot(x[i], x[j]))
                if weight >= threshold:
                    rows.append(i)
                    cols.append(j)
                    weights.append(weight)
    return SparseMatrix.from_triples(n, n, rows, cols, weights)


def document_gcn_forward(
    doc_embeddings: Tensor,
    norm_csr: sp.csr_matrix,
    w1: Tensor,
    w2: Tensor,
    dropout_rate: float,
    rng: np.random.Generator | None,
    train: bool,
) -> Tensor:
    """Two-layer GCN over the document graph, producing class logits."""
    x = ad.dropout(doc_embeddings, dropout_rate, rng, train)
    hidden = ad.relu(ad.sparse_dense_matmul(norm_csr, ad.matmul(x, w1)))
    return ad.matmul(ad.sparse_dense_matmul(norm_csr, hidden), w2)


@dataclass
class ForwardResult:
    doc_embeddings: Tensor
    doc_graph: SparseMatrix | None
    doc_norm_csr: sp.csr_matrix
    logits: Tensor


def full_forward(
    prepared: PreparedGraphs,
    params: ModelParameters,
    hyper: Hyperparams,
    rng: np.random.Generator | None = None,
    train: bool = False,
    doc_adjacency: sp.csr_matrix | None = None,
) -> ForwardResult:
    """Compose encoders, pooling, document graph, and classifier.

    ``doc_adjacency`` pins the normalized document graph to a fixed constant
    instead of rebuilding it from the current embeddings; the gradient
    checker uses this to probe the differentiable path only.
    """
    if params.kinds != prepared.kinds:
        raise NumericsError(
            f"parameter kinds {params.kinds} do not match prepared kinds {prepared.kinds}"
        )
    blocks = []
    for kind in prepared.kinds:
        pk = prepared.per_kind[kind]
        h = subgraph_gcn_forward(
            pk,
            params.weights[f"{kind}.w1"],
            params.weights[f"{kind}.w2"],
            hyper.dropout,
            rng,
            train,
        )
        blocks.append(pool_documents(h, pk.attention_csr))
    doc_embeddings = concat_document_embeddings(blocks)
    if doc_adjacency is None:
        doc_graph = build_document_graph(doc_embeddings.values, hyper.doc_threshold)
        doc_norm_csr = normalize_adjacency(doc_graph).to_csr(np.float64)
    else:
        doc_graph = None
        doc_norm_csr = doc_adjacency
    logits = document_gcn_forward(
        doc_embeddings,
        doc_norm_csr,
        params.weights["doc.w1"],
        params.weights["doc.w2"],
        hyper.dropout,
        rng,
        train,
    )
    return ForwardResult(
        doc_embeddings=doc_embeddings,
        doc_graph=doc_graph,
        doc_norm_csr=doc_norm_csr,
        logits=logits,
    )


def predict(logits) -> tuple[np.ndarray, np.ndarray]:
    """Class index per row (ties to the lowest index) plus probability rows."""
    values = logits.values if isinstance(logits, Tensor) else np.asarray(logits)
    values = values.astype(np.float64)
    shifted = values - values.max(axis=1, keepdims=True)
    exped = np.exp(shifted)
    probs = exped / exped.sum(axis=1, keepdims=True)
    return np.argmax(values, axis=1), probs
