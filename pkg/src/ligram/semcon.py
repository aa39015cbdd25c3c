"""Semantics-aware contrastive learning.

Documents are softmax-assigned a pseudo-topic from the classifier logits;
documents sharing a pseudo-topic form positive pairs, everything else in
scope is a negative. The per-document loss is the mean negative
log-softmax of each positive's similarity over all candidates, and the
corpus loss is the mean over all in-scope documents (documents with no
positives contribute zero but stay in the denominator).

Pseudo-topic assignment is detached: pseudo-labels act as targets, so no
gradient flows through them; gradients reach the document embeddings only
through the cosine similarities.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import NumericsError


@dataclass(frozen=True)
class TopicAssignment:
    """Softmax topic distribution and argmax pseudo-topic per document."""

    probabilities: np.ndarray
    topics: np.ndarray

    @property
    def n_docs(self) -> int:
        return int(self.topics.shape[0])


def assign_pseudo_topics(logits) -> TopicAssignment:
    """Row-wise softmax over detached logits; ties break to the lowest index."""
    values = logits.values if isinstance(logits, Tensor) else np.asarray(logits)
    if values.ndim != 2 or values.shape[1] < 2:
        raise NumericsError(f"pseudo-topics need an (N, C>=2) matrix, got {values.shape}")
    values = values.astype(np.float64)
    shifted = values - values.max(axis=1, keepdims=True)
    exped = np.exp(shifted)
    probabilities = exped / exped.sum(axis=1, keepdims=True)
    return TopicAssignment(probabilities=probabilities, topics=np.argmax(values, axis=1))


@dataclass(frozen=True)
class PairSets:
    """Positive and candidate sets per in-scope document, as boolean masks."""

    scope: np.ndarray
    topics: np.ndarray
    positive_mask: np.ndarray
    candidate_mask: np.ndarray

    def positives(self, position: int) -> list[int]:
        return [int(self.scope[j]) for j in np.flatnonzero(self.positive_mask[position])]

    def candidates(self, position: int) -> list[int]:
        return [int(self.scope[j]) for j in np.flatnonzero(self.candidate_mask[position])]


def form_pairs(assignment: TopicAssignment, scope=None) -> PairSets:
    """Pair documents inside ``scope`` (defaults to all) by shared pseudo-topic."""
    if scope is None:
        scope = np.arange(assignment.n_docs, dtype=np.int64)
    else:
        scope = np.asarray(scope, dtype=np.int64)
    topics = assignment.topics[scope]
    same = topics[:, None] == topics[None, :]
    not_self = ~np.eye(scope.size, dtype=bool)
    return PairSets(
        scope=scope,
        topics=topics,
        positive_mask=same & not_self,
        candidate_mask=not_self,
    )


def _loss_from_similarities(sims: Tensor, pairs: PairSets) -> tuple[Tensor, np.ndarray]:
    """Scalar loss plus detached per-document loss values.

    ``sims`` is the (temperature-scaled) similarity matrix over the scope.
    Uses a detached row-max shift inside the logsumexp for stability; rows
    with no positives (or no candidates at all) are masked to zero before
    the mean.
    """
    n = pairs.scope.size
    positive = pairs.positive_mask.astype(sims.dtype)
    candidate = pairs.candidate_mask.astype(sims.dtype)
    pos_counts = positive.sum(axis=1)
    cand_counts = candidate.sum(axis=1)
    active = ((pos_counts > 0) & (cand_counts > 0)).astype(sims.dtype)[:, None]
    if not np.any(active):
        return ad.constant(np.zeros((), dtype=sims.dtype.type)), np.zeros(n)
    # Row max over candidates only, detached; any constant shift leaves the
    # logsumexp value unchanged but keeps exp() in range.
    masked_values = np.where(pairs.candidate_mask, sims.values, -np.inf)
    row_max = masked_values.max(axis=1, keepdims=True)
    row_max = np.where(np.isfinite(row_max), row_max, 0.0).astype(sims.dtype)
    shifted = ad.add(sims, -row_max)
    denom = ad.reduce_sum(ad.mul(ad.exp(shifted), candidate), axis=1, keepdims=True)
    # Inactive rows get a denominator of 1 so the log stays finite; their
    # contribution is zeroed below.
    denom_safe = ad.add(denom, 1.0 - active)
    log_denom = ad.add(ad.log(denom_safe), row_max)
    inv_counts = np.divide(
        1.0, pos_counts, out=np.zeros_like(pos_counts), where=pos_counts > 0
    )[:, None].astype(sims.dtype)
    positive_mean = ad.mul(
        ad.reduce_sum(ad.mul(sims, positive), axis=1, keepdims=True), inv_counts
    )
    per_doc = ad.mul(ad.sub(log_denom, positive_mean), active)
    loss = ad.scale(ad.reduce_sum(per_doc), 1.0 / n)
    return loss, per_doc.values.reshape(-1).astype(np.float64)


def contrastive_loss(
    doc_embeddings: Tensor, pairs: PairSets, temperature: float = 1.0
) -> Tensor:
    """Contrastive loss over cosine similarities of the document embeddings."""
    if temperature <= 0:
        raise NumericsError(f"temperature must be > 0, got {temperature}")
    n_docs = doc_embeddings.shape[0]
    if pairs.scope.size == n_docs and np.array_equal(
        pairs.scope, np.arange(n_docs, dtype=np.int64)
    ):
        scoped = doc_embeddings
    else:
        scoped = ad.gather_rows(doc_embeddings, pairs.scope)
    sims = ad.scale(ad.cosine_similarity_matrix(scoped), 1.0 / temperature)
    loss, _ = _loss_from_similarities(sims, pairs)
    return loss
