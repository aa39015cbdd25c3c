"""Losses, AdamW optimization, the training loop, and evaluation metrics."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .config import Hyperparams, RunConfig
from .corpus import Corpus
from .errors import NumericsError, TrainingError
from .graphs import GraphBundle
from .model import (
    ForwardResult,
    ModelParameters,
    PreparedGraphs,
    full_forward,
    init_parameters,
    predict,
    prepare_graphs,
)
from .semcon import assign_pseudo_topics, contrastive_loss, form_pairs

log = logging.getLogger("ligram")

LOG_PROB_FLOOR = 1e-12


def cross_entropy_loss(logits: Tensor, labels: np.ndarray, labeled_indices) -> Tensor:
    """Sum (not mean) of negative true-class log probabilities over the
    labeled documents, with the log clamped below at ln(1e-12)."""
    idx = np.asarray(labeled_indices, dtype=np.int64)
    if idx.size == 0:
        raise TrainingError("cross-entropy needs at least one labeled document")
    labels = np.asarray(labels, dtype=np.int64)
    n_classes = logits.shape[1]
    chosen = labels[idx]
    if chosen.min() < 0 or chosen.max() >= n_classes:
        raise TrainingError("labeled document with label index outside [0, C)")
    gathered = ad.gather_rows(logits, idx)
    log_probs = ad.log(ad.softmax_rows(gathered), floor=LOG_PROB_FLOOR)
    onehot = np.zeros((idx.size, n_classes), dtype=logits.dtype)
    onehot[np.arange(idx.size), chosen] = 1
    return ad.scale(ad.reduce_sum(ad.mul(log_probs, onehot)), -1.0)


def unified_loss(loss_ce: Tensor, loss_con: Tensor, contrastive_weight: float) -> Tensor:
    """Total objective: cross-entropy plus the weighted contrastive term."""
    if contrastive_weight < 0:
        raise TrainingError(f"contrastive_weight must be >= 0, got {contrastive_weight}")
    return ad.add(loss_ce, ad.scale(loss_con, contrastive_weight))


@dataclass
class OptimizerState:
    """AdamW moments and step counter."""

    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    first_moment: dict[str, np.ndarray] = field(default_factory=dict)
    second_moment: dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def for_params(cls, params: ModelParameters) -> "OptimizerState":
        state = cls()
        for name, tensor in params.named():
            state.first_moment[name] = np.zeros_like(tensor.values)
            state.second_moment[name] = np.zeros_like(tensor.values)
        return state


def adamw_step(
    params: ModelParameters,
    state: OptimizerState,
    lr: float,
    weight_decay: float,
) -> None:
    """One decoupled-weight-decay Adam update with bias correction."""
    state.step_count += 1
    t = state.step_count
    b1, b2 = state.beta1, state.beta2
    for name, p in params.named():
        grad = p.grad if p.grad is not None else np.zeros_like(p.values)
        m = state.first_moment[name]
        v = state.second_moment[name]
        m = b1 * m + (1.0 - b1) * grad
        v = b2 * v + (1.0 - b2) * grad * grad
        state.first_moment[name] = m
        state.second_moment[name] = v
        m_hat = m / (1.0 - b1**t)
        v_hat = v / (1.0 - b2**t)
        p.values = p.values - lr * m_hat / (np.sqrt(v_hat) + state.eps) - lr * weight_decay * p.values


def clip_gradients(params: ModelParameters, max_norm: float) -> float:
    """Scale all gradients so their global L2 norm is at most ``max_norm``."""
    total = 0.0
    for _, p in params.named():
        if p.grad is not None:
            total += float(np.sum(p.grad.astype(np.float64) ** 2))
    norm = float(np.sqrt(total))
    if norm > max_norm and norm > 0:
        factor = max_norm / norm
        for _, p in params.named():
            if p.grad is not None:
                p.grad = p.grad * p.values.dtype.type(factor)
    return norm


# ---------------------------------------------------------------------------
# Metrics.


@dataclass
class ClassMetrics:
    name: str
    precision: float
    recall: float
    f1: float
    support: int


@dataclass
class MetricsReport:
    """Accuracy, per-class precision/recall/F1, macro-F1, and the confusion matrix."""

    accuracy: float
    macro_f1: float
    per_class: list[ClassMetrics]
    confusion: np.ndarray
    epoch: int | None = None
    seed: int | None = None

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "macro_f1": self.macro_f1,
            "per_class": [
                {
                    "class": c.name,
                    "precision": c.precision,
                    "recall": c.recall,
                    "f1": c.f1,
                    "support": c.support,
                }
                for c in self.per_class
            ],
            "confusion": self.confusion.tolist(),
            "epoch": self.epoch,
            "seed": self.seed,
        }

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)


def compute_metrics(
    y_true,
    y_pred,
    class_names: list[str],
    epoch: int | None = None,
    seed: int | None = None,
) -> MetricsReport:
    """Confusion-matrix metrics over integer class indices.

    Per-class F1 is 0 when precision + recall is 0; macro-F1 averages over
    all classes, so classes with neither true instances nor predictions
    contribute 0.
    """
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.size == 0:
        raise TrainingError("cannot compute metrics over an empty split")
    if y_true.shape != y_pred.shape:
        raise TrainingError("prediction/label length mismatch")
    n = len(class_names)
    confusion = np.zeros((n, n), dtype=np.int64)
    np.add.at(confusion, (y_true, y_pred), 1)
    accuracy = float(np.trace(confusion) / y_true.size)
    per_class = []
    f1_sum = 0.0
    for c in range(n):
        tp = float(confusion[c, c])
        fp = float(confusion[:, c].sum() - confusion[c, c])
        fn = float(confusion[c, :].sum() - confusion[c, c])
        precision = tp / (tp + fp) if tp + fp > 0 else 0.0
        recall = tp / (tp + fn) if tp + fn > 0 else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
        f1_sum += f1
        per_class.append(
            ClassMetrics(
                name=class_names[c],
                precision=precision,
                recall=recall,
                f1=f1,
                support=int(confusion[c, :].sum()),
            )
        )
    return MetricsReport(
        accuracy=accuracy,
        macro_f1=f1_sum / n,
        per_class=per_class,
        confusion=confusion,
        epoch=epoch,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# Training loop.


@dataclass
class EpochStats:
    epoch: int
    loss: float
    loss_ce: float
    loss_con: float


@dataclass
class EvalStats:
    epoch: int
    accuracy: float
    macro_f1: float
    improved: bool


@dataclass
class TrainRun:
    """Outcome of one training run: metric history plus the best checkpoint."""

    seed: int
    history: list[EpochStats]
    evals: list[EvalStats]
    best_epoch: int
    best_val_accuracy: float
    best_val_macro_f1: float
    params: ModelParameters

    def history_dict(self) -> dict:
        return {
            "seed": self.seed,
            "best_epoch": self.best_epoch,
            "best_val_accuracy": self.best_val_accuracy,
            "best_val_macro_f1": self.best_val_macro_f1,
            "epochs": [
                {"epoch": h.epoch, "loss": h.loss, "loss_ce": h.loss_ce, "loss_con": h.loss_con}
                for h in self.history
            ],
            "evals": [
                {
                    "epoch": e.epoch,
                    "accuracy": e.accuracy,
                    "macro_f1": e.macro_f1,
                    "improved": e.improved,
                }
                for e in self.evals
            ],
        }


def _forward_loss(
    prepared: PreparedGraphs,
    params: ModelParameters,
    config: RunConfig,
    labels: np.ndarray,
    train_idx: np.ndarray,
    scope: np.ndarray,
    rng: np.random.Generator,
) -> tuple[ForwardResult, Tensor, float, float]:
    fwd = full_forward(prepared, params, config.hyper(), rng=rng, train=True)
    loss_ce = cross_entropy_loss(fwd.logits, labels, train_idx)
    weight = config.contrastive_weight if config.use_semcon else 0.0
    if weight > 0.0:
        assignment = assign_pseudo_topics(fwd.logits)
        pairs = form_pairs(assignment, scope)
        loss_con = contrastive_loss(fwd.doc_embeddings, pairs, config.temperature)
        total = unified_loss(loss_ce, loss_con, weight)
        return fwd, total, loss_ce.item(), loss_con.item()
    return fwd, loss_ce, loss_ce.item(), 0.0


def train(corpus: Corpus, bundle: GraphBundle, config: RunConfig) -> TrainRun:
    """Full-batch training with validation-based model selection.

    Per epoch: train-mode forward, cross-entropy over the train split,
    contrastive loss over the configured scope, backward, one AdamW step.
    Every ``eval_every`` epochs the model runs in eval mode and the
    parameters are checkpointed when validation accuracy improves. Fully
    deterministic given the seed.
    """
    config.validate()
    hyper = config.hyper()
    prepared = prepare_graphs(bundle, config.enabled_kinds, dtype=np.float32)
    labels = corpus.label_indices()
    train_idx = corpus.split_indices("train")
    val_idx = corpus.split_indices("val")
    if train_idx.size == 0:
        raise TrainingError("train split is empty; assign splits first")
    scope = np.arange(len(corpus), dtype=np.int64) if config.contrastive_scope == "all" else train_idx
    rng = np.random.default_rng(config.seed)
    params = init_parameters(prepared, hyper.hidden, corpus.n_classes, rng, dtype=np.float32)
    state = OptimizerState.for_params(params)
    history: list[EpochStats] = []
    evals: list[EvalStats] = []
    best_epoch = 0
    best_acc = -1.0
    best_f1 = 0.0
    best_params = params.copy()
    for epoch in range(1, hyper.max_epochs + 1):
        try:
            params.zero_grads()
            _, total, ce_value, con_value = _forward_loss(
                prepared, params, config, labels, train_idx, scope, rng
            )
            ad.backward(total)
            if hyper.grad_clip is not None:
                clip_gradients(params, hyper.grad_clip)
            adamw_step(params, state, hyper.lr, hyper.weight_decay)
        except NumericsError as exc:
            raise TrainingError(f"training aborted at epoch {epoch}: {exc}") from exc
        history.append(
            EpochStats(epoch=epoch, loss=total.item(), loss_ce=ce_value, loss_con=con_value)
        )
        if epoch % hyper.eval_every == 0 or epoch == hyper.max_epochs:
            if val_idx.size:
                eval_fwd = full_forward(prepared, params, hyper, train=False)
                pred, _ = predict(eval_fwd.logits)
                report = compute_metrics(
                    labels[val_idx], pred[val_idx], corpus.class_names
                )
                improved = report.accuracy > best_acc
                if improved:
                    best_acc = report.accuracy
                    best_f1 = report.macro_f1
                    best_epoch = epoch
                    best_params = params.copy()
                evals.append(
                    EvalStats(
                        epoch=epoch,
                        accuracy=report.accuracy,
                        macro_f1=report.macro_f1,
                        improved=improved,
                    )
                )
                log.info(
                    "epoch %d: loss=%.6f ce=%.6f con=%.6f val_acc=%.4f val_f1=%.4f%s",
                    epoch,
                    history[-1].loss,
                    ce_value,
                    con_value,
                    report.accuracy,
                    report.macro_f1,
                    " *" if improved else "",
                )
            else:
                best_epoch = epoch
                best_params = params.copy()
    if best_acc < 0:
        best_acc = 0.0
    return TrainRun(
        seed=config.seed,
        history=history,
        evals=evals,
        best_epoch=best_epoch,
        best_val_accuracy=best_acc,
        best_val_macro_f1=best_f1,
        params=best_params,
    )


def evaluate(
    params: ModelParameters,
    bundle: GraphBundle,
    corpus: Corpus,
    split: str,
    hyper: Hyperparams,
    epoch: int | None = None,
) -> MetricsReport:
    """Eval-mode forward over the whole corpus, metrics over one split."""
    idx = corpus.split_indices(split)
    if idx.size == 0:
        raise TrainingError(f"split {split!r} is empty")
    prepared = prepare_graphs(bundle, params.kinds, dtype=np.float32)
    fwd = full_forward(prepared, params, hyper, train=False)
    pred, _ = predict(fwd.logits)
    labels = corpus.label_indices()
    if np.any(labels[idx] < 0):
        raise TrainingError(f"split {split!r} contains unlabeled documents")
    return compute_metrics(
        labels[idx], pred[idx], corpus.class_names, epoch=epoch, seed=hyper.seed
    )


# ---------------------------------------------------------------------------
# Whole-model gradient check.


def gradient_check_report(
    corpus: Corpus,
    bundle: GraphBundle,
    config: RunConfig,
    step: float = 1e-5,
) -> ad.GradCheckReport:
    """Check analytic gradients of the full objective by central differences.

    Runs at float64 with dropout off. The document graph and the pseudo-topic
    pair sets are frozen at their base-point values across probe evaluations,
    matching their stop-gradient treatment in backward.
    """
    config.validate()
    hyper = config.hyper()
    prepared = prepare_graphs(bundle, config.enabled_kinds, dtype=np.float64)
    labels = corpus.label_indices()
    train_idx = corpus.split_indices("train")
    if train_idx.size == 0:
        train_idx = np.flatnonzero(labels >= 0)
    scope = (
        np.arange(len(corpus), dtype=np.int64)
        if config.contrastive_scope == "all"
        else train_idx
    )
    rng = np.random.default_rng(config.seed)
    params = init_parameters(prepared, hyper.hidden, corpus.n_classes, rng, dtype=np.float64)
    base = full_forward(prepared, params, hyper, train=False)
    doc_norm = base.doc_norm_csr
    weight = config.contrastive_weight if config.use_semcon else 0.0
    pairs = form_pairs(assign_pseudo_topics(base.logits), scope) if weight > 0 else None

    def objective() -> Tensor:
        fwd = full_forward(prepared, params, hyper, train=False, doc_adjacency=doc_norm)
        loss = cross_entropy_loss(fwd.logits, labels, train_idx)
        if pairs is not None:
            con = contrastive_loss(fwd.doc_embeddings, pairs, config.temperature)
            loss = unified_loss(loss, con, weight)
        return loss

    return ad.check_gradients(objective, dict(params.named()), step=step)
