"""Minimal reverse-mode differentiation kernel over numpy arrays.

Every primitive records enough on the output tensor to run one reverse
sweep; gradients accumulate additively across fan-out and across repeated
``backward`` calls. Storage dtype follows the inputs (float32 for training,
float64 for gradient checking) while reductions always accumulate in
float64. Every forward op validates its output is finite and raises
:class:`NumericsError` otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import NumericsError

_FLOAT_TYPES = (np.float32, np.float64)


class Tensor:
    """A value plus an optional gradient accumulator and backward closure."""

    __slots__ = ("values", "requires_grad", "grad", "_parents", "_backward_fn")

    def __init__(self, values, requires_grad: bool = False):
        arr = np.asarray(values)
        if arr.dtype.type not in _FLOAT_TYPES:
            arr = arr.astype(np.float64)
        self.values = arr
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward_fn = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    @property
    def dtype(self):
        return self.values.dtype

    def item(self) -> float:
        if self.values.size != 1:
            raise NumericsError(f"item() on tensor of shape {self.shape}")
        return float(self.values.reshape(()))

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        flag = ", requires_grad" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{flag})"


def constant(values) -> Tensor:
    return Tensor(values, requires_grad=False)


def parameter(values) -> Tensor:
    return Tensor(values, requires_grad=True)


def zero_grads(tensors) -> None:
    for t in tensors:
        t.zero_grad()


def _check_finite(arr: np.ndarray, op: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise NumericsError(f"non-finite values produced by {op}")


def _node(values: np.ndarray, parents: tuple[Tensor, ...], backward_fn, op: str) -> Tensor:
    _check_finite(values, op)
    out = Tensor(values)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward_fn = backward_fn
    return out


def _accumulate(tensor: Tensor, grad: np.ndarray) -> None:
    grad = np.asarray(grad, dtype=tensor.values.dtype)
    if grad.shape != tensor.values.shape:
        raise NumericsError(
            f"gradient shape {grad.shape} does not match value shape {tensor.shape}"
        )
    if tensor.grad is None:
        tensor.grad = grad.copy()
    else:
        tensor.grad = tensor.grad + grad


def backward(loss: Tensor) -> None:
    """Reverse sweep from a scalar loss, filling ``grad`` on flagged tensors."""
    if loss.values.size != 1:
        raise NumericsError(f"backward requires a scalar loss, got shape {loss.shape}")
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen or not node.requires_grad:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            stack.append((parent, False))
    local: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.values)}
    for node in reversed(order):
        grad = local.pop(id(node), None)
        if grad is None:
            continue
        if node._backward_fn is None:
            _accumulate(node, grad)
            continue
        for parent, pgrad in zip(node._parents, node._backward_fn(grad)):
            if pgrad is None or not parent.requires_grad:
                continue
            key = id(parent)
            if key in local:
                local[key] = local[key] + pgrad
            else:
                local[key] = np.asarray(pgrad, dtype=parent.values.dtype)


# ---------------------------------------------------------------------------
# dtype-aware helpers: reductions accumulate in float64, store in input dtype.


def _mm(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out_dtype = np.result_type(a, b)
    if out_dtype == np.float64:
        return np.asarray(a, dtype=np.float64) @ np.asarray(b, dtype=np.float64)
    return (a.astype(np.float64) @ b.astype(np.float64)).astype(out_dtype)


def _spmm(matrix: sp.spmatrix, dense: np.ndarray) -> np.ndarray:
    # scipy promotes mixed dtypes to float64, giving the 64-bit accumulation.
    out = matrix @ np.asarray(dense, dtype=np.float64)
    return np.asarray(out, dtype=dense.dtype)


def _reduce_sum(arr: np.ndarray, axis, keepdims: bool) -> np.ndarray:
    out = np.sum(arr, axis=axis, keepdims=keepdims, dtype=np.float64)
    return np.asarray(out, dtype=arr.dtype)


def _require_matrix(x: Tensor, op: str) -> None:
    if x.values.ndim != 2:
        raise NumericsError(f"{op} expects a 2-D tensor, got shape {x.shape}")


def _broadcast_ok(shape_a: tuple[int, ...], shape_b: tuple[int, ...]) -> bool:
    """Equal shapes, a scalar, or a row/column vector against a matrix."""
    if shape_a == shape_b:
        return True
    small, big = sorted((shape_a, shape_b), key=lambda s: int(np.prod(s, dtype=np.int64)))
    if int(np.prod(small, dtype=np.int64)) == 1:
        return True
    if len(small) == 2 and len(big) == 2:
        rows_match = small[0] == big[0] and small[1] == 1
        cols_match = small[1] == big[1] and small[0] == 1
        return rows_match or cols_match
    return False


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if grad.shape == shape:
        return grad
    out = grad
    while out.ndim > len(shape):
        out = _reduce_sum(out, axis=0, keepdims=False)
    for axis, size in enumerate(shape):
        if size == 1 and out.shape[axis] != 1:
            out = _reduce_sum(out, axis=axis, keepdims=True)
    return out.reshape(shape)


def _as_constant(value) -> np.ndarray:
    return np.asarray(value)


# ---------------------------------------------------------------------------
# Primitives.


def matmul(a: Tensor, b: Tensor) -> Tensor:
    _require_matrix(a, "matmul")
    _require_matrix(b, "matmul")
    if a.shape[1] != b.shape[0]:
        raise NumericsError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    values = _mm(a.values, b.values)

    def backward_fn(grad):
        return _mm(grad, b.values.T), _mm(a.values.T, grad)

    return _node(values, (a, b), backward_fn, "matmul")


def sparse_dense_matmul(matrix: sp.spmatrix, x: Tensor) -> Tensor:
    """Product of a constant sparse matrix with a dense tensor."""
    _require_matrix(x, "sparse_dense_matmul")
    if matrix.shape[1] != x.shape[0]:
        raise NumericsError(
            f"sparse_dense_matmul shape mismatch: {matrix.shape} @ {x.shape}"
        )
    values = _spmm(matrix, x.values)
    transposed = matrix.T.tocsr()

    def backward_fn(grad):
        return (_spmm(transposed, grad),)

    return _node(values, (x,), backward_fn, "sparse_dense_matmul")


def transpose(x: Tensor) -> Tensor:
    _require_matrix(x, "transpose")
    values = x.values.T.copy()

    def backward_fn(grad):
        return (grad.T,)

    return _node(values, (x,), backward_fn, "transpose")


def relu(x: Tensor) -> Tensor:
    mask = x.values > 0  # subgradient 0 at exactly 0
    values = np.where(mask, x.values, 0)

    def backward_fn(grad):
        return (grad * mask,)

    return _node(values, (x,), backward_fn, "relu")


def exp(x: Tensor) -> Tensor:
    values = np.exp(x.values)

    def backward_fn(grad):
        return (grad * values,)

    return _node(values, (x,), backward_fn, "exp")


def log(x: Tensor, floor: float | None = None) -> Tensor:
    """Natural log; with ``floor`` set, inputs are clamped below at ``floor``
    and clamped entries get zero gradient."""
    if floor is not None:
        clamped = np.maximum(x.values, floor)
        values = np.log(clamped)
        active = x.values > floor

        def backward_fn(grad):
            return (np.where(active, grad / x.values, 0),)

    else:
        with np.errstate(divide="ignore", invalid="ignore"):
            values = np.log(x.values)

        def backward_fn(grad):
            return (grad / x.values,)

    return _node(values, (x,), backward_fn, "log")


def add(a: Tensor, b) -> Tensor:
    if isinstance(b, Tensor):
        if not _broadcast_ok(a.shape, b.shape):
            raise NumericsError(f"add shape mismatch: {a.shape} + {b.shape}")
        values = a.values + b.values

        def backward_fn(grad):
            return _unbroadcast(grad, a.values.shape), _unbroadcast(grad, b.values.shape)

        return _node(values, (a, b), backward_fn, "add")
    const = _as_constant(b)
    if not _broadcast_ok(a.shape, const.shape):
        raise NumericsError(f"add shape mismatch: {a.shape} + {const.shape}")
    values = a.values + const.astype(a.dtype, copy=False)

    def backward_const(grad):
        return (_unbroadcast(grad, a.values.shape),)

    return _node(values, (a,), backward_const, "add")


def sub(a: Tensor, b: Tensor) -> Tensor:
    return add(a, scale(b, -1.0))


def scale(x: Tensor, factor: float) -> Tensor:
    factor = float(factor)
    values = x.values * x.dtype.type(factor)

    def backward_fn(grad):
        return (grad * factor,)

    return _node(values, (x,), backward_fn, "scale")


def mul(a: Tensor, b) -> Tensor:
    """Elementwise product with another tensor or a constant array."""
    if isinstance(b, Tensor):
        if not _broadcast_ok(a.shape, b.shape):
            raise NumericsError(f"mul shape mismatch: {a.shape} * {b.shape}")
        values = a.values * b.values

        def backward_fn(grad):
            return (
                _unbroadcast(grad * b.values, a.values.shape),
                _unbroadcast(grad * a.values, b.values.shape),
            )

        return _node(values, (a, b), backward_fn, "mul")
    const = _as_constant(b)
    if not _broadcast_ok(a.shape, const.shape):
        raise NumericsError(f"mul shape mismatch: {a.shape} * {const.shape}")
    values = a.values * const.astype(a.dtype, copy=False)

    def backward_const(grad):
        return (_unbroadcast(grad * const, a.values.shape),)

    return _node(values, (a,), backward_const, "mul")


def concat_cols(parts: list[Tensor]) -> Tensor:
    if not parts:
        raise NumericsError("concat_cols needs at least one tensor")
    for p in parts:
        _require_matrix(p, "concat_cols")
    n_rows = parts[0].shape[0]
    if any(p.shape[0] != n_rows for p in parts):
        raise NumericsError(
            f"concat_cols row mismatch: {[p.shape for p in parts]}"
        )
    values = np.hstack([p.values for p in parts])
    widths = [p.shape[1] for p in parts]
    offsets = np.cumsum([0] + widths)

    def backward_fn(grad):
        return tuple(
            grad[:, offsets[i] : offsets[i + 1]] for i in range(len(parts))
        )

    return _node(values, tuple(parts), backward_fn, "concat_cols")


def gather_rows(x: Tensor, indices) -> Tensor:
    _require_matrix(x, "gather_rows")
    idx = np.asarray(indices, dtype=np.int64)
    if idx.ndim != 1:
        raise NumericsError("gather_rows expects a 1-D index array")
    if idx.size and (idx.min() < 0 or idx.max() >= x.shape[0]):
        raise NumericsError(f"gather_rows index out of range for {x.shape[0]} rows")
    values = x.values[idx]

    def backward_fn(grad):
        out = np.zeros_like(x.values)
        np.add.at(out, idx, grad)
        return (out,)

    return _node(values, (x,), backward_fn, "gather_rows")


def softmax_rows(x: Tensor) -> Tensor:
    _require_matrix(x, "softmax_rows")
    shifted = x.values - x.values.max(axis=1, keepdims=True)
    exped = np.exp(shifted)
    values = exped / _reduce_sum(exped, axis=1, keepdims=True)

    def backward_fn(grad):
        inner = _reduce_sum(grad * values, axis=1, keepdims=True)
        return (values * (grad - inner),)

    return _node(values, (x,), backward_fn, "softmax_rows")


def reduce_sum(x: Tensor, axis: int | None = None, keepdims: bool = False) -> Tensor:
    values = _reduce_sum(x.values, axis=axis, keepdims=keepdims)

    def backward_fn(grad):
        g = np.asarray(grad)
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.values.shape).astype(x.dtype, copy=False),)

    return _node(values, (x,), backward_fn, "sum")


def reduce_mean(x: Tensor, axis: int | None = None, keepdims: bool = False) -> Tensor:
    count = x.values.size if axis is None else x.values.shape[axis]
    if count == 0:
        raise NumericsError("mean over an empty axis")
    return scale(reduce_sum(x, axis=axis, keepdims=keepdims), 1.0 / count)


# Spec-facing aliases for the reduction primitives.
sum = reduce_sum  # noqa: A001 - mirrors the kernel's public op name
mean = reduce_mean


def _l2_normalize(x: Tensor, axis: int, eps: float) -> Tensor:
    _require_matrix(x, "l2_normalize")
    sq = _reduce_sum(x.values.astype(np.float64) ** 2, axis=axis, keepdims=True)
    norms = np.sqrt(sq).astype(x.dtype)
    keep = norms >= eps
    safe = np.where(keep, norms, 1).astype(x.dtype)
    values = np.where(keep, x.values / safe, 0)

    def backward_fn(grad):
        inner = _reduce_sum(grad * x.values, axis=axis, keepdims=True)
        out = grad / safe - x.values * inner / safe**3
        return (np.where(keep, out, 0),)

    return _node(values, (x,), backward_fn, "l2_normalize")


def l2_normalize_rows(x: Tensor, eps: float = 1e-12) -> Tensor:
    """Row-wise unit normalization; rows with norm < ``eps`` map to zero
    with zero gradient."""
    return _l2_normalize(x, axis=1, eps=eps)


def l2_normalize_cols(x: Tensor, eps: float = 1e-12) -> Tensor:
    return _l2_normalize(x, axis=0, eps=eps)


def dropout(x: Tensor, rate: float, rng: np.random.Generator | None, train: bool) -> Tensor:
    """Inverted dropout: survivors scale by 1/(1-rate); exact identity in
    evaluation mode (no RNG consumption)."""
    if not 0.0 <= rate < 1.0:
        raise NumericsError(f"dropout rate must be in [0, 1), got {rate}")
    if not train or rate == 0.0:
        return x
    if rng is None:
        raise NumericsError("dropout in train mode requires an RNG")
    mask = (rng.random(x.values.shape) >= rate).astype(x.dtype)
    scaled_mask = mask / x.dtype.type(1.0 - rate)
    values = x.values * scaled_mask

    def backward_fn(grad):
        return (grad * scaled_mask,)

    return _node(values, (x,), backward_fn, "dropout")


def cosine_similarity_matrix(x: Tensor) -> Tensor:
    """All-pairs cosine similarity of the rows of ``x`` (zero rows give 0)."""
    normed = l2_normalize_rows(x)
    return matmul(normed, transpose(normed))


# ---------------------------------------------------------------------------
# Finite-difference gradient checking.


@dataclass
class GradCheckReport:
    """Result of comparing analytic gradients against central differences."""

    max_rel_error: float
    worst_param: str
    worst_index: tuple[int, ...]
    n_checked: int
    n_kinks: int
    per_param: dict[str, float] = field(default_factory=dict)

    def passed(self, tolerance: float = 1e-4) -> bool:
        return self.max_rel_error < tolerance


def check_gradients(
    f,
    params: dict[str, Tensor],
    step: float = 1e-5,
    exclude_kinks: bool = False,
    kink_tol: float = 1e-2,
) -> GradCheckReport:
    """Compare analytic gradients of ``f()`` against central differences.

    ``f`` must be a deterministic closure over ``params`` returning a scalar
    Tensor; all parameters must be float64. With ``exclude_kinks`` the two
    one-sided differences are compared and entries where they disagree by
    more than ``kink_tol`` (relative) are dropped from the maximum, which
    covers non-differentiable points hit exactly (e.g. relu at 0).
    """
    for name, p in params.items():
        if p.dtype != np.float64:
            raise NumericsError(f"check_gradients requires float64 params ({name})")
        if not p.requires_grad:
            raise NumericsError(f"parameter {name} is not flagged for gradients")
    zero_grads(params.values())
    base_loss = f()
    if base_loss.values.size != 1:
        raise NumericsError("check_gradients requires a scalar-valued function")
    f0 = base_loss.item()
    if abs(f().item() - f0) > 0:
        raise NumericsError("function is not deterministic across evaluations")
    backward(base_loss)
    analytic = {
        name: (np.zeros_like(p.values) if p.grad is None else p.grad.copy())
        for name, p in params.items()
    }
    max_rel = 0.0
    worst = ("", ())
    n_checked = 0
    n_kinks = 0
    per_param: dict[str, float] = {}
    for name, p in params.items():
        param_max = 0.0
        flat = p.values.reshape(-1)
        for k in range(flat.size):
            original = flat[k]
            flat[k] = original + step
            f_plus = f().item()
            flat[k] = original - step
            f_minus = f().item()
            flat[k] = original
            numeric = (f_plus - f_minus) / (2.0 * step)
            if exclude_kinks:
                d_plus = (f_plus - f0) / step
                d_minus = (f0 - f_minus) / step
                if abs(d_plus - d_minus) > kink_tol * max(1.0, abs(d_plus), abs(d_minus)):
                    n_kinks += 1
                    continue
            idx = np.unravel_index(k, p.values.shape)
            g = float(analytic[name][idx])
            rel = abs(g - numeric) / max(1e-8, abs(g) + abs(numeric))
            n_checked += 1
            param_max = max(param_max, rel)
            if rel > max_rel:
                max_rel = rel
                worst = (name, idx)
        per_param[name] = param_max
    return GradCheckReport(
        max_rel_error=max_rel,
        worst_param=worst[0],
        worst_index=tuple(int(i) for i in worst[1]),
        n_checked=n_checked,
        n_kinks=n_kinks,
        per_param=per_param,
    )
