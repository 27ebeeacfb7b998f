"""Minimal dense-tensor arithmetic with reverse-mode automatic differentiation.

Every forward operation optionally records itself on the innermost active
``Tape``; ``Tape.backward`` then replays the records in reverse and
accumulates gradients into the participating tensors.  Without an active
tape the same functions run forward-only, which is what inference and
finite-difference evaluation use.

Computation defaults to float32.  A global float64 mode (``precision``)
exists so gradients can be checked against central finite differences,
which are too noisy at single precision.

A tape and its tensors belong to one thread.  Independent models (own
tapes, own parameters) may run in parallel; frozen tensors may be shared
read-only.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Sequence

import numpy as np

from .errors import (
    ConfigError,
    DataError,
    DimensionError,
    InvalidInputError,
    UsageError,
)

_DTYPE = np.float32


def set_default_dtype(name: str) -> None:
    """Select the global precision: "float32" (default) or "float64"."""
    global _DTYPE
    if name not in ("float32", "float64"):
        raise ConfigError(f"unsupported dtype {name!r}; use 'float32' or 'float64'")
    _DTYPE = np.float32 if name == "float32" else np.float64


def default_dtype():
    return _DTYPE


@contextlib.contextmanager
def precision(name: str):
    """Temporarily switch the global dtype, e.g. ``with precision("float64"):``."""
    global _DTYPE
    saved = _DTYPE
    set_default_dtype(name)
    try:
        yield
    finally:
        _DTYPE = saved


class Tensor:
    """Dense n-dimensional float array; the unit of all numeric computation.

    ``data`` is row-major contiguous; ``grad`` is filled in by
    ``Tape.backward`` and accumulates until the owner clears it.
    """

    __slots__ = ("data", "grad")

    def __init__(self, data, dtype=None):
        arr = np.asarray(data, dtype=dtype or _DTYPE)
        if arr.ndim and not arr.flags.c_contiguous:
            arr = np.ascontiguousarray(arr)
        self.data = arr
        self.grad = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise UsageError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(()))

    def __repr__(self):
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype})"

    # operator sugar; the module-level functions do the real work
    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __matmul__(self, other):
        return matmul(self, other)


def zeros(shape) -> Tensor:
    return Tensor(np.zeros(shape, dtype=_DTYPE))


class Parameter:
    """A named, trainable tensor plus its accumulated gradient.

    Frozen parameters (``trainable=False``, e.g. pretrained word embeddings)
    keep participating in forward passes but are never touched by the
    optimizer.
    """

    def __init__(self, data, name: str, trainable: bool = True):
        self.value = data if isinstance(data, Tensor) else Tensor(data)
        self.name = name
        self.trainable = trainable

    @property
    def data(self) -> np.ndarray:
        return self.value.data

    @property
    def grad(self) -> np.ndarray:
        if self.value.grad is None:
            self.value.grad = np.zeros_like(self.value.data)
        return self.value.grad

    @property
    def shape(self):
        return self.value.data.shape

    def zero_grad(self) -> None:
        self.value.grad = None

    def __repr__(self):
        kind = "trainable" if self.trainable else "frozen"
        return f"Parameter({self.name!r}, shape={self.shape}, {kind})"


# ---------------------------------------------------------------------------
# Tape


_TAPE_STACK: list["Tape"] = []


def _active_tape():
    return _TAPE_STACK[-1] if _TAPE_STACK else None


class Tape:
    """Ordered record of differentiable operations.

    Records are appended in creation order, which is topological by
    construction: an operation's inputs always exist before its output.
    ``backward`` walks the records once, in reverse; intermediate gradients
    live in per-walk scratch space and only tape leaves (parameters,
    constants, tensors made on other tapes) receive a persistent ``.grad``.
    """

    def __init__(self):
        self._records: list[tuple[Tensor, tuple[Tensor, ...], Callable]] = []
        self._consumed = False

    def __enter__(self) -> "Tape":
        _TAPE_STACK.append(self)
        return self

    def __exit__(self, *exc):
        popped = _TAPE_STACK.pop()
        assert popped is self

    def __len__(self):
        return len(self._records)

    def _record(self, out: Tensor, inputs: tuple, backward: Callable) -> None:
        self._records.append((out, inputs, backward))

    def backward(self, loss: Tensor) -> None:
        """Accumulate d(loss)/d(leaf) into ``leaf.grad`` for this tape's leaves.

        Gradients add onto whatever a leaf already stores, so parameters
        keep accumulating until their owner zeroes them.  A tape can be
        walked only once.
        """
        if loss.data.ndim != 0:
            raise UsageError(f"backward needs a scalar loss, got shape {loss.shape}")
        if self._consumed:
            raise UsageError("this tape has already been walked backward")
        produced = {id(out) for out, _, _ in self._records}
        if id(loss) not in produced:
            raise UsageError("loss was not produced on this tape")
        self._consumed = True

        scratch: dict[int, np.ndarray] = {id(loss): np.ones((), dtype=loss.data.dtype)}
        for out, inputs, backward_rule in reversed(self._records):
            gout = scratch.get(id(out))
            if gout is None:
                continue
            for tensor, gin in zip(inputs, backward_rule(gout)):
                if gin is None:
                    continue
                key = id(tensor)
                held = scratch.get(key)
                # rebind instead of += : rules may hand back aliased arrays
                scratch[key] = gin if held is None else held + gin
        for out, inputs, _ in self._records:
            for tensor in inputs:
                grad = scratch.pop(id(tensor), None)
                if grad is None or id(tensor) in produced:
                    continue
                if tensor.grad is None:
                    tensor.grad = np.array(grad, copy=True)
                else:
                    tensor.grad = tensor.grad + grad


def _emit(out: Tensor, inputs: tuple, backward: Callable) -> Tensor:
    tape = _active_tape()
    if tape is not None:
        tape._record(out, inputs, backward)
    return out


def backward(tape: Tape, loss: Tensor) -> None:
    """Module-level alias for ``tape.backward(loss)``."""
    tape.backward(loss)


# ---------------------------------------------------------------------------
# Arithmetic


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product.  Supports 2Dx2D, 2Dx1D, 1Dx2D and 1Dx1D operands."""
    if a.ndim not in (1, 2) or b.ndim not in (1, 2):
        raise DimensionError(f"matmul supports 1-D/2-D operands, got {a.shape} @ {b.shape}")
    inner_a = a.shape[-1]
    inner_b = b.shape[0]
    if inner_a != inner_b:
        raise DimensionError(f"matmul: inner dimensions disagree: {a.shape} @ {b.shape}")
    out = Tensor(a.data @ b.data)
    adata, bdata = a.data, b.data

    def back(g):
        if a.ndim == 2 and b.ndim == 2:
            return g @ bdata.T, adata.T @ g
        if a.ndim == 2 and b.ndim == 1:  # matvec
            return np.outer(g, bdata), adata.T @ g
        if a.ndim == 1 and b.ndim == 2:  # vecmat
            return bdata @ g, np.outer(adata, g)
        return g * bdata, g * adata  # dot product

    return _emit(out, (a, b), back)


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum.  The single allowed broadcast is [n x d] + [d] (bias row)."""
    bias_row = a.ndim == 2 and b.ndim == 1 and a.shape[1] == b.shape[0]
    if not bias_row and a.shape != b.shape:
        raise DimensionError(f"add: shapes disagree: {a.shape} + {b.shape}")
    out = Tensor(a.data + b.data)

    def back(g):
        return g, g.sum(axis=0) if bias_row else g

    return _emit(out, (a, b), back)


def sub(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise DimensionError(f"sub: shapes disagree: {a.shape} - {b.shape}")
    out = Tensor(a.data - b.data)
    return _emit(out, (a, b), lambda g: (g, -g))


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise (Hadamard) product; operands must have equal shapes."""
    if a.shape != b.shape:
        raise DimensionError(f"mul: shapes disagree: {a.shape} * {b.shape}")
    out = Tensor(a.data * b.data)
    adata, bdata = a.data, b.data
    return _emit(out, (a, b), lambda g: (g * bdata, g * adata))


def scale(x: Tensor, c: float) -> Tensor:
    """Multiply by a plain (non-differentiated) scalar constant."""
    c = float(c)
    out = Tensor(x.data * c)
    return _emit(out, (x,), lambda g: (g * c,))


def tanh(x: Tensor) -> Tensor:
    out = Tensor(np.tanh(x.data))
    ydata = out.data
    return _emit(out, (x,), lambda g: (g * (1.0 - ydata * ydata),))


def _sigmoid_stable(x: np.ndarray) -> np.ndarray:
    # split form avoids exp overflow on large negative inputs
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid(x: Tensor) -> Tensor:
    out = Tensor(_sigmoid_stable(np.asarray(x.data)))
    ydata = out.data
    return _emit(out, (x,), lambda g: (g * ydata * (1.0 - ydata),))


def relu(x: Tensor) -> Tensor:
    out = Tensor(np.maximum(x.data, 0.0))
    xdata = x.data
    return _emit(out, (x,), lambda g: (g * (xdata > 0),))


def absolute(x: Tensor) -> Tensor:
    """|x| with subgradient 0 at exactly 0 (np.sign(0) == 0)."""
    out = Tensor(np.abs(x.data))
    sign = np.sign(x.data)
    return _emit(out, (x,), lambda g: (g * sign,))


# ---------------------------------------------------------------------------
# Shape plumbing


def reshape(x: Tensor, shape) -> Tensor:
    out = Tensor(x.data.reshape(shape))
    old = x.data.shape
    return _emit(out, (x,), lambda g: (g.reshape(old),))


def transpose(x: Tensor) -> Tensor:
    if x.ndim != 2:
        raise DimensionError(f"transpose needs a 2-D tensor, got {x.shape}")
    out = Tensor(x.data.T)
    return _emit(out, (x,), lambda g: (g.T,))


def narrow(x: Tensor, axis: int, start: int, length: int) -> Tensor:
    """Contiguous slice of ``length`` entries along ``axis``; backward zero-pads."""
    if not 0 <= axis < x.ndim:
        raise DimensionError(f"narrow: axis {axis} out of range for shape {x.shape}")
    if start < 0 or start + length > x.shape[axis]:
        raise DimensionError(
            f"narrow: slice [{start}:{start + length}] exceeds axis {axis} of shape {x.shape}"
        )
    index = tuple(
        slice(start, start + length) if d == axis else slice(None) for d in range(x.ndim)
    )
    out = Tensor(x.data[index])
    xshape, xdtype = x.data.shape, x.data.dtype

    def back(g):
        buf = np.zeros(xshape, dtype=xdtype)
        buf[index] = g
        return (buf,)

    return _emit(out, (x,), back)


def concat(parts: Sequence[Tensor], axis: int = 0) -> Tensor:
    parts = list(parts)
    if not parts:
        raise InvalidInputError("concat needs at least one tensor")
    out = Tensor(np.concatenate([p.data for p in parts], axis=axis))
    sizes = [p.shape[axis] for p in parts]

    def back(g):
        grads = []
        offset = 0
        for size in sizes:
            index = tuple(
                slice(offset, offset + size) if d == axis else slice(None)
                for d in range(g.ndim)
            )
            grads.append(g[index])
            offset += size
        return tuple(grads)

    return _emit(out, tuple(parts), back)


def stack(rows: Sequence[Tensor]) -> Tensor:
    """Stack equal-length 1-D tensors into an [n x d] matrix."""
    rows = list(rows)
    if not rows:
        raise InvalidInputError("stack needs at least one row")
    for r in rows:
        if r.ndim != 1 or r.shape != rows[0].shape:
            raise DimensionError(
                f"stack: rows must be equal-length 1-D tensors, got {r.shape} vs {rows[0].shape}"
            )
    out = Tensor(np.stack([r.data for r in rows]))
    return _emit(out, tuple(rows), lambda g: tuple(g[i] for i in range(len(rows))))


def take_rows(x: Tensor, indices) -> Tensor:
    """Gather rows of a 2-D tensor; backward scatter-adds into the source."""
    if x.ndim != 2:
        raise DimensionError(f"take_rows needs a 2-D tensor, got {x.shape}")
    idx = np.asarray(indices, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= x.shape[0]):
        raise InvalidInputError(f"take_rows: index out of range for {x.shape[0]} rows")
    out = Tensor(x.data[idx])
    xshape, xdtype = x.data.shape, x.data.dtype

    def back(g):
        buf = np.zeros(xshape, dtype=xdtype)
        np.add.at(buf, idx, g)
        return (buf,)

    return _emit(out, (x,), back)


# ---------------------------------------------------------------------------
# Reductions, softmax, loss


def _check_mask(mask, n: int, what: str) -> np.ndarray:
    if mask is None:
        return np.ones(n, dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (n,):
        raise DimensionError(f"{what}: mask shape {mask.shape} does not match length {n}")
    return mask


def masked_softmax(scores: Tensor, mask=None) -> Tensor:
    """Softmax over unmasked positions; masked positions get exactly 0.

    Max-subtraction keeps the exponentials finite.  Masked scores are
    excluded before normalization, never merely zeroed after.
    """
    if scores.ndim != 1:
        raise DimensionError(f"masked_softmax needs a 1-D score vector, got {scores.shape}")
    mask = _check_mask(mask, scores.shape[0], "masked_softmax")
    if not mask.any():
        raise InvalidInputError("masked_softmax: all positions are masked")
    live = scores.data[mask]
    e = np.exp(live - live.max())
    probs = np.zeros_like(scores.data)
    probs[mask] = e / e.sum()
    out = Tensor(probs)
    pdata = out.data

    def back(g):
        inner = float((g * pdata).sum())
        gs = pdata * (g - inner)
        gs[~mask] = 0.0
        return (gs,)

    return _emit(out, (scores,), back)


def reduce_sum(x: Tensor, mask=None) -> Tensor:
    """Sum of the unmasked rows of an [n x d] tensor."""
    mask = _reduce_check(x, mask, "reduce_sum")
    out = Tensor(x.data[mask].sum(axis=0))
    n, dtype = x.shape[0], x.data.dtype

    def back(g):
        buf = np.zeros((n, g.shape[0]), dtype=dtype)
        buf[mask] = g
        return (buf,)

    return _emit(out, (x,), back)


def reduce_mean(x: Tensor, mask=None) -> Tensor:
    """Mean of the unmasked rows; divides by the true (unmasked) count."""
    mask = _reduce_check(x, mask, "reduce_mean")
    k = int(mask.sum())
    out = Tensor(x.data[mask].sum(axis=0) / k)
    n, dtype = x.shape[0], x.data.dtype

    def back(g):
        buf = np.zeros((n, g.shape[0]), dtype=dtype)
        buf[mask] = g / k
        return (buf,)

    return _emit(out, (x,), back)


def reduce_max(x: Tensor, mask=None) -> Tensor:
    """Columnwise max over unmasked rows; gradient goes to the first argmax row."""
    mask = _reduce_check(x, mask, "reduce_max")
    live_idx = np.flatnonzero(mask)
    sub = x.data[live_idx]
    argmax = sub.argmax(axis=0)  # first maximal index on ties
    winners = live_idx[argmax]
    out = Tensor(sub.max(axis=0))
    n, d, dtype = x.shape[0], x.shape[1], x.data.dtype

    def back(g):
        buf = np.zeros((n, d), dtype=dtype)
        buf[winners, np.arange(d)] = g
        return (buf,)

    return _emit(out, (x,), back)


def _reduce_check(x: Tensor, mask, what: str) -> np.ndarray:
    if x.ndim != 2:
        raise DimensionError(f"{what} needs an [n x d] tensor, got {x.shape}")
    mask = _check_mask(mask, x.shape[0], what)
    if not mask.any():
        raise InvalidInputError(f"{what}: all rows are masked")
    return mask


def sum_all(x: Tensor) -> Tensor:
    """Sum of every element, as a scalar tensor."""
    out = Tensor(x.data.sum())
    shape, dtype = x.data.shape, x.data.dtype
    return _emit(out, (x,), lambda g: (np.full(shape, g, dtype=dtype),))


def dropout(x: Tensor, p: float, training: bool, rng: np.random.Generator) -> Tensor:
    """Inverted dropout: zero with probability p, scale survivors by 1/(1-p).

    Identity when not training or p == 0.
    """
    if not 0.0 <= p < 1.0:
        raise ConfigError(f"dropout probability must be in [0, 1), got {p}")
    if not training or p == 0.0:
        return x
    keep = (rng.random(x.shape) >= p) / (1.0 - p)
    keep = keep.astype(x.data.dtype)
    out = Tensor(x.data * keep)
    return _emit(out, (x,), lambda g: (g * keep,))


def cross_entropy_from_logits(logits: Tensor, labels) -> Tensor:
    """Mean negative log softmax probability of the true class.

    ``logits`` is [b x k]; ``labels`` holds class indices.  Computed with
    max-subtracted log-sum-exp for stability.
    """
    if logits.ndim != 2:
        raise DimensionError(f"cross_entropy needs [b x k] logits, got {logits.shape}")
    labels = np.asarray(labels, dtype=np.int64)
    b, k = logits.shape
    if labels.shape != (b,):
        raise DimensionError(f"cross_entropy: {b} rows but labels shape {labels.shape}")
    bad = np.flatnonzero((labels < 0) | (labels >= k))
    if bad.size:
        raise DataError(f"label out of range at example {int(bad[0])}: {int(labels[bad[0]])}")

    z = logits.data
    m = z.max(axis=1, keepdims=True)
    shifted = z - m
    lse = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    logprobs = shifted - lse
    out = Tensor(-logprobs[np.arange(b), labels].mean())
    probs = np.exp(logprobs)

    def back(g):
        gz = probs.copy()
        gz[np.arange(b), labels] -= 1.0
        gz *= g / b
        return (gz,)

    return _emit(out, (logits,), back)


def softmax_probs(logits: np.ndarray) -> np.ndarray:
    """Plain (non-taped) stable softmax over a 1-D logit vector."""
    z = np.asarray(logits, dtype=np.float64)
    e = np.exp(z - z.max())
    return e / e.sum()
