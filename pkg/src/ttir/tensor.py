"""Minimal dense-tensor engine with reverse-mode autodiff and Adam.

Tensors wrap numpy arrays. Differentiable ops record themselves on the
active Tape (a thread-local context manager); Tape.backward walks the
record in reverse and fills in ``.grad`` for every tensor that requires
gradients. Outside a Tape context, ops run plain numpy with no recording,
which is the inference path.

Every forward op checks its output for NaN/Inf and raises instead of
propagating garbage. Ops support the shapes the model needs: stacked
matmul on the last two axes, last-axis bias adds, last-axis softmax and
layer norm. Nothing more general than that.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

DEFAULT_DTYPE = np.float32


class Tensor:
    """Dense n-d array plus autodiff bookkeeping."""

    __slots__ = ("data", "requires_grad", "grad")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if not np.issubdtype(arr.dtype, np.floating):
            arr = arr.astype(DEFAULT_DTYPE)
        self.data = arr
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


def as_tensor(x, dtype=None) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x, dtype=dtype)


class _Entry:
    __slots__ = ("inputs", "output", "backward_fn")

    def __init__(self, inputs, output, backward_fn):
        self.inputs = inputs
        self.output = output
        self.backward_fn = backward_fn


_tls = threading.local()


def _active_tape() -> "Tape | None":
    return getattr(_tls, "tape", None)


class Tape:
    """Ordered record of primitive ops for one forward/backward pass.

    Ops append in execution order, so the list is already topologically
    sorted: an op's inputs were produced by earlier entries. backward()
    visits each entry exactly once, in reverse. A tape is confined to the
    thread that opened it.
    """

    def __init__(self):
        self._entries: list[_Entry] = []

    def __enter__(self) -> "Tape":
        if _active_tape() is not None:
            raise RuntimeError("a Tape is already active on this thread")
        _tls.tape = self
        return self

    def __exit__(self, exc_type, exc, tb):
        _tls.tape = None
        return False

    def __len__(self) -> int:
        return len(self._entries)

    def backward(self, loss: Tensor) -> None:
        """Populate ``.grad`` on every requires_grad tensor reachable from loss.

        loss must be a scalar produced by an op recorded on this tape.
        Grads are overwritten, not accumulated across calls.
        """
        if loss.data.ndim != 0:
            raise ValueError(f"backward needs a scalar loss, got shape {loss.data.shape}")
        if not any(e.output is loss for e in self._entries):
            raise ValueError("loss was not produced on this tape")

        grads: dict[int, np.ndarray] = {id(loss): np.asarray(1.0, dtype=loss.dtype)}
        holders: dict[int, Tensor] = {id(loss): loss}
        for entry in reversed(self._entries):
            g_out = grads.get(id(entry.output))
            if g_out is None:
                continue
            for t, g in zip(entry.inputs, entry.backward_fn(g_out)):
                if g is None or not t.requires_grad:
                    continue
                key = id(t)
                if key in grads:
                    grads[key] = grads[key] + g
                else:
                    grads[key] = g
                    holders[key] = t
        for key, t in holders.items():
            if t.requires_grad:
                t.grad = np.asarray(grads[key])


def _check_finite(out: np.ndarray, op: str) -> None:
    if not np.all(np.isfinite(out)):
        raise FloatingPointError(f"{op} produced non-finite values")


def _record(op: str, out_data: np.ndarray, inputs: tuple[Tensor, ...],
            backward_fn: Callable[[np.ndarray], tuple]) -> Tensor:
    _check_finite(out_data, op)
    tape = _active_tape()
    needs = tape is not None and any(t.requires_grad for t in inputs)
    out = Tensor(out_data, requires_grad=needs)
    if needs:
        tape._entries.append(_Entry(inputs, out, backward_fn))
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum g down to `shape` (inverse of the broadcast done in forward)."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, dim in enumerate(shape):
        if dim == 1 and g.shape[i] != 1:
            g = g.sum(axis=i, keepdims=True)
    return g


def _swap(x: np.ndarray) -> np.ndarray:
    return x.swapaxes(-1, -2)


# ---------------------------------------------------------------------------
# primitive ops


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product on the last two axes; leading axes broadcast."""
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim < 2 or b.data.ndim < 2:
        raise ValueError("matmul needs operands with at least 2 axes")
    if a.shape[-1] != b.shape[-2]:
        raise ValueError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    out = np.matmul(a.data, b.data)

    def backward(g):
        ga = _unbroadcast(np.matmul(g, _swap(b.data)), a.shape)
        gb = _unbroadcast(np.matmul(_swap(a.data), g), b.shape)
        return ga, gb

    return _record("matmul", out, (a, b), backward)


def transpose(a: Tensor) -> Tensor:
    """Swap the last two axes."""
    a = as_tensor(a)
    out = np.ascontiguousarray(_swap(a.data))

    def backward(g):
        return (_swap(g),)

    return _record("transpose", out, (a,), backward)


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum; one operand may be a last-axis bias vector."""
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape:
        vec_ok = (b.data.ndim == 1 and a.shape and b.shape[0] == a.shape[-1]) or \
                 (a.data.ndim == 1 and b.shape and a.shape[0] == b.shape[-1])
        if not vec_ok:
            raise ValueError(f"add shape mismatch: {a.shape} + {b.shape}")
    out = a.data + b.data

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _record("add", out, (a, b), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise product of same-shape tensors."""
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape:
        raise ValueError(f"mul shape mismatch: {a.shape} * {b.shape}")
    out = a.data * b.data

    def backward(g):
        return g * b.data, g * a.data

    return _record("mul", out, (a, b), backward)


def scale(a: Tensor, s: float) -> Tensor:
    """Multiply by a python scalar constant."""
    a = as_tensor(a)
    out = a.data * s

    def backward(g):
        return (g * s,)

    return _record("scale", out, (a,), backward)


def relu(a: Tensor) -> Tensor:
    a = as_tensor(a)
    out = np.maximum(a.data, 0)

    def backward(g):
        return (g * (a.data > 0),)

    return _record("relu", out, (a,), backward)


def sigmoid(a: Tensor) -> Tensor:
    """Elementwise 1/(1+e^-x), computed without overflow on either tail."""
    a = as_tensor(a)
    out = _sigmoid_nd(a.data)

    def backward(g):
        return (g * out * (1.0 - out),)

    return _record("sigmoid", out, (a,), backward)


def _sigmoid_nd(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softmax_lastaxis(a: Tensor) -> Tensor:
    """Softmax over the last axis, stabilized by max subtraction."""
    a = as_tensor(a)
    if a.shape[-1] < 1:
        raise ValueError("softmax needs a non-empty last axis")
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=-1, keepdims=True)

    def backward(g):
        inner = (g * out).sum(axis=-1, keepdims=True)
        return (out * (g - inner),)

    return _record("softmax", out, (a,), backward)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to mean 0 / variance 1, then apply gain and bias.

    Variance is the population variance (divide by d). gain and bias are
    vectors over the last axis.
    """
    x, gain, bias = as_tensor(x), as_tensor(gain), as_tensor(bias)
    d = x.shape[-1]
    if d < 2:
        raise ValueError("layer_norm needs last axis >= 2")
    if gain.shape != (d,) or bias.shape != (d,):
        raise ValueError("layer_norm gain/bias must be last-axis vectors")
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = np.mean(xc * xc, axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = xhat * gain.data + bias.data

    def backward(g):
        dxhat = g * gain.data
        term = dxhat - dxhat.mean(axis=-1, keepdims=True) \
            - xhat * np.mean(dxhat * xhat, axis=-1, keepdims=True)
        dx = inv * term
        axes = tuple(range(g.ndim - 1))
        dgain = (g * xhat).sum(axis=axes)
        dbias = g.sum(axis=axes)
        return dx, dgain, dbias

    return _record("layer_norm", out, (x, gain, bias), backward)


def dropout(x: Tensor, p: float, training: bool, rng: np.random.Generator | None = None) -> Tensor:
    """Inverted dropout: zero with probability p, scale survivors by 1/(1-p).

    Identity when not training or p == 0, so inference needs no rescaling.
    Masks come from the caller's rng; a fixed seed gives bit-identical masks.
    """
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout probability must be in [0, 1), got {p}")
    x = as_tensor(x)
    if not training or p == 0.0:
        return x
    if rng is None:
        raise ValueError("training-mode dropout needs an rng")
    keep = (rng.random(x.shape) >= p)
    factor = (keep / (1.0 - p)).astype(x.dtype)
    out = x.data * factor

    def backward(g):
        return (g * factor,)

    return _record("dropout", out, (x,), backward)


def embedding_lookup(table: Tensor, ids: np.ndarray) -> Tensor:
    """Gather rows of table by integer ids; backward scatter-adds."""
    table = as_tensor(table)
    ids = np.asarray(ids)
    if not np.issubdtype(ids.dtype, np.integer):
        raise ValueError("embedding ids must be integers")
    v = table.shape[0]
    if ids.size and (ids.min() < 0 or ids.max() >= v):
        raise IndexError(f"embedding id out of range for table with {v} rows")
    out = table.data[ids]

    def backward(g):
        gt = np.zeros_like(table.data)
        np.add.at(gt, ids.reshape(-1), g.reshape(-1, table.shape[-1]))
        return (gt,)

    return _record("embedding_lookup", out, (table,), backward)


def tensor_sum(a: Tensor) -> Tensor:
    """Sum of all elements, as a scalar tensor."""
    a = as_tensor(a)
    out = a.data.sum()

    def backward(g):
        return (np.broadcast_to(g, a.shape).astype(a.dtype, copy=False),)

    return _record("sum", out, (a,), backward)


def bce_with_logits(logits: Tensor, targets: Tensor, mask: Tensor) -> Tensor:
    """Mean binary cross-entropy over masked cells, in the stable logits form.

    Per cell: max(z,0) - z*t + log1p(exp(-|z|)), which never overflows for
    any finite z. The mean runs over cells where mask == 1.
    """
    logits = as_tensor(logits)
    t = as_tensor(targets).data
    m = as_tensor(mask).data
    if logits.shape != t.shape or logits.shape != m.shape:
        raise ValueError(
            f"bce_with_logits shape mismatch: logits {logits.shape}, "
            f"targets {t.shape}, mask {m.shape}")
    total = m.sum()
    if total == 0:
        raise ValueError("bce_with_logits: mask selects no positions")
    z = logits.data
    elem = np.maximum(z, 0) - z * t + np.log1p(np.exp(-np.abs(z)))
    out = (elem * m).sum() / total

    def backward(g):
        return (g * (_sigmoid_nd(z) - t) * m / total,)

    return _record("bce_with_logits", out, (logits,), backward)


# ---------------------------------------------------------------------------
# Adam


@dataclass
class AdamState:
    """Per-parameter first/second moment estimates plus the step counter."""

    lr: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params: Sequence[Tensor], grads: Sequence[np.ndarray], state: AdamState) -> AdamState:
    """One bias-corrected Adam update, applied to params in place."""
    if len(params) != len(grads):
        raise ValueError("adam_step: params and grads length mismatch")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1 ** state.t
    bc2 = 1.0 - b2 ** state.t
    for i, (p, g) in enumerate(zip(params, grads)):
        g = np.asarray(g)
        if g.shape != p.shape:
            raise ValueError(f"adam_step: grad shape {g.shape} != param shape {p.shape}")
        m = state.m.get(i)
        if m is None:
            m = np.zeros_like(p.data)
            state.m[i] = m
            state.v[i] = np.zeros_like(p.data)
        v = state.v[i]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        mhat = m / bc1
        vhat = v / bc2
        p.data -= (state.lr * mhat / (np.sqrt(vhat) + state.epsilon)).astype(p.dtype, copy=False)
    return state


class Adam:
    """Thin optimizer wrapper over adam_step for a named parameter dict."""

    def __init__(self, params: dict[str, Tensor], lr: float = 3e-4,
                 beta1: float = 0.9, beta2: float = 0.999, epsilon: float = 1e-8):
        self._params = list(params.values())
        self.state = AdamState(lr=lr, beta1=beta1, beta2=beta2, epsilon=epsilon)

    def step(self) -> None:
        grads = []
        for p in self._params:
            if p.grad is None:
                raise ValueError("Adam.step called with a parameter missing its gradient")
            grads.append(p.grad)
        adam_step(self._params, grads, self.state)

    def zero_grad(self) -> None:
        for p in self._params:
            p.grad = None
