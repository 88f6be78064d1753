"""Dense float64 tensors with a reverse-mode tape.

Operations are plain functions. When a :class:`Tape` is active (``with Tape()
as tape:``) each operation appends a node holding its inputs and a closure that
maps the output gradient to input gradients. Outside a tape the same functions
just compute values, which is what inference uses.
"""
from __future__ import annotations

import contextvars
from typing import Callable, Sequence

import numpy as np

from . import kernels

_active_tape: contextvars.ContextVar[Tape | None] = contextvars.ContextVar("gcnlstm_tape", default=None)


class ShapeError(ValueError):
    pass


class Tensor:
    __slots__ = ("data",)

    def __init__(self, data):
        self.data = np.array(data, dtype=np.float64)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def numpy(self) -> np.ndarray:
        return self.data

    def __repr__(self):
        return f"Tensor(shape={self.shape})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)


class Tape:
    """Ordered record of forward operations."""

    def __init__(self):
        self.nodes: list[tuple[Tensor, tuple[Tensor, ...], Callable]] = []
        self._token = None

    def __enter__(self) -> Tape:
        self._token = _active_tape.set(self)
        return self

    def __exit__(self, *exc):
        _active_tape.reset(self._token)
        self._token = None

    def __len__(self):
        return len(self.nodes)

    def record(self, out: Tensor, inputs: tuple[Tensor, ...], vjp: Callable) -> None:
        self.nodes.append((out, inputs, vjp))

    def backward(self, loss: Tensor) -> dict[int, np.ndarray]:
        """Gradients of ``loss`` keyed by ``id`` of every tensor reached."""
        if loss.size != 1:
            raise ShapeError(f"backward: loss must be scalar, got shape {loss.shape}")
        if not any(out is loss for out, _, _ in self.nodes):
            raise ValueError("backward: loss was not produced on this tape")
        grads = {id(loss): np.ones_like(loss.data)}
        for out, inputs, vjp in reversed(self.nodes):
            g = grads.pop(id(out), None) if out is not loss else grads[id(out)]
            if g is None:
                continue
            for inp, gi in zip(inputs, vjp(g)):
                if gi is None:
                    continue
                key = id(inp)
                if key in grads:
                    grads[key] = grads[key] + gi
                else:
                    grads[key] = gi
        return grads

    def gradient(self, loss: Tensor, params: dict[str, Tensor]) -> dict[str, np.ndarray]:
        """Gradient map for named parameters; untouched parameters get zeros."""
        grads = self.backward(loss)
        return {
            name: np.array(grads[id(p)], dtype=np.float64).reshape(p.shape) if id(p) in grads else np.zeros_like(p.data)
            for name, p in params.items()
        }


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _emit(value: np.ndarray, inputs: Sequence[Tensor], vjp: Callable) -> Tensor:
    out = Tensor.__new__(Tensor)
    out.data = value
    tape = _active_tape.get()
    if tape is not None:
        tape.record(out, tuple(inputs), vjp)
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _broadcast_shape(op: str, a: Tensor, b: Tensor) -> tuple[int, ...]:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} do not broadcast") from None


def _orderfree_sum(x: np.ndarray, axis: int) -> np.ndarray:
    # sorting first makes the result independent of element order
    return np.sort(x, axis=axis).sum(axis=axis)


# -- elementwise -------------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _broadcast_shape("add", a, b)
    return _emit(a.data + b.data, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _broadcast_shape("sub", a, b)
    return _emit(a.data - b.data, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _broadcast_shape("mul", a, b)
    return _emit(
        a.data * b.data,
        (a, b),
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
    )


def add_n(terms: Sequence[Tensor]) -> Tensor:
    terms = [_as_tensor(t) for t in terms]
    if not terms:
        raise ShapeError("add_n: no terms")
    shape = terms[0].shape
    for t in terms[1:]:
        if t.shape != shape:
            raise ShapeError(f"add_n: shapes {shape} and {t.shape} differ")
    total = terms[0].data.copy()
    for t in terms[1:]:
        total += t.data
    return _emit(total, terms, lambda g: [g] * len(terms))


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    return _emit(np.where(mask, x.data, 0.0), (x,), lambda g: (g * mask,))


def sigmoid(x: Tensor) -> Tensor:
    s = kernels._sigmoid_np(np.atleast_1d(x.data)).reshape(x.shape)
    return _emit(s, (x,), lambda g: (g * s * (1.0 - s),))


def tanh(x: Tensor) -> Tensor:
    t = np.tanh(x.data)
    return _emit(t, (x,), lambda g: (g * (1.0 - t * t),))


def log(x: Tensor) -> Tensor:
    return _emit(np.log(x.data), (x,), lambda g: (g / x.data,))


# -- linear algebra ----------------------------------------------------------


def matmul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.ndim not in (1, 2) or b.data.ndim not in (1, 2) or a.shape[-1] != b.shape[0]:
        raise ShapeError(f"matmul: shapes {a.shape} and {b.shape} are incompatible")

    def vjp(g):
        A, B = a.data, b.data
        if A.ndim == 1 and B.ndim == 1:
            return g * B, g * A
        if A.ndim == 1:
            return B @ g, np.outer(A, g)
        if B.ndim == 1:
            return np.outer(g, B), A.T @ g
        return g @ B.T, A.T @ g

    return _emit(a.data @ b.data, (a, b), vjp)


def affine(x, W, b=None) -> Tensor:
    """``x @ W.T + b`` for a vector or a row batch ``x``; ``W`` is (out, in)."""
    x, W = _as_tensor(x), _as_tensor(W)
    if W.data.ndim != 2 or x.data.ndim not in (1, 2) or x.shape[-1] != W.shape[1]:
        raise ShapeError(f"affine: input shape {x.shape} and weight shape {W.shape} are incompatible")
    y = x.data @ W.data.T
    if b is None:
        return _emit(y, (x, W), lambda g: (g @ W.data, np.outer(g, x.data) if g.ndim == 1 else g.T @ x.data))
    b = _as_tensor(b)
    if b.shape != (W.shape[0],):
        raise ShapeError(f"affine: bias shape {b.shape} does not match weight shape {W.shape}")

    def vjp(g):
        if g.ndim == 1:
            return g @ W.data, np.outer(g, x.data), g
        return g @ W.data, g.T @ x.data, g.sum(axis=0)

    return _emit(y + b.data, (x, W, b), vjp)


def reshape(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    x = _as_tensor(x)
    try:
        y = x.data.reshape(shape)
    except ValueError:
        raise ShapeError(f"reshape: cannot reshape {x.shape} to {shape}") from None
    return _emit(y, (x,), lambda g: (g.reshape(x.shape),))


def concat(parts: Sequence[Tensor], axis: int = 0) -> Tensor:
    parts = [_as_tensor(p) for p in parts]
    try:
        y = np.concatenate([p.data for p in parts], axis=axis)
    except ValueError:
        raise ShapeError(f"concat: shapes {[p.shape for p in parts]} do not concatenate on axis {axis}") from None
    cuts = np.cumsum([p.shape[axis] for p in parts])[:-1]
    return _emit(y, parts, lambda g: np.split(g, cuts, axis=axis))


# -- reductions --------------------------------------------------------------


def sum(x: Tensor) -> Tensor:  # noqa: A001
    return _emit(np.array(x.data.sum()), (x,), lambda g: (np.full(x.shape, float(g)),))


def mean(x: Tensor, axis: int = 0) -> Tensor:
    n = x.shape[axis]
    y = _orderfree_sum(x.data, axis) / n

    def vjp(g):
        return (np.broadcast_to(np.expand_dims(g, axis), x.shape) / n,)

    return _emit(y, (x,), vjp)


def weighted_sum(weights: Tensor, rows: Tensor) -> Tensor:
    """``sum_i weights[i] * rows[i]`` for weights (K,) and rows (K, D)."""
    if weights.data.ndim != 1 or rows.data.ndim != 2 or weights.shape[0] != rows.shape[0]:
        raise ShapeError(f"weighted_sum: weights {weights.shape} and rows {rows.shape} are incompatible")
    y = _orderfree_sum(weights.data[:, None] * rows.data, 0)
    return _emit(y, (weights, rows), lambda g: (rows.data @ g, np.outer(weights.data, g)))


# -- probabilities -----------------------------------------------------------


def _softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / np.expand_dims(_orderfree_sum(e, -1), -1)


def _log_softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=-1, keepdims=True)
    return shifted - np.log(np.expand_dims(_orderfree_sum(np.exp(shifted), -1), -1))


def softmax(x: Tensor) -> Tensor:
    p = _softmax(x.data)
    return _emit(p, (x,), lambda g: (p * (g - (g * p).sum(axis=-1, keepdims=True)),))


def log_softmax(x: Tensor) -> Tensor:
    lp = _log_softmax(x.data)
    p = np.exp(lp)
    return _emit(lp, (x,), lambda g: (g - p * g.sum(axis=-1, keepdims=True),))


def cross_entropy(logits: Tensor, target) -> Tensor:
    """-log softmax(logits)[target]; a row batch returns the mean over rows."""
    lp = _log_softmax(logits.data)
    if logits.data.ndim == 1:
        t = int(target)
        if not 0 <= t < logits.shape[0]:
            raise ShapeError(f"cross_entropy: target {t} out of range for {logits.shape[0]} classes")

        def vjp(g):
            d = np.exp(lp)
            d[t] -= 1.0
            return (g * d,)

        return _emit(np.array(-lp[t]), (logits,), vjp)
    t = np.asarray(target, dtype=np.int64)
    if logits.data.ndim != 2 or t.shape != (logits.shape[0],):
        raise ShapeError(f"cross_entropy: logits {logits.shape} and targets {t.shape} are incompatible")
    rows = np.arange(len(t))
    n = len(t)

    def vjp_batch(g):
        d = np.exp(lp)
        d[rows, t] -= 1.0
        return (g * d / n,)

    return _emit(np.array(-lp[rows, t].mean()), (logits,), vjp_batch)


# -- lookups and fused cells -------------------------------------------------


def embedding(table: Tensor, index: int) -> Tensor:
    """Column ``index`` of a (D, V) embedding matrix."""
    V = table.shape[1]
    if not 0 <= index < V:
        raise ShapeError(f"embedding: index {index} out of range for table {table.shape}")

    def vjp(g):
        d = np.zeros_like(table.data)
        d[:, index] = g
        return (d,)

    return _emit(table.data[:, index].copy(), (table,), vjp)


def lstm_cell(x: Tensor, h: Tensor, c: Tensor, W: Tensor, b: Tensor) -> tuple[Tensor, Tensor]:
    H = h.shape[0]
    if W.shape != (4 * H, x.shape[0] + H) or b.shape != (4 * H,) or c.shape != (H,):
        raise ShapeError(
            f"lstm_cell: input {x.shape}, hidden {h.shape}, cell {c.shape}, weight {W.shape}, bias {b.shape} are incompatible"
        )
    h_new, c_new, acts, tc = kernels.lstm_forward(x.data, h.data, c.data, W.data, b.data)
    # both outputs share one backward; the pair is recorded through a packed node
    packed_in = (x, h, c, W, b)

    def vjp(g):
        dh_new, dc_new = g[:H], g[H:]
        dx, dh, dc, dW, db = kernels.lstm_backward(dh_new, dc_new, x.data, h.data, c.data, W.data, acts, tc)
        return dx, dh, dc, dW, db

    packed = _emit(np.concatenate((h_new, c_new)), packed_in, vjp)
    h_out = _emit(h_new, (packed,), lambda g: (np.concatenate((g, np.zeros(H))),))
    c_out = _emit(c_new, (packed,), lambda g: (np.concatenate((np.zeros(H), g)),))
    return h_out, c_out


def graph_conv(
    X: Tensor,
    W: Tensor,
    b: Tensor,
    gw: Tensor | None,
    gb: Tensor | None,
    incidences: tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray],
) -> Tensor:
    """ReLU of summed, optionally gated messages ``g_e * (W[wi] x_src + b[bi])``.

    ``incidences`` is ``(tgt, src, wi, bi)``; ``W`` is (M, D, D), ``b`` is
    (L, D), ``gw`` (M, D) and ``gb`` (L,) or both None for ungated messages.
    """
    tgt, src, wi, bi = incidences
    K, D = X.shape
    M, L = W.shape[0], b.shape[0]
    if W.shape[1:] != (D, D) or b.shape[1:] != (D,):
        raise ShapeError(f"graph_conv: features {X.shape}, weights {W.shape}, biases {b.shape} are incompatible")
    if len(tgt) and (tgt.max() >= K or src.max() >= K or wi.max() >= M or bi.max() >= L):
        raise ShapeError("graph_conv: incidence index out of range")
    gated = gw is not None
    if gated and (gw.shape != (M, D) or gb.shape != (L,)):
        raise ShapeError(f"graph_conv: gate weights {gw.shape} / biases {gb.shape} do not match ({M}, {D}) / ({L},)")
    gw_data = gw.data if gated else np.zeros((M, D))
    gb_data = gb.data if gated else np.zeros(L)
    out, pre, lin, gate = kernels.graph_conv_forward(X.data, W.data, b.data, gw_data, gb_data, tgt, src, wi, bi, gated)

    def vjp(g):
        dX, dW, db, dgw, dgb = kernels.graph_conv_backward(
            np.ascontiguousarray(g), X.data, W.data, gw_data, tgt, src, wi, bi, pre, lin, gate, gated, L
        )
        return (dX, dW, db, dgw, dgb) if gated else (dX, dW, db)

    inputs = (X, W, b, gw, gb) if gated else (X, W, b)
    return _emit(out, inputs, vjp)


OPS = {
    "add": add,
    "sub": sub,
    "mul": mul,
    "add_n": add_n,
    "relu": relu,
    "sigmoid": sigmoid,
    "tanh": tanh,
    "log": log,
    "matmul": matmul,
    "affine": affine,
    "reshape": reshape,
    "concat": concat,
    "sum": sum,
    "mean": mean,
    "weighted_sum": weighted_sum,
    "softmax": softmax,
    "log_softmax": log_softmax,
    "cross_entropy": cross_entropy,
    "embedding": embedding,
    "lstm_cell": lstm_cell,
    "graph_conv": graph_conv,
}


def forward(kind: str, *inputs, **kw):
    """Apply the op named ``kind``; see :data:`OPS`."""
    try:
        op = OPS[kind]
    except KeyError:
        raise ValueError(f"unknown op kind {kind!r}") from None
    return op(*inputs, **kw)
