"""Dense tensors with a reverse-mode differentiation tape.

Every primitive computes its value with numpy and, when any input requires a
gradient, records a :class:`TapeNode` holding the inputs and a closure that maps
the output gradient to input gradients. :func:`backward` walks the recorded
graph in reverse topological order.

    >>> x = Tensor([3.0], requires_grad=True)
    >>> grads = backward(sum(x * x))
    >>> float(grads[x][0])
    6.0
"""

from __future__ import annotations

import contextlib
import os

import numpy as np

DEBUG = bool(os.environ.get("DUALGRAPH_DEBUG"))

_state = {"grad": True, "dtype": np.float32}


class ShapeError(ValueError):
    """Operand shapes do not conform for a primitive."""


@contextlib.contextmanager
def no_grad():
    """Evaluate without recording anything on the tape."""
    prev = _state["grad"]
    _state["grad"] = False
    try:
        yield
    finally:
        _state["grad"] = prev


@contextlib.contextmanager
def default_dtype(dtype):
    """Set the float type used for freshly created constants."""
    prev = _state["dtype"]
    _state["dtype"] = np.dtype(dtype).type
    try:
        yield
    finally:
        _state["dtype"] = prev


def get_default_dtype():
    return _state["dtype"]


class TapeNode:
    __slots__ = ("op", "inputs", "backward")

    def __init__(self, op, inputs, backward):
        self.op = op
        self.inputs = inputs
        self.backward = backward

    def __repr__(self):
        return f"TapeNode({self.op}, {len(self.inputs)} inputs)"


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "node", "name")
    __array_priority__ = 100

    def __init__(self, data, requires_grad=False, name=None, node=None):
        arr = np.asarray(data)
        if not np.issubdtype(arr.dtype, np.floating):
            arr = arr.astype(_state["dtype"])
        self.data = arr
        self.grad = None
        self.requires_grad = requires_grad
        self.node = node
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def numpy(self):
        return self.data

    def item(self):
        return self.data.item()

    def __repr__(self):
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{label}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return getitem(self, key)


def as_tensor(x):
    if isinstance(x, Tensor):
        return x
    if isinstance(x, (int, float)):
        return Tensor(np.asarray(x, dtype=_state["dtype"]))
    arr = np.asarray(x)
    if not np.issubdtype(arr.dtype, np.floating):
        arr = arr.astype(_state["dtype"])
    return Tensor(arr)


def _record(value, op, inputs, backward_fn):
    if DEBUG and not np.all(np.isfinite(value)):
        raise FloatingPointError(f"{op}: non-finite output")
    if _state["grad"] and any(t.requires_grad for t in inputs):
        return Tensor(value, requires_grad=True, node=TapeNode(op, inputs, backward_fn))
    return Tensor(value)


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _broadcast_check(op, a, b):
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: cannot broadcast shapes {a.shape} and {b.shape}") from None


# -- elementwise arithmetic ------------------------------------------------


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_check("add", a, b)

    def back(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _record(a.data + b.data, "add", (a, b), back)


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_check("sub", a, b)

    def back(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _record(a.data - b.data, "sub", (a, b), back)


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_check("mul", a, b)

    def back(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _record(a.data * b.data, "mul", (a, b), back)


def minimum(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_check("minimum", a, b)
    take_a = a.data <= b.data

    def back(g):
        return (_unbroadcast(np.where(take_a, g, 0.0), a.shape),
                _unbroadcast(np.where(take_a, 0.0, g), b.shape))

    return _record(np.minimum(a.data, b.data), "minimum", (a, b), back)


# -- linear algebra ---------------------------------------------------------


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: shapes {a.shape} and {b.shape} do not align")

    def back(g):
        ga = gb = None
        if a.requires_grad:
            ga = _unbroadcast(np.matmul(g, np.swapaxes(b.data, -1, -2)), a.shape)
        if b.requires_grad:
            gb = _unbroadcast(np.matmul(np.swapaxes(a.data, -1, -2), g), b.shape)
        return ga, gb

    return _record(np.matmul(a.data, b.data), "matmul", (a, b), back)


def spmm(adj, x):
    """Constant (sparse or dense) matrix times tensor: ``adj @ x``."""
    x = as_tensor(x)
    if adj.shape[1] != x.shape[0]:
        raise ShapeError(f"spmm: shapes {adj.shape} and {x.shape} do not align")
    flat = x.data.reshape(x.shape[0], -1)
    out = np.asarray(adj @ flat, dtype=x.dtype).reshape((adj.shape[0],) + x.shape[1:])
    adj_t = adj.T

    def back(g):
        gx = np.asarray(adj_t @ g.reshape(g.shape[0], -1), dtype=g.dtype)
        return (gx.reshape(x.shape),)

    return _record(out, "spmm", (x,), back)


# -- shape manipulation -----------------------------------------------------


def concat(tensors, axis=-1):
    tensors = [as_tensor(t) for t in tensors]
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError:
        shapes = " and ".join(str(t.shape) for t in tensors)
        raise ShapeError(f"concat: shapes {shapes} do not conform on axis {axis}") from None
    ax = axis % out.ndim
    bounds = np.cumsum([0] + [t.shape[ax] for t in tensors])

    def back(g):
        return tuple(
            np.take(g, np.arange(lo, hi), axis=ax) for lo, hi in zip(bounds[:-1], bounds[1:])
        )

    return _record(out, "concat", tuple(tensors), back)


def stack(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    try:
        out = np.stack([t.data for t in tensors], axis=axis)
    except ValueError:
        shapes = " and ".join(str(t.shape) for t in tensors)
        raise ShapeError(f"stack: shapes {shapes} differ") from None
    ax = axis % out.ndim

    def back(g):
        return tuple(np.take(g, k, axis=ax) for k in range(len(tensors)))

    return _record(out, "stack", tuple(tensors), back)


def reshape(x, shape):
    x = as_tensor(x)
    try:
        out = x.data.reshape(shape)
    except ValueError:
        raise ShapeError(f"reshape: cannot reshape {x.shape} to {shape}") from None

    def back(g):
        return (g.reshape(x.shape),)

    return _record(out, "reshape", (x,), back)


def _has_array_index(key):
    if not isinstance(key, tuple):
        key = (key,)
    return any(isinstance(k, (np.ndarray, list)) for k in key)


def getitem(x, key):
    x = as_tensor(x)
    out = x.data[key]
    fancy = _has_array_index(key)

    def back(g):
        gx = np.zeros_like(x.data)
        if fancy:
            np.add.at(gx, key, g)
        else:
            gx[key] += g
        return (gx,)

    return _record(np.array(out, copy=True), "getitem", (x,), back)


def gather_rows(table, ids):
    """Rows of ``table`` selected by integer array ``ids`` (any shape)."""
    table = as_tensor(table)
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise ShapeError(f"gather_rows: index out of range for table of shape {table.shape}")

    def back(g):
        gt = np.zeros_like(table.data)
        np.add.at(gt, ids, g)
        return (gt,)

    return _record(table.data[ids], "gather_rows", (table,), back)


embedding = gather_rows


def pick(x, ids):
    """``out[..., ] = x[..., ids[...]]`` along the last axis."""
    x = as_tensor(x)
    ids = np.asarray(ids, dtype=np.int64)
    if ids.shape != x.shape[:-1]:
        raise ShapeError(f"pick: index shape {ids.shape} does not match {x.shape[:-1]}")
    out = np.take_along_axis(x.data, ids[..., None], axis=-1)[..., 0]

    def back(g):
        gx = np.zeros_like(x.data)
        np.put_along_axis(gx, ids[..., None], g[..., None], axis=-1)
        return (gx,)

    return _record(out, "pick", (x,), back)


def scatter_add(values, index, size):
    """Sum ``values`` into a new last axis of length ``size`` at ``index``.

    ``values`` and ``index`` share a shape ``(..., k)``; the result has shape
    ``(..., size)``. Repeated indices accumulate.
    """
    values = as_tensor(values)
    index = np.asarray(index, dtype=np.int64)
    if index.shape != values.shape:
        raise ShapeError(f"scatter_add: index shape {index.shape} != values shape {values.shape}")
    if index.size and (index.min() < 0 or index.max() >= size):
        raise ShapeError(f"scatter_add: index out of range for size {size}")
    lead = values.shape[:-1]
    rows = int(np.prod(lead)) if lead else 1
    k = values.shape[-1]
    flat_idx = (np.arange(rows)[:, None] * size + index.reshape(rows, k)).ravel()
    out = np.zeros(rows * size, dtype=values.dtype)
    np.add.at(out, flat_idx, values.data.ravel())

    def back(g):
        return (g.reshape(-1)[flat_idx].reshape(values.shape),)

    return _record(out.reshape(lead + (size,)), "scatter_add", (values,), back)


def index_add_rows(values, index, n):
    """Segment sum: ``out[i] = sum(values[k] for k where index[k] == i)``."""
    values = as_tensor(values)
    index = np.asarray(index, dtype=np.int64)
    if index.shape != values.shape[:1]:
        raise ShapeError(f"index_add_rows: index shape {index.shape} vs values {values.shape}")
    out = np.zeros((n,) + values.shape[1:], dtype=values.dtype)
    np.add.at(out, index, values.data)

    def back(g):
        return (g[index],)

    return _record(out, "index_add_rows", (values,), back)


# -- nonlinearities ---------------------------------------------------------


def tanh(x):
    x = as_tensor(x)
    y = np.tanh(x.data)

    def back(g):
        return (g * (1.0 - y * y),)

    return _record(y, "tanh", (x,), back)


def sigmoid(x):
    x = as_tensor(x)
    y = np.empty_like(x.data)
    pos = x.data >= 0
    y[pos] = 1.0 / (1.0 + np.exp(-x.data[pos]))
    ez = np.exp(x.data[~pos])
    y[~pos] = ez / (1.0 + ez)

    def back(g):
        return (g * y * (1.0 - y),)

    return _record(y, "sigmoid", (x,), back)


def relu(x):
    x = as_tensor(x)
    on = x.data > 0

    def back(g):
        return (g * on,)

    return _record(x.data * on, "relu", (x,), back)


def leaky_relu(x, slope=0.2):
    x = as_tensor(x)
    scale = np.where(x.data > 0, 1.0, slope).astype(x.dtype)

    def back(g):
        return (g * scale,)

    return _record(x.data * scale, "leaky_relu", (x,), back)


def exp(x):
    x = as_tensor(x)
    y = np.exp(x.data)

    def back(g):
        return (g * y,)

    return _record(y, "exp", (x,), back)


def log(x, floor=0.0):
    """Natural log; entries below ``floor`` are clamped and pass no gradient."""
    x = as_tensor(x)
    clamped = x.data < floor if floor > 0 else None
    safe = np.maximum(x.data, floor) if floor > 0 else x.data

    def back(g):
        gx = g / safe
        if clamped is not None:
            gx = np.where(clamped, 0.0, gx)
        return (gx,)

    return _record(np.log(safe), "log", (x,), back)


def softmax(x, mask=None):
    """Softmax over the last axis; positions where ``mask`` is 0 get exactly 0."""
    x = as_tensor(x)
    z = x.data
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        z = np.where(mask, z, -np.inf)
    z = z - np.max(z, axis=-1, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=-1, keepdims=True)

    def back(g):
        return (y * (g - (g * y).sum(axis=-1, keepdims=True)),)

    return _record(y.astype(x.dtype, copy=False), "softmax", (x,), back)


def segment_softmax(scores, segments, n):
    """Softmax of ``scores`` rows grouped by ``segments`` (one group per output id)."""
    scores = as_tensor(scores)
    seg = np.asarray(segments, dtype=np.int64)
    s = scores.data
    peak = np.full((n,) + s.shape[1:], -np.inf, dtype=s.dtype)
    np.maximum.at(peak, seg, s)
    e = np.exp(s - peak[seg])
    denom = np.zeros_like(peak)
    np.add.at(denom, seg, e)
    y = e / denom[seg]

    def back(g):
        dot = np.zeros_like(peak)
        np.add.at(dot, seg, g * y)
        return (y * (g - dot[seg]),)

    return _record(y, "segment_softmax", (scores,), back)


def dropout(x, rate, rng, train=True):
    """Inverted dropout: survivors are scaled by ``1 / (1 - rate)``."""
    x = as_tensor(x)
    if not train or rate <= 0.0:
        return x
    if rate >= 1.0:
        raise ValueError("dropout rate must be < 1")
    keep = (rng.random(x.shape) >= rate).astype(x.dtype) / (1.0 - rate)

    def back(g):
        return (g * keep,)

    return _record(x.data * keep, "dropout", (x,), back)


# -- reductions -------------------------------------------------------------


def sum(x, axis=None, keepdims=False):  # noqa: A001 - mirrors numpy
    x = as_tensor(x)
    out = np.sum(x.data, axis=axis, keepdims=keepdims)

    def back(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return _record(np.asarray(out), "sum", (x,), back)


def mean(x, axis=None, keepdims=False):
    x = as_tensor(x)
    count = x.size if axis is None else np.prod([x.shape[a] for a in np.atleast_1d(axis)])
    return mul(sum(x, axis=axis, keepdims=keepdims), 1.0 / count)


# -- backward pass ----------------------------------------------------------


def _topological(root):
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        t, expanded = stack.pop()
        if expanded:
            order.append(t)
            continue
        if id(t) in seen:
            continue
        seen.add(id(t))
        stack.append((t, True))
        if t.node is not None:
            for parent in t.node.inputs:
                if parent.requires_grad and id(parent) not in seen:
                    stack.append((parent, False))
    return order


def backward(loss):
    """Propagate d(loss) to every leaf that requires a gradient.

    Leaf gradients are accumulated into ``.grad`` and also returned as a dict
    keyed by the leaf tensor.
    """
    if loss.data.size != 1:
        raise ValueError(f"backward: loss must be scalar, got shape {loss.shape}")
    if not loss.requires_grad:
        return {}
    grads = {id(loss): np.ones_like(loss.data)}
    leaves = {}
    for t in reversed(_topological(loss)):
        g = grads.pop(id(t), None)
        if g is None:
            continue
        if t.node is None:
            t.grad = g if t.grad is None else t.grad + g
            leaves[t] = t.grad
            continue
        for parent, pg in zip(t.node.inputs, t.node.backward(g)):
            if pg is None or not parent.requires_grad:
                continue
            key = id(parent)
            grads[key] = pg if key not in grads else grads[key] + pg
    return leaves
