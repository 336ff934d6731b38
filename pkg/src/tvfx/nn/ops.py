"""Elementwise, shape and reduction ops with their backward rules."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor, as_tensor, record

ACTIVATIONS = ("abs", "softplus", "tanh", "relu", "sigmoid", "linear")


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``g`` down to ``shape`` after numpy broadcasting."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return record(
        "add", a.value + b.value, (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
    )


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return record(
        "sub", a.value - b.value, (a, b),
        lambda g: (_unbroadcast(g, a.shape), -_unbroadcast(g, b.shape)),
    )


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return record(
        "mul", a.value * b.value, (a, b),
        lambda g: (_unbroadcast(g * b.value, a.shape), _unbroadcast(g * a.value, b.shape)),
    )


def scale(a: Tensor, c: float) -> Tensor:
    return record("scale", a.value * c, (a,), lambda g: (g * c,))


def _softplus(x):
    return np.logaddexp(0.0, x)


def _sigmoid(x):
    # the tanh form needs no branch on the sign and cannot overflow
    return 0.5 + 0.5 * np.tanh(0.5 * x)


def activation(kind: str, x: Tensor) -> Tensor:
    v = x.value
    if kind == "abs":
        return record("abs", np.abs(v), (x,), lambda g: (g * np.sign(v),))
    if kind == "softplus":
        return record("softplus", _softplus(v), (x,), lambda g: (g * _sigmoid(v),))
    if kind == "tanh":
        y = np.tanh(v)
        return record("tanh", y, (x,), lambda g: (g * (1.0 - y * y),))
    if kind == "relu":
        return record("relu", np.maximum(v, 0.0), (x,), lambda g: (g * (v > 0),))
    if kind == "sigmoid":
        y = _sigmoid(v)
        return record("sigmoid", y, (x,), lambda g: (g * y * (1.0 - y),))
    if kind == "linear":
        return x
    raise ValueError(f"unknown activation {kind!r}; expected one of {ACTIVATIONS}")


def dense(x: Tensor, W: Tensor, b: Tensor | None = None) -> Tensor:
    """Affine map over the last axis: ``x @ W + b`` with ``W`` shaped (in, out)."""
    if x.shape[-1] != W.shape[0]:
        raise ValueError(f"dense: input has {x.shape[-1]} features, weight expects {W.shape[0]}")
    xv, Wv = x.value, W.value
    y = xv @ Wv
    if b is not None:
        y = y + b.value

    def backward(g):
        gx = g @ Wv.T
        gW = xv.reshape(-1, xv.shape[-1]).T @ g.reshape(-1, g.shape[-1])
        gb = g.reshape(-1, g.shape[-1]).sum(axis=0) if b is not None else None
        return (gx, gW, gb)

    parents = (x, W, b) if b is not None else (x, W)
    return record("dense", y, parents, backward)


def reshape(x: Tensor, shape) -> Tensor:
    old = x.shape
    return record("reshape", x.value.reshape(shape), (x,), lambda g: (g.reshape(old),))


def transpose(x: Tensor, axes) -> Tensor:
    inverse = np.argsort(axes)
    return record("transpose", np.transpose(x.value, axes), (x,), lambda g: (np.transpose(g, inverse),))


def take(x: Tensor, index, axis: int = 0) -> Tensor:
    """Gather along ``axis``; repeated indices accumulate in the backward pass."""
    index = np.asarray(index)
    axis = axis % x.ndim

    def backward(g):
        gx = np.zeros_like(x.value)
        moved = np.moveaxis(gx, axis, 0)
        np.add.at(moved, index, np.moveaxis(g, list(range(axis, axis + index.ndim)), list(range(index.ndim))))
        return (gx,)

    return record("take", np.take(x.value, index, axis=axis), (x,), backward)


def select(x: Tensor, key) -> Tensor:
    """Basic-slicing view ``x[key]`` (no fancy indexing)."""
    def backward(g):
        gx = np.zeros_like(x.value)
        gx[key] = g
        return (gx,)

    return record("select", x.value[key], (x,), backward)


def concat(tensors, axis: int) -> Tensor:
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]
    return record(
        "concat", np.concatenate([t.value for t in tensors], axis=axis), tuple(tensors),
        lambda g: tuple(np.split(g, splits, axis=axis)),
    )


def sum_(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    shape = x.shape

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy(),)

    return record("sum", np.sum(x.value, axis=axis, keepdims=keepdims), (x,), backward)


def mean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    n = x.value.size if axis is None else np.prod([x.shape[a] for a in np.atleast_1d(axis)])
    return scale(sum_(x, axis=axis, keepdims=keepdims), 1.0 / n)


def mae(output: Tensor, target) -> Tensor:
    """Mean absolute error on raw values (the training loss)."""
    target = as_tensor(target)
    d = output.value - target.value
    n = d.size

    def backward(g):
        s = np.sign(d) * (g / n)
        return (s, -s)

    return record("mae", np.mean(np.abs(d)), (output, target), backward)


def l2(x: Tensor, weight: float) -> Tensor:
    return record("l2", weight * np.sum(x.value ** 2), (x,), lambda g: (2.0 * weight * g * x.value,))
