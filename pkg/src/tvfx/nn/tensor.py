"""Tensors, parameters and the tape that records the backward pass.

Operations only record themselves while a :class:`Tape` is active and at
least one input requires a gradient, so inference runs without any
bookkeeping::

    with Tape() as tape:
        loss = ops.mae(model(x), y)
    tape.backward(loss)
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

_ACTIVE: list["Tape"] = []


class Tensor:
    """A float64 array plus an optional accumulated gradient."""

    __slots__ = ("value", "grad", "requires_grad", "name")

    def __init__(self, value, requires_grad: bool = False, name: str = ""):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self) -> tuple:
        return self.value.shape

    @property
    def ndim(self) -> int:
        return self.value.ndim

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        label = f" {self.name!r}" if self.name else ""
        return f"Tensor{label}(shape={self.shape}, requires_grad={self.requires_grad})"


class Parameter(Tensor):
    """A named trainable tensor.  ``trainable=False`` freezes it."""

    __slots__ = ("trainable",)

    def __init__(self, value, name: str, trainable: bool = True):
        super().__init__(value, requires_grad=trainable, name=name)
        self.trainable = trainable

    def set_trainable(self, flag: bool) -> None:
        self.trainable = flag
        self.requires_grad = flag

    def grad_or_zeros(self) -> np.ndarray:
        return self.grad if self.grad is not None else np.zeros_like(self.value)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def stop_gradient(x: Tensor) -> Tensor:
    """Same values, cut off from the graph."""
    return Tensor(x.value, requires_grad=False, name=x.name)


BackwardFn = Callable[[np.ndarray], Sequence[np.ndarray | None]]


class Tape:
    """Ordered record of executed ops; ``backward`` replays it in reverse."""

    def __init__(self):
        self.entries: list[tuple[Tensor, tuple[Tensor, ...], BackwardFn, str]] = []

    def __enter__(self) -> "Tape":
        _ACTIVE.append(self)
        return self

    def __exit__(self, *exc) -> None:
        _ACTIVE.remove(self)

    def __len__(self) -> int:
        return len(self.entries)

    def backward(self, output: Tensor, grad: np.ndarray | None = None) -> None:
        """Accumulate d(output)/d(leaf) into every leaf's ``grad``.

        ``grad`` defaults to ones, so a scalar loss needs no seed.  Leaf
        gradients add to whatever is already stored; intermediate
        gradients are discarded afterwards.
        """
        seed = np.ones_like(output.value) if grad is None else np.asarray(grad, dtype=np.float64)
        if seed.shape != output.shape:
            raise ValueError(f"seed gradient shape {seed.shape} does not match output {output.shape}")
        pending: dict[int, np.ndarray] = {id(output): seed}
        produced = {id(out) for out, _, _, _ in self.entries}
        for out, parents, fn, op in reversed(self.entries):
            g = pending.pop(id(out), None)
            if g is None:
                continue
            grads = fn(g)
            for parent, pg in zip(parents, grads):
                if pg is None or not parent.requires_grad:
                    continue
                if pg.shape != parent.shape:
                    raise RuntimeError(f"{op}: gradient shape {pg.shape} != input shape {parent.shape}")
                key = id(parent)
                if key in produced:
                    pending[key] = pending[key] + pg if key in pending else pg
                else:
                    parent.grad = pg.copy() if parent.grad is None else parent.grad + pg
        if id(output) not in produced and output.requires_grad:
            output.grad = seed.copy() if output.grad is None else output.grad + seed


def active_tape() -> Tape | None:
    return _ACTIVE[-1] if _ACTIVE else None


def record(op: str, value: np.ndarray, parents: Sequence[Tensor], backward: BackwardFn) -> Tensor:
    """Wrap an op result, registering ``backward`` on the active tape if needed."""
    if not np.all(np.isfinite(value)):
        raise FloatingPointError(f"{op}: non-finite values in output")
    tape = active_tape()
    needs = tape is not None and any(p.requires_grad for p in parents)
    out = Tensor(value, requires_grad=needs)
    if needs:
        tape.entries.append((out, tuple(parents), backward, op))
    return out
