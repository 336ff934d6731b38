"""Composite blocks built from the primitive ops."""

from __future__ import annotations

from dataclasses import dataclass

from . import ops
from .tensor import Parameter, Tensor


@dataclass
class DenseLayer:
    W: Parameter
    b: Parameter

    def __call__(self, x: Tensor) -> Tensor:
        return ops.dense(x, self.W, self.b)

    def parameters(self) -> list[Parameter]:
        return [self.W, self.b]


@dataclass
class SaafParams:
    a0: Parameter
    a1: Parameter
    c: Parameter

    def parameters(self) -> list[Parameter]:
        return [self.a0, self.a1, self.c]


def se_block(x: Tensor, squeeze: DenseLayer, excite: DenseLayer) -> Tensor:
    """Squeeze-and-excitation over ``(B, T, C)``: ``x * sigmoid(W2 relu(W1 mean_t |x|))``."""
    pooled = ops.mean(ops.activation("abs", x), axis=1, keepdims=True)
    s = ops.activation("sigmoid", excite(ops.activation("relu", squeeze(pooled))))
    return ops.mul(x, s)
