"""Smooth adaptive activation function (piecewise quadratic, C1).

Per channel::

    f(x) = a0 + a1 * x + sum_i c_i * phi_i(x)

where ``phi_i`` is the double integral of the indicator of interval ``i``
of a uniform grid on ``[lo, hi]``::

    phi_i(x) = 0                                for x <= b_i
             = (x - b_i)^2 / 2                  for b_i < x < b_{i+1}
             = d^2 / 2 + d * (x - b_{i+1})      for x >= b_{i+1}

Each ``phi_i`` is C1, so ``f`` is too; outside the grid ``f`` is linear.
Evaluation uses prefix sums of the coefficients, so the cost does not grow
with the number of intervals.
"""

from __future__ import annotations

import numpy as np

from .tensor import Tensor, record


def breakpoints(intervals: int, lo: float = -1.0, hi: float = 1.0) -> np.ndarray:
    return np.linspace(lo, hi, intervals + 1)


def basis(x: np.ndarray, intervals: int, lo: float = -1.0, hi: float = 1.0) -> np.ndarray:
    """Dense ``(..., intervals)`` matrix of ``phi_i(x)`` (used by tests and fitting)."""
    b = breakpoints(intervals, lo, hi)
    d = b[1] - b[0]
    x = np.asarray(x, dtype=np.float64)[..., None]
    left, right = b[:-1], b[1:]
    inside = (x - left) ** 2 / 2.0
    after = d * d / 2.0 + d * (x - right)
    return np.where(x <= left, 0.0, np.where(x >= right, after, inside))


def saaf(x: Tensor, a0: Tensor, a1: Tensor, c: Tensor, lo: float = -1.0, hi: float = 1.0) -> Tensor:
    """Apply a per-channel SAAF over the last axis of ``x``.

    ``a0``, ``a1`` have shape ``(C,)`` and ``c`` has shape ``(C, intervals)``.
    """
    C, K = c.shape
    if x.shape[-1] != C or a0.shape != (C,) or a1.shape != (C,):
        raise ValueError(f"saaf: parameter shapes {a0.shape}, {a1.shape}, {c.shape} do not fit input {x.shape}")
    d = (hi - lo) / K
    b = breakpoints(K, lo, hi)
    xv = x.value
    cv = c.value
    # slot 0: below the grid, slots 1..K: interval slot-1, slot K+1: above the grid.
    # The coefficient table is zero in the two outer slots, so no masking is needed.
    slot = np.clip(np.floor((xv - lo) / d).astype(np.int64) + 1, 0, K + 1)
    flat = slot * C + np.arange(C)
    zero = np.zeros((C, 1))
    s1 = np.concatenate([zero, zero, np.cumsum(cv, axis=1)], axis=1)          # slot m has passed intervals 0..m-2
    s2 = np.concatenate([zero, zero, np.cumsum(cv * (d * d / 2.0 - d * b[1:]), axis=1)], axis=1)
    ctab = np.concatenate([zero, cv, zero], axis=1)
    left = np.concatenate([[0.0], b[:-1], [0.0]])[:, None] + np.zeros((1, C))
    S1 = np.take(s1.T.ravel(), flat)
    cj = np.take(ctab.T.ravel(), flat)
    offset = xv - np.take(left.ravel(), flat)
    y = a0.value + a1.value * xv + np.take(s2.T.ravel(), flat) + d * xv * S1 + cj * offset ** 2 / 2.0

    def backward(g):
        gx = g * (a1.value + d * S1 + cj * offset)
        axes = tuple(range(xv.ndim - 1))
        ga0 = g.sum(axis=axes)
        gxv = g * xv
        ga1 = gxv.sum(axis=axes)
        n = (K + 2) * C
        idx = flat.ravel()
        G = np.bincount(idx, weights=g.ravel(), minlength=n).reshape(K + 2, C)
        GX = np.bincount(idx, weights=gxv.ravel(), minlength=n).reshape(K + 2, C)
        Q = np.bincount(idx, weights=(g * offset ** 2 / 2.0).ravel(), minlength=n).reshape(K + 2, C)
        # c_i is fully passed by every slot > i + 1
        SG = np.cumsum(G[::-1], axis=0)[::-1][2:]
        SGX = np.cumsum(GX[::-1], axis=0)[::-1][2:]
        gc = (d * d / 2.0 - d * b[1:])[:, None] * SG + d * SGX + Q[1:K + 1]
        return (gx, ga0, ga1, gc.T)

    return record("saaf", y, (x, a0, a1, c), backward)
