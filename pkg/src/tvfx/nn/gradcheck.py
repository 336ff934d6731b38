"""Central finite-difference check of tape gradients."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import Tape, Tensor


def _scalar_loss(fn, inputs, projection):
    out = fn(*inputs)
    return float(np.sum(out.value * projection))


def gradient_check(
    fn: Callable[..., Tensor],
    inputs: Sequence[Tensor],
    eps: float = 1e-5,
    max_entries: int = 30,
    seed: int = 0,
) -> float:
    """Max relative error between tape and finite-difference gradients.

    ``fn(*inputs)`` may return any shape; it is reduced to a scalar with a
    fixed random projection.  Every input with ``requires_grad`` is checked
    at up to ``max_entries`` sampled entries.  The relative error of an
    entry is ``|a - n| / max(|a|, |n|, floor)`` with ``floor`` equal to
    1e-3 of the largest numeric gradient magnitude in that tensor, so
    entries whose gradient is tiny compared with the rest of the tensor are
    not judged on rounding noise.
    """
    rng = np.random.default_rng(seed)
    probe = fn(*inputs)
    projection = rng.standard_normal(probe.shape)
    for t in inputs:
        t.grad = None
    with Tape() as tape:
        out = fn(*inputs)
    tape.backward(out, projection)

    worst = 0.0
    for t in inputs:
        if not t.requires_grad:
            continue
        analytic = t.grad if t.grad is not None else np.zeros_like(t.value)
        flat = t.value.reshape(-1)
        count = min(max_entries, flat.size)
        picks = rng.choice(flat.size, size=count, replace=False)
        numeric = np.empty(count)
        for n, k in enumerate(picks):
            orig = flat[k]
            flat[k] = orig + eps
            up = _scalar_loss(fn, inputs, projection)
            flat[k] = orig - eps
            down = _scalar_loss(fn, inputs, projection)
            flat[k] = orig
            numeric[n] = (up - down) / (2.0 * eps)
        a = analytic.reshape(-1)[picks]
        floor = max(1e-3 * np.max(np.abs(numeric)), 1e-12)
        rel = np.abs(a - numeric) / np.maximum(np.maximum(np.abs(a), np.abs(numeric)), floor)
        worst = max(worst, float(np.max(rel)))
    return worst
