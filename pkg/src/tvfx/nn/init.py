"""Seeded weight initializers."""

from __future__ import annotations

import numpy as np


def glorot_uniform(rng: np.random.Generator, shape, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, shape)


def orthogonal(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    """Semi-orthogonal ``(rows, cols)`` matrix from the QR of a Gaussian draw."""
    a = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(a)
    q *= np.sign(np.diag(r))
    return q if rows >= cols else q.T


def lstm_bias(units: int, forget: float = 1.0) -> np.ndarray:
    b = np.zeros(4 * units)
    b[units:2 * units] = forget
    return b
