"""Convolution, pooling and unpooling along the time axis.

All ops take batches shaped ``(batch, time, channels)``.  Convolutions are
cross-correlations with "same" zero padding: ``(width - 1) // 2`` zeros in
front and the rest behind, so output time length equals input length.
The single-input filterbank and its adjoint are evaluated as matrix
products over sliding windows; the locally connected layer uses FFTs.
"""

from __future__ import annotations

import numpy as np
from scipy import fft as sp_fft

from .tensor import Tensor, record


def _pads(width: int) -> tuple[int, int]:
    left = (width - 1) // 2
    return left, width - 1 - left


def _pad_time(x: np.ndarray, width: int) -> np.ndarray:
    left, right = _pads(width)
    return np.pad(x, ((0, 0), (left, right), (0, 0)))


def _windows(xpad: np.ndarray, width: int) -> np.ndarray:
    # (B, T + w - 1) -> (B * T, w) matrix of sliding windows
    B = xpad.shape[0]
    T = xpad.shape[1] - width + 1
    return np.lib.stride_tricks.sliding_window_view(xpad, width, axis=1).reshape(B * T, width)


def _overlap_taps(v: np.ndarray, B: int, T: int, width: int) -> np.ndarray:
    # v (B * T, w) with v[(b, t), j] landing at padded position t + j; returns the cropped (B, T)
    left, _ = _pads(width)
    taps = np.ascontiguousarray(v.reshape(B, T, width).transpose(2, 0, 1))
    out = np.zeros((B, T + width - 1))
    for j in range(width):
        out[:, j:j + T] += taps[j]
    return out[:, left:left + T]


def _filterbank(x1: np.ndarray, W: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # y[b, t, f] = sum_j xpad[b, t + j] W[f, j]; also returns the window matrix
    B, T = x1.shape
    width = W.shape[1]
    cols = _windows(_pad_time(x1[:, :, None], width)[:, :, 0], width)
    return (cols @ W.T).reshape(B, T, W.shape[0]), cols


def _filterbank_adjoint(g: np.ndarray, W: np.ndarray) -> np.ndarray:
    # adjoint of _filterbank in x: (B, T, F) -> (B, T)
    B, T, F = g.shape
    return _overlap_taps(g.reshape(B * T, F) @ W, B, T, W.shape[1])


def _check_3d(name: str, x: Tensor) -> None:
    if x.ndim != 3:
        raise ValueError(f"{name}: expected (batch, time, channels), got shape {x.shape}")


def conv1d(x: Tensor, W: Tensor) -> Tensor:
    """Single-input-channel filterbank: ``(B, T, 1)`` x ``(F, w)`` -> ``(B, T, F)``."""
    _check_3d("conv1d", x)
    if x.shape[2] != 1:
        raise ValueError(f"conv1d: expected one input channel, got {x.shape[2]}")
    width = W.shape[1]
    if width > x.shape[1]:
        raise ValueError(f"conv1d: kernel width {width} exceeds signal length {x.shape[1]}")
    y, cols = _filterbank(x.value[:, :, 0], W.value)

    def backward(g):
        gx = _filterbank_adjoint(g, W.value)[:, :, None] if x.requires_grad else None
        gW = (cols.T @ g.reshape(-1, g.shape[2])).T if W.requires_grad else None
        return (gx, gW)

    return record("conv1d", y, (x, W), backward)


def _spectral_size(length: int, width: int) -> int:
    return sp_fft.next_fast_len(length + width - 1, real=True)


def conv1d_local(x: Tensor, W: Tensor, b: Tensor | None = None) -> Tensor:
    """Locally connected layer: channel ``c`` is filtered by kernel ``W[c]`` only.

    Evaluated by FFT; the input spectrum is kept for the kernel gradient,
    which is summed over the batch before the inverse transform.
    """
    _check_3d("conv1d_local", x)
    if W.shape[0] != x.shape[2]:
        raise ValueError(f"conv1d_local: {W.shape[0]} kernels for {x.shape[2]} channels")
    B, T, C = x.shape
    width = W.shape[1]
    left, _ = _pads(width)
    n = _spectral_size(T, width)
    # y[t] = sum_j x[t + j - left] W[j]  ==  (x conv reversed W)[t + width - 1 - left]
    shift = width - 1 - left
    X = sp_fft.rfft(x.value, n=n, axis=1)
    Kf = sp_fft.rfft(W.value[:, ::-1].T, n=n, axis=0)            # (n/2+1, C)
    y = sp_fft.irfft(X * Kf, n=n, axis=1)[:, shift:shift + T]
    if b is not None:
        y = y + b.value

    def backward(g):
        G = sp_fft.rfft(g, n=n, axis=1)
        gx = None
        if x.requires_grad:
            # correlation with the reversed kernel = convolution with the kernel
            Kc = sp_fft.rfft(W.value.T, n=n, axis=0)
            gx = sp_fft.irfft(G * Kc, n=n, axis=1)[:, left:left + T]
        gW = None
        if W.requires_grad:
            # gW[c, j] = sum_{b,t} x[t + j - left] g[t]: cross-correlation at lag j - left
            cross = sp_fft.irfft((X * np.conj(G)).sum(axis=0), n=n, axis=0)   # lag L at index L mod n
            lags = (np.arange(width) - left) % n
            gW = cross[lags].T
        gb = g.sum(axis=(0, 1)) if b is not None else None
        return (gx, gW, gb)

    parents = (x, W) if b is None else (x, W, b)
    return record("conv1d_local", y, parents, backward)


def conv1d_transposed_tied(x: Tensor, W: Tensor, kernel_grad: bool = False) -> Tensor:
    """Adjoint of :func:`conv1d` with kernel ``W``: ``(B, T, F)`` -> ``(B, T, 1)``.

    By default ``W`` is a constant here: the layer mirrors the front-end
    kernel but sends it no gradient, so only the analysis side trains it.
    ``kernel_grad=True`` treats the pair as a tied autoencoder and lets
    the gradient reach ``W`` through this layer as well.
    """
    _check_3d("conv1d_transposed_tied", x)
    if x.shape[2] != W.shape[0]:
        raise ValueError(f"conv1d_transposed_tied: input has {x.shape[2]} channels, kernel has {W.shape[0]} filters")
    kernels = W.value.copy()
    xv = x.value
    y = _filterbank_adjoint(xv, kernels)[:, :, None]

    def backward(g):
        gx, cols = _filterbank(g[:, :, 0], kernels)
        gW = (cols.T @ xv.reshape(-1, xv.shape[2])).T if kernel_grad else None
        return (gx if x.requires_grad else None, gW)

    parents = (x, W) if kernel_grad else (x,)
    return record("conv1d_transposed_tied", y, parents, backward)


def max_pool_indexed(x: Tensor, window: int) -> tuple[Tensor, np.ndarray]:
    """Non-overlapping max pool over time.

    Returns the pooled tensor and the absolute time index of each maximum;
    on ties the earliest position wins.
    """
    _check_3d("max_pool_indexed", x)
    B, T, C = x.shape
    if window < 1 or T % window:
        raise ValueError(f"max_pool_indexed: window {window} does not divide length {T}")
    M = T // window
    blocks = x.value.reshape(B, M, window, C)
    local = np.argmax(blocks, axis=2)[:, :, None, :]
    y = np.take_along_axis(blocks, local, axis=2)[:, :, 0, :]
    indices = local[:, :, 0, :] + (np.arange(M) * window)[None, :, None]

    def backward(g):
        gx = np.zeros_like(blocks)
        np.put_along_axis(gx, local, g[:, :, None, :], axis=2)
        return (gx.reshape(B, T, C),)

    return record("max_pool_indexed", y, (x,), backward), indices


def unpool_indices(z: Tensor, indices: np.ndarray, length: int) -> Tensor:
    """Scatter pooled values back to their recorded positions; zeros elsewhere."""
    if indices is None:
        raise ValueError("unpool_indices: indices mode needs the indices recorded by max_pool_indexed")
    _check_3d("unpool_indices", z)
    B, M, C = z.shape
    if indices.shape != z.shape:
        raise ValueError(f"unpool_indices: indices shape {indices.shape} != values shape {z.shape}")
    if length % M:
        raise ValueError(f"unpool_indices: {M} pooled steps do not tile length {length}")
    window = length // M
    local = (indices - (np.arange(M) * window)[None, :, None])[:, :, None, :]
    if np.any(local < 0) or np.any(local >= window):
        raise ValueError("unpool_indices: an index falls outside its pooling window")
    out = np.zeros((B, M, window, C))
    np.put_along_axis(out, local, z.value[:, :, None, :], axis=2)

    def backward(g):
        return (np.take_along_axis(g.reshape(B, M, window, C), local, axis=2)[:, :, 0, :],)

    return record("unpool_indices", out.reshape(B, length, C), (z,), backward)


def interpolation_matrix(steps: int, length: int) -> np.ndarray:
    """``(length, steps)`` linear-interpolation matrix with aligned end points."""
    if steps == 1 or length == 1:
        return np.ones((length, steps)) / steps
    pos = np.arange(length) * (steps - 1) / (length - 1)
    i0 = np.minimum(np.floor(pos).astype(np.int64), steps - 2)
    frac = pos - i0
    m = np.zeros((length, steps))
    rows = np.arange(length)
    m[rows, i0] = 1.0 - frac
    m[rows, i0 + 1] += frac
    return m


def unpool_interpolate(z: Tensor, length: int) -> Tensor:
    """Linear interpolation of every channel from ``steps`` to ``length`` points."""
    _check_3d("unpool_interpolate", z)
    m = interpolation_matrix(z.shape[1], length)
    return record("unpool_interpolate", np.matmul(m, z.value), (z,), lambda g: (np.matmul(m.T, g),))
