"""Bidirectional LSTM as a single fused op with its own BPTT.

Gate layout along the last weight axis is ``[input, forget, cell, output]``.
``activation`` is used for both the cell candidate and the cell output,
so ``"linear"`` gives ``h = o * c``. An unbounded linear cell can grow
geometrically along the sequence, so ``cell_clip`` optionally saturates the
cell state to ``[-cell_clip, cell_clip]`` (no gradient flows through a
clipped entry).

Dropout is inverted dropout with one mask per sequence, held constant over
time: one mask on the inputs and one on the recurrent state, drawn
separately for each direction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ops import _sigmoid
from .tensor import Parameter, Tensor, record

_ACT = {
    "tanh": (np.tanh, lambda y: 1.0 - y * y),
    "linear": (lambda a: a, lambda y: np.ones_like(y)),
}


@dataclass
class LSTMDirection:
    Wx: Parameter  # (features, 4 * units)
    Wh: Parameter  # (units, 4 * units)
    b: Parameter   # (4 * units,)

    @property
    def units(self) -> int:
        return self.Wh.shape[0]

    def parameters(self) -> list[Parameter]:
        return [self.Wx, self.Wh, self.b]


def _dropout_mask(rng, shape, rate: float) -> np.ndarray | None:
    if rate <= 0.0 or rng is None:
        return None
    return (rng.random(shape) >= rate) / (1.0 - rate)


def _run(x, d: LSTMDirection, mx, mh, act, clip=None):
    f_act, _ = _ACT[act]
    B, S, _ = x.shape
    U = d.units
    xd = x * mx[:, None, :] if mx is not None else x
    xw = xd @ d.Wx.value + d.b.value
    Wh = d.Wh.value
    h = np.zeros((B, U))
    c = np.zeros((B, U))
    hs = np.empty((B, S, U))
    cache = {k: np.empty((B, S, U)) for k in ("i", "f", "g", "o", "c", "ac", "hd", "pass")}
    for t in range(S):
        hd = h * mh if mh is not None else h
        a = xw[:, t] + hd @ Wh
        i = _sigmoid(a[:, :U])
        f = _sigmoid(a[:, U:2 * U])
        g = f_act(a[:, 2 * U:3 * U])
        o = _sigmoid(a[:, 3 * U:])
        c = f * c + i * g
        if clip is None:
            passed = 1.0
        else:
            passed = np.abs(c) < clip
            c = np.clip(c, -clip, clip)
        ac = f_act(c)
        h = o * ac
        hs[:, t] = h
        for k, v in (("i", i), ("f", f), ("g", g), ("o", o), ("c", c), ("ac", ac), ("hd", hd), ("pass", passed)):
            cache[k][:, t] = v
    cache["xd"] = xd
    return hs, cache


def _backprop(gh, d: LSTMDirection, cache, mx, mh, act):
    _, d_act = _ACT[act]
    B, S, U = gh.shape
    Wh = d.Wh.value
    dxw = np.empty((B, S, 4 * U))
    dWh = np.zeros_like(Wh)
    dh_next = np.zeros((B, U))
    dc_next = np.zeros((B, U))
    i, f, g, o, c, ac, hd, passed = (cache[k] for k in ("i", "f", "g", "o", "c", "ac", "hd", "pass"))
    for t in range(S - 1, -1, -1):
        dh = gh[:, t] + dh_next
        dc = (dh * o[:, t] * d_act(ac[:, t]) + dc_next) * passed[:, t]
        c_prev = c[:, t - 1] if t > 0 else 0.0
        da = np.concatenate([
            dc * g[:, t] * i[:, t] * (1.0 - i[:, t]),
            dc * c_prev * f[:, t] * (1.0 - f[:, t]),
            dc * i[:, t] * d_act(g[:, t]),
            dh * ac[:, t] * o[:, t] * (1.0 - o[:, t]),
        ], axis=1)
        dxw[:, t] = da
        dWh += hd[:, t].T @ da
        dhd = da @ Wh.T
        dh_next = dhd * mh if mh is not None else dhd
        dc_next = dc * f[:, t]
    flat = dxw.reshape(-1, 4 * U)
    dWx = cache["xd"].reshape(-1, cache["xd"].shape[-1]).T @ flat
    db = flat.sum(axis=0)
    dx = dxw @ d.Wx.value.T
    if mx is not None:
        dx = dx * mx[:, None, :]
    return dx, dWx, dWh, db


def bilstm(
    x: Tensor,
    forward: LSTMDirection,
    backward: LSTMDirection,
    activation: str = "tanh",
    dropout: float = 0.0,
    recurrent_dropout: float = 0.0,
    rng: np.random.Generator | None = None,
    cell_clip: float | None = None,
) -> Tensor:
    """``(B, steps, features)`` -> ``(B, steps, 2 * units)``; forward half first.

    Dropout is only applied when ``rng`` is given, which callers do in
    training mode only.
    """
    if activation not in _ACT:
        raise ValueError(f"bilstm: unsupported activation {activation!r}")
    if cell_clip is not None and not cell_clip > 0:
        raise ValueError("bilstm: cell_clip must be positive")
    if x.ndim != 3:
        raise ValueError(f"bilstm: expected (batch, steps, features), got {x.shape}")
    if x.shape[1] < 1:
        raise ValueError("bilstm: need at least one step")
    if x.shape[2] != forward.Wx.shape[0]:
        raise ValueError(f"bilstm: input has {x.shape[2]} features, weights expect {forward.Wx.shape[0]}")
    B, _, D = x.shape
    masks = []
    for d in (forward, backward):
        masks.append((_dropout_mask(rng, (B, D), dropout), _dropout_mask(rng, (B, d.units), recurrent_dropout)))
    xr = x.value[:, ::-1]
    hf, cf = _run(x.value, forward, *masks[0], activation, cell_clip)
    hb, cb = _run(xr, backward, *masks[1], activation, cell_clip)
    y = np.concatenate([hf, hb[:, ::-1]], axis=2)
    Uf = forward.units

    def backward_fn(g):
        dxf, *gf = _backprop(g[:, :, :Uf], forward, cf, *masks[0], activation)
        dxb, *gb = _backprop(g[:, ::-1, Uf:], backward, cb, *masks[1], activation)
        dx = dxf + dxb[:, ::-1]
        return (dx, *gf, *gb)

    parents = (x, *forward.parameters(), *backward.parameters())
    return record("bilstm", y, parents, backward_fn)
