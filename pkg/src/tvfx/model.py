"""The effect model: adaptive front-end, Bi-LSTM latent space, synthesis back-end.

Data flow for one output frame (defaults in brackets)::

    x        (2k+1, N, 1)      centre frame and k neighbours on each side     [9, 4096]
    X1       conv1d with W1, 32 filters of width 64, no bias
    R        X1 of the centre frame (signed)
    X2       softplus(conv1d_local(|X1|, W2) + b2), width 128
    Z        max pool with window N/64                                         [9, 64, 32]
    latent   the 2k+1 pooled frames concatenated per time step                 [64, 288]
    Z^       BiLSTM 64 (tanh) -> 32 (tanh) -> 16 (linear) -> SAAF              [64, 32]
    X^3      linear interpolation back to N steps
    X^2      X^3 * R
    X^1      SE(SAAF(dense 32 tanh, 16 tanh, 16 tanh, 32)(X^2))
    y^       transposed conv with W1 applied to X^1 + X^2                      [4096, 1]

In pretraining the latent path is skipped: the centre frame's Z is put back
at its max-pool positions, multiplied by R and transposed-convolved.

All positions of a clip are processed as one batch.  Frames shared between
neighbouring context windows go through the front-end once and are then
gathered, which is equivalent to running the front-end per window.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .audio import AudioClip, FrameSet, frame_signal, overlap_add
from .nn import conv, ops
from .nn.init import glorot_uniform, lstm_bias, orthogonal
from .nn.layers import DenseLayer, SaafParams
from .nn.recurrent import LSTMDirection, bilstm
from .nn.saaf import saaf
from .nn.tensor import Parameter, Tensor, stop_gradient

log = logging.getLogger(__name__)

MODEL_FORMAT_VERSION = 1
PAPER_FRAME_SIZES = (1024, 2048, 4096, 8192)
REFERENCE_PARAMETER_COUNT = 300_000
PHASES = ("pretrain", "supervised")
PRETRAIN_PARAMETERS = ("front.W1", "front.W2", "front.b2")


class ModelShapeError(ValueError):
    """A tensor does not have the shape a stage expects."""


@dataclass(frozen=True)
class ModelConfig:
    frame_size: int = 4096
    context: int = 4
    channels: int = 32
    front_width: int = 64
    local_width: int = 128
    pool_length: int = 64
    lstm_units: tuple = (64, 32, 16)
    dnn_units: tuple = (32, 16, 16, 32)
    se_units: tuple = (512, 32)
    saaf_intervals: int = 25
    dropout: float = 0.1
    recurrent_dropout: float = 0.1
    saaf_l2: float = 1e-4
    # cell-state bound for the linear-activation Bi-LSTM; None disables it
    lstm_cell_clip: float | None = 3.0
    # False allows frame sizes below 1024, used by the tiny gradient-check model
    paper_frame_sizes: bool = True

    def __post_init__(self):
        object.__setattr__(self, "lstm_units", tuple(int(u) for u in self.lstm_units))
        object.__setattr__(self, "dnn_units", tuple(int(u) for u in self.dnn_units))
        object.__setattr__(self, "se_units", tuple(int(u) for u in self.se_units))
        self.validate()

    def validate(self) -> None:
        N = self.frame_size
        if N < 2 or N & (N - 1):
            raise ValueError(f"frame_size must be a power of two, got {N}")
        if self.paper_frame_sizes and N not in PAPER_FRAME_SIZES:
            raise ValueError(f"frame_size must be one of {PAPER_FRAME_SIZES}, got {N}")
        if N % self.pool_length:
            raise ValueError(f"pool_length {self.pool_length} does not divide frame_size {N}")
        if self.context < 0:
            raise ValueError("context must be non-negative")
        if self.front_width > N:
            raise ValueError("front_width exceeds frame_size")
        if not self.lstm_units or 2 * self.lstm_units[-1] != self.channels:
            raise ValueError("the last Bi-LSTM must output 2 * units == channels")
        if len(self.dnn_units) < 1 or self.dnn_units[-1] != self.channels:
            raise ValueError("the last dense layer must have `channels` units")
        if len(self.se_units) != 2 or self.se_units[-1] != self.channels:
            raise ValueError("se_units must be (hidden, channels)")
        if not 0.0 <= self.dropout < 1.0 or not 0.0 <= self.recurrent_dropout < 1.0:
            raise ValueError("dropout rates must lie in [0, 1)")
        if self.lstm_cell_clip is not None and not self.lstm_cell_clip > 0:
            raise ValueError("lstm_cell_clip must be positive or None")

    @property
    def pool_window(self) -> int:
        return self.frame_size // self.pool_length

    @property
    def context_frames(self) -> int:
        return 2 * self.context + 1

    @property
    def hop(self) -> int:
        return self.frame_size // 2

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("lstm_units", "dnn_units", "se_units"):
            d[k] = list(d[k])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown model config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def tiny(cls, **overrides) -> "ModelConfig":
        """A few-hundred-parameter model with the same topology, for gradient checks."""
        base = dict(
            frame_size=64, context=1, channels=4, front_width=8, local_width=16, pool_length=8,
            lstm_units=(4, 3, 2), dnn_units=(4, 3, 3, 4), se_units=(8, 4), saaf_intervals=25,
            paper_frame_sizes=False,
        )
        base.update(overrides)
        return cls(**base)

    def with_frame_size(self, frame_size: int, context: int | None = None) -> "ModelConfig":
        return replace(self, frame_size=frame_size, context=self.context if context is None else context)


@dataclass
class TraceRow:
    layer: str
    shape: tuple


@dataclass
class ForwardResult:
    output: Tensor                        # (positions, N)
    trace: list = field(default_factory=list)
    latent: Tensor | None = None          # Z^, (positions, pool_length, channels)


class FxModel:
    """Parameters plus the two forward paths.  ``phase`` selects which one is legal."""

    def __init__(self, config: ModelConfig | None = None, seed: int = 0):
        self.config = config or ModelConfig()
        self.seed = int(seed)
        self.params: dict[str, Parameter] = {}
        self._build(np.random.default_rng([self.seed, 0x5EED]))
        self.phase = "pretrain"
        self.set_phase("pretrain")
        self._check_parameter_count()

    # construction ---------------------------------------------------------------------
    def _add(self, name: str, value: np.ndarray) -> Parameter:
        p = Parameter(value, name=name)
        self.params[name] = p
        return p

    def _saaf_params(self, prefix: str, channels: int) -> SaafParams:
        return SaafParams(
            self._add(f"{prefix}.a0", np.zeros(channels)),
            self._add(f"{prefix}.a1", np.ones(channels)),
            self._add(f"{prefix}.c", np.zeros((channels, self.config.saaf_intervals))),
        )

    def _build(self, rng: np.random.Generator) -> None:
        c = self.config
        C = c.channels
        self._add("front.W1", glorot_uniform(rng, (C, c.front_width), c.front_width, c.front_width * C))
        self._add("front.W2", glorot_uniform(rng, (C, c.local_width), c.local_width, c.local_width))
        self._add("front.b2", np.zeros(C))

        self.lstm: list[tuple[LSTMDirection, LSTMDirection]] = []
        features = c.context_frames * C
        for layer, units in enumerate(c.lstm_units):
            pair = []
            for direction in ("fwd", "bwd"):
                p = f"lstm{layer}.{direction}"
                Wh = np.concatenate([orthogonal(rng, units, units) for _ in range(4)], axis=1)
                pair.append(LSTMDirection(
                    self._add(f"{p}.Wx", glorot_uniform(rng, (features, 4 * units), features, 4 * units)),
                    self._add(f"{p}.Wh", Wh),
                    self._add(f"{p}.b", lstm_bias(units)),
                ))
            self.lstm.append(tuple(pair))
            features = 2 * units
        self.latent_saaf = self._saaf_params("latent.saaf", C)

        self.dnn: list[DenseLayer] = []
        fan = C
        for i, units in enumerate(c.dnn_units):
            self.dnn.append(DenseLayer(
                self._add(f"dnn{i}.W", glorot_uniform(rng, (fan, units), fan, units)),
                self._add(f"dnn{i}.b", np.zeros(units)),
            ))
            fan = units
        self.dnn_saaf = self._saaf_params("dnn.saaf", C)
        hidden = c.se_units[0]
        self.se_squeeze = DenseLayer(
            self._add("se.squeeze.W", glorot_uniform(rng, (C, hidden), C, hidden)),
            self._add("se.squeeze.b", np.zeros(hidden)),
        )
        self.se_excite = DenseLayer(
            self._add("se.excite.W", glorot_uniform(rng, (hidden, C), hidden, C)),
            self._add("se.excite.b", np.zeros(C)),
        )

    def _check_parameter_count(self) -> None:
        default = self.config.to_dict() == ModelConfig().to_dict()
        n = self.num_parameters()
        if default and abs(n - REFERENCE_PARAMETER_COUNT) > 0.2 * REFERENCE_PARAMETER_COUNT:
            raise ModelShapeError(f"default model has {n} parameters, outside 300k +-20%")

    # parameters -----------------------------------------------------------------------
    def parameters(self) -> list[Parameter]:
        return list(self.params.values())

    def trainable_parameters(self) -> list[Parameter]:
        return [p for p in self.params.values() if p.trainable]

    def num_parameters(self) -> int:
        return int(sum(p.value.size for p in self.params.values()))

    def set_phase(self, phase: str) -> None:
        if phase not in PHASES:
            raise ValueError(f"phase must be one of {PHASES}")
        self.phase = phase
        for name, p in self.params.items():
            p.set_trainable(phase == "supervised" or name in PRETRAIN_PARAMETERS)

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def state_dict(self) -> dict[str, np.ndarray]:
        return {f"param.{k}": p.value.copy() for k, p in self.params.items()}

    def load_state_dict(self, arrays: dict[str, np.ndarray]) -> None:
        for k, p in self.params.items():
            key = f"param.{k}"
            if key not in arrays:
                raise KeyError(f"checkpoint lacks parameter {k}")
            if arrays[key].shape != p.value.shape:
                raise ModelShapeError(f"{k}: checkpoint shape {arrays[key].shape} != model shape {p.value.shape}")
            p.value[...] = arrays[key]

    def regularization(self) -> Tensor:
        """L2 penalty on both SAAFs' segment coefficients."""
        w = self.config.saaf_l2
        return ops.add(ops.l2(self.latent_saaf.c, w), ops.l2(self.dnn_saaf.c, w))

    # forward paths --------------------------------------------------------------------
    def _inputs(self, frames) -> tuple[np.ndarray, np.ndarray]:
        c = self.config
        if isinstance(frames, FrameSet):
            source, index = frames.source, frames.index
        else:
            source, index = frames
        source = np.asarray(source, dtype=np.float64)
        index = np.asarray(index)
        if source.ndim != 2 or source.shape[1] != c.frame_size:
            raise ModelShapeError(f"input: frames must be (count, {c.frame_size}), got {source.shape}")
        if index.ndim != 2 or index.shape[1] != c.context_frames:
            raise ModelShapeError(f"input: context index must be (positions, {c.context_frames}), got {index.shape}")
        return source, index

    def _front_end(self, source: np.ndarray):
        c = self.config
        x = Tensor(source[:, :, None])
        X1 = conv.conv1d(x, self.params["front.W1"])
        A = ops.activation("abs", X1)
        L = conv.conv1d_local(A, self.params["front.W2"], self.params["front.b2"])
        X2 = ops.activation("softplus", L)
        Z, idx = conv.max_pool_indexed(X2, c.pool_window)
        return x, X1, A, L, X2, Z, idx

    def forward(self, frames, training: bool = False, rng: np.random.Generator | None = None) -> ForwardResult:
        """Supervised path for every position of ``frames``.

        ``frames`` is a :class:`FrameSet` or a ``(source, index)`` pair.
        ``training`` enables dropout, for which ``rng`` is required.
        """
        if self.phase != "supervised":
            raise RuntimeError("forward needs the supervised phase; call set_phase('supervised')")
        if training and rng is None:
            raise ValueError("training mode needs an rng for dropout")
        c = self.config
        source, index = self._inputs(frames)
        P, K = index.shape
        N, C = c.frame_size, c.channels
        trace = []

        def note(layer, t, per):
            # per = "frame": leading axis is the unique-frame axis, reported as the 2k+1 context
            shape = (K,) + tuple(t.shape[1:]) if per == "frame" else tuple(t.shape[1:])
            trace.append(TraceRow(layer, shape))

        x, X1, A, L, X2, Z, _ = self._front_end(source)
        centers = index[:, c.context]
        R = ops.take(X1, centers, axis=0)
        note("Input", x, "frame")
        note("Conv1D", X1, "frame")
        note("Residual", R, "pos")
        note("Abs", A, "frame")
        note("Conv1D-Local", L, "frame")
        note("Softplus", X2, "frame")
        note("MaxPooling", Z, "frame")

        h = ops.take(Z, index, axis=0)                             # (P, K, M, C)
        h = ops.transpose(h, (0, 2, 1, 3))
        h = ops.reshape(h, (P, c.pool_length, K * C))
        drop = c.dropout if training else 0.0
        rdrop = c.recurrent_dropout if training else 0.0
        last = len(self.lstm) - 1
        for layer, (fwd, bwd) in enumerate(self.lstm):
            act = "linear" if layer == last else "tanh"
            clip = c.lstm_cell_clip if act == "linear" else None
            h = bilstm(h, fwd, bwd, act, drop, rdrop, rng if training else None, cell_clip=clip)
            note("Bi-LSTM", h, "pos")
        s = self.latent_saaf
        Zhat = saaf(h, s.a0, s.a1, s.c)
        note("SAAF", Zhat, "pos")

        X3 = conv.unpool_interpolate(Zhat, N)
        note("Unpooling", X3, "pos")
        X2hat = ops.mul(X3, R)
        note("Multiply", X2hat, "pos")
        d = X2hat
        for i, layer in enumerate(self.dnn):
            d = layer(d)
            if i < len(self.dnn) - 1:
                d = ops.activation("tanh", d)
            note("Dense", d, "pos")
        s = self.dnn_saaf
        d = saaf(d, s.a0, s.a1, s.c)
        note("SAAF", d, "pos")
        a = ops.activation("abs", d)
        note("Abs", a, "pos")
        pooled = ops.mean(a, axis=1, keepdims=True)
        note("Global Average", pooled, "pos")
        e = ops.activation("relu", self.se_squeeze(pooled))
        note("Dense", e, "pos")
        gate = ops.activation("sigmoid", self.se_excite(e))
        note("Dense", gate, "pos")
        X1hat = ops.mul(d, gate)
        note("Multiply", X1hat, "pos")
        X0hat = ops.add(X1hat, X2hat)
        note("Add", X0hat, "pos")
        y = conv.conv1d_transposed_tied(X0hat, stop_gradient(self.params["front.W1"]))
        note("deConv1D", y, "pos")
        if y.shape != (P, N, 1):
            raise ModelShapeError(f"deConv1D: output shape {y.shape} != {(P, N, 1)}")
        return ForwardResult(ops.reshape(y, (P, N)), trace, Zhat)

    def forward_pretrain(self, frames) -> Tensor:
        """Reconstruction of each position's centre frame through the front-end only."""
        if self.phase != "pretrain":
            raise RuntimeError("forward_pretrain needs the pretrain phase; call set_phase('pretrain')")
        c = self.config
        source, index = self._inputs(frames)
        centers = index[:, c.context]
        # only the centre frames matter here
        _, X1, _, _, _, Z, idx = self._front_end(source[centers])
        unpooled = conv.unpool_indices(Z, idx, c.frame_size)
        y = conv.conv1d_transposed_tied(ops.mul(unpooled, X1), self.params["front.W1"], kernel_grad=True)
        return ops.reshape(y, (len(centers), c.frame_size))

    # inference ------------------------------------------------------------------------
    def process_frames(self, frames: FrameSet, batch_positions: int = 64) -> np.ndarray:
        """Supervised outputs for every position, ``(positions, N)``, without a tape."""
        outs = []
        P = frames.num_positions
        for start in range(0, P, batch_positions):
            idx = frames.index[start:start + batch_positions]
            lo, hi = idx.min(), idx.max() + 1
            outs.append(self.forward((frames.source[lo:hi], idx - lo)).output.value)
        return np.concatenate(outs, axis=0) if outs else np.zeros((0, self.config.frame_size))

    def process_clip(self, clip: AudioClip, batch_positions: int = 64) -> AudioClip:
        """Frame, run and overlap-add a mono clip; output length equals input length."""
        c = self.config
        frames = frame_signal(clip.to_mono(), c.frame_size, c.context)
        y = self.process_frames(frames, batch_positions)
        return overlap_add(list(y), c.frame_size, clip.sample_rate, length=clip.num_frames)

    def describe(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "parameters": self.num_parameters(),
            "format": MODEL_FORMAT_VERSION,
        }
