"""Audio clips, WAV I/O, resampling and the framing / overlap-add pair.

Framing convention
------------------
``frame_signal`` pads the clip with ``hop`` zeros in front, so that position
``p`` has its centre frame starting at sample ``p * hop - hop`` of the
original clip.  With a periodic Hann window at 50% overlap every original
sample is then covered by exactly two synthesis windows, and
``overlap_add(..., length=len(clip))`` undoes the padding.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import signal
from scipy.io import wavfile

log = logging.getLogger(__name__)

RESAMPLER_HALF_TAPS = 32
RESAMPLER_KAISER_BETA = 8.6


class WavFormatError(ValueError):
    """Raised for WAV files that are truncated or use an unsupported encoding."""


@dataclass(frozen=True)
class AudioClip:
    """A sampled waveform.

    ``samples`` is 1-D for mono and ``(n, channels)`` for multichannel audio.
    """

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim not in (1, 2):
            raise ValueError(f"samples must be 1-D or 2-D, got shape {samples.shape}")
        if samples.ndim == 2 and samples.shape[1] not in (1, 2):
            raise ValueError(f"only mono or stereo clips are supported, got {samples.shape[1]} channels")
        if samples.ndim == 2 and samples.shape[1] == 1:
            samples = samples[:, 0]
        if int(self.sample_rate) <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    @property
    def channels(self) -> int:
        return 1 if self.samples.ndim == 1 else self.samples.shape[1]

    @property
    def num_frames(self) -> int:
        """Number of sample frames (samples per channel)."""
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        return self.num_frames / self.sample_rate

    def channel(self, index: int) -> "AudioClip":
        if self.samples.ndim == 1:
            if index != 0:
                raise IndexError(index)
            return self
        return AudioClip(self.samples[:, index].copy(), self.sample_rate)

    def to_mono(self) -> "AudioClip":
        if self.samples.ndim == 1:
            return self
        return AudioClip(self.samples.mean(axis=1), self.sample_rate)

    def with_samples(self, samples: np.ndarray) -> "AudioClip":
        return AudioClip(samples, self.sample_rate)


def read_wav(path) -> AudioClip:
    """Read a PCM16 or float32 WAV file into an :class:`AudioClip` scaled to [-1, 1]."""
    path = Path(path)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", wavfile.WavFileWarning)
            rate, data = wavfile.read(path)
    except FileNotFoundError:
        raise
    except (wavfile.WavFileWarning, ValueError, EOFError, OSError) as exc:
        raise WavFormatError(f"{path}: cannot decode WAV ({exc})") from exc
    except Exception as exc:  # struct.error on short headers
        raise WavFormatError(f"{path}: truncated or malformed WAV ({exc})") from exc

    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.float32:
        samples = data.astype(np.float64)
    else:
        raise WavFormatError(f"{path}: unsupported sample encoding {data.dtype}; expected PCM16 or float32")
    if samples.ndim == 2 and samples.shape[1] == 1:
        samples = samples[:, 0]
    return AudioClip(samples, rate)


def write_wav(clip: AudioClip, path, encoding: str = "pcm16") -> None:
    """Write ``clip`` as PCM16 (default) or float32.

    Samples outside [-1, 1] are saturated and a warning is logged.
    """
    samples = clip.samples
    if not np.all(np.isfinite(samples)):
        raise ValueError("cannot write non-finite samples")
    peak = np.max(np.abs(samples)) if samples.size else 0.0
    if peak > 1.0:
        log.warning("write_wav: %s peaks at %.3f, saturating to full scale", path, peak)
        samples = np.clip(samples, -1.0, 1.0)
    if encoding == "pcm16":
        data = np.clip(np.round(samples * 32768.0), -32768, 32767).astype("<i2")
    elif encoding == "float32":
        data = samples.astype("<f4")
    else:
        raise ValueError(f"unknown encoding {encoding!r}")
    wavfile.write(Path(path), clip.sample_rate, data)


def _kaiser_lowpass(up: int, down: int) -> np.ndarray:
    max_rate = max(up, down)
    numtaps = 2 * RESAMPLER_HALF_TAPS * max_rate + 1
    return signal.firwin(numtaps, 1.0 / max_rate, window=("kaiser", RESAMPLER_KAISER_BETA))


def resample_array(x: np.ndarray, source_rate: int, target_rate: int, axis: int = 0) -> np.ndarray:
    """Band-limited polyphase resampling with a Kaiser-windowed sinc.

    The filter spans 64 zero crossings of the lower rate, and the edges are
    padded by line extrapolation so constant and linear signals pass
    unchanged.
    """
    source_rate, target_rate = int(source_rate), int(target_rate)
    if target_rate <= 0 or source_rate <= 0:
        raise ValueError(f"sample rates must be positive, got {source_rate} -> {target_rate}")
    if target_rate == source_rate or x.shape[axis] == 0:
        return x
    g = math.gcd(target_rate, source_rate)
    up, down = target_rate // g, source_rate // g
    return signal.resample_poly(x, up, down, axis=axis, window=_kaiser_lowpass(up, down), padtype="line")


def resample(clip: AudioClip, target_rate: int) -> AudioClip:
    if int(target_rate) == clip.sample_rate:
        return clip
    return AudioClip(resample_array(clip.samples, clip.sample_rate, target_rate), target_rate)


def normalize_amplitude(clip: AudioClip) -> AudioClip:
    peak = np.max(np.abs(clip.samples)) if clip.samples.size else 0.0
    if peak == 0.0:
        raise ValueError("cannot normalize an all-zero clip")
    return clip.with_samples(clip.samples / peak)


@dataclass(frozen=True)
class FrameSet:
    """Context-stacked analysis frames.

    Neighbouring positions share most of their context frames, so the frames
    are stored once in ``source`` (``(num_positions + 2k, N)``) and
    ``index[p, j + k]`` selects the frame at offset ``j`` hops from position
    ``p``.  ``frames`` materialises the ``(num_positions, 2k+1, N)`` view.
    """

    source: np.ndarray
    index: np.ndarray
    frame_size: int
    hop: int
    context: int
    length: int
    sample_rate: int
    window: str = "rectangular"

    @property
    def num_positions(self) -> int:
        return self.index.shape[0]

    @property
    def frames(self) -> np.ndarray:
        return self.source[self.index]

    @property
    def centers(self) -> np.ndarray:
        return self.source[self.context:self.context + self.num_positions]


def _check_frame_size(frame_size: int) -> None:
    if frame_size < 2 or frame_size & (frame_size - 1):
        raise ValueError(f"frame size must be a power of two, got {frame_size}")
    if not 1024 <= frame_size <= 8192:
        log.debug("frame size %d lies outside the usual 1024..8192 range", frame_size)


def num_positions(length: int, frame_size: int) -> int:
    hop = frame_size // 2
    return -(-length // hop) + 1 if length > 0 else 1


def padded_signal(samples: np.ndarray, frame_size: int) -> np.ndarray:
    """The zero-padded timeline that frame centres are sliced from."""
    hop = frame_size // 2
    positions = num_positions(len(samples), frame_size)
    out = np.zeros((positions + 1) * hop)
    out[hop:hop + len(samples)] = samples
    return out


def frame_signal(clip: AudioClip, frame_size: int, context: int) -> FrameSet:
    """Cut ``clip`` into 50%-overlapping rectangular frames with ``context`` neighbours."""
    _check_frame_size(frame_size)
    if clip.channels != 1:
        raise ValueError("frame_signal expects a mono clip")
    if context < 0:
        raise ValueError("context must be non-negative")
    hop = frame_size // 2
    x = clip.samples
    positions = num_positions(len(x), frame_size)
    padded = padded_signal(x, frame_size)
    ext = np.concatenate([np.zeros(context * hop), padded, np.zeros(context * hop)])
    count = positions + 2 * context
    windows = np.lib.stride_tricks.sliding_window_view(ext, frame_size)[::hop][:count]
    index = np.arange(positions)[:, None] + np.arange(2 * context + 1)[None, :]
    return FrameSet(
        source=np.ascontiguousarray(windows),
        index=index,
        frame_size=frame_size,
        hop=hop,
        context=context,
        length=len(x),
        sample_rate=clip.sample_rate,
    )


def hann_window(frame_size: int) -> np.ndarray:
    """Periodic Hann window; sums to exactly 1 at 50% overlap."""
    n = np.arange(frame_size)
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * n / frame_size)


def overlap_add(frame_outputs, frame_size: int, sample_rate: int = 16000, length: int | None = None) -> AudioClip:
    """Hann-windowed overlap-add at hop ``frame_size / 2``.

    Without ``length`` the full padded timeline is returned.  With ``length``
    the leading half-frame of padding added by :func:`frame_signal` is
    removed and the result is cut to ``length`` samples.
    """
    frames = [np.asarray(f, dtype=np.float64) for f in frame_outputs]
    if any(f.shape != (frame_size,) for f in frames):
        shapes = sorted({f.shape for f in frames})
        raise ValueError(f"all frames must have shape ({frame_size},), got {shapes}")
    hop = frame_size // 2
    window = hann_window(frame_size)
    gain = hop / window.sum()
    out = np.zeros((len(frames) + 1) * hop)
    for p, frame in enumerate(frames):
        out[p * hop:p * hop + frame_size] += window * frame
    out *= gain
    if length is not None:
        out = out[hop:hop + length]
    return AudioClip(out, sample_rate)
