"""Overdrive and feed-forward dynamic range compression."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal

from ..audio import AudioClip
from .modulation import _mono

LEVEL_FLOOR_DB = -200.0


@dataclass(frozen=True)
class CompressorSettings:
    attack: float = 0.010
    release: float = 0.100
    knee: float = 1.0
    ratio: float = 4.0
    threshold: float = -40.0

    def __post_init__(self):
        if self.attack <= 0 or self.release <= 0:
            raise ValueError("attack and release must be positive")
        if self.ratio < 1:
            raise ValueError("ratio must be >= 1")
        if self.knee < 0:
            raise ValueError("knee must be non-negative")


MULTIBAND_LOW = CompressorSettings(attack=0.005, release=0.100, knee=0.0, ratio=3.0, threshold=-30.0)
MULTIBAND_HIGH = CompressorSettings(attack=0.000625, release=0.0125, knee=6.0, ratio=6.0, threshold=-60.0)


def overdrive(x: AudioClip, gain_db: float = 10.0) -> AudioClip:
    """Normalised tanh waveshaper; full-scale input maps to full-scale output."""
    g = 10.0 ** (gain_db / 20.0)
    return x.with_samples(np.tanh(g * x.samples) / np.tanh(g))


def gain_computer(level_db, threshold: float, ratio: float, knee: float) -> np.ndarray:
    """Static soft-knee curve: output level in dB for an input level in dB."""
    level_db = np.asarray(level_db, dtype=np.float64)
    over = level_db - threshold
    out = np.where(2.0 * over > knee, threshold + over / ratio, level_db)
    if knee > 0:
        in_knee = 2.0 * np.abs(over) <= knee
        curve = level_db + (1.0 / ratio - 1.0) * (over + knee / 2.0) ** 2 / (2.0 * knee)
        out = np.where(in_knee, curve, out)
    return out


def compressor_gain_db(x: np.ndarray, sample_rate: int, settings: CompressorSettings) -> np.ndarray:
    """Per-sample gain (dB) applied by :func:`compressor`.

    A peak detector (instant attack, ``release`` decay) feeds the gain
    computer; the resulting dB gain is smoothed by a one-pole filter that
    uses the attack constant while the gain falls and the release constant
    while it recovers.
    """
    fs = sample_rate
    peak_release = np.exp(-1.0 / (settings.release * fs))
    peak = np.empty(len(x))
    p = 0.0
    for n, v in enumerate(np.abs(x).tolist()):
        p = v if v > p else peak_release * p
        peak[n] = p
    level = np.maximum(20.0 * np.log10(np.maximum(peak, 1e-10)), LEVEL_FLOOR_DB)
    target = gain_computer(level, settings.threshold, settings.ratio, settings.knee) - level

    aa = np.exp(-1.0 / (settings.attack * fs))
    ar = np.exp(-1.0 / (settings.release * fs))
    out = np.empty(len(x))
    g = 0.0
    for n, gc in enumerate(target.tolist()):
        c = aa if gc < g else ar
        g = c * g + (1.0 - c) * gc
        out[n] = g
    return out


def _compress(s: np.ndarray, fs: int, settings: CompressorSettings) -> np.ndarray:
    return s * 10.0 ** (compressor_gain_db(s, fs, settings) / 20.0)


def compressor(x: AudioClip, settings: CompressorSettings | None = None) -> AudioClip:
    settings = settings or CompressorSettings()
    return x.with_samples(_compress(_mono(x), x.sample_rate, settings))


def linkwitz_riley_split(x: np.ndarray, sample_rate: int, crossover: float = 500.0):
    """4th-order Linkwitz-Riley band split; ``low + high`` is all-pass."""
    lp = signal.butter(2, crossover, "lowpass", fs=sample_rate, output="sos")
    hp = signal.butter(2, crossover, "highpass", fs=sample_rate, output="sos")
    low = signal.sosfilt(lp, signal.sosfilt(lp, x))
    high = signal.sosfilt(hp, signal.sosfilt(hp, x))
    return low, high


def multiband_compressor(
    x: AudioClip,
    crossover: float = 500.0,
    low: CompressorSettings = MULTIBAND_LOW,
    high: CompressorSettings = MULTIBAND_HIGH,
    return_bands: bool = False,
):
    """Two-band compressor split at ``crossover`` by an LR4 crossover."""
    s = _mono(x)
    fs = x.sample_rate
    lo, hi = linkwitz_riley_split(s, fs, crossover)
    lo = _compress(lo, fs, low)
    hi = _compress(hi, fs, high)
    out = x.with_samples(lo + hi)
    if return_bands:
        return out, (lo, hi)
    return out
