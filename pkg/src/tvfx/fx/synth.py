"""Dry source notes: Karplus-Strong plucks and steady harmonic tones."""

from __future__ import annotations

import numpy as np
from scipy import signal

from ..audio import AudioClip

KINDS = ("pluck", "tone")


def _karplus_strong(
    f0: float, n: int, fs: int, t60: float, brightness: float, softness: float, rng: np.random.Generator
) -> np.ndarray:
    # loop filter rho * ((1 - s) + s z^-1) * allpass(c) * z^-L with s = (1 - brightness) / 2;
    # loop delay = L + s (one-zero lowpass) + delta (first-order all-pass tuning)
    s = 0.5 * (1.0 - brightness)
    period = fs / f0
    L = int(np.floor(period - s - 0.1))
    delta = period - s - L
    c = (1.0 - delta) / (1.0 + delta)
    rho = 10.0 ** (-3.0 / (f0 * t60))
    # (1 + c z^-1) - rho z^-L ((1 - s) + s z^-1)(c + z^-1)
    a = np.zeros(L + 3)
    a[0] = 1.0
    a[1] = c
    a[L:L + 3] -= rho * np.array([(1.0 - s) * c, (1.0 - s) + s * c, s])
    # a one-pole lowpass on the noise burst gives the falling partial
    # amplitudes of a finger pluck instead of a flat noise spectrum
    burst = signal.lfilter([1.0 - softness], [1.0, -softness], rng.uniform(-1.0, 1.0, L))
    burst -= burst.mean()
    excitation = np.zeros(n)
    excitation[:min(L, n)] = burst[:n]
    return signal.lfilter([1.0, c], a, excitation)


def _harmonic_tone(f0: float, n: int, fs: int, harmonics: int, fade: float) -> np.ndarray:
    t = np.arange(n) / fs
    out = np.zeros(n)
    for h in range(1, harmonics + 1):
        if h * f0 >= fs / 2:
            break
        out += np.sin(2.0 * np.pi * h * f0 * t) / h
    m = min(int(fade * fs), n // 2)
    if m > 0:
        ramp = 0.5 - 0.5 * np.cos(np.pi * np.arange(m) / m)
        out[:m] *= ramp
        out[n - m:] *= ramp[::-1]
    return out


def synth_note(
    f0: float,
    duration: float = 2.0,
    kind: str = "pluck",
    sample_rate: int = 16000,
    seed: int = 0,
    t60: float = 3.0,
    brightness: float = 0.9,
    softness: float = 0.95,
    harmonics: int = 8,
    fade: float = 0.005,
) -> AudioClip:
    """Synthesize a peak-normalised dry note.

    ``pluck`` is a tuned Karplus-Strong string whose fundamental decay time
    ``t60`` is the same for every pitch; ``brightness`` in [0, 1) moves the
    loop's one-zero filter from the classic two-point average (0) towards
    a flat response, so upper partials ring longer.  ``softness`` in [0, 1)
    is the pole of the lowpass applied to the excitation burst.  ``tone`` sums
    ``harmonics`` sine partials with ``1/h`` amplitudes and short
    raised-cosine fades.
    """
    if not 0.0 <= softness < 1.0:
        raise ValueError(f"softness must lie in [0, 1), got {softness}")
    if kind not in KINDS:
        raise ValueError(f"unknown note kind {kind!r}; expected one of {KINDS}")
    if not 30.0 <= f0 < sample_rate / 4:
        raise ValueError(f"f0 must lie in [30 Hz, Nyquist/2), got {f0}")
    n = int(round(duration * sample_rate))
    if n == 0:
        return AudioClip(np.zeros(0), sample_rate)
    if kind == "pluck":
        x = _karplus_strong(f0, n, sample_rate, t60, brightness, softness, np.random.default_rng(seed))
    else:
        x = _harmonic_tone(f0, n, sample_rate, harmonics, fade)
    peak = np.max(np.abs(x))
    return AudioClip(x / peak if peak > 0 else x, sample_rate)


def midi_to_hz(note: float) -> float:
    return 440.0 * 2.0 ** ((note - 69.0) / 12.0)
