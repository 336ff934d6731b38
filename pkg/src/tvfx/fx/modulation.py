"""LFO-driven effects: amplitude, delay-line and time-varying filter types."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..audio import AudioClip
from .lfo import Lfo


def _mono(x: AudioClip) -> np.ndarray:
    if x.channels != 1:
        raise ValueError("effect expects a mono clip")
    return x.samples


def fractional_delay(x: np.ndarray, delay: np.ndarray) -> np.ndarray:
    """Read ``x[n - delay[n]]`` with 4-point Lagrange (cubic) interpolation.

    ``delay`` is in samples.  Reads outside the signal hold the edge value,
    so constant inputs stay constant.
    """
    n = len(x)
    if n == 0:
        return x.copy()
    pos = np.arange(n) - np.asarray(delay, dtype=np.float64)
    base = np.floor(pos)
    mu = pos - base
    base = base.astype(np.int64)
    w = (
        -mu * (mu - 1.0) * (mu - 2.0) / 6.0,
        (mu + 1.0) * (mu - 1.0) * (mu - 2.0) / 2.0,
        -(mu + 1.0) * mu * (mu - 2.0) / 2.0,
        (mu + 1.0) * mu * (mu - 1.0) / 6.0,
    )
    out = np.zeros(n)
    for offset, weight in zip((-1, 0, 1, 2), w):
        out += weight * x[np.clip(base + offset, 0, n - 1)]
    return out


def tremolo(x: AudioClip, lfo: Lfo) -> AudioClip:
    s = _mono(x)
    g = (1.0 - lfo.depth) + lfo.depth * lfo.sample(len(s), x.sample_rate, "unit")
    return x.with_samples(s * g)


def vibrato(x: AudioClip, lfo: Lfo, max_delay: float = 0.002) -> AudioClip:
    """Pitch modulation through a delay swept over ``[0, max_delay]`` seconds."""
    s = _mono(x)
    fs = x.sample_rate
    if max_delay * fs < 1.0:
        raise ValueError("max_delay must be at least one sample period")
    d = max_delay * fs * lfo.sample(len(s), fs)
    return x.with_samples(fractional_delay(s, d))


def chorus(
    x: AudioClip,
    voices: int,
    lfos: Lfo | Sequence[Lfo],
    base_delays: float | Sequence[float],
    mix: float = 0.5,
    sweep: float = 0.002,
) -> AudioClip:
    """Dry signal mixed with ``voices`` delayed copies.

    Voice ``v`` is delayed by ``base_delays[v] + sweep * depth * w_v(t)``
    seconds, where ``w_v`` is that voice's LFO waveform.
    """
    s = _mono(x)
    fs = x.sample_rate
    if voices < 1:
        raise ValueError("chorus needs at least one voice")
    lfos = [lfos] * voices if isinstance(lfos, Lfo) else list(lfos)
    base_delays = [base_delays] * voices if np.isscalar(base_delays) else list(base_delays)
    if len(lfos) != voices or len(base_delays) != voices:
        raise ValueError("need one LFO and one base delay per voice")
    wet = np.zeros_like(s)
    for lfo, base in zip(lfos, base_delays):
        d = base + sweep * (2.0 * lfo.sample(len(s), fs) - 1.0)
        wet += fractional_delay(s, d * fs)
    return x.with_samples((1.0 - mix) * s + (mix / voices) * wet)


def flanger(x: AudioClip, lfo: Lfo, min_delay: float = 0.001, max_delay: float = 0.005, mix: float = 0.5) -> AudioClip:
    s = _mono(x)
    fs = x.sample_rate
    if not 0.0 < min_delay < max_delay:
        raise ValueError("flanger needs 0 < min_delay < max_delay")
    d = min_delay + (max_delay - min_delay) * lfo.sample(len(s), fs)
    return x.with_samples((1.0 - mix) * s + mix * fractional_delay(s, d * fs))


def allpass_coefficient(fc, sample_rate: int):
    """Coefficient ``a`` of ``H(z) = (a + z^-1) / (1 + a z^-1)`` with break frequency ``fc``."""
    t = np.tan(np.pi * np.asarray(fc, dtype=np.float64) / sample_rate)
    return (t - 1.0) / (t + 1.0)


def _allpass_cascade(x: np.ndarray, coeffs: np.ndarray, stages: int) -> np.ndarray:
    a = coeffs.tolist()
    y = x.tolist()
    for _ in range(stages):
        x_prev = 0.0
        y_prev = 0.0
        for n, (xn, an) in enumerate(zip(y, a)):
            yn = an * xn + x_prev - an * y_prev
            x_prev = xn
            y_prev = yn
            y[n] = yn
    return np.asarray(y)


def phaser_break_frequency(lfo: Lfo, n: int, sample_rate: int, f_min: float, f_max: float) -> np.ndarray:
    return f_min * (f_max / f_min) ** lfo.sample(n, sample_rate)


def phaser(
    x: AudioClip,
    stages: int = 4,
    lfo: Lfo | None = None,
    f_min: float = 200.0,
    f_max: float = 2000.0,
    mix: float = 0.5,
) -> AudioClip:
    """First-order all-pass cascade with log-swept break frequency, mixed with the input."""
    s = _mono(x)
    fs = x.sample_rate
    lfo = lfo or Lfo()
    if stages < 1 or stages % 2:
        raise ValueError("phaser needs an even, positive number of stages")
    if not 0.0 < f_min < f_max < fs / 2:
        raise ValueError("phaser needs 0 < f_min < f_max < Nyquist")
    fc = phaser_break_frequency(lfo, len(s), fs, f_min, f_max)
    wet = _allpass_cascade(s, allpass_coefficient(fc, fs), stages)
    return x.with_samples((1.0 - mix) * s + mix * wet)


def _svf_peak(x: np.ndarray, fc: np.ndarray, sample_rate: int, q: float, gain_db: float) -> np.ndarray:
    """Trapezoidal state-variable filter used as a peaking filter.

    The normalised band-pass output (unity at ``fc``) is added to the input
    with weight ``10**(gain_db/20) - 1``.
    """
    g = np.tan(np.pi * np.minimum(fc, 0.49 * sample_rate) / sample_rate).tolist()
    r2 = 1.0 / q
    boost = 10.0 ** (gain_db / 20.0) - 1.0
    s1 = s2 = 0.0
    out = np.empty(len(x))
    for n, (xn, gn) in enumerate(zip(x.tolist(), g)):
        h = 1.0 / (1.0 + r2 * gn + gn * gn)
        hp = (xn - (r2 + gn) * s1 - s2) * h
        v1 = gn * hp
        bp = v1 + s1
        s1 = bp + v1
        v2 = gn * bp
        lp = v2 + s2
        s2 = lp + v2
        out[n] = xn + boost * r2 * bp
    return out


def wah_center_frequency(control: np.ndarray, f_low: float = 500.0, f_high: float = 3000.0) -> np.ndarray:
    """Map a [0, 1] control signal log-linearly onto ``[f_low, f_high]``."""
    return f_low * (f_high / f_low) ** np.clip(control, 0.0, 1.0)


def auto_wah_lfo(
    x: AudioClip,
    lfo: Lfo | None = None,
    f_low: float = 500.0,
    f_high: float = 3000.0,
    q: float = 2.0,
    gain_db: float = 12.0,
) -> AudioClip:
    s = _mono(x)
    lfo = lfo or Lfo(rate=5.0)
    fc = wah_center_frequency(lfo.sample(len(s), x.sample_rate, "unit"), f_low, f_high)
    return x.with_samples(_svf_peak(s, fc, x.sample_rate, q, gain_db))


def envelope_follower(x: np.ndarray, sample_rate: int, attack: float = 0.01, release: float = 0.1) -> np.ndarray:
    """One-pole attack/release smoothing of ``|x|``."""
    aa = np.exp(-1.0 / (attack * sample_rate))
    ar = np.exp(-1.0 / (release * sample_rate))
    env = 0.0
    out = np.empty(len(x))
    for n, v in enumerate(np.abs(x).tolist()):
        a = aa if v > env else ar
        env = a * env + (1.0 - a) * v
        out[n] = env
    return out


def auto_wah_env(
    x: AudioClip,
    attack: float = 0.01,
    release: float = 0.1,
    sensitivity: float = 2.0,
    f_low: float = 500.0,
    f_high: float = 3000.0,
    q: float = 2.0,
    gain_db: float = 12.0,
) -> AudioClip:
    s = _mono(x)
    env = envelope_follower(s, x.sample_rate, attack, release)
    fc = wah_center_frequency(sensitivity * env, f_low, f_high)
    return x.with_samples(_svf_peak(s, fc, x.sample_rate, q, gain_db))


DIODE_VB = 0.2
DIODE_VL = 0.4


def diode(v: np.ndarray, vb: float = DIODE_VB, vl: float = DIODE_VL, h: float = 1.0) -> np.ndarray:
    """Static piecewise diode curve: off, quadratic knee, then linear."""
    v = np.asarray(v, dtype=np.float64)
    knee = h * (v - vb) ** 2 / (2.0 * (vl - vb))
    lin = h * (v - vl) + h * (vl - vb) ** 2 / (2.0 * (vl - vb))
    return np.where(v <= vb, 0.0, np.where(v <= vl, knee, lin))


def ring_modulator(x: AudioClip, mod_rate: float = 5.0, diode_bridge: bool = False) -> AudioClip:
    s = _mono(x)
    if mod_rate <= 0:
        raise ValueError("mod_rate must be positive")
    t = np.arange(len(s)) / x.sample_rate
    carrier = np.sin(2.0 * np.pi * mod_rate * t)
    if not diode_bridge:
        return x.with_samples(s * carrier)
    v = 0.5 * s
    y = diode(carrier + v) + diode(-carrier - v) - diode(carrier - v) - diode(-carrier + v)
    return x.with_samples(y)


SPEED_OF_SOUND = 343.0


def leslie(
    x: AudioClip,
    rotor_rate: float = 6.7,
    horn_radius: float = 0.15,
    base_delay: float = 0.002,
    am_depth: float = 0.5,
    phase_offset: float = np.pi,
) -> AudioClip:
    """Rotating-horn model returning a stereo clip.

    Each channel hears the horn through a Doppler delay
    ``base_delay - (r/c) cos(theta)`` and an amplitude that peaks when the
    horn faces that channel's microphone; the right channel's rotor angle
    is offset by ``phase_offset``.
    """
    s = _mono(x)
    fs = x.sample_rate
    t = np.arange(len(s)) / fs
    out = np.empty((len(s), 2))
    for ch, offset in enumerate((0.0, phase_offset)):
        theta = 2.0 * np.pi * rotor_rate * t + offset
        d = (base_delay - horn_radius / SPEED_OF_SOUND * np.cos(theta)) * fs
        gain = 1.0 - 0.5 * am_depth + 0.5 * am_depth * np.cos(theta)
        out[:, ch] = gain * fractional_delay(s, d)
    return AudioClip(out, fs)
