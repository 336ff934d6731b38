"""Energy-normalised MAE and the modulation-spectrum Euclidean distance (msed).

msed pipeline, per signal:

1. 12 fourth-order all-pole gammatone filters, centres log-spaced
   26 Hz .. 6950 Hz, bandwidth ``1.019 * ERB(fc)``.
2. Envelope of each band = ``|hilbert(band)|``, resampled to 400 Hz.
3. 12 second-order band-pass modulation filters (Q = 1), centres
   log-spaced 0.5 Hz .. 100 Hz, applied to every envelope.
4. Each modulation-filter output is Fourier transformed; its one-sided
   power in the summary bands 0.5-4, 4.5-10, 10.5-20 and 20.5-100 Hz is
   averaged over the modulation filters and divided by the envelope's DC
   power (squared mean).

msed is then the Euclidean distance between the two signals' 4-vectors,
averaged over the 12 gammatone bands.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import signal

from .audio import AudioClip, resample, resample_array

log = logging.getLogger(__name__)

ANALYSIS_RATE = 16000
ENVELOPE_RATE = 400
GAMMATONE_BANDS = 12
GAMMATONE_RANGE = (26.0, 6950.0)
GAMMATONE_ORDER = 4
MODULATION_BANDS = 12
MODULATION_RANGE = (0.5, 100.0)
MODULATION_Q = 1.0
# contiguous partition of the listed summary bands at the 0.5 Hz grid midpoints
SUMMARY_BANDS = ((0.5, 4.0), (4.5, 10.0), (10.5, 20.0), (20.5, 100.0))
SUMMARY_EDGES = (0.25, 4.25, 10.25, 20.25, 100.25)

_short_clip_warned = False


def _as_mono_array(clip) -> tuple[np.ndarray, int | None]:
    if isinstance(clip, AudioClip):
        if clip.channels != 1:
            raise ValueError("metrics expect mono clips")
        return clip.samples, clip.sample_rate
    return np.asarray(clip, dtype=np.float64), None


def energy_normalized_mae(target, output) -> float:
    """Mean absolute difference after scaling both signals to unit RMS."""
    t, _ = _as_mono_array(target)
    o, _ = _as_mono_array(output)
    if t.shape != o.shape:
        raise ValueError(f"length mismatch: target {t.shape} vs output {o.shape}")
    rt = np.sqrt(np.mean(t ** 2)) if t.size else 0.0
    ro = np.sqrt(np.mean(o ** 2)) if o.size else 0.0
    if rt == 0.0 or ro == 0.0:
        raise ValueError("energy-normalized mae is undefined for an all-zero signal")
    return float(np.mean(np.abs(t / rt - o / ro)))


def erb(fc):
    """Glasberg & Moore equivalent rectangular bandwidth in Hz."""
    return 24.7 + 0.107939 * np.asarray(fc, dtype=np.float64)


@dataclass(frozen=True)
class GammatoneBank:
    sample_rate: int = ANALYSIS_RATE
    num_bands: int = GAMMATONE_BANDS
    f_low: float = GAMMATONE_RANGE[0]
    f_high: float = GAMMATONE_RANGE[1]
    order: int = GAMMATONE_ORDER

    @property
    def center_frequencies(self) -> np.ndarray:
        return np.geomspace(self.f_low, self.f_high, self.num_bands)

    def filter(self, x: np.ndarray) -> np.ndarray:
        """Band signals, shape ``(num_bands, len(x))``.

        Each band is a cascade of ``order`` identical complex one-pole
        sections with unity gain at the centre frequency; twice the real
        part is the real band-pass output.
        """
        out = np.empty((self.num_bands, len(x)))
        for i, fc in enumerate(self.center_frequencies):
            r = np.exp(-2.0 * np.pi * 1.019 * erb(fc) / self.sample_rate)
            pole = r * np.exp(2j * np.pi * fc / self.sample_rate)
            y = x.astype(np.complex128)
            for _ in range(self.order):
                y = signal.lfilter([1.0 - r], [1.0, -pole], y)
            out[i] = 2.0 * y.real
        return out

    def response(self, freqs) -> np.ndarray:
        """Magnitude response of every band at ``freqs`` (Hz)."""
        z = np.exp(-2j * np.pi * np.asarray(freqs, dtype=np.float64) / self.sample_rate)
        out = []
        for fc in self.center_frequencies:
            r = np.exp(-2.0 * np.pi * 1.019 * erb(fc) / self.sample_rate)
            pole = r * np.exp(2j * np.pi * fc / self.sample_rate)
            h = ((1.0 - r) / (1.0 - pole * z)) ** self.order
            out.append(np.abs(h))
        return np.array(out)


@dataclass(frozen=True)
class ModulationBank:
    sample_rate: int = ENVELOPE_RATE
    num_bands: int = MODULATION_BANDS
    f_low: float = MODULATION_RANGE[0]
    f_high: float = MODULATION_RANGE[1]
    q: float = MODULATION_Q

    @property
    def center_frequencies(self) -> np.ndarray:
        return np.geomspace(self.f_low, self.f_high, self.num_bands)

    def coefficients(self):
        """Constant-peak-gain biquad band-pass ``(b, a)`` per band."""
        coefs = []
        for f0 in self.center_frequencies:
            w0 = 2.0 * np.pi * f0 / self.sample_rate
            alpha = np.sin(w0) / (2.0 * self.q)
            b = np.array([alpha, 0.0, -alpha])
            a = np.array([1.0 + alpha, -2.0 * np.cos(w0), 1.0 - alpha])
            coefs.append((b / a[0], a / a[0]))
        return coefs

    def filter(self, env: np.ndarray) -> np.ndarray:
        return np.stack([signal.lfilter(b, a, env) for b, a in self.coefficients()])


@dataclass(frozen=True)
class ModulationSpectrum:
    """DC-normalised modulation energies, shape ``(12, 4)``."""

    energies: np.ndarray
    gammatone_centers: np.ndarray
    band_edges: tuple = SUMMARY_BANDS

    def dominant_band(self) -> np.ndarray:
        return np.argmax(self.energies, axis=1)


def gammatone_envelopes(clip, bank: GammatoneBank | None = None) -> np.ndarray:
    """Hilbert envelopes of the gammatone bands at 400 Hz, shape ``(12, M)``."""
    x, fs = _as_mono_array(clip)
    fs = fs or ANALYSIS_RATE
    if fs != ANALYSIS_RATE:
        x = resample(AudioClip(x, fs), ANALYSIS_RATE).samples
    bank = bank or GammatoneBank()
    if len(x) * ENVELOPE_RATE // ANALYSIS_RATE < 3:
        raise ValueError("clip too short: fewer than 3 envelope samples at 400 Hz")
    bands = bank.filter(x)
    env = np.abs(signal.hilbert(bands, axis=1))
    return resample_array(env, ANALYSIS_RATE, ENVELOPE_RATE, axis=1)


def modulation_spectrum(clip) -> ModulationSpectrum:
    envs = gammatone_envelopes(clip)
    m = envs.shape[1]
    global _short_clip_warned
    if m < 2 * ENVELOPE_RATE / MODULATION_RANGE[0] and not _short_clip_warned:
        # once per process: evaluation loops would otherwise repeat it for every clip
        log.warning("clip shorter than two periods of %.1f Hz; lowest modulation band is marginal", MODULATION_RANGE[0])
        _short_clip_warned = True
    freqs = np.fft.rfftfreq(m, 1.0 / ENVELOPE_RATE)
    band_of_bin = np.digitize(freqs, SUMMARY_EDGES) - 1
    mod_bank = ModulationBank()
    energies = np.zeros((envs.shape[0], len(SUMMARY_BANDS)))
    for g, env in enumerate(envs):
        dc_power = np.mean(env) ** 2
        if dc_power <= 0.0:
            continue
        spec = np.fft.rfft(mod_bank.filter(env), axis=1)
        power = 2.0 * np.abs(spec) ** 2 / m ** 2
        per_bin = power.mean(axis=0)
        for b in range(len(SUMMARY_BANDS)):
            energies[g, b] = per_bin[band_of_bin == b].sum() / dc_power
    return ModulationSpectrum(energies, GammatoneBank().center_frequencies)


def msed_from_spectra(a: ModulationSpectrum, b: ModulationSpectrum) -> float:
    return float(np.mean(np.linalg.norm(a.energies - b.energies, axis=1)))


def msed(target, output) -> float:
    t, _ = _as_mono_array(target)
    o, _ = _as_mono_array(output)
    if t.shape != o.shape:
        raise ValueError(f"length mismatch: target {t.shape} vs output {o.shape}")
    return msed_from_spectra(modulation_spectrum(target), modulation_spectrum(output))
