import logging

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import signal

from tvfx import metrics
from tvfx.audio import AudioClip
from tvfx.metrics import (
    GammatoneBank,
    ModulationBank,
    energy_normalized_mae,
    gammatone_envelopes,
    modulation_spectrum,
    msed,
)

FS = 16000


def tone(freq, seconds=2.0, fs=FS):
    t = np.arange(int(seconds * fs)) / fs
    return np.sin(2 * np.pi * freq * t)


def am(carrier, mod, seconds=2.0, depth=1.0):
    t = np.arange(int(seconds * FS)) / FS
    return (1 + depth * np.sin(2 * np.pi * mod * t)) / (1 + depth) * np.sin(2 * np.pi * carrier * t)


def band_of(freq):
    return int(np.argmin(np.abs(np.log(GammatoneBank().center_frequencies / freq))))


# energy-normalised mae -----------------------------------------------------------
def test_mae_identity_and_scale():
    x = np.random.default_rng(0).normal(size=1000)
    assert energy_normalized_mae(x, x) == 0.0
    assert energy_normalized_mae(x, 2 * x) == pytest.approx(0.0, abs=1e-15)


def test_mae_sine_against_negation():
    # |x/rms - (-x)/rms| = 2 sqrt(2) |sin|; at 160 samples per period the mean of
    # |sin| is cot(pi / 160) / 80, the sum of a sampled sine over a half period
    x = tone(100.0, 1.0)
    expect = 2 * np.sqrt(2) / np.tan(np.pi / 160) / 80
    assert energy_normalized_mae(x, -x) == pytest.approx(expect, rel=1e-12)


def test_mae_errors():
    with pytest.raises(ValueError, match="all-zero"):
        energy_normalized_mae(np.zeros(10), np.ones(10))
    with pytest.raises(ValueError, match="length"):
        energy_normalized_mae(np.ones(10), np.ones(11))


def test_mae_accepts_clips():
    x = tone(300.0, 0.5)
    assert energy_normalized_mae(AudioClip(x, FS), AudioClip(0.3 * x, FS)) == pytest.approx(0.0, abs=1e-15)


# gammatone -----------------------------------------------------------------------
def test_gammatone_centres():
    fc = GammatoneBank().center_frequencies
    assert len(fc) == 12 and np.all(np.diff(fc) > 0)
    assert fc[0] == pytest.approx(26.0) and fc[-1] == pytest.approx(6950.0)
    # log spacing: constant ratio
    np.testing.assert_allclose(fc[1:] / fc[:-1], (6950 / 26) ** (1 / 11), rtol=1e-12)


def test_gammatone_unity_gain_at_centre_and_impulse_oracle():
    bank = GammatoneBank()
    fc = bank.center_frequencies
    np.testing.assert_allclose(np.diag(bank.response(fc)), 1.0, atol=1e-12)
    # the real band output equals 2 Re of the complex cascade; its DFT at fc has
    # magnitude close to the analytic response (the conjugate image is small
    # for bands well away from DC and Nyquist)
    n = 1 << 16
    imp = np.zeros(n)
    imp[0] = 1.0
    h = bank.filter(imp)
    freqs = np.fft.rfftfreq(n, 1 / FS)
    for i in range(3, 12):
        H = np.abs(np.fft.rfft(h[i]))
        k = int(np.argmin(np.abs(freqs - fc[i])))
        assert abs(H[k] - 1.0) < 0.02


def test_gammatone_bandwidth_follows_erb():
    bank = GammatoneBank()
    for fc in bank.center_frequencies[4:]:
        f = np.linspace(fc * 0.5, fc * 1.5, 20001)
        r = GammatoneBank(num_bands=1, f_low=fc, f_high=fc).response(f)[0]
        half = f[r >= 1 / np.sqrt(2)]
        bw = half[-1] - half[0]
        # 4th-order all-pole gammatone: 3 dB bandwidth = 2 * 1.019 * ERB * sqrt(2^(1/4) - 1)
        expect = 2 * 1.019 * metrics.erb(fc) * np.sqrt(2 ** 0.25 - 1)
        assert bw == pytest.approx(expect, rel=0.03)


def test_one_khz_tone_envelopes():
    env = gammatone_envelopes(AudioClip(tone(1000.0), FS))
    assert env.shape == (12, 800)
    b = band_of(1000.0)
    interior = env[b, 80:-80]
    assert (interior.max() - interior.min()) / interior.mean() < 0.05
    assert env[0, 80:-80].max() < 1e-3 * interior.mean()


def test_silence_gives_zero():
    z = AudioClip(np.zeros(FS), FS)
    assert not gammatone_envelopes(z).any()
    assert not modulation_spectrum(z).energies.any()


def test_am_envelope_peak_at_modulator():
    env = gammatone_envelopes(AudioClip(am(1000.0, 4.0), FS))[band_of(1000.0)]
    spec = np.abs(np.fft.rfft(env - env.mean()))
    freqs = np.fft.rfftfreq(len(env), 1 / metrics.ENVELOPE_RATE)
    assert freqs[np.argmax(spec)] == pytest.approx(4.0, abs=0.5)


def test_envelopes_resample_other_rates():
    a = gammatone_envelopes(AudioClip(tone(500.0), FS))
    b = gammatone_envelopes(AudioClip(tone(500.0, fs=44100), 44100))
    band = band_of(500.0)
    assert np.abs(a[band, 80:-80] - b[band, 80:-80]).max() < 0.02 * a[band].mean()


def test_too_short_clip_fails():
    with pytest.raises(ValueError, match="too short"):
        gammatone_envelopes(AudioClip(np.ones(80), FS))


# modulation filter bank ----------------------------------------------------------
def test_modulation_bank_centres_and_peaks():
    bank = ModulationBank()
    f0 = bank.center_frequencies
    assert len(f0) == 12 and f0[0] == pytest.approx(0.5) and f0[-1] == pytest.approx(100.0)
    for centre, (b, a) in zip(f0, bank.coefficients()):
        w, h = signal.freqz(b, a, worN=[centre], fs=bank.sample_rate)
        assert abs(np.abs(h[0]) - 1.0) < 1e-9
        # Q = 1: the response at the band edges implied by Q is 3 dB down
        w_hi, h_hi = signal.freqz(b, a, worN=np.geomspace(centre, 199.0, 4000), fs=bank.sample_rate)
        w_lo, h_lo = signal.freqz(b, a, worN=np.geomspace(0.01, centre, 4000), fs=bank.sample_rate)
        hi = w_hi[np.argmin(np.abs(np.abs(h_hi) - 1 / np.sqrt(2)))]
        lo = w_lo[np.argmin(np.abs(np.abs(h_lo) - 1 / np.sqrt(2)))]
        # bilinear warping narrows the band as the centre nears fs / 10
        if centre < 20:
            assert (hi - lo) == pytest.approx(centre, rel=0.05)


# modulation spectrum -------------------------------------------------------------
def test_two_hz_tremolo_on_noise_dominates_first_band():
    rng = np.random.default_rng(1)
    t = np.arange(2 * FS) / FS
    x = rng.normal(size=2 * FS) * 0.5 * (1 + np.sin(2 * np.pi * 2.0 * t))
    ms = modulation_spectrum(AudioClip(x, FS))
    assert ms.energies.shape == (12, 4)
    assert np.all(ms.dominant_band() == 0)


def test_unmodulated_tone_is_near_zero():
    ms = modulation_spectrum(AudioClip(tone(1000.0), FS))
    assert np.all(ms.energies[band_of(1000.0)] < 0.05)


@pytest.mark.parametrize("mod, band", [(2.0, 0), (7.0, 1), (15.0, 2), (50.0, 3)])
def test_am_band_strictly_dominates(mod, band):
    ms = modulation_spectrum(AudioClip(am(1000.0, mod), FS))
    row = ms.energies[band_of(1000.0)]
    assert np.argmax(row) == band
    assert row[band] > np.delete(row, band).max()


def test_energies_non_negative_and_finite():
    ms = modulation_spectrum(AudioClip(np.random.default_rng(2).normal(size=FS), FS))
    assert np.all(ms.energies >= 0) and np.all(np.isfinite(ms.energies))


def test_short_clip_warns_once(caplog, monkeypatch):
    monkeypatch.setattr(metrics, "_short_clip_warned", False)
    x = AudioClip(tone(500.0, 1.0), FS)
    with caplog.at_level(logging.WARNING, logger="tvfx.metrics"):
        modulation_spectrum(x)
        modulation_spectrum(x)
    assert caplog.text.count("marginal") == 1


# msed ----------------------------------------------------------------------------
def test_msed_identity_and_symmetry():
    a = AudioClip(am(800.0, 3.0), FS)
    b = AudioClip(tone(800.0), FS)
    assert msed(a, a) == 0.0
    assert msed(a, b) == msed(b, a) > 0


@pytest.mark.parametrize("scale", [0.5, 2.0, 10.0])
def test_msed_scale_invariant(scale):
    rng = np.random.default_rng(3)
    x = am(600.0, 5.0) + 0.1 * rng.normal(size=2 * FS)
    y = am(600.0, 9.0)
    base = msed(x, y)
    assert abs(msed(scale * x, y) - base) < 1e-6
    assert abs(msed(x, scale * y) - base) < 1e-6


def test_msed_length_mismatch():
    with pytest.raises(ValueError):
        msed(np.ones(FS), np.ones(FS + 1))


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.5, 40.0))
def test_msed_nonnegative_symmetric(seed, mod):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=FS)
    b = a * (1 + 0.5 * np.sin(2 * np.pi * mod * np.arange(FS) / FS))
    d = msed(a, b)
    assert d >= 0 and d == msed(b, a)
