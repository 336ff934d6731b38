import logging

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from tvfx.audio import (
    AudioClip,
    WavFormatError,
    frame_signal,
    hann_window,
    normalize_amplitude,
    overlap_add,
    padded_signal,
    read_wav,
    resample,
    write_wav,
)


def test_clip_rejects_bad_rate_and_channels():
    with pytest.raises(ValueError):
        AudioClip(np.zeros(4), 0)
    with pytest.raises(ValueError):
        AudioClip(np.zeros((4, 3)), 16000)
    assert AudioClip(np.zeros((4, 1)), 16000).channels == 1


# wav i/o -------------------------------------------------------------------------
def test_read_zero_file(tmp_path):
    write_wav(AudioClip(np.zeros(16000), 16000), tmp_path / "z.wav")
    clip = read_wav(tmp_path / "z.wav")
    assert clip.num_frames == 16000 and clip.sample_rate == 16000
    assert not clip.samples.any()


def test_zero_clip_data_chunk_is_zero(tmp_path):
    write_wav(AudioClip(np.zeros(100), 16000), tmp_path / "z.wav")
    raw = (tmp_path / "z.wav").read_bytes()
    data = raw[raw.index(b"data") + 8:]
    assert data == bytes(200)


def test_full_scale_pcm_value(tmp_path):
    from scipy.io import wavfile
    wavfile.write(tmp_path / "f.wav", 16000, np.array([32767, -32768, 0], dtype="<i2"))
    s = read_wav(tmp_path / "f.wav").samples
    assert s[0] == 32767 / 32768
    assert s[1] == -1.0


def test_pcm_round_trip_within_one_lsb(tmp_path):
    x = np.random.default_rng(0).uniform(-1, 1, 5000)
    write_wav(AudioClip(x, 16000), tmp_path / "n.wav")
    y = read_wav(tmp_path / "n.wav").samples
    assert np.max(np.abs(x - y)) <= 2.0 ** -15


def test_float32_round_trip_exact_at_float32(tmp_path):
    x = np.random.default_rng(1).uniform(-1, 1, 777).astype(np.float32).astype(np.float64)
    write_wav(AudioClip(x, 22050), tmp_path / "f.wav", encoding="float32")
    clip = read_wav(tmp_path / "f.wav")
    assert clip.sample_rate == 22050
    np.testing.assert_array_equal(clip.samples, x)


def test_stereo_round_trip(tmp_path):
    x = np.random.default_rng(2).uniform(-0.5, 0.5, (300, 2))
    write_wav(AudioClip(x, 16000), tmp_path / "s.wav", encoding="float32")
    clip = read_wav(tmp_path / "s.wav")
    assert clip.channels == 2
    np.testing.assert_allclose(clip.samples, x, atol=1e-7)


def test_saturation_warns(tmp_path, caplog):
    with caplog.at_level(logging.WARNING):
        write_wav(AudioClip(np.array([1.5, -2.0, 0.25]), 16000), tmp_path / "c.wav")
    assert "saturating" in caplog.text
    s = read_wav(tmp_path / "c.wav").samples
    assert s[0] == 32767 / 32768 and s[1] == -1.0


def test_non_finite_refused(tmp_path):
    with pytest.raises(ValueError):
        write_wav(AudioClip(np.array([0.0, np.nan]), 16000), tmp_path / "x.wav")


def test_unwritable_path_fails(tmp_path):
    with pytest.raises(OSError):
        write_wav(AudioClip(np.zeros(4), 16000), tmp_path / "missing" / "x.wav")


def test_truncated_file_fails(tmp_path):
    write_wav(AudioClip(np.zeros(1000), 16000), tmp_path / "t.wav")
    blob = (tmp_path / "t.wav").read_bytes()
    (tmp_path / "t.wav").write_bytes(blob[:30])
    with pytest.raises(WavFormatError):
        read_wav(tmp_path / "t.wav")


def test_unsupported_encoding_fails(tmp_path):
    from scipy.io import wavfile
    wavfile.write(tmp_path / "i32.wav", 16000, np.zeros(10, dtype="<i4"))
    with pytest.raises(WavFormatError, match="unsupported"):
        read_wav(tmp_path / "i32.wav")


# resampling ----------------------------------------------------------------------
def test_resample_identity():
    clip = AudioClip(np.random.default_rng(3).normal(size=1000), 16000)
    np.testing.assert_array_equal(resample(clip, 16000).samples, clip.samples)


def test_resample_sine_peak():
    fs = 32000
    t = np.arange(2 * fs) / fs
    out = resample(AudioClip(np.sin(2 * np.pi * 1000 * t), fs), 16000)
    assert out.sample_rate == 16000
    spec = np.abs(np.fft.rfft(out.samples * np.hanning(out.num_frames)))
    freqs = np.fft.rfftfreq(out.num_frames, 1 / 16000)
    assert abs(freqs[np.argmax(spec)] - 1000.0) <= 1.0


@pytest.mark.parametrize("rate", [8000, 22050, 44100, 48000])
def test_resample_preserves_dc_and_duration(rate):
    clip = AudioClip(np.full(16000, 0.5), 16000)
    out = resample(clip, rate)
    assert abs(out.num_frames - clip.duration * rate) <= 1
    interior = out.samples[len(out.samples) // 4: -len(out.samples) // 4]
    np.testing.assert_allclose(interior, 0.5, atol=1e-3)


# normalisation -------------------------------------------------------------------
def test_normalize_doubles_half_peak():
    x = np.array([0.5, -0.25, 0.1])
    np.testing.assert_array_equal(normalize_amplitude(AudioClip(x, 16000)).samples, 2 * x)


def test_normalize_identity_at_unit_peak():
    x = np.array([1.0, -0.3])
    np.testing.assert_array_equal(normalize_amplitude(AudioClip(x, 16000)).samples, x)


def test_normalize_zero_fails():
    with pytest.raises(ValueError):
        normalize_amplitude(AudioClip(np.zeros(8), 16000))


@given(hnp.arrays(np.float64, st.integers(1, 200), elements=st.floats(-10, 10)))
def test_normalize_peak_is_one(x):
    if not np.any(np.abs(x) > 1e-12):
        return
    assert np.max(np.abs(normalize_amplitude(AudioClip(x, 16000)).samples)) == 1.0


# framing and overlap-add ---------------------------------------------------------
def test_table_input_shape():
    clip = AudioClip(np.random.default_rng(4).uniform(-1, 1, 32000), 16000)
    fs = frame_signal(clip, 4096, 4)
    assert fs.hop == 2048
    assert fs.frames.shape[1:] == (9, 4096)


def test_context_zero_is_center_only():
    clip = AudioClip(np.arange(5000, dtype=float), 16000)
    fs = frame_signal(clip, 1024, 0)
    np.testing.assert_array_equal(fs.frames[:, 0], fs.centers)


def test_context_slots_are_hop_shifts():
    x = np.random.default_rng(5).normal(size=6000)
    fs = frame_signal(AudioClip(x, 16000), 1024, 2)
    padded = padded_signal(x, 1024)
    hop = 512
    frames = fs.frames
    for p in range(fs.num_positions):
        for j in range(-2, 3):
            start = (p + j) * hop
            expect = np.zeros(1024)
            lo, hi = max(start, 0), min(start + 1024, len(padded))
            if hi > lo:
                expect[lo - start:hi - start] = padded[lo:hi]
            np.testing.assert_array_equal(frames[p, j + 2], expect)


def test_centers_reconstruct_padded_signal():
    x = np.random.default_rng(6).normal(size=7000)
    fs = frame_signal(AudioClip(x, 16000), 2048, 1)
    c = fs.centers
    rebuilt = np.concatenate([c[p, :1024] for p in range(len(c))] + [c[-1, 1024:]])
    np.testing.assert_array_equal(rebuilt, padded_signal(x, 2048))


def test_short_clip_gives_padded_positions():
    fs = frame_signal(AudioClip(np.ones(100), 16000), 1024, 1)
    assert fs.num_positions == 2
    # every sample lies in two half-overlapping centre frames
    assert fs.centers.sum() == 200


def test_framing_rejects_non_power_of_two():
    with pytest.raises(ValueError):
        frame_signal(AudioClip(np.zeros(100), 16000), 1000, 1)


def test_hann_cola():
    w = hann_window(1024)
    np.testing.assert_allclose(w[:512] + w[512:], 1.0, atol=1e-15)


def test_all_ones_reconstruct_one():
    frames = [np.ones(1024)] * 20
    out = overlap_add(frames, 1024).samples
    np.testing.assert_allclose(out[512:-512], 1.0, atol=1e-6)


def test_single_frame_is_windowed_copy():
    f = np.random.default_rng(7).normal(size=256)
    out = overlap_add([f], 256).samples
    np.testing.assert_allclose(out[:256], hann_window(256) * f, atol=1e-15)


def test_inconsistent_frames_fail():
    with pytest.raises(ValueError):
        overlap_add([np.ones(256), np.ones(255)], 256)


def test_sine_analysis_synthesis():
    t = np.arange(20000) / 16000
    x = np.sin(2 * np.pi * 440 * t)
    fs = frame_signal(AudioClip(x, 16000), 4096, 0)
    out = overlap_add(list(fs.centers), 4096, length=len(x)).samples
    assert len(out) == len(x)
    assert np.max(np.abs(out - x)) < 1e-6


@settings(max_examples=30, deadline=None)
@given(
    st.sampled_from([1024, 2048, 4096]),
    st.integers(1, 20000),
    st.integers(0, 2**32 - 1),
)
def test_cola_round_trip_property(n, length, seed):
    x = np.random.default_rng(seed).uniform(-1, 1, length)
    fs = frame_signal(AudioClip(x, 16000), n, 0)
    out = overlap_add(list(fs.centers), n, length=length).samples
    assert out.shape == x.shape
    assert np.max(np.abs(out - x), initial=0.0) < 1e-6
