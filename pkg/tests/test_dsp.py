from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from corpusforge import dsp
from corpusforge.errors import InputError, MatrixFormatError

SR = 16000
CFG = dsp.StftConfig()


def naive_stft(x, n_fft, hop, win):
    """Direct DFT of centred, reflect-padded frames, phase referenced to the frame centre."""
    n = len(x)
    w = np.zeros(n_fft)
    left = (n_fft - win) // 2
    w[left:left + win] = 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(win) / win)
    padded = np.pad(x, n_fft // 2, mode="reflect")
    out = []
    for t in range(1 + n // hop):
        seg = padded[t * hop:t * hop + n_fft] * w
        row = []
        for k in range(n_fft // 2 + 1):
            row.append(sum(seg[j] * complex(math.cos(-2 * math.pi * k * (j - n_fft // 2) / n_fft),
                                            math.sin(-2 * math.pi * k * (j - n_fft // 2) / n_fft))
                           for j in range(n_fft)))
        out.append(row)
    return np.array(out)


# ---------------------------------------------------------------- STFT


def test_stft_matches_direct_dft():
    x = np.random.default_rng(3).standard_normal(50)
    cfg = dsp.StftConfig(n_fft=16, hop=4, win=12)
    assert np.allclose(dsp.stft_complex(x, cfg), naive_stft(x, 16, 4, 12), atol=1e-10)


@pytest.mark.parametrize("n_fft,win", [(1024, 800), (1024, 1024), (512, 400)])
def test_perfect_reconstruction_quarter_hop(n_fft, win):
    cfg = dsp.StftConfig(n_fft=n_fft, win=win, hop=win // 4)
    x = np.random.default_rng(0).standard_normal(SR)
    y = dsp.istft(dsp.stft(x, cfg))
    assert np.sqrt(np.mean((y.samples - x) ** 2)) < 1e-6


def test_zero_signal_zero_magnitude():
    assert not dsp.stft(np.zeros(4000)).magnitude.any()


def test_bin_centred_sinusoid_main_lobe():
    k0 = 64
    x = np.sin(2 * np.pi * k0 * SR / CFG.n_fft * np.arange(SR) / SR)
    energy = np.abs(dsp.stft_complex(x, CFG)[5:-5]) ** 2
    assert np.all(energy.argmax(axis=1) == k0)
    share = energy[:, k0 - 1:k0 + 2].sum(axis=1) / energy.sum(axis=1)
    assert share.min() >= 0.9


def test_stft_config_validation():
    with pytest.raises(ValueError):
        dsp.StftConfig(n_fft=1000)
    with pytest.raises(ValueError):
        dsp.StftConfig(hop=900)
    with pytest.raises(InputError):
        dsp.stft(np.zeros(100))


# ---------------------------------------------------------------- mel


def test_mel_scale_values():
    assert dsp.hz_to_mel(700.0) == pytest.approx(2595 * math.log10(2), abs=1e-9)
    assert dsp.hz_to_mel(700.0) == pytest.approx(781.17, abs=0.01)
    assert dsp.mel_to_hz(dsp.hz_to_mel(1234.5)) == pytest.approx(1234.5)
    with pytest.raises(InputError):
        dsp.hz_to_mel(-1.0)


def test_filterbank_rows_nonneg_unimodal_peak_one():
    fb = dsp.build_filterbank()
    assert fb.matrix.shape == (80, 513)
    assert (fb.matrix >= 0).all()
    for row in fb.matrix:
        assert row.max() == 1.0
        nz = row[row > 0]
        peak = int(np.argmax(nz))
        assert np.all(np.diff(nz[:peak + 1]) >= 0) and np.all(np.diff(nz[peak:]) <= 0)
    assert np.all(np.diff(fb.centers_hz) > 0)


def test_pinv_is_right_inverse_on_mel_range():
    fb = dsp.build_filterbank()
    assert np.abs(fb.matrix @ fb.pinv - np.eye(80)).max() < 1e-6


def test_filterbank_too_narrow():
    with pytest.raises(InputError):
        dsp.build_filterbank(n_mels=200, n_fft=256)


def test_log_mel_floor_and_shape():
    fb = dsp.build_filterbank()
    spec = dsp.Spectrogram(np.zeros((7, 513)), CFG)
    mel = dsp.mel_spectrogram(spec, fb)
    assert mel.values.shape == (7, 80)
    assert np.all(mel.values == math.log(1e-10))
    assert np.abs(dsp.invert_mel(mel).magnitude).max() < 1e-6


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.01, 100), st.booleans())
def test_mel_gain_equivariance(seed, k, power):
    fb = dsp.build_filterbank()
    x = np.random.default_rng(seed).standard_normal(4000) * 0.1
    a = dsp.log_mel(x, CFG, fb, power).values
    b = dsp.log_mel(k * x, CFG, fb, power).values
    assert np.allclose(b - a, (2 if power else 1) * math.log(k), atol=1e-8)


def test_row_space_spectrum_roundtrip_exact():
    fb = dsp.build_filterbank()
    rng = np.random.default_rng(1)
    mag = (fb.matrix.T @ rng.uniform(0.5, 2.0, size=(80, 4))).T
    mel = dsp.mel_spectrogram(dsp.Spectrogram(mag, CFG), fb)
    back = dsp.invert_mel(mel).magnitude
    assert np.allclose(back, mag, rtol=1e-8, atol=1e-10)


def test_mel_cepstrum_of_constant_frame():
    c = dsp.mel_cepstrum(np.full((3, 80), 2.0), 13)
    assert c.shape == (3, 13)
    assert np.all(c[:, 0] != 0) and np.abs(c[:, 1:]).max() < 1e-12
    with pytest.raises(InputError):
        dsp.mel_cepstrum(np.zeros((2, 80)), 81)


# ---------------------------------------------------------------- Griffin-Lim


def two_tone(seconds=1.0):
    t = np.arange(int(seconds * SR)) / SR
    return 0.5 * np.sin(2 * np.pi * 440 * t) + 0.3 * np.sin(2 * np.pi * 1250 * t)


def test_gl_zero_iterations_is_zero_phase_inverse():
    mag = dsp.stft(two_tone(0.5))
    a = dsp.griffin_lim(mag, n_iter=0)
    expect = dsp.istft_complex(mag.magnitude.astype(complex), CFG, mag.length)
    assert np.array_equal(a.samples, expect)


def test_gl_deterministic_and_monotone():
    mag = dsp.stft(two_tone(0.5))
    t1, t2 = [], []
    a = dsp.griffin_lim(mag, 30, trace=t1)
    b = dsp.griffin_lim(mag, 30, trace=t2)
    assert np.array_equal(a.samples, b.samples) and t1 == t2
    assert len(t1) == 31
    assert max(np.diff(t1)) <= 1e-7


def test_gl_recovers_consistent_phase_on_speechlike_signal():
    from corpusforge.synthetic import speech_like

    x = speech_like(np.random.default_rng(2), 1.0)
    mag = dsp.stft(x)
    y = dsp.griffin_lim(mag, 100, momentum=0.99)
    err = np.linalg.norm(dsp.stft(y.samples).magnitude - mag.magnitude) / np.linalg.norm(mag.magnitude)
    assert err < 0.1


def test_gl_input_validation():
    mag = dsp.stft(two_tone(0.5))
    with pytest.raises(InputError):
        dsp.griffin_lim(mag, -1)
    with pytest.raises(InputError):
        dsp.griffin_lim(mag, 1, cfg=dsp.StftConfig(n_fft=512, win=400, hop=100))


# ---------------------------------------------------------------- matrix files


def test_matrix_roundtrip(tmp_path):
    m = np.random.default_rng(0).standard_normal((5, 80))
    p = tmp_path / "a.mel"
    dsp.write_matrix(p, m)
    assert p.stat().st_size == 16 + 4 * 5 * 80
    assert np.array_equal(dsp.read_matrix(p), m.astype(np.float32).astype(np.float64))


@pytest.mark.parametrize("blob, reason", [
    (b"abc", "truncated"),
    (b"XXXX" + bytes(12), "magic"),
    (b"CFMX" + (2).to_bytes(4, "little") + (2).to_bytes(4, "little") + bytes(4) + bytes(8), "expected"),
])
def test_matrix_corruption_names_file(tmp_path, blob, reason):
    p = tmp_path / "broken.mel"
    p.write_bytes(blob)
    with pytest.raises(MatrixFormatError, match=f"broken.mel.*{reason}"):
        dsp.read_matrix(p)
