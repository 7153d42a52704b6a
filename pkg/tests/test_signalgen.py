import json
import math
import wave

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.signal import freqz, hilbert

from pitchmtf import signalgen
from pitchmtf.errors import ParameterError
from pitchmtf.signalgen import (cent_hz_convert, gaussian_kernel, make_modulation, make_spec,
                                synthesize, target_grid, vowel_weights)

mpmath.mp.dps = 40


def mp_cent(ref, cents):
    return float(mpmath.mpf(ref) * mpmath.power(2, mpmath.mpf(cents) / 1200))


# conversions

def test_cent_examples():
    assert cent_hz_convert(0.0, 440.0) == 440.0
    assert cent_hz_convert(1200.0, 220.0) == 440.0
    assert cent_hz_convert(25.0, 80.0) == pytest.approx(mp_cent(80, 25), rel=1e-15)
    assert cent_hz_convert(25.0, 80.0) == pytest.approx(81.1636, abs=1e-4)


@settings(max_examples=100)
@given(f=st.floats(1e-3, 1e6), ref=st.floats(1e-2, 1e4))
def test_cent_round_trip(f, ref):
    c = cent_hz_convert(f, ref, "to_cent")
    assert cent_hz_convert(c, ref) == pytest.approx(f, rel=1e-12)


@pytest.mark.parametrize("bad", [0.0, -1.0])
def test_nonpositive_frequency(bad):
    with pytest.raises(ParameterError):
        cent_hz_convert(bad, 100.0, "to_cent")
    with pytest.raises(ParameterError):
        cent_hz_convert(0.0, bad)
    with pytest.raises(ParameterError):
        cent_hz_convert(1.0, 1.0, "sideways")


# modulation

def test_gaussian_kernel_has_no_side_lobes():
    g = gaussian_kernel(0.005)
    assert g.sum() == pytest.approx(1.0, abs=1e-14)
    assert g[0] / g.max() == pytest.approx(1e-8, rel=0.05)
    mag = np.abs(np.fft.rfft(np.roll(np.pad(g, (0, 8192 - g.size)), -(g.size // 2))))
    # above the truncation ripple the response only falls
    main = mag[:np.argmax(mag < 1e-6)]
    assert main.size > 20 and np.all(np.diff(main) <= 1e-15)


def test_gaussian_gain_at_10_hz():
    # the index band must not be attenuated by the smoother
    g = gaussian_kernel(signalgen.DEFAULT_SIGMA)
    n = np.arange(g.size) - g.size // 2
    gain = abs(np.sum(g * np.exp(-2j * np.pi * 10 * n / 44100)))
    assert 20 * np.log10(gain) > -3


def test_modulation_depth(traj):
    assert np.std(traj.f_cent) == pytest.approx(100.0, abs=0.1)
    assert traj.length <= 20 * 44100


def test_modulation_is_smoothed_tiled_mix(cset, traj):
    g = gaussian_kernel(traj.gaussian_sigma)
    smooth = np.convolve(np.tile(cset.x_mix, 9), g)
    np.testing.assert_allclose(traj.f_cent, 100 * smooth / np.std(smooth), atol=1e-9)


def test_doubling_depth(cset, traj):
    twice = make_modulation(cset, 200.0)
    np.testing.assert_allclose(twice.f_cent, 2 * traj.f_cent, rtol=1e-12, atol=1e-12)


def test_modulation_parameter_errors(cset):
    with pytest.raises(ParameterError):
        make_modulation(cset, -1.0)
    with pytest.raises(ParameterError):
        make_modulation(cset, 100.0, sigma=0.0)
    with pytest.raises(ParameterError):
        make_modulation(cset, 100.0, n_segments=14)


# grid

def test_default_grid():
    grid = target_grid()
    assert len(grid) == 112
    assert grid[0] == 80.0
    assert grid[1] == pytest.approx(mp_cent(80, 25), rel=1e-14)
    assert grid[-1] == pytest.approx(mp_cent(80, 111 * 25), rel=1e-13)
    assert grid[-1] <= 400.0 < mp_cent(80, 112 * 25)


@settings(max_examples=50)
@given(lo=st.floats(20, 300), octaves=st.floats(0.1, 3), steps=st.integers(1, 96))
def test_grid_ratio(lo, octaves, steps):
    grid = np.array(target_grid(lo, lo * 2 ** octaves, 1.0 / steps))
    np.testing.assert_allclose(grid[1:] / grid[:-1], 2 ** (1.0 / steps), rtol=1e-12)
    assert grid[-1] <= lo * 2 ** octaves * (1 + 1e-12)


def test_grid_errors():
    with pytest.raises(ParameterError):
        target_grid(400, 80)
    with pytest.raises(ParameterError):
        target_grid(80, 400, 0)


# spectral shape

def test_flat_weights():
    np.testing.assert_array_equal(vowel_weights(200, 3, "flat"), [1, 1, 1])


def test_vowel_envelope_ratio():
    a = vowel_weights(100.0, 10)
    assert a[0] == 1.0
    # independent oracle: cascade of the four resonators through scipy
    den = np.array([1.0])
    for fc, bw in zip(signalgen.VOWEL_A_FORMANTS, signalgen.VOWEL_A_BANDWIDTHS):
        r = math.exp(-math.pi * bw / 44100)
        den = np.convolve(den, [1, -2 * r * math.cos(2 * math.pi * fc / 44100), r * r])
    _, h = freqz([1.0], den, worN=[100.0, 800.0], fs=44100)
    assert a[7] == pytest.approx(abs(h[1]) / abs(h[0]), rel=1e-8)


def test_vowel_errors():
    with pytest.raises(ParameterError):
        vowel_weights(100, 0)
    with pytest.raises(ParameterError):
        vowel_weights(100, 3, "vowel_q")


# synthesis

def test_steady_sinusoid_zero_crossings(flat_traj):
    sig = synthesize(make_spec(200.0, flat_traj, n_harmonics=1), flat_traj)
    x = sig.audio[44100:2 * 44100]
    crossings = np.count_nonzero(np.signbit(x[1:]) != np.signbit(x[:-1]))
    assert abs(crossings - 400) <= 1


def test_instantaneous_frequency_follows_reference(traj):
    sig = synthesize(make_spec(200.0, traj, n_harmonics=1), traj)
    w = sig.analysis_window
    phase = np.unwrap(np.angle(hilbert(sig.audio)))
    inst = np.diff(phase) * 44100 / (2 * np.pi)
    f0 = 200.0 * 2 ** (sig.reference_cent / 1200)
    # the phase difference straddles samples n-1 and n
    mid = 0.5 * (f0[:-1] + f0[1:])
    err = 1200 * np.log2(inst[w.start:w.stop - 1] / mid[w.start:w.stop - 1])
    assert np.sqrt(np.mean(err ** 2)) < 0.5


def test_reference_matches_trajectory(sig200, traj):
    span = sig200.modulated_span
    np.testing.assert_array_equal(sig200.reference_cent[span], traj.f_cent)
    assert not np.any(sig200.reference_cent[:span.start])
    assert sig200.audio.size == sig200.reference_cent.size == 20 * 44100


def test_analysis_window_layout(sig200, traj):
    w = sig200.analysis_window
    assert w.n_periods == 6 and w.period == 65536
    assert w.start == 2 * 44100 + 65536
    # period p of the window starts on period p + 1 of the tiled mix
    assert w.start - sig200.modulated_span.start == traj.offset + 65536


def test_aliasing_is_rejected_with_harmonic(traj):
    k = signalgen.max_harmonics(200.0, traj)
    spec = make_spec(200.0, traj, n_harmonics=k + 1)
    with pytest.raises(ParameterError, match=rf"harmonic {k + 1}\b"):
        synthesize(spec, traj)


def test_default_spec_has_no_phase_or_residual(traj):
    spec = make_spec(150.0, traj)
    assert spec.initial_phases is None and spec.residual is None
    peak = spec.f_tgt * 2 ** (traj.f_cent.max() / 1200)
    assert spec.n_harmonics * peak < 22050 <= (spec.n_harmonics + 1) * peak


def test_initial_phases_and_residual(flat_traj):
    base = make_spec(300.0, flat_traj, n_harmonics=2)
    zero = synthesize(base, flat_traj)
    phased = synthesize(make_spec(300.0, flat_traj, n_harmonics=2,
                                  initial_phases=(np.pi / 2, 0.0)), flat_traj)
    cycles = np.cumsum(np.full(zero.audio.size, 300.0 / 44100))
    np.testing.assert_allclose(phased.audio - zero.audio,
                               np.cos(2 * np.pi * cycles) - np.sin(2 * np.pi * cycles), atol=1e-8)
    noise = np.random.default_rng(0).normal(size=zero.audio.size) * 1e-3
    noisy = synthesize(make_spec(300.0, flat_traj, n_harmonics=2, residual=noise), flat_traj)
    np.testing.assert_allclose(noisy.audio - zero.audio, noise, atol=1e-12)
    with pytest.raises(ParameterError):
        synthesize(make_spec(300.0, flat_traj, n_harmonics=2, residual=noise[:10]), flat_traj)


def test_synthesis_is_deterministic(traj, sig200):
    again = synthesize(make_spec(200.0, traj), traj)
    assert again.audio.tobytes() == sig200.audio.tobytes()


# export

def test_wav_export_and_read_back(tmp_path, sig200):
    path = signalgen.export_wav(sig200, tmp_path / "t.wav", {"grid_index": 27})
    with wave.open(str(path)) as w:
        assert (w.getnchannels(), w.getsampwidth(), w.getframerate()) == (1, 3, 44100)
        assert w.getnframes() == 20 * 44100
    x, fs = signalgen.read_wav(path)
    assert fs == 44100.0
    full = 2 ** 23
    assert abs(np.max(np.abs(x)) * full - 0.8 * (full - 1)) <= 1.0
    meta = json.loads(signalgen.sidecar_path(path).read_text())
    expected = sig200.audio * meta["normalization_gain"] * (full - 1) / full
    assert np.max(np.abs(x - expected)) <= 1.25 / full
    assert meta["grid_index"] == 27 and meta["f_tgt_hz"] == 200.0
    assert meta["seeds"] == [1, 2, 3] and meta["analysis_window"]["n_periods"] == 6
    assert signalgen.sidecar_path(path).name == "t.meta.json"


def test_zero_signal_cannot_be_exported(tmp_path, flat_traj, sig200):
    silent = signalgen.TestSignal(np.zeros(10), np.zeros(10), sig200.spec,
                                  sig200.analysis_window, flat_traj)
    with pytest.raises(ParameterError):
        signalgen.export_wav(silent, tmp_path / "z.wav")


def test_export_to_missing_directory(tmp_path, sig200):
    with pytest.raises(OSError, match="nowhere"):
        signalgen.export_wav(sig200, tmp_path / "nowhere" / "x.wav")


def test_read_16_bit(tmp_path):
    p = tmp_path / "s.wav"
    with wave.open(str(p), "wb") as w:
        w.setnchannels(2)
        w.setsampwidth(2)
        w.setframerate(8000)
        w.writeframes(np.array([16384, -1, -32768, 5], "<i2").tobytes())
    x, fs = signalgen.read_wav(p)
    np.testing.assert_array_equal(x, [0.5, -1.0])
    assert fs == 8000.0


def test_signal_from_meta(sig200):
    again = signalgen.signal_from_meta(sig200.meta)
    assert again.audio.tobytes() == sig200.audio.tobytes()
    with pytest.raises(ParameterError):
        signalgen.signal_from_meta({"seeds": [1, 2, 3]})
