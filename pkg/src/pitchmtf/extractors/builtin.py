"""Built-in reference extractors.

Four systems bracket what a real extractor can do: the identity (upper
bound), a one-pole smoother of known response, and a frame-based cepstrum
extractor in two flavours, integer-lag and parabolically refined. A
normalized-autocorrelation extractor sits in between.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .. import kernels
from ..errors import ParameterError
from ..respan import FoTrajectory
from ..signalgen import TestSignal

FRAME_S = 0.040
HOP_S = 0.005
DEFAULT_RANGE = (60.0, 500.0)
CEPSTRUM_BAND_HZ = 3000.0
CEPSTRUM_FLOOR = 1e-2
CEPSTRUM_THRESHOLD = 3.5
ACF_THRESHOLD = 0.45
OCTAVE_COST = 0.01
SILENCE_DB = -80.0
_CHUNK = 256


def extract_identity(sig: TestSignal) -> FoTrajectory:
    """The reference trajectory itself at the audio rate."""
    fs = sig.sample_rate
    n = sig.reference_cent.size
    f0 = sig.spec.f_tgt * np.exp2(sig.reference_cent / 1200.0)
    return FoTrajectory(np.arange(n) / fs, f0, "identity")


def apply_validation_system(sig: TestSignal, tau=0.02) -> FoTrajectory:
    """One-pole low-pass of time constant ``tau`` applied to the reference cents."""
    if tau <= 0:
        raise ParameterError(f"tau must be positive, got {tau}")
    fs = sig.sample_rate
    coef = np.exp(-1.0 / (tau * fs))
    smoothed = kernels.one_pole(sig.reference_cent, coef, 0.0)
    n = smoothed.size
    return FoTrajectory(np.arange(n) / fs, sig.spec.f_tgt * np.exp2(smoothed / 1200.0),
                        f"validation-{tau:g}")


def _check_range(f_range):
    lo, hi = float(f_range[0]), float(f_range[1])
    if not 40.0 <= lo < hi <= 500.0:
        raise ParameterError(f"search range {f_range} must lie within [40, 500] Hz")
    return lo, hi


def _frames(x, fs, extra=0):
    """Frame starts and a strided view of windows of length frame + ``extra``."""
    length = int(round(FRAME_S * fs))
    hop = int(round(HOP_S * fs))
    span = length + extra
    if x.size < span:
        return length, np.zeros(0, dtype=int), np.zeros((0, span))
    view = sliding_window_view(x, span)[::hop]
    starts = np.arange(view.shape[0]) * hop
    return length, starts, view


def _frame_times(starts, length, fs):
    return (starts + (length - 1) / 2.0) / fs


def _silent(frames, length, ref_power):
    power = np.mean(frames[:, :length] ** 2, axis=1)
    return power <= ref_power * 10.0 ** (SILENCE_DB / 10.0)


def cepstrum_values(frames, fs, nfft):
    """Real cepstrum of Hann-windowed frames from a band-limited log spectrum.

    The log magnitude is tapered to zero at ``CEPSTRUM_BAND_HZ``; this
    widens the rahmonic peak to several samples so a parabola fits it.
    Power is floored at ``CEPSTRUM_FLOOR`` of the frame maximum, which
    flattens the leakage-dominated valleys between harmonics.
    """
    win = np.hanning(frames.shape[1])
    spec = np.fft.rfft(frames * win, nfft, axis=1)
    power = spec.real ** 2 + spec.imag ** 2
    floor = CEPSTRUM_FLOOR * np.maximum(power.max(axis=1, keepdims=True), 1e-300)
    logmag = 0.5 * np.log(power + floor)
    freqs = np.fft.rfftfreq(nfft, 1.0 / fs)
    taper = np.where(freqs < CEPSTRUM_BAND_HZ, np.cos(0.5 * np.pi * freqs / CEPSTRUM_BAND_HZ) ** 2, 0.0)
    logmag = (logmag - np.sum(logmag * taper, axis=1, keepdims=True) / taper.sum()) * taper
    return np.fft.irfft(logmag, nfft, axis=1)


def extract_cepstrum(sig: TestSignal, mode="interpolated", f_range=DEFAULT_RANGE) -> FoTrajectory:
    """Frame-wise cepstral peak picking (40 ms Hann frames, 5 ms hop).

    ``quantized`` reports ``fs / lag`` at the integer peak lag;
    ``interpolated`` refines the lag with a parabola through the peak and
    its neighbours.
    """
    if mode not in ("quantized", "interpolated"):
        raise ParameterError(f"unknown cepstrum mode {mode!r}")
    lo, hi = _check_range(f_range)
    fs = sig.sample_rate
    x = np.asarray(sig.audio, dtype=np.float64)
    length, starts, view = _frames(x, fs)
    nfft = 1 << int(np.ceil(np.log2(2 * length)))
    lag_lo = int(np.floor(fs / hi))
    lag_hi = int(np.ceil(fs / lo))
    norm_lo, norm_hi = int(round(fs / 1000.0)), int(round(fs / 40.0)) + 1
    ref_power = np.max(x ** 2) if x.size else 0.0

    f0 = np.full(starts.size, np.nan)
    for c in range(0, starts.size, _CHUNK):
        fr = view[c:c + _CHUNK]
        ceps = cepstrum_values(fr, fs, nfft)
        # voicing is judged on peak height relative to the RMS over 1-25 ms
        ref = ceps[:, norm_lo:norm_hi]
        scale = np.sqrt(np.maximum(np.mean(ref ** 2, axis=1, keepdims=True), 1e-300))
        # one guard lag on each side so edge lags can be local maxima
        band = ceps[:, lag_lo - 1:lag_hi + 2] / scale
        lags, _ = kernels.pick_peaks(band, lag_lo - 1, CEPSTRUM_THRESHOLD, 0.0,
                                     mode == "interpolated")
        out = fs / lags
        with np.errstate(invalid="ignore"):
            out[(lags < lag_lo) | (lags > lag_hi)] = np.nan
        out[_silent(fr, length, ref_power)] = np.nan
        f0[c:c + _CHUNK] = out
    return FoTrajectory(_frame_times(starts, length, fs), f0, f"cepstrum-{mode}")


def nccf_values(frames, length, lag_hi):
    """Normalized cross-correlation of each frame's head with lagged copies, lags 0..lag_hi."""
    span = frames.shape[1]
    nfft = 1 << int(np.ceil(np.log2(span)))
    head = frames[:, :length]
    xc = np.fft.irfft(np.fft.rfft(frames, nfft, axis=1) * np.conj(np.fft.rfft(head, nfft, axis=1)),
                      nfft, axis=1)[:, :lag_hi + 1]
    sq = np.concatenate([np.zeros((frames.shape[0], 1)), np.cumsum(frames ** 2, axis=1)], axis=1)
    lags = np.arange(lag_hi + 1)
    e_lag = sq[:, lags + length] - sq[:, lags]
    e0 = e_lag[:, :1]
    den = np.sqrt(np.maximum(e0 * e_lag, 1e-300))
    return xc / den


def extract_acf(sig: TestSignal, f_range=DEFAULT_RANGE) -> FoTrajectory:
    """Normalized autocorrelation with octave-cost candidate choice and parabolic refinement."""
    lo, hi = _check_range(f_range)
    fs = sig.sample_rate
    x = np.asarray(sig.audio, dtype=np.float64)
    lag_lo = int(np.floor(fs / hi))
    lag_hi = int(np.ceil(fs / lo))
    length, starts, view = _frames(x, fs, extra=lag_hi + 1)
    ref_power = np.max(x ** 2) if x.size else 0.0

    f0 = np.full(starts.size, np.nan)
    for c in range(0, starts.size, _CHUNK):
        fr = view[c:c + _CHUNK]
        r = nccf_values(fr, length, lag_hi + 1)
        band = r[:, lag_lo - 1:lag_hi + 2]
        lags, _ = kernels.pick_peaks(band, lag_lo - 1, ACF_THRESHOLD, OCTAVE_COST, True)
        out = fs / lags
        with np.errstate(invalid="ignore"):
            out[(lags < lag_lo) | (lags > lag_hi)] = np.nan
        out[_silent(fr, length, ref_power)] = np.nan
        f0[c:c + _CHUNK] = out
    return FoTrajectory(_frame_times(starts, length, fs), f0, "acf")
