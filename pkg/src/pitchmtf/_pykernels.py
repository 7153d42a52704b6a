"""NumPy implementations of the numerical kernels.

Reference semantics for the compiled versions in ``_ckernels.pyx``; both
must agree to rounding error (see ``tests/test_kernels.py``).
"""

import numpy as np
from scipy.signal import lfilter

_CHUNK = 32


def allpass_phase(omega, theta, polarity, radius):
    """Summed phase of second-order all-pass sections, linear term removed.

    Each section has poles at ``radius * exp(+-1j * theta[i])``; its phase is
    scaled by ``polarity[i]`` (+1 causal, -1 time reversed).
    """
    omega = np.asarray(omega, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    polarity = np.asarray(polarity, dtype=np.float64)
    total = np.zeros_like(omega)
    for i in range(0, theta.size, _CHUNK):
        th = theta[i:i + _CHUNK, None]
        dm = omega[None, :] - th
        dp = omega[None, :] + th
        phase = np.arctan2(radius * np.sin(dm), 1.0 - radius * np.cos(dm))
        phase += np.arctan2(radius * np.sin(dp), 1.0 - radius * np.cos(dp))
        total -= 2.0 * (polarity[i:i + _CHUNK] @ phase)
    return total


def harmonic_sum(cycles, weights):
    """``sum_k weights[k-1] * sin(2 pi k cycles)`` for k = 1..len(weights)."""
    cycles = np.asarray(cycles, dtype=np.float64)
    out = np.zeros_like(cycles)
    for k, a in enumerate(np.asarray(weights, dtype=np.float64), start=1):
        if a != 0.0:
            out += a * np.sin(2.0 * np.pi * np.mod(k * cycles, 1.0))
    return out


def one_pole(x, coef, initial):
    """``y[n] = coef * y[n-1] + (1 - coef) * x[n]`` with ``y[-1] = initial``."""
    x = np.asarray(x, dtype=np.float64)
    y, _ = lfilter([1.0 - coef], [1.0, -coef], x, zi=[coef * initial])
    return y


def pick_peaks(values, lag_lo, threshold, octave_cost, interpolate):
    """Best local maximum per row of ``values``.

    Column ``c`` holds lag ``lag_lo + c``. Candidates are interior local
    maxima not below ``threshold``; the winner maximizes
    ``value + octave_cost * log2(lag_max / lag)``. Returns ``(lag, value)``
    arrays, NaN lag where no candidate exists.
    """
    v = np.asarray(values, dtype=np.float64)
    n_frames, n_lags = v.shape
    lags = np.full(n_frames, np.nan)
    peaks = np.full(n_frames, np.nan)
    if n_lags < 3:
        return lags, peaks
    mid = v[:, 1:-1]
    cand = (mid > v[:, :-2]) & (mid >= v[:, 2:]) & (mid >= threshold)
    lag_axis = lag_lo + np.arange(1, n_lags - 1, dtype=np.float64)
    lag_max = lag_lo + n_lags - 1.0
    score = np.where(cand, mid + octave_cost * np.log2(lag_max / lag_axis), -np.inf)
    best = np.argmax(score, axis=1)
    rows = np.nonzero(np.isfinite(score[np.arange(n_frames), best]))[0]
    col = best[rows] + 1
    y0 = v[rows, col - 1]
    y1 = v[rows, col]
    y2 = v[rows, col + 1]
    lag = lag_lo + col.astype(np.float64)
    peak = y1.copy()
    if interpolate:
        den = y0 - 2.0 * y1 + y2
        ok = den < 0.0
        delta = np.zeros_like(y1)
        delta[ok] = 0.5 * (y0[ok] - y2[ok]) / den[ok]
        lag = lag + delta
        peak = y1 - 0.25 * (y0 - y2) * delta
    lags[rows] = lag
    peaks[rows] = peak
    return lags, peaks
