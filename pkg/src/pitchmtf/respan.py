"""Response analysis: extractor output to modulation transfer function.

An extractor trajectory is mapped to cents on the audio clock, cut into the
analyzed periods, and decomposed with the CAPRICEP set into one long
response per period (the extended signal) and twelve short responses per
period (three sequences by four segments). Dividing their spectra by those
of the reference trajectory gives the period-wise and segment-wise transfer
functions; their mean and two conditional variances follow.

Variance estimators use the usual unbiased forms: ``1/(P-1)`` over periods,
``1/(3-1)`` over sequences around a three-term mean, and the mean (not the
mean square) of the per-segment variances.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import capricep
from .capricep import CapricepSet
from .errors import ConfigurationError, MeasurementFailed, ParameterError
from .signalgen import AnalysisWindow

REFERENCE_FLOOR = 1e-6
INDEX_BAND_HZ = 10.0
MAX_MISSING = 0.5


@dataclass(frozen=True, eq=False)
class FoTrajectory:
    """Frame times in seconds and f0 in Hz; NaN or non-positive f0 is unvoiced."""

    times: np.ndarray
    f0: np.ndarray
    extractor_id: str = ""
    time_offset: float = 0.0

    def __post_init__(self):
        t = np.asarray(self.times, dtype=np.float64)
        f = np.asarray(self.f0, dtype=np.float64)
        if t.shape != f.shape or t.ndim != 1:
            raise ParameterError(f"times {t.shape} and f0 {f.shape} must be equal-length vectors")
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise ParameterError("frame times must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "f0", f)

    @property
    def voiced(self) -> np.ndarray:
        with np.errstate(invalid="ignore"):
            return np.isfinite(self.f0) & (self.f0 > 0)


def missing_fraction(traj: FoTrajectory, window: AnalysisWindow, fs: float) -> float:
    """Unvoiced share of the analysis window, judged by the nearest frame."""
    if traj.times.size == 0:
        raise ParameterError("empty trajectory")
    t = traj.times + traj.time_offset
    ts = np.arange(window.start, window.stop) / fs
    idx = np.clip(np.searchsorted(t, ts), 1, max(t.size - 1, 1))
    if t.size == 1:
        nearest = np.zeros(ts.size, dtype=int)
    else:
        left = idx - 1
        nearest = np.where(np.abs(ts - t[left]) <= np.abs(t[idx] - ts), left, idx)
    voiced = traj.voiced[nearest]
    if t.size > 1:
        step = float(np.median(np.diff(t)))
        covered = (ts >= t[0] - step) & (ts <= t[-1] + step)
        voiced = voiced & covered
    return float(1.0 - voiced.mean())


def resample_to_cents(traj: FoTrajectory, f_tgt_cent: float, fs: float,
                      window: AnalysisWindow, n_samples: int) -> np.ndarray:
    """Deviation from the carrier in cents on the ``fs`` clock.

    Unvoiced gaps are bridged linearly between voiced neighbours and the
    edges are held.

    Raises
    ------
    MeasurementFailed
        If more than half of the analysis window is unvoiced.
    """
    if traj.times.size == 0:
        raise ParameterError("empty trajectory")
    miss = missing_fraction(traj, window, fs)
    voiced = traj.voiced
    if miss > MAX_MISSING or voiced.sum() < 2:
        raise MeasurementFailed(
            f"{traj.extractor_id or 'extractor'} left {miss:.1%} of the analysis window unvoiced",
            missing_fraction=miss,
        )
    f_ref = 2.0 ** (f_tgt_cent / 1200.0)
    cents = 1200.0 * np.log2(traj.f0[voiced] / f_ref)
    t = traj.times[voiced] + traj.time_offset
    return np.interp(np.arange(n_samples) / fs, t, cents)


@dataclass(frozen=True, eq=False)
class ResponseSet:
    """``u_long`` is (periods, 4*N_p); ``u_short`` is (periods, 3, 4, N_p)."""

    u_long: np.ndarray
    u_short: np.ndarray
    role: str = "measured"

    @property
    def n_periods(self) -> int:
        return self.u_long.shape[0]


def _centered_segment(z, j, n_p):
    """Length-``n_p`` circular buffer with segment ``j``'s pulse position at index 0."""
    r = np.roll(z, -j * n_p, axis=-1)
    h = n_p // 2
    return np.concatenate([r[..., :h], r[..., r.shape[-1] - (n_p - h):]], axis=-1)


def _short_sources():
    """(rotation, sign) per (sequence, segment) so every segment carries a pulse."""
    table = {}
    for i in (1, 2, 3):
        pats = {rot: capricep.segment_polarity(i, rot) for rot in (0, 1)}
        for j in range(4):
            rot = 0 if abs(pats[0][j]) > 0.5 else 1
            table[i, j] = (rot, pats[rot][j])
    return table


_SHORT_SOURCES = _short_sources()


def compute_responses(cent_signal, cset: CapricepSet, window: AnalysisWindow,
                      role="measured") -> ResponseSet:
    cent_signal = np.asarray(cent_signal, dtype=np.float64)
    period = cset.unit_period
    if window.period != period:
        raise ParameterError(f"window period {window.period} != unit period {period}")
    if window.n_periods < 6:
        raise ParameterError(f"analysis window spans {window.n_periods} periods, need 6")
    if window.start < 0 or window.stop > cent_signal.size:
        raise ParameterError(
            f"analysis window [{window.start}, {window.stop}) exceeds signal of {cent_signal.size}"
        )
    n_p = cset.allocation_interval
    y = cent_signal[window.start:window.stop]
    p = window.n_periods
    z = {}
    for i in (1, 2, 3):
        w = capricep.recover_pulses(y, i, cset)
        for rot in (0, 1) if i == 3 else (0,):
            z[i, rot] = capricep.orthogonalize(w, i, cset, rot).reshape(p, period)
    u_long = capricep.extend(z[1, 0], z[2, 0], z[3, 0])
    u_short = np.empty((p, 3, 4, n_p))
    for (i, j), (rot, sign) in _SHORT_SOURCES.items():
        u_short[:, i - 1, j, :] = _centered_segment(z[i, rot], j, n_p) / sign
    return ResponseSet(u_long, u_short, role)


@dataclass(frozen=True, eq=False)
class TransferAnalysis:
    freq_long: np.ndarray
    freq_short: np.ndarray
    H: np.ndarray
    sigma2_tv: np.ndarray
    sigma2_nlti: np.ndarray
    sigma2_nlti_long: np.ndarray
    p_lti: np.ndarray
    p_td: np.ndarray
    valid_long: np.ndarray
    valid_short: np.ndarray
    f_tgt: float = float("nan")
    f_m: float = float("nan")
    delay_samples: int = 0
    notes: dict = field(default_factory=dict)

    @property
    def df(self) -> float:
        return float(self.freq_long[1] - self.freq_long[0])


def _reference_spectrum(u, axes):
    spec = np.fft.rfft(u, axis=-1)
    return spec if axes is None else spec.mean(axis=axes)


def _valid_bins(ref_spec, floor):
    mag = np.abs(ref_spec)
    return mag > floor * mag.max()


def period_transfer_functions(meas: ResponseSet, ref: ResponseSet, floor=REFERENCE_FLOOR):
    """``(H_p, valid)``: per-period ratios (periods, bins), NaN outside ``valid``."""
    u_ref = _reference_spectrum(ref.u_long, 0)
    valid = _valid_bins(u_ref, floor)
    hp = np.full((meas.n_periods, u_ref.size), np.nan + 0j)
    hp[:, valid] = np.fft.rfft(meas.u_long, axis=-1)[:, valid] / u_ref[valid]
    return hp, valid


def _check_index_band(freq, valid):
    band = (freq > 0) & (freq <= INDEX_BAND_HZ)
    if not np.any(valid & band):
        raise ConfigurationError("reference floor excludes the whole 0-10 Hz index band")


def transfer_function(meas: ResponseSet, ref: ResponseSet, fs=44100.0,
                      floor=REFERENCE_FLOOR) -> np.ndarray:
    hp, valid = period_transfer_functions(meas, ref, floor)
    _check_index_band(np.fft.rfftfreq(meas.u_long.shape[-1], 1.0 / fs), valid)
    return hp.mean(axis=0)


def tv_variance(meas: ResponseSet, ref: ResponseSet, floor=REFERENCE_FLOOR) -> np.ndarray:
    hp, _ = period_transfer_functions(meas, ref, floor)
    h = hp.mean(axis=0)
    return np.sum(np.abs(hp - h) ** 2, axis=0) / (hp.shape[0] - 1)


def nlti_variance(meas: ResponseSet, ref: ResponseSet, floor=REFERENCE_FLOOR):
    """Per-bin short-grid variance across sequences, averaged over periods and segments.

    Returns ``(sigma2, valid)`` on the short grid.
    """
    u_ref = _reference_spectrum(ref.u_short, (0, 1, 2))
    valid = _valid_bins(u_ref, floor)
    spec = np.fft.rfft(meas.u_short, axis=-1)[..., valid] / u_ref[valid]
    mean_i = spec.mean(axis=1, keepdims=True)
    var_pj = np.sum(np.abs(spec - mean_i) ** 2, axis=1) / 2.0
    out = np.full(u_ref.size, np.nan)
    out[valid] = var_pj.mean(axis=(0, 1))
    return out, valid


def estimate_delay(meas: ResponseSet, ref: ResponseSet) -> int:
    """Circular lag (samples) maximizing the cross-correlation of long responses."""
    m = np.fft.rfft(meas.u_long.mean(axis=0))
    r = np.fft.rfft(ref.u_long.mean(axis=0))
    xc = np.fft.irfft(m * np.conj(r), meas.u_long.shape[-1])
    lag = int(np.argmax(xc))
    n = xc.size
    return lag - n if lag >= n // 2 else lag


def analyze(meas: ResponseSet, ref: ResponseSet, fs=44100.0, f_tgt=float("nan"),
            f_m=float("nan"), floor=REFERENCE_FLOOR, align=False) -> TransferAnalysis:
    """Full analysis of ``meas`` against the reference responses.

    With ``align`` the linear phase of the estimated delay is removed from
    ``H``; magnitudes and variances do not depend on it.
    """
    n_long = meas.u_long.shape[-1]
    n_short = meas.u_short.shape[-1]
    f_long = np.fft.rfftfreq(n_long, 1.0 / fs)
    f_short = np.fft.rfftfreq(n_short, 1.0 / fs)

    hp, valid_l = period_transfer_functions(meas, ref, floor)
    _check_index_band(f_long, valid_l)
    h = hp.mean(axis=0)
    s_tv = np.sum(np.abs(hp - h) ** 2, axis=0) / (hp.shape[0] - 1)
    s_nl, valid_s = nlti_variance(meas, ref, floor)

    s_nl_long = np.interp(f_long, f_short[valid_s], s_nl[valid_s], left=np.nan, right=np.nan)
    s_nl_long[~valid_l] = np.nan

    delay = 0
    if align:
        delay = estimate_delay(meas, ref)
        h = h * np.exp(2j * np.pi * np.arange(h.size) * delay / n_long)

    p_lti = np.abs(h) ** 2
    p_td = s_tv + s_nl_long
    return TransferAnalysis(
        f_long, f_short, h, s_tv, s_nl, s_nl_long, p_lti, p_td, valid_l, valid_s,
        float(f_tgt), float(f_m), delay,
    )
