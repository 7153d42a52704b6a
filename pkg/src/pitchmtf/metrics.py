"""Scalar performance indices and performance-map records."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import IndexUndefined, ParameterError

BAND_CAP_HZ = 100.0
INDEX_BAND_HZ = 10.0


@dataclass(frozen=True)
class PerformanceIndices:
    b_w: float
    f_hl: float
    crossing_found: bool
    snr_fm: float
    mean_gain_db: float
    sd_fd: float

    def as_dict(self):
        return asdict(self)


def _curves(analysis=None, freq=None, p_lti=None, p_td=None):
    if analysis is not None:
        freq, p_lti, p_td = analysis.freq_long, analysis.p_lti, analysis.p_td
    freq = np.asarray(freq, dtype=np.float64)
    p_lti = np.asarray(p_lti, dtype=np.float64)
    p_td = None if p_td is None else np.asarray(p_td, dtype=np.float64)
    return freq, p_lti, p_td


def bandwidth(analysis=None, *, freq=None, p_lti=None, p_td=None, band_cap=BAND_CAP_HZ):
    """Second-moment bandwidth below the first LTI/disturbance crossing.

    Returns ``(b_w, f_hl, crossing_found)``. Without a crossing up to
    ``band_cap`` the last evaluated bin closes the set and the flag is False.
    """
    freq, p_lti, p_td = _curves(analysis, freq, p_lti, p_td)
    evaluated = np.isfinite(p_lti) & np.isfinite(p_td) & (freq <= band_cap)
    idx = np.nonzero(evaluated)[0]
    if idx.size == 0:
        raise IndexUndefined("no evaluable bins for the bandwidth index")
    below = idx[(idx > 0) & (p_lti[idx] < p_td[idx])]
    found = below.size > 0
    k_b = int(below[0]) if found else int(idx[-1])
    omega = idx[idx <= k_b]
    power = p_lti[omega]
    if omega.size == 0 or power.sum() <= 0:
        raise IndexUndefined("empty evaluation set for the bandwidth index")
    b_w = float(np.sqrt(np.sum(freq[omega] ** 2 * power) / np.sum(power)))
    return b_w, float(freq[k_b]), bool(found)


def snr_fm(analysis=None, b_w=None, *, freq=None, p_lti=None, p_td=None):
    """In-band LTI to disturbance power ratio in dB; DC excluded."""
    freq, p_lti, p_td = _curves(analysis, freq, p_lti, p_td)
    band = (freq > 0) & (freq < b_w) & np.isfinite(p_lti) & np.isfinite(p_td)
    if not np.any(band):
        raise IndexUndefined(f"no bins between 0 and B_w = {b_w} Hz")
    return float(10.0 * np.log10(np.sum(p_lti[band]) / np.sum(p_td[band])))


def _index_band(freq, p_lti, f_max):
    k = np.arange(freq.size - 1)
    sel = (freq[k] > 0) & (freq[k + 1] < f_max) & np.isfinite(p_lti[k]) & np.isfinite(p_lti[k + 1])
    return k[sel]


def sd_fd(analysis=None, *, freq=None, p_lti=None, f_max=INDEX_BAND_HZ):
    """RMS gain step between neighbouring bins below ``f_max``, in dB/Hz."""
    freq, p_lti, _ = _curves(analysis, freq, p_lti)
    k = _index_band(freq, p_lti, f_max)
    if k.size == 0:
        raise IndexUndefined(f"no bin pairs below {f_max} Hz")
    steps = 10.0 * np.log10(p_lti[k + 1] / p_lti[k])
    df = float(freq[1] - freq[0])
    return float(np.sqrt(np.sum(steps ** 2) / (k.size * df)))


def mean_gain_db(analysis=None, *, freq=None, p_lti=None, f_max=INDEX_BAND_HZ):
    """Average LTI power over the index band, in dB."""
    freq, p_lti, _ = _curves(analysis, freq, p_lti)
    k = _index_band(freq, p_lti, f_max)
    if k.size == 0:
        raise IndexUndefined(f"no bin pairs below {f_max} Hz")
    return float(10.0 * np.log10(np.mean(p_lti[k])))


def sd_td(targets_hz, gains_db, f_lo=80.0, f_hi=400.0, rtol=1e-6):
    """RMS mean-gain step between neighbouring carriers, in dB/semitone.

    ``targets_hz`` must be a uniform geometric grid. Pairs with a NaN gain
    (failed targets) are skipped; the normalization counts used pairs.
    """
    f = np.asarray(targets_hz, dtype=np.float64)
    g = np.asarray(gains_db, dtype=np.float64)
    if f.shape != g.shape:
        raise ParameterError("targets and gains differ in length")
    sel = (f >= f_lo * (1 - 1e-12)) & (f <= f_hi * (1 + 1e-12))
    f, g = f[sel], g[sel]
    if f.size < 2:
        raise IndexUndefined("need at least two targets in range")
    semis = 12.0 * np.log2(f / f[0])
    steps = np.diff(semis)
    if np.any(np.abs(steps - steps[0]) > rtol * abs(steps[0])) or steps[0] <= 0:
        raise ParameterError("target grid is not uniform in semitones")
    d = np.diff(g)
    d = d[np.isfinite(d)]
    if d.size == 0:
        raise IndexUndefined("no neighbouring targets with finite gain")
    return float(np.sqrt(np.sum(d ** 2) / (d.size * steps[0])))


def performance_map(collection):
    """Map records from ``{extractor_id: {"targets": [...], "sd_td": x}}``.

    Each target entry is a :class:`PerformanceIndices` or its dict form;
    map coordinates are medians over targets, with NaN-valued targets
    ignored.
    """
    records = []
    for ext_id in sorted(collection):
        entry = collection[ext_id]
        rows = [t.as_dict() if isinstance(t, PerformanceIndices) else dict(t)
                for t in entry["targets"]]

        def med(key):
            vals = np.array([r.get(key, np.nan) for r in rows], dtype=np.float64)
            vals = vals[np.isfinite(vals)]
            return float(np.median(vals)) if vals.size else float("nan")

        records.append({
            "extractor_id": ext_id,
            "b_w_hz": med("b_w"),
            "snr_fm_db": med("snr_fm"),
            "sd_fd_db_per_hz": med("sd_fd"),
            "sd_td_db_per_semitone": float(entry.get("sd_td", float("nan"))),
            "n_targets": len(rows),
        })
    return records


def indices(analysis, band_cap=BAND_CAP_HZ) -> PerformanceIndices:
    b_w, f_hl, found = bandwidth(analysis, band_cap=band_cap)
    return PerformanceIndices(
        b_w=b_w,
        f_hl=f_hl,
        crossing_found=found,
        snr_fm=snr_fm(analysis, b_w),
        mean_gain_db=mean_gain_db(analysis),
        sd_fd=sd_fd(analysis),
    )
