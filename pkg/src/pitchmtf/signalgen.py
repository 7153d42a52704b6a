"""Frequency-modulated harmonic test signals.

The modulation trajectory is the periodic CAPRICEP mix, tiled over nine
periods and smoothed by a truncated Gaussian, scaled to a requested standard
deviation in cents. It frequency-modulates a carrier whose harmonics follow
a fixed spectral envelope.
"""

from __future__ import annotations

import json
import math
import wave
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.signal import fftconvolve

from . import capricep, kernels
from .capricep import CapricepSet
from .errors import ParameterError

SAMPLE_RATE = 44100.0
DURATION = 20.0
LEAD_IN = 2.0
N_SEGMENTS = 9
ANALYZED_PERIODS = 6
DEFAULT_FM_DEPTH = 100.0
DEFAULT_SIGMA = 0.005
GAUSSIAN_FLOOR = 1e-8
EXPORT_PEAK = 0.8

VOWEL_A_FORMANTS = (800.0, 1200.0, 2900.0, 3500.0)
VOWEL_A_BANDWIDTHS = (100.0, 120.0, 150.0, 200.0)


def hz_to_cent(f, reference=1.0):
    f = np.asarray(f, dtype=np.float64)
    if np.any(f <= 0) or reference <= 0:
        raise ParameterError("frequencies must be positive")
    out = 1200.0 * np.log2(f / reference)
    return float(out) if out.ndim == 0 else out


def cent_to_hz(c, reference=1.0):
    if reference <= 0:
        raise ParameterError("reference frequency must be positive")
    out = reference * np.exp2(np.asarray(c, dtype=np.float64) / 1200.0)
    return float(out) if out.ndim == 0 else out


def cent_hz_convert(value, reference=1.0, direction="to_hz"):
    """Musical-cent mapping ``f = reference * 2 ** (cent / 1200)`` in either direction."""
    if direction == "to_hz":
        return cent_to_hz(value, reference)
    if direction == "to_cent":
        return hz_to_cent(value, reference)
    raise ParameterError(f"unknown direction {direction!r}")


def gaussian_kernel(sigma, sample_rate=SAMPLE_RATE, floor=GAUSSIAN_FLOOR):
    """Unit-sum sampled Gaussian, truncated where it drops to ``floor`` of its peak."""
    if sigma <= 0:
        raise ParameterError(f"gaussian sigma must be positive, got {sigma}")
    s = sigma * sample_rate
    half = int(math.ceil(s * math.sqrt(-2.0 * math.log(floor))))
    n = np.arange(-half, half + 1)
    g = np.exp(-0.5 * (n / s) ** 2)
    return g / g.sum()


@dataclass(frozen=True, eq=False)
class ModulationTrajectory:
    """Modulation in cents; ``f_cent[offset]`` is the first sample of period 0."""

    f_cent: np.ndarray
    f_m: float
    gaussian_sigma: float
    sample_rate: float
    offset: int
    n_segments: int
    unit_period: int
    capricep: dict = field(default_factory=dict)

    @property
    def length(self) -> int:
        return self.f_cent.size


def make_modulation(cset: CapricepSet, f_m=DEFAULT_FM_DEPTH, sigma=DEFAULT_SIGMA,
                    n_segments=N_SEGMENTS, max_duration=DURATION) -> ModulationTrajectory:
    if f_m < 0:
        raise ParameterError(f"modulation depth must be non-negative, got {f_m}")
    fs = cset.sample_rate
    g = gaussian_kernel(sigma, fs)
    span = np.tile(cset.x_mix, n_segments)
    smooth = fftconvolve(span, g)
    if smooth.size > max_duration * fs:
        raise ParameterError(
            f"modulation of {smooth.size} samples exceeds the {max_duration} s budget"
        )
    f_cent = f_m * smooth / np.std(smooth)
    f_cent.setflags(write=False)
    u = cset.units[0]
    info = {
        "seeds": list(cset.seeds),
        "allocation_interval": cset.allocation_interval,
        "n_sections": u.section_count,
        "pole_radius": u.pole_radius,
    }
    return ModulationTrajectory(f_cent, float(f_m), float(sigma), fs, g.size // 2,
                                int(n_segments), cset.unit_period, info)


def target_grid(f_lo=80.0, f_hi=400.0, step=1.0 / 48.0):
    """Geometric carrier grid ``f_lo * 2 ** (k * step)`` up to ``f_hi``."""
    if not 0 < f_lo < f_hi:
        raise ParameterError(f"need 0 < f_lo < f_hi, got {f_lo}, {f_hi}")
    if step <= 0:
        raise ParameterError(f"step must be positive, got {step}")
    limit = f_hi * (1.0 + 1e-12)
    out = []
    k = 0
    while True:
        f = f_lo * 2.0 ** (k * step)
        if f > limit:
            return out
        out.append(f)
        k += 1


def _allpole_gain(freqs, formants, bandwidths, fs):
    z = np.exp(-1j * 2.0 * np.pi * np.asarray(freqs, dtype=np.float64) / fs)
    den = np.ones_like(z)
    for fc, bw in zip(formants, bandwidths):
        r = math.exp(-math.pi * bw / fs)
        c = 2.0 * r * math.cos(2.0 * math.pi * fc / fs)
        den *= 1.0 - c * z + r * r * z * z
    return 1.0 / np.abs(den)


def vowel_weights(f_tgt, n_harmonics, shape="vowel_a", sample_rate=SAMPLE_RATE,
                  formants=VOWEL_A_FORMANTS, bandwidths=VOWEL_A_BANDWIDTHS):
    """Harmonic amplitudes sampled from a spectral envelope, ``a_1 = 1``."""
    if n_harmonics < 1:
        raise ParameterError(f"need at least one harmonic, got {n_harmonics}")
    if shape == "flat":
        return np.ones(n_harmonics)
    if shape != "vowel_a":
        raise ParameterError(f"unknown spectral shape {shape!r}")
    gain = _allpole_gain(f_tgt * np.arange(1, n_harmonics + 1), formants, bandwidths,
                         sample_rate)
    return gain / gain[0]


@dataclass(frozen=True)
class AnalysisWindow:
    start: int
    n_periods: int = ANALYZED_PERIODS
    period: int = 65536

    @property
    def stop(self) -> int:
        return self.start + self.n_periods * self.period


@dataclass(frozen=True, eq=False)
class TestSignalSpec:
    f_tgt: float
    harmonic_weights: tuple
    sample_rate: float = SAMPLE_RATE
    duration: float = DURATION
    lead_in: float = LEAD_IN
    initial_phases: tuple | None = None
    residual: np.ndarray | None = None
    shape: str = "vowel_a"

    __test__ = False

    @property
    def f_tgt_cent(self) -> float:
        return hz_to_cent(self.f_tgt)

    @property
    def n_harmonics(self) -> int:
        return len(self.harmonic_weights)


@dataclass(frozen=True, eq=False)
class TestSignal:
    audio: np.ndarray
    reference_cent: np.ndarray
    spec: TestSignalSpec
    analysis_window: AnalysisWindow
    trajectory: ModulationTrajectory
    meta: dict = field(default_factory=dict)

    __test__ = False

    @property
    def sample_rate(self) -> float:
        return self.spec.sample_rate

    @property
    def modulated_span(self) -> slice:
        start = int(round(self.spec.lead_in * self.spec.sample_rate)) - self.trajectory.offset
        return slice(start, start + self.trajectory.length)


def max_harmonics(f_tgt, traj: ModulationTrajectory, nyquist_fraction=1.0):
    """Largest K whose top harmonic stays below Nyquist over the whole trajectory."""
    peak = f_tgt * 2.0 ** (max(float(np.max(traj.f_cent, initial=0.0)), traj.f_m) / 1200.0)
    k = int(math.floor(nyquist_fraction * traj.sample_rate / 2.0 / peak))
    while k > 0 and k * peak >= traj.sample_rate / 2.0:
        k -= 1
    return max(k, 1)


def make_spec(f_tgt, traj: ModulationTrajectory, shape="vowel_a", n_harmonics=None,
              **kwargs) -> TestSignalSpec:
    if n_harmonics is None:
        n_harmonics = max_harmonics(f_tgt, traj)
    a = vowel_weights(f_tgt, n_harmonics, shape, traj.sample_rate)
    return TestSignalSpec(float(f_tgt), tuple(float(v) for v in a), traj.sample_rate,
                          shape=shape, **kwargs)


def synthesize(spec: TestSignalSpec, traj: ModulationTrajectory) -> TestSignal:
    """Render the harmonic test signal driven by ``traj``.

    The modulated span starts ``lead_in`` seconds in; the rest of the
    duration carries the unmodulated carrier. The analysis window covers
    periods 1..6 of the nine-period span (0-based), leaving guard periods
    on both sides for smoothing and extractor latency.
    """
    fs = spec.sample_rate
    if abs(fs - traj.sample_rate) > 1e-9:
        raise ParameterError(f"sample rates differ: {fs} vs {traj.sample_rate}")
    total = int(round(spec.duration * fs))
    lead = int(round(spec.lead_in * fs))
    begin = lead - traj.offset
    if begin < 0 or begin + traj.length > total:
        raise ParameterError("modulation trajectory does not fit inside the signal duration")

    peak_cent = max(float(np.max(traj.f_cent, initial=0.0)), traj.f_m)
    top = spec.f_tgt * 2.0 ** (peak_cent / 1200.0)
    nyq = fs / 2.0
    if spec.n_harmonics * top >= nyq:
        k = max(1, int(math.ceil(nyq / top)))
        if k * top < nyq:
            k += 1
        raise ParameterError(
            f"harmonic {k} reaches {k * top:.1f} Hz, at or above Nyquist {nyq:.1f} Hz"
        )

    ref = np.zeros(total)
    ref[begin:begin + traj.length] = traj.f_cent
    f0 = spec.f_tgt * np.exp2(ref / 1200.0)
    cycles = np.cumsum(f0 / fs)
    frac = cycles - np.floor(cycles)
    weights = np.asarray(spec.harmonic_weights, dtype=np.float64)
    if spec.initial_phases is None or not np.any(spec.initial_phases):
        audio = kernels.harmonic_sum(frac, weights)
    else:
        audio = np.zeros(total)
        for k, (a, phi) in enumerate(zip(weights, spec.initial_phases), start=1):
            audio += a * np.sin(phi + 2.0 * np.pi * np.mod(k * frac, 1.0))
    if spec.residual is not None:
        r = np.asarray(spec.residual, dtype=np.float64)
        if r.size != total:
            raise ParameterError(f"residual has {r.size} samples, expected {total}")
        audio = audio + r

    window = AnalysisWindow(lead + traj.unit_period, ANALYZED_PERIODS, traj.unit_period)
    meta = {
        "f_tgt_hz": spec.f_tgt,
        "f_tgt_cent": spec.f_tgt_cent,
        "f_m_cents": traj.f_m,
        "gaussian_sigma_s": traj.gaussian_sigma,
        "sample_rate": fs,
        "duration_s": spec.duration,
        "lead_in_s": spec.lead_in,
        "n_harmonics": spec.n_harmonics,
        "shape": spec.shape,
        "n_segments": traj.n_segments,
        "analysis_window": asdict(window),
        **traj.capricep,
    }
    audio.setflags(write=False)
    ref.setflags(write=False)
    return TestSignal(audio, ref, spec, window, traj, meta)


def signal_from_meta(meta) -> TestSignal:
    """Regenerate a test signal from its metadata record (sidecar contents)."""
    try:
        cset = capricep.cached_capricep_set(
            tuple(int(v) for v in meta["seeds"]), int(meta["allocation_interval"]),
            int(meta["n_sections"]), float(meta["pole_radius"]), float(meta["sample_rate"]),
        )
        traj = make_modulation(cset, float(meta["f_m_cents"]), float(meta["gaussian_sigma_s"]),
                               int(meta["n_segments"]), float(meta["duration_s"]))
        spec = make_spec(float(meta["f_tgt_hz"]), traj, meta["shape"], int(meta["n_harmonics"]),
                         duration=float(meta["duration_s"]), lead_in=float(meta["lead_in_s"]))
    except KeyError as exc:
        raise ParameterError(f"metadata lacks {exc.args[0]!r}") from None
    return synthesize(spec, traj)


def sidecar_path(path) -> Path:
    p = Path(path)
    return p.with_name(p.stem + ".meta.json") if p.suffix else p.with_name(p.name + ".meta.json")


def export_wav(sig: TestSignal, path, extra_meta=None) -> Path:
    """Write a 24-bit mono WAV peak-normalized to 0.8 of full scale, plus sidecar JSON."""
    path = Path(path)
    peak = float(np.max(np.abs(sig.audio)))
    if peak == 0.0:
        raise ParameterError("cannot normalize an all-zero signal")
    full = 2 ** 23 - 1
    gain = EXPORT_PEAK / peak
    ints = np.round(sig.audio * gain * full).astype("<i4")
    raw = ints.view(np.uint8).reshape(-1, 4)[:, :3].tobytes()
    meta = dict(sig.meta)
    meta["normalization_gain"] = gain
    meta["bits_per_sample"] = 24
    if extra_meta:
        meta.update(extra_meta)
    try:
        with open(path, "wb") as fh, wave.open(fh, "wb") as w:
            w.setnchannels(1)
            w.setsampwidth(3)
            w.setframerate(int(round(sig.sample_rate)))
            w.writeframes(raw)
        sidecar_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n",
                                      encoding="utf-8")
    except OSError as exc:
        raise OSError(f"could not write {path}: {exc}") from exc
    return path


def read_wav(path):
    """Read a PCM WAV (16/24/32 bit, first channel) as floats in [-1, 1)."""
    with wave.open(str(path), "rb") as w:
        width = w.getsampwidth()
        nch = w.getnchannels()
        fs = w.getframerate()
        raw = w.readframes(w.getnframes())
    if width == 3:
        b = np.frombuffer(raw, dtype=np.uint8).reshape(-1, 3).astype(np.int32)
        ints = b[:, 0] | (b[:, 1] << 8) | (b[:, 2] << 16)
        ints = np.where(ints >= 2 ** 23, ints - 2 ** 24, ints)
        x = ints / 2.0 ** 23
    elif width == 2:
        x = np.frombuffer(raw, dtype="<i2") / 2.0 ** 15
    elif width == 4:
        x = np.frombuffer(raw, dtype="<i4") / 2.0 ** 31
    else:
        raise ParameterError(f"unsupported sample width {width}")
    return x.reshape(-1, nch)[:, 0].astype(np.float64), float(fs)
