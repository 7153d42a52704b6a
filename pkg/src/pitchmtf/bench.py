"""Measurement, sweeps and report bundles.

Results layout::

    <out>/<adapter>/<target_cents>.json   one file per carrier
    <out>/<adapter>/sweep.csv             one row per carrier
    <out>/<adapter>/map.json              performance-map record

Per-target files are written atomically, so a killed sweep resumes by
skipping every target that already has a file.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import capricep, metrics, respan, signalgen
from .config import BenchConfig
from .errors import (ConfigurationError, ExternalFailure, FormatError,
                     IndexUndefined, MeasurementFailed, NothingToReport, ParameterError,
                     QuotaExceeded)
from .extractors.adapters import ExtractorAdapter, load_registry, run_adapter

_ECHO_FIELDS = ("seed", "fm_depth", "grid", "gaussian_sigma", "shape", "band_cap")
_TARGET_FAILURES = (MeasurementFailed, ExternalFailure, FormatError, ConfigurationError)

SWEEP_COLUMNS = (
    "target_hz", "target_cents", "status", "error_category", "missing_fraction",
    "b_w_hz", "f_hl_hz", "crossing_found", "snr_fm_db", "mean_gain_db", "sd_fd_db_per_hz",
)
CURVE_COLUMNS = ("freq_hz", "lti_db", "tv_db", "nlti_db", "td_db", "f_hl_hz", "b_w_hz")


# signals

_TRAJ_CACHE = {}
_REF_CACHE = {}


def modulation_for(cfg: BenchConfig):
    """``(capricep_set, trajectory)`` for the config, built once per process."""
    key = (cfg.seeds, cfg.fm_depth, cfg.gaussian_sigma)
    if key not in _TRAJ_CACHE:
        cset = capricep.cached_capricep_set(
            cfg.seeds, capricep.DEFAULT_ALLOCATION, capricep.DEFAULT_SECTIONS,
            capricep.DEFAULT_POLE_RADIUS, signalgen.SAMPLE_RATE,
        )
        _TRAJ_CACHE[key] = (cset, signalgen.make_modulation(cset, cfg.fm_depth,
                                                            cfg.gaussian_sigma))
    return _TRAJ_CACHE[key]


def signal_for(cfg: BenchConfig, f_tgt: float) -> signalgen.TestSignal:
    _, traj = modulation_for(cfg)
    spec = signalgen.make_spec(f_tgt, traj, cfg.shape)
    return signalgen.synthesize(spec, traj)


def _reference_responses(cfg, sig):
    key = (cfg.seeds, cfg.fm_depth, cfg.gaussian_sigma, sig.analysis_window)
    if key not in _REF_CACHE:
        cset, _ = modulation_for(cfg)
        _REF_CACHE[key] = respan.compute_responses(sig.reference_cent, cset,
                                                   sig.analysis_window, "reference")
    return _REF_CACHE[key]


def target_name(f_tgt: float) -> str:
    return f"{signalgen.hz_to_cent(f_tgt):.3f}"


def generate(cfg: BenchConfig, f_tgt: float, out_dir) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    sig = signal_for(cfg, f_tgt)
    return signalgen.export_wav(sig, out_dir / f"{target_name(f_tgt)}.wav",
                                {"config": echo(cfg)})


# persistence

def echo(cfg: BenchConfig) -> dict:
    d = cfg.as_dict()
    return {k: d[k] for k in _ECHO_FIELDS}


def _clean(x):
    """JSON-safe copy: NaN/inf to None, numpy scalars to Python."""
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_clean(v) for v in x.tolist()]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def write_atomic(path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=path.name + ".", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def dump_json(obj) -> str:
    return json.dumps(_clean(obj), indent=1, sort_keys=True, allow_nan=False) + "\n"


def read_result(path):
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError):
        return None
    return doc if isinstance(doc, dict) and "status" in doc else None


# measurement

def _db(x):
    with np.errstate(divide="ignore", invalid="ignore"):
        return 10.0 * np.log10(np.maximum(x, 1e-300))


def safe_indices(analysis, band_cap) -> tuple[dict, dict]:
    """Index values with None for undefined ones, and the reasons."""
    out = dict.fromkeys(("b_w_hz", "f_hl_hz", "crossing_found", "snr_fm_db",
                         "mean_gain_db", "sd_fd_db_per_hz"))
    why = {}
    try:
        b_w, f_hl, found = metrics.bandwidth(analysis, band_cap=band_cap)
        out.update(b_w_hz=b_w, f_hl_hz=f_hl, crossing_found=found)
        out["snr_fm_db"] = metrics.snr_fm(analysis, b_w)
    except IndexUndefined as exc:
        why["snr_fm_db" if out["b_w_hz"] is not None else "b_w_hz"] = str(exc)
    for key, fn in (("mean_gain_db", metrics.mean_gain_db), ("sd_fd_db_per_hz", metrics.sd_fd)):
        try:
            out[key] = fn(analysis)
        except IndexUndefined as exc:
            why[key] = str(exc)
    return out, why


def measure_target(cfg: BenchConfig, adapter: ExtractorAdapter, f_tgt: float) -> dict:
    """Full chain for one carrier. Known failure kinds become a ``failed`` record."""
    t0 = time.perf_counter()
    record = {
        "adapter": adapter.as_dict(),
        "config": echo(cfg),
        "target_hz": float(f_tgt),
        "target_cents": signalgen.hz_to_cent(f_tgt),
    }
    timing = {}
    try:
        sig = signal_for(cfg, f_tgt)
        ref = _reference_responses(cfg, sig)
        t1 = time.perf_counter()
        timing["generate_s"] = t1 - t0
        traj = run_adapter(adapter, sig, cfg.workdir)
        t2 = time.perf_counter()
        timing["extract_s"] = t2 - t1
        miss = respan.missing_fraction(traj, sig.analysis_window, sig.sample_rate)
        record["missing_fraction"] = miss
        cents = respan.resample_to_cents(traj, sig.spec.f_tgt_cent, sig.sample_rate,
                                         sig.analysis_window, sig.audio.size)
        cset, _ = modulation_for(cfg)
        meas = respan.compute_responses(cents, cset, sig.analysis_window)
        an = respan.analyze(meas, ref, sig.sample_rate, f_tgt, cfg.fm_depth)
        timing["analyze_s"] = time.perf_counter() - t2
    except _TARGET_FAILURES as exc:
        record.update(status="failed", error_category=exc.category, message=str(exc))
        if isinstance(exc, MeasurementFailed) and exc.missing_fraction is not None:
            record["missing_fraction"] = exc.missing_fraction
        if isinstance(exc, ExternalFailure) and exc.diagnostics:
            record["diagnostics"] = exc.diagnostics
        timing["total_s"] = time.perf_counter() - t0
        record["timing"] = timing
        return record

    idx, why = safe_indices(an, cfg.band_cap)
    band = an.freq_long <= cfg.band_cap
    record.update(
        status="ok",
        indices=idx,
        curves={
            "freq_hz": an.freq_long[band],
            "h_db": _db(an.p_lti[band]),
            "tv_db": _db(an.sigma2_tv[band]),
            "nlti_db": _db(an.sigma2_nlti_long[band]),
            "td_db": _db(an.p_td[band]),
        },
    )
    if why:
        record["undefined_indices"] = why
    timing["total_s"] = time.perf_counter() - t0
    record["timing"] = timing
    return record


def result_path(cfg: BenchConfig, adapter_id: str, f_tgt: float) -> Path:
    return Path(cfg.out) / adapter_id / f"{target_name(f_tgt)}.json"


def measure(cfg: BenchConfig, adapter: ExtractorAdapter, f_tgt: float) -> dict:
    rec = measure_target(cfg, adapter, f_tgt)
    write_atomic(result_path(cfg, adapter.id, f_tgt), dump_json(rec))
    return rec


def resolve_adapter(cfg: BenchConfig, adapter_id: str) -> ExtractorAdapter:
    reg = load_registry(cfg.registry)
    if adapter_id not in reg:
        raise ParameterError(f"adapter {adapter_id!r} is not registered; known: {sorted(reg)}")
    return reg[adapter_id]


# sweep

def _job(cfg_dict, adapter_dict, f_tgt):
    cfg = BenchConfig(**cfg_dict)
    adapter = ExtractorAdapter(**adapter_dict)
    return f_tgt, measure(cfg, adapter, f_tgt)["status"]


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else ""
    return str(v)


def sweep_rows(records):
    rows = []
    for rec in records:
        idx = rec.get("indices") or {}
        row = {
            "target_hz": rec["target_hz"],
            "target_cents": rec["target_cents"],
            "status": rec["status"],
            "error_category": rec.get("error_category"),
            "missing_fraction": rec.get("missing_fraction"),
        }
        for key in SWEEP_COLUMNS[5:]:
            row[key] = idx.get(key)
        rows.append(row)
    return rows


def write_sweep_csv(path, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for row in rows:
        w.writerow([_fmt(row[c]) for c in SWEEP_COLUMNS])
    write_atomic(path, buf.getvalue())


def map_record(adapter_id, records, grid=None):
    """Medians of per-target indices plus SD_td over the carriers."""
    ok = [r for r in records if r["status"] == "ok"]
    targets = [{"b_w": (r["indices"].get("b_w_hz")), "snr_fm": r["indices"].get("snr_fm_db"),
                "sd_fd": r["indices"].get("sd_fd_db_per_hz")} for r in ok]
    targets = [{k: (np.nan if v is None else v) for k, v in t.items()} for t in targets]
    f = np.array([r["target_hz"] for r in records], dtype=np.float64)
    g = np.array([np.nan if r["status"] != "ok" or r["indices"].get("mean_gain_db") is None
                  else r["indices"]["mean_gain_db"] for r in records], dtype=np.float64)
    lo, hi = (grid[0], grid[1]) if grid else (float(f.min()), float(f.max()))
    try:
        sd_t = metrics.sd_td(f, g, lo, hi)
    except (IndexUndefined, ParameterError):
        sd_t = float("nan")
    rec = metrics.performance_map({adapter_id: {"targets": targets, "sd_td": sd_t}})[0]
    rec["n_targets"] = len(records)
    rec["n_failed"] = len(records) - len(ok)
    return rec


def sweep(cfg: BenchConfig, adapter_id: str, progress=None) -> dict:
    """Measure every grid carrier that has no result file yet, then aggregate.

    Raises
    ------
    QuotaExceeded
        When more than ``cfg.failure_quota`` of the carriers failed. The
        aggregate files are written first.
    """
    adapter = resolve_adapter(cfg, adapter_id)
    targets = cfg.targets()
    todo = [f for f in targets if read_result(result_path(cfg, adapter_id, f)) is None]
    jobs = cfg.jobs if adapter.reentrant else 1
    if jobs > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futs = [pool.submit(_job, cfg.as_dict(), adapter.as_dict(), f) for f in todo]
            for fut in futs:
                f, status = fut.result()
                if progress:
                    progress(f, status)
    else:
        for f in todo:
            status = measure(cfg, adapter, f)["status"]
            if progress:
                progress(f, status)

    records = [read_result(result_path(cfg, adapter_id, f)) for f in targets]
    if any(r is None for r in records):
        raise MeasurementFailed("some per-target results could not be read back")
    base = Path(cfg.out) / adapter_id
    write_sweep_csv(base / "sweep.csv", sweep_rows(records))
    rec = map_record(adapter_id, records, cfg.grid)
    write_atomic(base / "map.json", dump_json(rec))
    n_failed = rec["n_failed"]
    summary = {"adapter": adapter_id, "n_targets": len(targets), "n_failed": n_failed,
               "n_computed": len(todo), "map": rec}
    if n_failed > cfg.failure_quota * len(targets):
        raise QuotaExceeded(
            f"{adapter_id}: {n_failed} of {len(targets)} targets failed "
            f"(quota {cfg.failure_quota:.0%})"
        )
    return summary


# report

def _curve_csv(rec):
    c = rec["curves"]
    idx = rec["indices"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CURVE_COLUMNS)
    for i, freq in enumerate(c["freq_hz"]):
        w.writerow([_fmt(freq), _fmt(c["h_db"][i]), _fmt(c["tv_db"][i]), _fmt(c["nlti_db"][i]),
                    _fmt(c["td_db"][i]), _fmt(idx.get("f_hl_hz")), _fmt(idx.get("b_w_hz"))])
    return buf.getvalue()


def _adapter_results(results_dir):
    found = {}
    for sub in sorted(p for p in Path(results_dir).iterdir() if p.is_dir()):
        recs = []
        for path in sorted(sub.glob("*.json")):
            if path.name == "map.json":
                continue
            rec = read_result(path)
            if rec is not None and "target_hz" in rec:
                recs.append((path.stem, rec))
        if recs:
            recs.sort(key=lambda item: item[1]["target_hz"])
            found[sub.name] = recs
    return found


def report(results_dir, out_dir=None) -> Path:
    """Curve CSVs per measured carrier plus the two map CSVs."""
    results_dir = Path(results_dir)
    if not results_dir.is_dir():
        raise NothingToReport(f"{results_dir} does not exist")
    found = _adapter_results(results_dir)
    if not any(rec["status"] == "ok" for recs in found.values() for _, rec in recs):
        raise NothingToReport(f"no completed measurements under {results_dir}")
    out_dir = Path(out_dir) if out_dir else results_dir / "report"

    maps = []
    for adapter_id, recs in found.items():
        for name, rec in recs:
            if rec["status"] == "ok":
                write_atomic(out_dir / "curves" / adapter_id / f"{name}.csv", _curve_csv(rec))
        maps.append(map_record(adapter_id, [r for _, r in recs]))

    def table(cols):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for m in maps:
            w.writerow([_fmt(m[c]) for c in cols])
        return buf.getvalue()

    write_atomic(out_dir / "map_bw_snr.csv",
                 table(("extractor_id", "b_w_hz", "snr_fm_db", "n_targets", "n_failed")))
    write_atomic(out_dir / "map_gain_change.csv",
                 table(("extractor_id", "sd_fd_db_per_hz", "sd_td_db_per_semitone",
                        "n_targets", "n_failed")))
    return out_dir

