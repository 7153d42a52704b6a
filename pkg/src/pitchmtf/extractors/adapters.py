"""Extractor adapters: built-in systems and external programs behind one interface.

An external program is called once per test signal through a command
template. ``{input}`` is replaced by the exported WAV, ``{output}`` by the
file the program must write, and the optional ``{meta}`` by the sidecar
JSON. Each call runs in a private temporary directory that is removed
afterwards.

Registry files are JSON::

    {"adapters": [
        {"id": "mytool", "kind": "external",
         "command_template": "mytool --in {input} --out {output}",
         "output_format": "csv_time_f0", "time_offset": -0.028,
         "reentrant": true, "timeout": 300}
    ]}

Built-in entries use ``"kind": "builtin"`` with ``"builtin"`` naming one of
:data:`BUILTINS` and optional ``"params"``.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import shlex
import shutil
import subprocess
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ExternalFailure, ExternalTimeout, FormatError, ParameterError
from ..respan import FoTrajectory
from ..signalgen import TestSignal, export_wav, sidecar_path
from . import builtin

OUTPUT_FORMATS = ("csv_time_f0", "one_column_with_rate")
DEFAULT_TIMEOUT = 300.0
_DIAG_LIMIT = 4000


def _cepstrum(mode):
    def run(sig, f_range=builtin.DEFAULT_RANGE):
        return builtin.extract_cepstrum(sig, mode, tuple(f_range))
    return run


def _acf(sig, f_range=builtin.DEFAULT_RANGE):
    return builtin.extract_acf(sig, tuple(f_range))


BUILTINS = {
    "identity": builtin.extract_identity,
    "validation": builtin.apply_validation_system,
    "cepstrum-quantized": _cepstrum("quantized"),
    "cepstrum-interpolated": _cepstrum("interpolated"),
    "acf": _acf,
}


@dataclass(frozen=True)
class ExtractorAdapter:
    id: str
    kind: str = "builtin"
    command_template: str = ""
    output_format: str = "csv_time_f0"
    frame_rate: float | None = None
    time_offset: float = 0.0
    reentrant: bool = True
    timeout: float = DEFAULT_TIMEOUT
    builtin: str | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.id:
            raise ParameterError("adapter id must be nonempty")
        if self.kind == "builtin":
            name = self.builtin or self.id
            if name not in BUILTINS:
                raise ParameterError(f"adapter {self.id!r}: unknown built-in {name!r}")
        elif self.kind == "external":
            tpl = self.command_template
            if not tpl or "{input}" not in tpl or "{output}" not in tpl:
                raise ParameterError(
                    f"adapter {self.id!r}: command_template needs {{input}} and {{output}}"
                )
            if self.output_format not in OUTPUT_FORMATS:
                raise ParameterError(
                    f"adapter {self.id!r}: output_format must be one of {OUTPUT_FORMATS}"
                )
            if self.output_format == "one_column_with_rate" and not (self.frame_rate or 0) > 0:
                raise ParameterError(f"adapter {self.id!r}: one_column_with_rate needs frame_rate")
        else:
            raise ParameterError(f"adapter {self.id!r}: kind must be builtin or external")
        if self.timeout <= 0:
            raise ParameterError(f"adapter {self.id!r}: timeout must be positive")

    def as_dict(self):
        return asdict(self)


def builtin_adapters():
    return {
        "identity": ExtractorAdapter("identity"),
        "validation": ExtractorAdapter("validation", params={"tau": 0.02}),
        "cepstrum-quantized": ExtractorAdapter("cepstrum-quantized"),
        "cepstrum-interpolated": ExtractorAdapter("cepstrum-interpolated"),
        "acf": ExtractorAdapter("acf"),
    }


def adapter_from_dict(d) -> ExtractorAdapter:
    known = set(ExtractorAdapter.__dataclass_fields__)
    extra = set(d) - known
    if extra:
        raise ParameterError(f"unknown adapter keys: {sorted(extra)}")
    if "id" not in d:
        raise ParameterError("adapter entry lacks 'id'")
    return ExtractorAdapter(**d)


def load_registry(path=None):
    """Built-in adapters plus any entries from a JSON registry file."""
    reg = builtin_adapters()
    if path is None:
        return reg
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: {exc.msg}", line=exc.lineno) from None
    entries = doc.get("adapters", []) if isinstance(doc, dict) else doc
    for d in entries:
        ad = adapter_from_dict(d)
        reg[ad.id] = ad
    return reg


# output parsing

def _parse_f0(text):
    t = text.strip()
    if t == "" or t.lower() == "nan":
        return math.nan
    v = float(t)
    return math.nan if v == 0.0 else v


def parse_csv_time_f0(path, extractor_id="", time_offset=0.0) -> FoTrajectory:
    """``time_sec,f0_hz`` CSV; empty, NaN and 0 mean unvoiced."""
    times, f0 = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        rows = csv.reader(fh)
        header = next(rows, None)
        if header is None or [h.strip() for h in header[:2]] != ["time_sec", "f0_hz"]:
            raise FormatError(f"{path}: expected header 'time_sec,f0_hz'", line=1)
        for line, row in enumerate(rows, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                t = float(row[0])
                f = _parse_f0(row[1] if len(row) > 1 else "")
            except (ValueError, IndexError):
                raise FormatError(f"{path}:{line}: cannot parse {','.join(row)!r}",
                                  line=line) from None
            if not math.isfinite(t):
                raise FormatError(f"{path}:{line}: time is not finite", line=line)
            times.append(t)
            f0.append(f)
    return _trajectory(path, times, f0, extractor_id, time_offset)


def parse_one_column(path, frame_rate, extractor_id="", time_offset=0.0) -> FoTrajectory:
    """One f0 per line at ``frame_rate``; frame 0 is centered at t = 0."""
    f0 = []
    with open(path, encoding="utf-8") as fh:
        for line, text in enumerate(fh, start=1):
            try:
                f0.append(_parse_f0(text))
            except ValueError:
                raise FormatError(f"{path}:{line}: cannot parse {text.strip()!r}",
                                  line=line) from None
    times = np.arange(len(f0)) / float(frame_rate)
    return _trajectory(path, times, f0, extractor_id, time_offset)


def _trajectory(path, times, f0, extractor_id, time_offset):
    if len(times) == 0:
        raise FormatError(f"{path}: no frames", line=None)
    try:
        return FoTrajectory(np.asarray(times, dtype=np.float64),
                            np.asarray(f0, dtype=np.float64),
                            extractor_id, float(time_offset))
    except ParameterError as exc:
        raise FormatError(f"{path}: {exc}") from None


def parse_output(adapter: ExtractorAdapter, path) -> FoTrajectory:
    if adapter.output_format == "csv_time_f0":
        return parse_csv_time_f0(path, adapter.id, adapter.time_offset)
    return parse_one_column(path, adapter.frame_rate, adapter.id, adapter.time_offset)


# running

def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _tail(data):
    text = (data or b"").decode("utf-8", errors="replace")
    return text[-_DIAG_LIMIT:]


def run_external(adapter: ExtractorAdapter, sig: TestSignal, workdir=None) -> FoTrajectory:
    """Export ``sig``, run the adapter's command in a private directory, parse its output.

    Raises
    ------
    ExternalFailure
        Missing program, nonzero exit, missing output or a modified input file.
    ExternalTimeout
        The program ran longer than ``adapter.timeout`` seconds.
    FormatError
        Unparseable output; the message names the offending line.
    """
    if adapter.kind != "external":
        raise ParameterError(f"adapter {adapter.id!r} is not external")
    if workdir is not None:
        Path(workdir).mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=f"{adapter.id}-", dir=workdir))
    try:
        wav = export_wav(sig, tmp / "input.wav")
        out = tmp / "output.txt"
        digest = _sha256(wav)
        fields = {"input": str(wav), "output": str(out), "meta": str(sidecar_path(wav))}
        argv = [part.format(**fields) for part in shlex.split(adapter.command_template)]
        try:
            proc = subprocess.run(argv, cwd=tmp, capture_output=True,
                                  timeout=adapter.timeout, check=False)
        except FileNotFoundError as exc:
            raise ExternalFailure(f"{adapter.id}: cannot run {argv[0]!r}: {exc.strerror}",
                                  diagnostics=str(exc)) from None
        except subprocess.TimeoutExpired as exc:
            raise ExternalTimeout(f"{adapter.id}: no result within {adapter.timeout:g} s",
                                  diagnostics=_tail(exc.stderr)) from None
        if proc.returncode != 0:
            raise ExternalFailure(
                f"{adapter.id}: exit status {proc.returncode}",
                diagnostics=_tail(proc.stderr) or _tail(proc.stdout),
            )
        if _sha256(wav) != digest:
            raise ExternalFailure(f"{adapter.id}: the program modified its input file")
        if not out.exists():
            raise ExternalFailure(f"{adapter.id}: no output file written",
                                  diagnostics=_tail(proc.stderr))
        return parse_output(adapter, out)
    finally:
        shutil.rmtree(tmp, ignore_errors=True)


def run_adapter(adapter: ExtractorAdapter, sig: TestSignal, workdir=None) -> FoTrajectory:
    """Trajectory from any adapter, built-in or external."""
    if adapter.kind == "external":
        return run_external(adapter, sig, workdir)
    fn = BUILTINS[adapter.builtin or adapter.id]
    traj = fn(sig, **adapter.params)
    if traj.extractor_id != adapter.id or adapter.time_offset:
        traj = FoTrajectory(traj.times, traj.f0, adapter.id,
                            traj.time_offset + adapter.time_offset)
    return traj
