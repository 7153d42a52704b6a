"""Command-line entry point: ``pitchmtf generate|measure|sweep|report``."""

from __future__ import annotations

import argparse
import json
import sys

from . import bench
from .config import parse_grid, resolve
from .errors import BenchError, ParameterError


def _common(p):
    p.add_argument("--config", help="JSON config file; its keys override flags")
    p.add_argument("--seed", type=int, help="first of three CAPRICEP seeds (default 1)")
    p.add_argument("--fm-depth", type=float, dest="fm_depth",
                   help="modulation depth in cents (default 100)")
    p.add_argument("--sigma", type=float, dest="gaussian_sigma",
                   help="Gaussian smoother sigma in seconds (default 0.005)")
    p.add_argument("--grid", type=parse_grid, help="carrier grid 'f_lo,f_hi,step_octaves'")
    p.add_argument("--shape", choices=("vowel_a", "flat"))
    p.add_argument("--out", help="output directory (default ./results)")
    p.add_argument("--registry", help="JSON adapter registry")
    p.add_argument("--band-cap", type=float, dest="band_cap", help="crossing search cap, Hz")


def _target(p):
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--target", type=float, help="carrier frequency in Hz")
    g.add_argument("--index", type=int, help="carrier index on the grid")


def build_parser():
    parser = argparse.ArgumentParser(prog="pitchmtf",
                                     description="Modulation-response benchmark for pitch extractors.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write one test signal as WAV + sidecar")
    _common(p)
    _target(p)

    p = sub.add_parser("measure", help="measure one adapter at one carrier")
    _common(p)
    _target(p)
    p.add_argument("--adapter", required=True)

    p = sub.add_parser("sweep", help="measure adapters over the whole grid")
    _common(p)
    p.add_argument("--adapter", action="append", dest="adapters",
                   help="adapter id; repeat for several")
    p.add_argument("--jobs", type=int, help="worker processes (default 1)")
    p.add_argument("--quota", type=float, dest="failure_quota",
                   help="tolerated failed fraction (default 0.25)")

    p = sub.add_parser("report", help="emit curve and map CSVs from a results directory")
    p.add_argument("results", help="results directory")
    p.add_argument("--out", help="bundle directory (default <results>/report)")
    return parser


_FLAG_KEYS = ("seed", "fm_depth", "gaussian_sigma", "grid", "shape", "out", "registry",
              "band_cap", "adapters", "jobs", "failure_quota")


def _config(args):
    flags = {k: getattr(args, k, None) for k in _FLAG_KEYS}
    return resolve(flags, args.config)


def _pick_target(cfg, args):
    if args.target is not None:
        if args.target <= 0:
            raise ParameterError(f"target must be positive, got {args.target}")
        return args.target
    grid = cfg.targets()
    if not 0 <= args.index < len(grid):
        raise ParameterError(f"grid index {args.index} outside 0..{len(grid) - 1}")
    return grid[args.index]


def _emit(obj):
    print(json.dumps(bench._clean(obj), sort_keys=True))


def run(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "report":
        _emit({"report": str(bench.report(args.results, args.out))})
        return 0
    cfg = _config(args)
    if args.command == "generate":
        f = _pick_target(cfg, args)
        _emit({"wav": str(bench.generate(cfg, f, cfg.out)), "target_hz": f})
        return 0
    if args.command == "measure":
        f = _pick_target(cfg, args)
        rec = bench.measure(cfg, bench.resolve_adapter(cfg, args.adapter), f)
        _emit({k: rec.get(k) for k in ("status", "target_hz", "indices", "error_category",
                                        "message", "missing_fraction")})
        if rec["status"] != "ok":
            print(f"error [{rec['error_category']}]: {rec['message']}", file=sys.stderr)
            return 1
        return 0
    # sweep
    for adapter_id in cfg.adapters:
        summary = bench.sweep(
            cfg, adapter_id,
            progress=lambda f, s: print(f"{adapter_id} {f:.4f} Hz {s}", file=sys.stderr),
        )
        _emit(summary)
    return 0


def main(argv=None):
    try:
        return run(argv)
    except BenchError as exc:
        print(f"error [{exc.category}]: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error [io]: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
