"""Time the compiled kernels against the NumPy fallback.

    python3 benchmarks/bench_kernels.py [--repeat N]

Inputs match the sizes used by a real measurement: one unit CAPRICEP, one
20 s test signal, one frame matrix from the cepstrum extractor.
"""

import argparse
import timeit

import numpy as np

from pitchmtf import _pykernels

try:
    from pitchmtf import _ckernels
except ImportError:
    _ckernels = None


def cases():
    rng = np.random.default_rng(0)
    n_sec = 2048
    theta = (np.arange(n_sec) + 0.5 + rng.uniform(-0.5, 0.5, n_sec)) * np.pi / n_sec
    pol = rng.choice([-1.0, 1.0], n_sec)
    omega = 2 * np.pi * np.arange(65536 // 2 + 1) / 65536
    cycles = np.cumsum(np.full(882000, 200.0 / 44100)) % 1.0
    weights = 1.0 / np.arange(1, 51)
    x = rng.normal(size=882000)
    frames = np.ascontiguousarray(rng.normal(size=(4000, 500)))
    return {
        "allpass_phase": lambda m: m.allpass_phase(omega, theta, pol, 0.99),
        "harmonic_sum": lambda m: m.harmonic_sum(cycles, weights),
        "one_pole": lambda m: m.one_pole(x, 0.99887, 0.0),
        "pick_peaks": lambda m: m.pick_peaks(frames, 88.0, 0.5, 0.0, True),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if _ckernels is None:
        print("compiled kernels not built; only the fallback is timed")
    print(f"{'kernel':<15}{'python s':>11}{'cython s':>11}{'speedup':>9}")
    for name, run in cases().items():
        py = min(timeit.repeat(lambda: run(_pykernels), number=1, repeat=args.repeat))
        if _ckernels is None:
            print(f"{name:<15}{py:>11.4f}")
            continue
        cy = min(timeit.repeat(lambda: run(_ckernels), number=1, repeat=args.repeat))
        print(f"{name:<15}{py:>11.4f}{cy:>11.4f}{py / cy:>8.1f}x")


if __name__ == "__main__":
    main()
