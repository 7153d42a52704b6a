"""Kernel dispatch.

The compiled extension is used when it imports; otherwise the NumPy
versions are. Set ``PITCHMTF_PURE_PYTHON=1`` to force the fallback.
"""

import os

import numpy as np

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("PITCHMTF_PURE_PYTHON", "") != "1":
    try:
        from . import _ckernels as _impl  # noqa: F811

        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels


def _c(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def allpass_phase(omega, theta, polarity, radius):
    return _impl.allpass_phase(_c(omega), _c(theta), _c(polarity), float(radius))


def harmonic_sum(cycles, weights):
    return _impl.harmonic_sum(_c(cycles), _c(weights))


def one_pole(x, coef, initial):
    return _impl.one_pole(_c(x), float(coef), float(initial))


def pick_peaks(values, lag_lo, threshold, octave_cost=0.0, interpolate=True):
    return _impl.pick_peaks(np.ascontiguousarray(values, dtype=np.float64),
                            float(lag_lo), float(threshold), float(octave_cost),
                            bool(interpolate))
