# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels; semantics defined by ``_pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport atan2, sin, cos, log2, floor, M_PI, INFINITY, NAN

cnp.import_array()


def allpass_phase(const double[::1] omega, const double[::1] theta,
                  const double[::1] polarity, double radius):
    cdef Py_ssize_t n = omega.shape[0], m = theta.shape[0], i, j
    cdef double w, th, p, acc, cm, sm
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    cdef double[::1] ct = np.cos(np.asarray(theta))
    cdef double[::1] st = np.sin(np.asarray(theta))
    cdef double cw, sw
    for j in range(n):
        w = omega[j]
        cw = cos(w)
        sw = sin(w)
        acc = 0.0
        for i in range(m):
            # angle-difference identities avoid two trig calls per term
            cm = cw * ct[i] + sw * st[i]
            sm = sw * ct[i] - cw * st[i]
            p = atan2(radius * sm, 1.0 - radius * cm)
            cm = cw * ct[i] - sw * st[i]
            sm = sw * ct[i] + cw * st[i]
            p += atan2(radius * sm, 1.0 - radius * cm)
            acc += polarity[i] * p
        o[j] = -2.0 * acc
    return out


def harmonic_sum(const double[::1] cycles, const double[::1] weights):
    cdef Py_ssize_t n = cycles.shape[0], kmax = weights.shape[0], t, k
    cdef double th, c2, s_prev, s_cur, s_next, acc
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    for t in range(n):
        th = 2.0 * M_PI * (cycles[t] - floor(cycles[t]))
        s_prev = 0.0
        s_cur = sin(th)
        c2 = 2.0 * cos(th)
        acc = 0.0
        for k in range(kmax):
            acc += weights[k] * s_cur
            s_next = c2 * s_cur - s_prev
            s_prev = s_cur
            s_cur = s_next
        o[t] = acc
    return out


def one_pole(const double[::1] x, double coef, double initial):
    cdef Py_ssize_t n = x.shape[0], t
    cdef double y = initial, g = 1.0 - coef
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    for t in range(n):
        y = coef * y + g * x[t]
        o[t] = y
    return out


def pick_peaks(const double[:, ::1] values, double lag_lo, double threshold,
               double octave_cost, bint interpolate):
    cdef Py_ssize_t n_frames = values.shape[0], n_lags = values.shape[1], f, c, best
    cdef double score, best_score, y0, y1, y2, den, delta
    cdef double lag_max = lag_lo + n_lags - 1.0
    lags_arr = np.full(n_frames, np.nan)
    peaks_arr = np.full(n_frames, np.nan)
    cdef double[::1] lags = lags_arr
    cdef double[::1] peaks = peaks_arr
    if n_lags < 3:
        return lags_arr, peaks_arr
    for f in range(n_frames):
        best = -1
        best_score = -INFINITY
        for c in range(1, n_lags - 1):
            y1 = values[f, c]
            if y1 > values[f, c - 1] and y1 >= values[f, c + 1] and y1 >= threshold:
                score = y1 + octave_cost * log2(lag_max / (lag_lo + c))
                if score > best_score:
                    best_score = score
                    best = c
        if best < 0:
            continue
        y0 = values[f, best - 1]
        y1 = values[f, best]
        y2 = values[f, best + 1]
        delta = 0.0
        if interpolate:
            den = y0 - 2.0 * y1 + y2
            if den < 0.0:
                delta = 0.5 * (y0 - y2) / den
            peaks[f] = y1 - 0.25 * (y0 - y2) * delta
        else:
            peaks[f] = y1
        lags[f] = lag_lo + best + delta
    return lags_arr, peaks_arr
