import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pitchmtf import _pykernels, kernels

ck = pytest.importorskip("pitchmtf._ckernels")


def test_backend_is_reported():
    assert kernels.BACKEND in ("cython", "python")


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), r=st.floats(0.05, 0.995), n=st.integers(1, 64))
def test_allpass_phase_backends_agree(seed, r, n):
    rng = np.random.default_rng(seed)
    omega = np.sort(rng.uniform(0, np.pi, 257))
    theta = rng.uniform(0, np.pi, n)
    pol = rng.choice([-1.0, 1.0], n)
    a = _pykernels.allpass_phase(omega, theta, pol, r)
    b = ck.allpass_phase(omega, theta, pol, r)
    np.testing.assert_allclose(b, a, rtol=0, atol=1e-10 * n)


def test_allpass_phase_matches_rational_response():
    # phase of prod (z^-1 - r e^{-j th})(z^-1 - r e^{j th}) / ((1 - r e^{j th} z^-1)(1 - r e^{-j th} z^-1))
    # minus its linear part
    r, th = 0.8, 0.7
    omega = np.linspace(0.01, 3.1, 50)
    z1 = np.exp(-1j * omega)
    num = (z1 - r * np.exp(-1j * th)) * (z1 - r * np.exp(1j * th))
    den = (1 - r * np.exp(1j * th) * z1) * (1 - r * np.exp(-1j * th) * z1)
    want = np.unwrap(np.angle(num / den)) + 2 * omega
    got = kernels.allpass_phase(omega, np.array([th]), np.array([1.0]), r)
    want += np.round((got[0] - want[0]) / (2 * np.pi)) * 2 * np.pi
    np.testing.assert_allclose(got, want, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), k=st.integers(1, 80))
def test_harmonic_sum_backends_agree(seed, k):
    rng = np.random.default_rng(seed)
    cyc = rng.uniform(0, 1, 500)
    w = rng.normal(size=k)
    ref = (w[:, None] * np.sin(2 * np.pi * np.arange(1, k + 1)[:, None] * cyc)).sum(0)
    np.testing.assert_allclose(_pykernels.harmonic_sum(cyc, w), ref, atol=1e-11 * k)
    np.testing.assert_allclose(ck.harmonic_sum(cyc, w), ref, atol=1e-11 * k)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), a=st.floats(0.0, 0.9999), init=st.floats(-5, 5))
def test_one_pole_backends_agree(seed, a, init):
    x = np.random.default_rng(seed).normal(size=300)
    y = np.empty_like(x)
    prev = init
    for i, v in enumerate(x):
        prev = a * prev + (1 - a) * v
        y[i] = prev
    np.testing.assert_allclose(_pykernels.one_pole(x, a, init), y, atol=1e-12)
    np.testing.assert_allclose(ck.one_pole(x, a, init), y, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), cost=st.sampled_from([0.0, 0.01, 0.2]),
       interp=st.booleans())
def test_pick_peaks_backends_agree(seed, cost, interp):
    v = np.random.default_rng(seed).normal(size=(16, 60))
    la, pa = _pykernels.pick_peaks(v, 20, 0.5, cost, interp)
    lb, pb = ck.pick_peaks(v, 20, 0.5, cost, interp)
    np.testing.assert_allclose(lb, la, atol=1e-12, equal_nan=True)
    np.testing.assert_allclose(pb, pa, atol=1e-12, equal_nan=True)


def test_pick_peaks_parabola_vertex():
    lags = np.arange(30)
    v = -(lags - 12.3) ** 2 / 10.0 + 1.0
    lag, peak = kernels.pick_peaks(v[None, :], 100, 0.0)
    assert lag[0] == pytest.approx(112.3, abs=1e-12)
    assert peak[0] == pytest.approx(1.0, abs=1e-12)
    lag_q, _ = kernels.pick_peaks(v[None, :], 100, 0.0, interpolate=False)
    assert lag_q[0] == 112.0


def test_pick_peaks_below_threshold_is_nan():
    lag, peak = kernels.pick_peaks(np.zeros((2, 10)), 5, 0.1)
    assert np.all(np.isnan(lag)) and np.all(np.isnan(peak))
