import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pitchmtf import capricep
from pitchmtf.capricep import POLARITY_MATRIX, build_capricep_set, generate_unit_capricep
from pitchmtf.errors import GenerationError, ParameterError

SMALL = dict(allocation_interval=1024, n_sections=128, pole_radius=0.95)


def db(x):
    return 10 * np.log10(x)


def chain(y, cset):
    """recover -> orthogonalize -> extend."""
    z = [capricep.orthogonalize(capricep.recover_pulses(y, i, cset), i, cset) for i in (1, 2, 3)]
    return capricep.extend(*z)


@pytest.fixture(scope="module")
def small():
    return build_capricep_set((1, 2, 3), **SMALL)


# unit signals

def test_default_units_are_allpass(cset):
    for u in cset.units:
        mag = np.abs(np.fft.rfft(u.samples))
        assert np.max(np.abs(mag - 1.0)) < 1e-9


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_any_seed_is_allpass_and_compact(seed):
    u = generate_unit_capricep(seed, 128, 0.95, 4096)
    assert np.max(np.abs(np.abs(np.fft.fft(u.samples)) - 1.0)) < 1e-9
    assert capricep.centered_energy_ratio(u.samples, 1024) >= capricep.COMPACTNESS_THRESHOLD


def test_autocorrelation_is_an_impulse(cset):
    x = cset.units[0].samples
    ac = np.fft.irfft(np.abs(np.fft.rfft(x)) ** 2, x.size)
    side = np.max(ac[1:] ** 2) / ac[0] ** 2
    assert db(side) < -250


def test_distinct_seeds_give_distinct_units(cset):
    a, b = cset.units[0].samples, cset.units[1].samples
    assert not np.allclose(a, b)
    # nearly uncorrelated as well
    assert abs(np.dot(a, b)) < 0.05 * np.dot(a, a)


def test_generation_is_deterministic():
    a = generate_unit_capricep(7, 128, 0.95, 4096)
    b = generate_unit_capricep(7, 128, 0.95, 4096)
    assert a.samples.tobytes() == b.samples.tobytes()


def test_energy_is_centered_on_sample_zero(cset):
    e = cset.units[2].samples ** 2
    n = np.arange(e.size)
    centroid = np.angle(np.sum(e * np.exp(2j * np.pi * n / e.size))) * e.size / (2 * np.pi)
    assert abs(centroid) <= 0.5


def test_period_must_be_power_of_two():
    with pytest.raises(ParameterError):
        generate_unit_capricep(1, 16, 0.9, 3000)


@pytest.mark.parametrize("kw", [dict(pole_radius=1.0), dict(pole_radius=0.0), dict(n_sections=0),
                                dict(seed=-1)])
def test_invalid_generation_parameters(kw):
    args = dict(seed=1, n_sections=16, pole_radius=0.9, period=1024) | kw
    with pytest.raises(ParameterError):
        generate_unit_capricep(**args)


def test_compactness_failure_reports_ratio():
    # long pole ringing cannot fit a 64-sample interval
    with pytest.raises(GenerationError) as info:
        generate_unit_capricep(1, 64, 0.999, 1024, allocation_interval=64)
    assert 0.0 < info.value.energy_ratio < capricep.COMPACTNESS_THRESHOLD
    assert info.value.category == "generation-failure"


# the set

def test_polarity_matrix_columns_are_orthogonal():
    gram = POLARITY_MATRIX.T @ POLARITY_MATRIX
    np.testing.assert_array_equal(gram, 4 * np.eye(3))
    np.testing.assert_array_equal(POLARITY_MATRIX[:, 0], [1, 1, 1, 1])
    np.testing.assert_array_equal(POLARITY_MATRIX[:, 1], [1, -1, 1, -1])
    np.testing.assert_array_equal(POLARITY_MATRIX[:, 2], [1, 1, -1, -1])


def test_default_period(cset):
    assert cset.allocation_interval == 16384
    assert cset.unit_period == 65536
    assert cset.unit_period / cset.sample_rate == pytest.approx(1.4861, abs=5e-5)


def test_x_mix_is_the_sum_of_base_sequences(cset):
    np.testing.assert_array_equal(cset.x_mix, sum(cset.base_sequences))
    e_mix = np.dot(cset.x_mix, cset.x_mix)
    e_sum = sum(np.dot(b, b) for b in cset.base_sequences)
    assert abs(e_mix - e_sum) <= 0.01 * e_sum


def test_base_sequence_layout(small):
    n_p = small.allocation_interval
    for k, (unit, base) in enumerate(zip(small.units, small.base_sequences)):
        want = sum(POLARITY_MATRIX[m, k] * np.roll(unit.samples, m * n_p) for m in range(4))
        np.testing.assert_array_equal(base, want)


def test_duplicate_seeds_rejected():
    with pytest.raises(ParameterError):
        build_capricep_set((1, 1, 2), **SMALL)
    with pytest.raises(ParameterError):
        build_capricep_set((1, 2), **SMALL)


def test_set_is_deterministic(small):
    again = build_capricep_set((1, 2, 3), **SMALL)
    assert again.x_mix.tobytes() == small.x_mix.tobytes()


# pulse recovery

def test_recover_unit_itself(small):
    u = small.units[1]
    w = capricep.recover_pulses(u.samples, 2, small)
    assert w[0] == pytest.approx(u.energy, rel=1e-12)
    assert np.max(np.abs(w[1:])) < 1e-10 * u.energy


def test_recover_from_mix_shows_column_polarities(small):
    n_p = small.allocation_interval
    for i in (1, 2, 3):
        w = capricep.recover_pulses(small.x_mix, i, small)
        e = small.units[i - 1].energy
        pulses = w[np.arange(4) * n_p] / e
        np.testing.assert_allclose(np.sign(pulses), POLARITY_MATRIX[:, i - 1])
        assert np.all(np.abs(pulses) > 0.5)


def test_recover_zeros(small):
    assert not np.any(capricep.recover_pulses(np.zeros(small.unit_period * 2), 1, small))


def test_recover_rejects_partial_period(small):
    with pytest.raises(ParameterError):
        capricep.recover_pulses(np.zeros(small.unit_period + 1), 1, small)
    with pytest.raises(ParameterError):
        capricep.recover_pulses(np.zeros(8), 4, small)


# orthogonalization and extension

def pulse_and_rest(z, positions):
    mask = np.zeros(z.size, bool)
    mask[positions] = True
    return z[mask], np.sum(z[~mask] ** 2)


@pytest.mark.parametrize("i", [1, 2, 3])
def test_orthogonalized_mix_has_clean_pulses(cset, i):
    n_p = cset.allocation_interval
    z = capricep.orthogonalize(capricep.recover_pulses(cset.x_mix, i, cset), i, cset)
    pattern = capricep.segment_polarity(i)
    pulses, rest = pulse_and_rest(z, np.arange(4) * n_p)
    np.testing.assert_allclose(pulses, pattern, atol=1e-12)
    assert db(rest) < -250


def test_segment_patterns():
    np.testing.assert_array_equal(capricep.segment_polarity(1), [1, 1, 1, 1])
    np.testing.assert_array_equal(capricep.segment_polarity(2), [1, -1, 1, -1])
    np.testing.assert_array_equal(capricep.segment_polarity(3), [1, 0, -1, 0])
    np.testing.assert_array_equal(capricep.segment_polarity(3, 1), [0, 1, 0, -1])


@pytest.mark.parametrize("i,other", [(1, 2), (1, 3), (2, 1), (2, 3), (3, 1), (3, 2)])
def test_other_sequences_cancel(cset, i, other):
    base = cset.base_sequences[other - 1]
    z = capricep.orthogonalize(capricep.recover_pulses(base, i, cset), i, cset)
    # a pure input of its own sequence gives unit pulses, so this is relative
    assert db(np.sum(z ** 2)) < -250


@pytest.mark.parametrize("i", [1, 2])
def test_impulse_train_with_column_polarities(small, i):
    n_p = small.allocation_interval
    w = np.zeros(small.unit_period)
    w[np.arange(4) * n_p] = POLARITY_MATRIX[:, i - 1] * small.units[i - 1].energy
    z = capricep.orthogonalize(w, i, small)
    pulses, rest = pulse_and_rest(z, np.arange(4) * n_p)
    np.testing.assert_allclose(np.abs(pulses), 1.0, atol=1e-15)
    assert rest == 0.0


def test_extended_signal_is_a_single_impulse(cset):
    u = chain(np.tile(cset.x_mix, 2), cset)
    for period in u.reshape(2, -1):
        assert period[0] == pytest.approx(1.0, abs=1e-12)
        assert db(np.sum(period[1:] ** 2)) < -250


def test_extend_zeros_and_weights():
    z = np.zeros(64)
    assert not np.any(capricep.extend(z, z, z))
    z3 = np.random.default_rng(0).normal(size=64)
    np.testing.assert_array_equal(capricep.extend(z, z, 2 * z3), z3)
    with pytest.raises(ParameterError):
        capricep.extend(z, z, np.zeros(65))


def test_chain_is_linear(small):
    rng = np.random.default_rng(3)
    y1 = rng.normal(size=small.unit_period * 2)
    y2 = rng.normal(size=small.unit_period * 2)
    a, b = 1.7, -0.3
    lhs = chain(a * y1 + b * y2, small)
    rhs = a * chain(y1, small) + b * chain(y2, small)
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * np.max(np.abs(rhs))
