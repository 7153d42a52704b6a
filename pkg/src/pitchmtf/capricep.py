"""Unit CAPRICEP signals and the three-sequence mixed base signal.

A unit signal is a cascade of second-order all-pass sections with jittered
center frequencies and random phase polarities, built directly on the DFT
grid of one period so that its magnitude spectrum is exactly flat. Three
units, each repeated four times per period with the polarity pattern of
``POLARITY_MATRIX``, are summed into ``x_mix``. Cross-correlating with one
unit, shift-and-adding with its polarity column and combining the three
results recovers a single impulse per period.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import kernels
from .errors import GenerationError, ParameterError

POLARITY_MATRIX = np.array(
    [[1, 1, 1],
     [1, -1, 1],
     [1, 1, -1],
     [1, -1, -1]],
    dtype=np.float64,
)
POLARITY_MATRIX.setflags(write=False)

EXTENSION_WEIGHTS = (0.25, 0.25, 0.5)
COMPACTNESS_THRESHOLD = 0.9999

DEFAULT_SECTIONS = 2048
DEFAULT_POLE_RADIUS = 0.99
DEFAULT_ALLOCATION = 16384
DEFAULT_SEEDS = (1, 2, 3)


def _frozen(a):
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class UnitCapricep:
    samples: np.ndarray
    seed: int
    section_count: int
    pole_radius: float
    sample_rate: float

    @property
    def period(self) -> int:
        return self.samples.size

    @property
    def energy(self) -> float:
        return float(np.dot(self.samples, self.samples))


@dataclass(frozen=True, eq=False)
class CapricepSet:
    units: tuple
    allocation_interval: int
    x_mix: np.ndarray
    base_sequences: tuple = field(repr=False)
    polarity_matrix: np.ndarray = field(default=POLARITY_MATRIX, repr=False)

    @property
    def unit_period(self) -> int:
        return 4 * self.allocation_interval

    @property
    def sample_rate(self) -> float:
        return self.units[0].sample_rate

    @property
    def seeds(self) -> tuple:
        return tuple(u.seed for u in self.units)


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


def centered_energy_ratio(samples: np.ndarray, interval: int) -> float:
    """Energy fraction inside ``[-interval/2, interval/2)`` around sample 0."""
    e = np.asarray(samples) ** 2
    h = interval // 2
    inside = e[:h].sum() + e[e.size - (interval - h):].sum()
    return float(inside / e.sum())


def generate_unit_capricep(
    seed: int,
    n_sections: int = DEFAULT_SECTIONS,
    pole_radius: float = DEFAULT_POLE_RADIUS,
    period: int = 4 * DEFAULT_ALLOCATION,
    sample_rate: float = 44100.0,
    allocation_interval: int | None = None,
) -> UnitCapricep:
    """Build one unit CAPRICEP signal of length ``period``.

    Section center frequencies sit on a grid of spacing
    ``sample_rate / (2 * n_sections)`` and are jittered uniformly over one
    grid cell; each section gets a random polarity. The summed phase is
    exponentiated on the DFT grid, inverse transformed, and the result is
    circularly rotated so its energy centroid lands on sample 0.

    Raises
    ------
    ParameterError
        For a period that is not a power of two or out-of-range parameters.
    GenerationError
        When less than 99.99 % of the energy falls within the central
        allocation interval (``period // 4`` unless given).
    """
    period = int(period)
    if not _is_power_of_two(period):
        raise ParameterError(f"period must be a power of two, got {period}")
    if not 0.0 < pole_radius < 1.0:
        raise ParameterError(f"pole_radius must lie in (0, 1), got {pole_radius}")
    if n_sections < 1:
        raise ParameterError(f"n_sections must be >= 1, got {n_sections}")
    if seed < 0:
        raise ParameterError(f"seed must be non-negative, got {seed}")
    if allocation_interval is None:
        allocation_interval = period // 4

    rng = np.random.default_rng(int(seed))
    jitter = rng.uniform(-0.5, 0.5, n_sections)
    polarity = rng.choice(np.array([-1.0, 1.0]), n_sections)
    # normalized angular frequency: nominal spacing pi / n_sections
    theta = (np.arange(n_sections) + 0.5 + jitter) * (np.pi / n_sections)

    omega = 2.0 * np.pi * np.arange(period // 2 + 1) / period
    phase = kernels.allpass_phase(omega, theta, polarity, pole_radius)
    # exactly zero analytically; pins DC and Nyquist bins to real values
    phase[0] = 0.0
    phase[-1] = 0.0
    x = np.fft.irfft(np.exp(1j * phase), period)

    e = x * x
    n = np.arange(period)
    centroid = np.angle(np.sum(e * np.exp(2j * np.pi * n / period))) * period / (2 * np.pi)
    x = np.roll(x, -int(np.round(centroid)))

    ratio = centered_energy_ratio(x, allocation_interval)
    if ratio < COMPACTNESS_THRESHOLD:
        raise GenerationError(
            f"unit signal for seed {seed} keeps only {ratio:.6f} of its energy "
            f"within {allocation_interval} samples",
            energy_ratio=ratio,
        )
    return UnitCapricep(_frozen(x), int(seed), int(n_sections), float(pole_radius),
                        float(sample_rate))


def build_capricep_set(
    seeds=DEFAULT_SEEDS,
    allocation_interval: int = DEFAULT_ALLOCATION,
    n_sections: int = DEFAULT_SECTIONS,
    pole_radius: float = DEFAULT_POLE_RADIUS,
    sample_rate: float = 44100.0,
) -> CapricepSet:
    seeds = tuple(int(s) for s in seeds)
    if len(seeds) != 3:
        raise ParameterError(f"exactly three seeds are required, got {len(seeds)}")
    if len(set(seeds)) != 3:
        raise ParameterError(f"seeds must be distinct, got {seeds}")
    n_p = int(allocation_interval)
    period = 4 * n_p
    units = tuple(
        generate_unit_capricep(s, n_sections, pole_radius, period, sample_rate, n_p)
        for s in seeds
    )
    # unit copy m sits at m * n_p with polarity B[m, k]
    base = []
    for k, unit in enumerate(units):
        xb = np.zeros(period)
        for m in range(4):
            xb += POLARITY_MATRIX[m, k] * np.roll(unit.samples, m * n_p)
        base.append(_frozen(xb))
    x_mix = _frozen(base[0] + base[1] + base[2])
    return CapricepSet(units, n_p, x_mix, tuple(base))


@lru_cache(maxsize=4)
def cached_capricep_set(seeds, allocation_interval, n_sections, pole_radius, sample_rate):
    """Memoized :func:`build_capricep_set`; arguments must be hashable."""
    return build_capricep_set(seeds, allocation_interval, n_sections, pole_radius,
                              sample_rate)


def _periods(y, period, what):
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 1 or y.size == 0 or y.size % period:
        raise ParameterError(
            f"{what} length {y.size} is not a positive multiple of the unit period {period}"
        )
    return y.reshape(-1, period)


def _unit(cset: CapricepSet, unit_index: int) -> UnitCapricep:
    if unit_index not in (1, 2, 3):
        raise ParameterError(f"unit_index must be 1, 2 or 3, got {unit_index}")
    return cset.units[unit_index - 1]


def recover_pulses(y, unit_index: int, cset: CapricepSet) -> np.ndarray:
    """Circular cross-correlation of each period of ``y`` with one unit."""
    unit = _unit(cset, unit_index)
    blocks = _periods(y, cset.unit_period, "signal")
    spec = np.fft.rfft(blocks, axis=1) * np.conj(np.fft.rfft(unit.samples))
    return np.fft.irfft(spec, cset.unit_period, axis=1).ravel()


def orthogonalize(w, unit_index: int, cset: CapricepSet, rotation: int = 0) -> np.ndarray:
    """Shift-and-add with a polarity column, cancelling the other two sequences.

    ``rotation`` cyclically shifts the coefficient column; any shift of a
    column is still orthogonal to every cyclic shift of the other two.
    Output is scaled by ``1 / (4 * unit energy)``.
    """
    unit = _unit(cset, unit_index)
    n_p = cset.allocation_interval
    blocks = _periods(w, cset.unit_period, "recovered sequence")
    col = POLARITY_MATRIX[:, unit_index - 1]
    z = np.zeros_like(blocks)
    for m in range(4):
        z += col[(m + rotation) % 4] * np.roll(blocks, -m * n_p, axis=1)
    z /= 4.0 * unit.energy
    return z.ravel()


def segment_polarity(unit_index: int, rotation: int = 0) -> np.ndarray:
    """Pulse amplitude in each of the four segments of an orthogonalized pure input."""
    col = POLARITY_MATRIX[:, unit_index - 1]
    return np.array([
        sum(col[(m + rotation) % 4] * col[(m + d) % 4] for m in range(4)) / 4.0
        for d in range(4)
    ])


def extend(z1, z2, z3) -> np.ndarray:
    """Weighted sum giving one impulse per four-segment period."""
    z1, z2, z3 = (np.asarray(z, dtype=np.float64) for z in (z1, z2, z3))
    if not z1.shape == z2.shape == z3.shape:
        raise ParameterError(
            f"orthogonalized sequences differ in length: {z1.shape}, {z2.shape}, {z3.shape}"
        )
    a, b, c = EXTENSION_WEIGHTS
    return a * z1 + b * z2 + c * z3
