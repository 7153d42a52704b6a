import numpy as np
import pytest

from pitchmtf import capricep, respan, signalgen

FS = 44100.0

# lines collected by the acceptance suite, printed after the run
ACCEPTANCE = {}


@pytest.fixture(scope="session")
def cset():
    return capricep.cached_capricep_set(
        capricep.DEFAULT_SEEDS, capricep.DEFAULT_ALLOCATION, capricep.DEFAULT_SECTIONS,
        capricep.DEFAULT_POLE_RADIUS, FS,
    )


@pytest.fixture(scope="session")
def traj(cset):
    return signalgen.make_modulation(cset, 100.0)


@pytest.fixture(scope="session")
def flat_traj(cset):
    return signalgen.make_modulation(cset, 0.0)


@pytest.fixture(scope="session")
def sig200(traj):
    return signalgen.synthesize(signalgen.make_spec(200.0, traj), traj)


@pytest.fixture(scope="session")
def ref_responses(cset, sig200):
    return respan.compute_responses(sig200.reference_cent, cset, sig200.analysis_window,
                                    "reference")


def tone(flat_traj, f, shape="vowel_a"):
    """Steady harmonic tone on the standard 20 s layout."""
    return signalgen.synthesize(signalgen.make_spec(f, flat_traj, shape), flat_traj)


def measure_cents(cset, sig, cents):
    return respan.compute_responses(np.asarray(cents), cset, sig.analysis_window)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[key])
