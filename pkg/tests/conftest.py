import numpy as np
import pytest

from moire_bands import ModelParams, build_lattice


@pytest.fixture(scope="session")
def lat():
    return build_lattice()


@pytest.fixture(scope="session")
def p0():
    """Reference parameter point: alpha = beta = 1, U = 0, phi = 4*pi/3."""
    return ModelParams(alpha=1.0, beta=1.0, U=0.0, phi=4 * np.pi / 3, h=0.05)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture()
def announce(capsys):
    """Print a line through pytest's capture (acceptance pass/fail reporting)."""

    def _announce(msg):
        with capsys.disabled():
            print(msg, flush=True)

    return _announce
