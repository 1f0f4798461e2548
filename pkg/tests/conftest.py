import numpy as np
import pytest

from cavitysim import DriveSettings, rb85_cavity_params

TWOPI = 2.0 * np.pi


@pytest.fixture(scope="session")
def params():
    return rb85_cavity_params()


@pytest.fixture()
def probe_drive():
    """Generic probe drive with trap and Stark shift on."""
    return DriveSettings.from_atom_cavity_detuning(
        delta=TWOPI * 6e6, delta_pc=0.0, eta=TWOPI * 1.2e6,
        trap_depth=1.2e-26, stark_coeff=TWOPI * 10e6)
