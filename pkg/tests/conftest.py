import pathlib

import numpy as np
import pytest

from dwigner.stabilizer import mub_stabilizer_states

SAMPLES = pathlib.Path(__file__).resolve().parent.parent / "sample_inputs"


@pytest.fixture(scope="session")
def samples_dir():
    return SAMPLES


@pytest.fixture(scope="session")
def mub3():
    return mub_stabilizer_states(3)


@pytest.fixture(scope="session")
def mub5():
    return mub_stabilizer_states(5)


@pytest.fixture(scope="session")
def strange_state():
    v = np.zeros(3, dtype=complex)
    v[1] = 1 / np.sqrt(2)
    v[2] = -1 / np.sqrt(2)
    return np.outer(v, v.conj())
