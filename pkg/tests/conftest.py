import numpy as np
import pytest

from nearclifford.decomposer import build_dictionary
from nearclifford.pauli import PauliString


@pytest.fixture
def rng():
    """A fixed-seed generator so statistical tests are reproducible."""
    return np.random.default_rng(20140326)


@pytest.fixture
def one_qubit_dictionary():
    """The 30-term single-qubit stabilizer channel dictionary (cached per process)."""
    return build_dictionary(1)


@pytest.fixture
def plus_state():
    """Generators of |+>."""
    return (PauliString.from_label("+X"),)


@pytest.fixture
def bell_state():
    """Generators of (|00> + |11>)/sqrt(2)."""
    return (PauliString.from_label("+XX"), PauliString.from_label("+ZZ"))
