import numpy as np
import pytest

from ajch.hilbert import DOWN, UP, CompositeSpace, SiteSpec
from ajch.model import two_ion_params


@pytest.fixture
def spec():
    return SiteSpec((DOWN, UP), 3)


@pytest.fixture
def pair_space(spec):
    return CompositeSpace.uniform(2, spec)


@pytest.fixture
def params():
    return two_ion_params(fock_cutoff=4)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_density(dim, rng):
    m = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = m @ m.conj().T
    return rho / np.trace(rho)
