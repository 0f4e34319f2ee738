from importlib import resources

import numpy as np
import pytest

from deco.dissipator import SystemModel
from deco.spectral import Family, ThermalReservoirSpec

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]])
SZ = np.diag([1.0, -1.0]).astype(complex)
PLUS = 0.5 * np.ones((2, 2), dtype=complex)


def fixture_path(name: str) -> str:
    return str(resources.files("deco") / "fixtures" / name)


def random_hermitian(rng, d, scale=1.0):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return scale * 0.5 * (a + a.conj().T)


def random_density(rng, d, rank=None):
    k = d if rank is None else rank
    a = rng.normal(size=(d, k)) + 1j * rng.normal(size=(d, k))
    r = a @ a.conj().T
    return r / np.trace(r)


def random_system(rng, d, n_channels=1, h_scale=1.0, l_scale=1.0):
    h = random_hermitian(rng, d, h_scale)
    couplings = tuple((random_hermitian(rng, d, l_scale) / np.sqrt(d), c) for c in range(n_channels))
    return SystemModel(h, couplings)


def random_thermal(rng, family=None):
    fam = family or (Family.DRUDE if rng.random() < 0.5 else Family.EXPONENTIAL)
    return ThermalReservoirSpec(fam, rng.uniform(0.05, 1.0), rng.uniform(0.5, 5.0), rng.uniform(0.1, 3.0))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def qubit():
    return SystemModel(0.5 * SZ, ((SX, 0),))


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
