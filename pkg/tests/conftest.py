"""
Shared fixtures for the lattice precoder feedback tests.
"""

import os
import sys

import numpy as np
import pytest
from fastapi.testclient import TestClient

# Add project root to path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), ".."))


def make_unitary(rng, m):
    """Haar-distributed unitary via QR with the R diagonal made positive."""
    X = (rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))) / np.sqrt(2)
    Q, R = np.linalg.qr(X)
    d = np.diag(R)
    return Q * (d / np.abs(d))


def make_contractive(rng, m, norm=0.7):
    X = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
    return X * (norm / np.linalg.norm(X, 2))


def make_lattice(rng, m, order, norm=0.7):
    from lattice import LatticeParams

    kappas = np.array([make_contractive(rng, m, rng.uniform(0.1, norm)) for _ in range(order - 1)])
    return LatticeParams(kappas=kappas.reshape(-1, m, m), residue=make_unitary(rng, m))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def random_unitary(rng):
    return lambda m: make_unitary(rng, m)


@pytest.fixture
def random_contractive(rng):
    return lambda m, norm=0.7: make_contractive(rng, m, norm)


@pytest.fixture
def random_lattice(rng):
    return lambda m, order, norm=0.7: make_lattice(rng, m, order, norm)


@pytest.fixture
def los_channel():
    """4x4 tapped channel drawn from the 28 GHz power-delay profile."""
    from channel import PowerDelayProfile, pdp_to_taps
    from config import BANDWIDTH_HZ

    return pdp_to_taps(PowerDelayProfile(), 4, BANDWIDTH_HZ, rng_seed=7)


@pytest.fixture
def rich_channel():
    """2x2 channel with strong, integer-delay taps so precoders vary across subcarriers."""
    from channel import PowerDelayProfile, pdp_to_taps

    pdp = PowerDelayProfile(powers_db=[0.0, -3.0, -6.0], delays_ns=[0.0, 10.0, 20.0])
    return pdp_to_taps(pdp, 2, 100e6, rng_seed=3)


@pytest.fixture
def tiny_config():
    """Small, fast experiment: 2x2 MIMO on 32 subcarriers, a few frames and seeds."""
    from harness import SimConfig

    return SimConfig(
        m=2,
        n_fft=32,
        n_pilots=4,
        lattice_order=3,
        speed_kmh=[10.0],
        snr_db=[0.0, 10.0],
        n_frames=4,
        n_seeds=2,
        workers=1,
    )


@pytest.fixture
def test_client():
    """FastAPI test client."""
    from main import app

    return TestClient(app)
