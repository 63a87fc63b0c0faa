import pytest

from _helpers import rotation_fde, scalar_lag_fde
from hopfdelay.fde import eigenbasis, find_hopf_pair, normalize_frequency


@pytest.fixture(scope="session")
def vdp_hopf():
    """Normalized eigenbasis of x' = -J x (Hopf frequency already 1)."""
    return eigenbasis(rotation_fde())


@pytest.fixture(scope="session")
def scalar_hopf():
    """Eigenbasis of x' = -(pi/2) x(t-1) after frequency normalization."""
    L = scalar_lag_fde()
    omega = find_hopf_pair(L, 3.0)
    L1, _, _ = normalize_frequency(L, None, omega)
    return eigenbasis(L1)
