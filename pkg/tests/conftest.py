import numpy as np
import pytest

from oobsim.signals import LagCorrelation


def make_hermitian_lag(rng, n_side: int, m: int, spacing: float = 1.0) -> LagCorrelation:
    """Random valid correlation: R[-v] = R[v]^H, R[0] Hermitian PSD."""
    mats = np.empty((2 * n_side + 1, m, m), dtype=complex)
    a = rng.standard_normal((m, 2 * m)) + 1j * rng.standard_normal((m, 2 * m))
    mats[n_side] = a @ a.conj().T / (2 * m)
    for v in range(1, n_side + 1):
        r = 0.3 ** v * (rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m)))
        mats[n_side + v] = r
        mats[n_side - v] = r.conj().T
    return LagCorrelation(lags=np.arange(-n_side, n_side + 1), matrices=mats,
                          lag_spacing=spacing)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
