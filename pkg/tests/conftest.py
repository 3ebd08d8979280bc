import numpy as np
import pytest

from ddopt.model import BathSpec, build_model


def haar_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR of a Ginibre matrix."""
    z = (rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_hermitian(n: int, rng: np.random.Generator, norm: float = 1.0) -> np.ndarray:
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    h = (a + a.conj().T) / 2
    return norm * h / np.linalg.norm(h, 2)


@pytest.fixture(scope="session")
def default_model():
    """One shared bath realization at the customary J = 1 MHz, beta = 1 kHz."""
    return build_model(BathSpec(n_spins=4, seed=0, J=1e-3, beta=1e-6))


@pytest.fixture(scope="session")
def zero_model():
    """Degenerate H0 = 0 model (strengths set to zero)."""
    return build_model(BathSpec(n_spins=4, seed=0, J=0.0, beta=0.0))
