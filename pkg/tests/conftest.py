import numpy as np
import pytest

from hvfwi.physics import VelocityModel2D


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def smooth_signal(rng: np.random.Generator, n: int = 65, n_modes: int = 4, offset: float = 0.0) -> np.ndarray:
    """A few low sine modes with random amplitudes and phases on [0, 1]."""
    x = np.linspace(0.0, 1.0, n)
    f = np.full(n, offset)
    for k in range(1, n_modes + 1):
        f += rng.normal() / k * np.sin(np.pi * k * x + rng.uniform(0, 2 * np.pi))
    return f


@pytest.fixture
def make_signal(rng):
    def _make(n: int = 65, n_modes: int = 4, offset: float = 0.0) -> np.ndarray:
        return smooth_signal(rng, n, n_modes, offset)

    return _make


@pytest.fixture
def small_model():
    """32 x 32 cells of 10 m with a smooth bump, resolved at 10 Hz."""
    n = 32
    coords = np.arange(n) / (n - 1)
    zz, xx = np.meshgrid(coords, coords, indexing="ij")
    c = 1500.0 + 100.0 * np.exp(-((xx - 0.55) ** 2 + (zz - 0.6) ** 2) / 0.02)
    return VelocityModel2D(c=c, dx=10.0, dz=10.0)
