import math
import warnings

import numpy as np
import pytest

from tunnelchannels.potential import build_barrier, scatter_coeffs


def rect_transmission(k, V0, d, hbar=1.0, m=1.0):
    """Textbook transmission probability of a square barrier."""
    k = np.asarray(k, dtype=float)
    E = hbar**2 * k**2 / (2 * m)
    out = np.empty_like(k)
    below = E < V0
    above = E > V0
    at = ~(below | above)
    kap = np.sqrt(2 * m * (V0 - E[below])) / hbar
    out[below] = 1 / (1 + V0**2 * np.sinh(kap * d) ** 2 / (4 * E[below] * (V0 - E[below])))
    kk = np.sqrt(2 * m * (E[above] - V0)) / hbar
    out[above] = 1 / (1 + V0**2 * np.sin(kk * d) ** 2 / (4 * E[above] * (E[above] - V0)))
    out[at] = 1 / (1 + m * V0 * d**2 / (2 * hbar**2))
    return out


def packet_grid(k0, l0, n=2048, half_width=6.0):
    hi = k0 + half_width / l0
    return np.linspace(max(k0 - half_width / l0, 1e-3 * hi), hi, n)


def random_barrier(rng, a=50.0, max_segments=5):
    n = int(rng.integers(1, max_segments + 1))
    widths = rng.uniform(0.2, 1.0, n)
    heights = rng.uniform(-3.0, 5.0, n)
    return build_barrier(a, list(zip(widths, heights)))


@pytest.fixture
def rect():
    return build_barrier(100.0, [(1.0, 2.0)])


@pytest.fixture
def rect_coeffs(rect):
    return scatter_coeffs(rect, packet_grid(1.2, 10.0))


@pytest.fixture
def quiet():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        yield


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


__all__ = ["rect_transmission", "packet_grid", "random_barrier", "math"]
