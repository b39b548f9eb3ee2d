import numpy as np
import pytest

from risopt.channel import ChannelComponents
from risopt.coupling import synthesize_mutual_impedance

FREQ = 5.8e9
SPACING = 0.0258  # ~ half wavelength at 5.8 GHz


def complex_normal(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def random_components(rng, k=3, m=3, n=20, frequency=FREQ) -> ChannelComponents:
    """Random channel substrate with a physically structured coupling matrix."""
    z_ll = synthesize_mutual_impedance(n, SPACING, frequency)
    return ChannelComponents(
        h_u=complex_normal(rng, k, m),
        h_0=complex_normal(rng, n, m),
        g_l=complex_normal(rng, k, n),
        z_ll=z_ll,
        frequency=frequency,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
