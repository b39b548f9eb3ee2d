"""Synthetic mutual-impedance model for the RIS load ports.

The port coupling matrix is generated from the induced-EMF closed form for
parallel side-by-side thin half-wave dipoles.  It is a stand-in for a measured
or full-wave multiport characterization and carries the structural properties
the rest of the pipeline relies on: exact symmetry, positive-real diagonal,
and off-diagonal decay with port separation.
"""

from __future__ import annotations

import numpy as np
from scipy.special import sici

from .constants import FREE_SPACE_IMPEDANCE, SPEED_OF_LIGHT

# Induced-EMF self impedance of a thin half-wave dipole, classical value.
DEFAULT_SELF_IMPEDANCE = 73.1 + 42.5j  # ohms


def mutual_impedance_sidebyside(separation: float, frequency: float) -> complex:
    """Mutual impedance of two parallel side-by-side half-wave dipoles.

    Closed-form induced-EMF expression in terms of sine and cosine integrals,
    assuming sinusoidal currents on thin dipoles of length lambda/2 separated
    by ``separation`` meters.

    At separation = lambda/2 this evaluates to the classical -12.5 - j29.9 ohms.
    """
    if separation <= 0.0:
        raise ValueError("separation must be positive")
    lam = SPEED_OF_LIGHT / frequency
    half_len = lam / 2.0
    k = 2.0 * np.pi / lam
    u0 = k * separation
    diag = np.hypot(separation, half_len)
    u1 = k * (diag + half_len)
    u2 = k * (diag - half_len)
    si0, ci0 = sici(u0)
    si1, ci1 = sici(u1)
    si2, ci2 = sici(u2)
    scale = FREE_SPACE_IMPEDANCE / (4.0 * np.pi)
    r = scale * (2.0 * ci0 - ci1 - ci2)
    x = -scale * (2.0 * si0 - si1 - si2)
    return complex(r, x)


def synthesize_mutual_impedance(
    n_ports: int,
    spacing: float,
    frequency: float,
    self_impedance: complex = DEFAULT_SELF_IMPEDANCE,
) -> np.ndarray:
    """Build the N x N generalized impedance matrix of the RIS port network.

    Ports sit on a uniform 1D grid; entry (i, j) is the side-by-side dipole
    mutual impedance at separation |i - j| * spacing, and the diagonal is the
    supplied self impedance.  The result is exactly symmetric (Toeplitz).
    """
    if n_ports < 1:
        raise ValueError("n_ports must be >= 1")
    if spacing <= 0.0:
        raise ValueError("spacing must be positive")
    z = np.zeros((n_ports, n_ports), dtype=complex)
    np.fill_diagonal(z, complex(self_impedance))
    # one evaluation per distinct separation keeps the matrix exactly Toeplitz
    for lag in range(1, n_ports):
        zm = mutual_impedance_sidebyside(lag * spacing, frequency)
        idx = np.arange(n_ports - lag)
        z[idx, idx + lag] = zm
        z[idx + lag, idx] = zm
    return z
