"""Effective-channel assembly and derivatives.

The end-to-end downlink matrix combines a load-independent substrate
(direct/baseline channel, BS-to-port links, port-to-user responses, port
coupling matrix) with the tunable load impedances:

    H_eff = H_u + G_l (diag(Z_L) - Z_ll)^-1 H_0

The N x N system is LU-factorized once per load vector and the factorization
is reused for all right-hand sides and for the analytic derivative of H_eff
with respect to each load capacitance.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .errors import SingularChannelError
from .ris import RisConfiguration, VaractorModel, load_impedances

CONDITION_LIMIT = 1e12

# Symmetry tolerance for the port coupling matrix (reciprocal network).
Z_SYMMETRY_TOL = 1e-12


@dataclass(frozen=True)
class ChannelComponents:
    """Deterministic channel substrate: the four matrices plus dimensions.

    h_u : (K, M) baseline BS-to-user channel (includes unloaded-RIS scattering)
    h_0 : (N, M) BS-to-port links
    g_l : (K, N) port-to-user responses
    z_ll: (N, N) generalized port impedance matrix, ohms
    """

    h_u: np.ndarray
    h_0: np.ndarray
    g_l: np.ndarray
    z_ll: np.ndarray
    frequency: float

    def __post_init__(self):
        for name in ("h_u", "h_0", "g_l", "z_ll"):
            arr = np.asarray(getattr(self, name), dtype=complex)
            object.__setattr__(self, name, arr)
            if arr.ndim != 2:
                raise ValueError(f"{name} must be a 2D matrix")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite entries")
        k, m = self.h_u.shape
        n = self.z_ll.shape[0]
        if self.z_ll.shape != (n, n):
            raise ValueError("z_ll must be square")
        if self.h_0.shape != (n, m):
            raise ValueError(
                f"h_0 shape {self.h_0.shape} inconsistent with (n={n}, m={m})"
            )
        if self.g_l.shape != (k, n):
            raise ValueError(
                f"g_l shape {self.g_l.shape} inconsistent with (k={k}, n={n})"
            )
        if self.frequency <= 0:
            raise ValueError("frequency must be positive")
        asym = np.linalg.norm(self.z_ll - self.z_ll.T)
        scale = np.linalg.norm(self.z_ll)
        if scale > 0 and asym / scale > Z_SYMMETRY_TOL:
            raise ValueError(
                f"z_ll is not symmetric: relative asymmetry {asym / scale:.3e}"
            )
        if np.any(np.real(np.diag(self.z_ll)) <= 0):
            raise ValueError("z_ll diagonal entries must have positive real part")

    @property
    def dims(self) -> tuple[int, int, int]:
        """(K users, M antennas, N ports)."""
        k, m = self.h_u.shape
        return k, m, self.z_ll.shape[0]


@dataclass
class EffectiveChannel:
    """Assembled K x M channel for one load vector, with its factorization.

    ``matrix`` is H_eff; the LU factors of (diag(Z_L) - Z_ll) and the solved
    block Z^-1 H_0 are retained so derivative evaluations reuse them.
    """

    matrix: np.ndarray
    config_fingerprint: str
    lu: tuple
    solved_h0: np.ndarray  # (N, M) block (diag(Z_L) - Z_ll)^-1 H_0
    _inverse: np.ndarray | None = field(default=None, repr=False)

    @property
    def cached_inverse(self) -> np.ndarray:
        """Explicit N x N inverse, materialized lazily from the LU factors."""
        if self._inverse is None:
            n = self.solved_h0.shape[0]
            self._inverse = lu_solve(self.lu, np.eye(n, dtype=complex))
        return self._inverse

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return lu_solve(self.lu, rhs)


def assemble_effective_channel(
    components: ChannelComponents,
    z_loads: np.ndarray,
    fingerprint: str = "",
) -> EffectiveChannel:
    """Assemble H_eff = H_u + G_l (diag(Z_L) - Z_ll)^-1 H_0.

    The inverse is never formed for the product; the N x N system is solved
    against H_0 with the LU factorization cached for reuse.  Raises
    SingularChannelError when the system is singular or its condition number
    exceeds CONDITION_LIMIT (a physically meaningful load resonance).
    """
    z_loads = np.asarray(z_loads, dtype=complex)
    _, _, n = components.dims
    if z_loads.shape != (n,):
        raise ValueError(f"expected {n} load impedances, got {z_loads.shape}")
    z = np.diag(z_loads) - components.z_ll
    cond = np.linalg.cond(z)
    if not np.isfinite(cond) or cond > CONDITION_LIMIT:
        raise SingularChannelError(
            f"load/coupling system condition number {cond:.3e} exceeds "
            f"{CONDITION_LIMIT:.0e} (configuration {fingerprint or 'unnamed'})",
            fingerprint=fingerprint or None,
        )
    lu = lu_factor(z)
    solved_h0 = lu_solve(lu, components.h_0)
    matrix = components.h_u + components.g_l @ solved_h0
    return EffectiveChannel(
        matrix=matrix,
        config_fingerprint=fingerprint,
        lu=lu,
        solved_h0=solved_h0,
    )


def assemble_from_config(
    components: ChannelComponents,
    model: VaractorModel,
    config: RisConfiguration,
) -> EffectiveChannel:
    """Convenience wrapper: capacitances -> load impedances -> assembly."""
    z_loads = load_impedances(model, config, components.frequency)
    return assemble_effective_channel(
        components, z_loads, fingerprint=config.fingerprint()
    )


def received_signals(channel, beamformer) -> np.ndarray:
    """K x K received-signal matrix Y with Y[k, j] = H_eff[k] . w_j.

    The diagonal holds the desired signals and the off-diagonal entries the
    multi-user interference amplitudes.
    """
    h = channel.matrix if hasattr(channel, "matrix") else np.asarray(channel)
    w = beamformer.weights if hasattr(beamformer, "weights") else np.asarray(beamformer)
    if h.shape[1] != w.shape[0]:
        raise ValueError(
            f"antenna-dimension mismatch: channel {h.shape} vs weights {w.shape}"
        )
    return h @ w


def capacitance_impedance_slope(capacitance: float, frequency: float) -> complex:
    """d Z_L / d C for the series R-L-C load: only the 1/(jwC) term depends on C."""
    omega = 2.0 * np.pi * frequency
    return -1.0 / (1j * omega * capacitance**2)


def channel_derivative(
    components: ChannelComponents,
    model: VaractorModel,
    config: RisConfiguration,
    element: int,
    effective: EffectiveChannel | None = None,
) -> np.ndarray:
    """Analytic K x M derivative of H_eff w.r.t. one element capacitance.

    Uses d(Z^-1)/dC = -Z^-1 (dZ/dC) Z^-1 with the rank-1 middle factor
    e_n e_n^T dZ_L/dC, so only one extra solve against the cached
    factorization is needed:

        dH_eff/dC_n = -(dZ_L,n/dC) (G_l Z^-1 e_n) (e_n^T Z^-1 H_0)
    """
    k, m, n = components.dims
    if not 0 <= element < n:
        raise ValueError(f"element index {element} out of range for N={n}")
    if effective is None:
        effective = assemble_from_config(components, model, config)
    e_n = np.zeros(n, dtype=complex)
    e_n[element] = 1.0
    left = components.g_l @ effective.solve(e_n)  # (K,)
    right = effective.solved_h0[element, :]  # (M,)
    slope = capacitance_impedance_slope(
        float(config.capacitances[element]), components.frequency
    )
    return -slope * np.outer(left, right)


def group_channel_derivative(
    components: ChannelComponents,
    model: VaractorModel,
    config: RisConfiguration,
    group: int,
    effective: EffectiveChannel | None = None,
) -> np.ndarray:
    """Derivative w.r.t. a shared group capacitance: sum over member elements."""
    if effective is None:
        effective = assemble_from_config(components, model, config)
    members = config.grouping[group]
    k, m, _ = components.dims
    total = np.zeros((k, m), dtype=complex)
    for element in members:
        total += channel_derivative(
            components, model, config, int(element), effective=effective
        )
    return total


def evaluate_gain_map(
    grid_components: ChannelComponents,
    z_loads: np.ndarray | None,
    beamformer,
    beam_index: int,
) -> np.ndarray:
    """Per-grid-point power gain |H_eff[g] . w_k|^2 / power_budget.

    ``grid_components`` must be synthesized with the observation grid points
    standing in as users.  Returns the linear dimensionless gain; use
    gain_map_db for the dB rendering.
    """
    w = beamformer.weights if hasattr(beamformer, "weights") else np.asarray(beamformer)
    budget = getattr(beamformer, "power_budget", None)
    if budget is None:
        budget = float(np.linalg.norm(w) ** 2)
    if not 0 <= beam_index < w.shape[1]:
        raise ValueError(f"beam index {beam_index} out of range")
    if z_loads is None:
        h = grid_components.h_u
    else:
        h = assemble_effective_channel(grid_components, z_loads).matrix
    fields = h @ w[:, beam_index]
    power = np.abs(fields) ** 2
    if budget > 0:
        power = power / budget
    return power


GAIN_FLOOR_DB = -300.0


def gain_map_db(gains: np.ndarray, floor: float = GAIN_FLOOR_DB) -> np.ndarray:
    """10 log10 of a linear gain map, clamped at a finite floor."""
    gains = np.asarray(gains, dtype=float)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # log of exact zeros handled by the floor
        db = 10.0 * np.log10(gains)
    return np.maximum(np.nan_to_num(db, nan=floor, neginf=floor), floor)
