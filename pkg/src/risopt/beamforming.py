"""Max-min downlink beamforming via uplink-downlink duality.

The downlink max-min SINR problem under a total power constraint is solved in
a virtual uplink: MMSE receive combiners plus a fixed-point power update that
balances the per-user SINRs, followed by a K x K linear system that recovers
the downlink per-beam powers achieving the same SINRs with the same total
power.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .constants import BOLTZMANN
from .errors import DualityError, InfeasibleUserError

DEFAULT_BALANCE_TOL = 1e-6
DEFAULT_BALANCE_MAX_ITER = 50

POWER_CONSERVATION_TOL = 1e-8


def noise_power(temperature: float, bandwidth: float) -> float:
    """Thermal noise power k*T*B in watts."""
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    if bandwidth <= 0:
        raise ValueError("bandwidth must be positive")
    return BOLTZMANN * temperature * bandwidth


def _channel_matrix(h) -> np.ndarray:
    return h.matrix if hasattr(h, "matrix") else np.asarray(h, dtype=complex)


@dataclass
class BeamformerMatrix:
    """M x K transmit weights constrained to a total power budget."""

    weights: np.ndarray
    power_budget: float

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=complex)
        if self.weights.ndim != 2:
            raise ValueError("weights must be an M x K matrix")
        if self.power_budget < 0:
            raise ValueError("power budget must be nonnegative")

    @property
    def total_power(self) -> float:
        return float(np.linalg.norm(self.weights) ** 2)

    def finalized(self) -> "BeamformerMatrix":
        """Rescale so the Frobenius power meets the budget exactly."""
        total = self.total_power
        if total == 0.0:
            if self.power_budget == 0.0:
                return self
            raise ValueError("cannot scale a zero beamformer to a positive budget")
        scale = np.sqrt(self.power_budget / total)
        return BeamformerMatrix(self.weights * scale, self.power_budget)


@dataclass
class UplinkPowers:
    """Virtual-uplink per-user transmit powers summing to the BS budget."""

    q: np.ndarray
    power_budget: float

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float)
        if np.any(self.q < 0):
            raise ValueError("uplink powers must be nonnegative")
        total = self.q.sum()
        if self.power_budget > 0 and abs(total - self.power_budget) > 1e-10 * self.power_budget:
            raise ValueError(
                f"uplink powers sum to {total!r}, budget is {self.power_budget!r}"
            )


@dataclass
class SinrReport:
    """Per-user SINR/rate summary for one channel + beamformer."""

    sinr: np.ndarray  # linear
    rates: np.ndarray  # bandwidth * log2(1 + sinr)
    min_rate: float
    avg_received_power: float  # mean over users of sum_j |Y[k, j]|^2
    noise_power: float
    bandwidth: float = 1.0

    def to_dict(self) -> dict:
        return {
            "sinr": [float(s) for s in self.sinr],
            "rates": [float(r) for r in self.rates],
            "min_rate": float(self.min_rate),
            "avg_received_power": float(self.avg_received_power),
            "noise_power": float(self.noise_power),
            "bandwidth": float(self.bandwidth),
        }


def rates_from_sinr(sinr: np.ndarray, bandwidth: float = 1.0) -> np.ndarray:
    return bandwidth * np.log2(1.0 + np.asarray(sinr, dtype=float))


def downlink_sinr(y: np.ndarray, sigma2: float) -> np.ndarray:
    """Per-user SINR from the K x K received matrix: desired vs leaked power."""
    if sigma2 <= 0:
        raise ValueError("noise power must be positive")
    y = np.asarray(y, dtype=complex)
    power = np.abs(y) ** 2
    desired = np.diag(power)
    interference = power.sum(axis=1) - desired
    return desired / (interference + sigma2)


def sinr_report(y: np.ndarray, sigma2: float, bandwidth: float = 1.0) -> SinrReport:
    """Assemble the report the CLI and optimizer serialize."""
    sinr = downlink_sinr(y, sigma2)
    rates = rates_from_sinr(sinr, bandwidth)
    received = (np.abs(y) ** 2).sum(axis=1)
    return SinrReport(
        sinr=sinr,
        rates=rates,
        min_rate=float(rates.min()),
        avg_received_power=float(received.mean()),
        noise_power=sigma2,
        bandwidth=bandwidth,
    )


def mmse_combiner(h, q, sigma2: float) -> np.ndarray:
    """Uplink MMSE receive combiners, one column per user.

    w_k = sqrt(q_k) (sigma2 I + sum_j q_j h_j^H h_j)^-1 h_k^H.  The Gram sum
    is built once per call; the matrix is Hermitian positive definite for
    sigma2 > 0.
    """
    hm = _channel_matrix(h)
    qv = q.q if isinstance(q, UplinkPowers) else np.asarray(q, dtype=float)
    k, m = hm.shape
    gram = sigma2 * np.eye(m, dtype=complex) + (hm.conj().T * qv) @ hm
    combiners = np.linalg.solve(gram, hm.conj().T)
    return combiners * np.sqrt(qv)


def uplink_sinr(h, w_ul: np.ndarray, q, sigma2: float) -> np.ndarray:
    """Virtual-uplink SINR per user for given combiners and powers."""
    hm = _channel_matrix(h)
    qv = q.q if isinstance(q, UplinkPowers) else np.asarray(q, dtype=float)
    v = hm @ w_ul  # v[j, k] = h_j . w_k
    power = np.abs(v) ** 2
    desired = qv * np.diag(power)
    interference = (qv[:, None] * power).sum(axis=0) - desired
    noise = sigma2 * (np.abs(w_ul) ** 2).sum(axis=0)
    denom = interference + noise
    out = np.zeros_like(desired)
    nonzero = denom > 0
    out[nonzero] = desired[nonzero] / denom[nonzero]
    return out


@dataclass
class BalanceResult:
    powers: UplinkPowers
    combiner: np.ndarray  # M x K, unnormalized MMSE columns
    sinr: np.ndarray
    iterations: int
    converged: bool


def fixed_point_power_balance(
    h,
    p_bs: float,
    sigma2: float,
    eps_u: float = DEFAULT_BALANCE_TOL,
    t_u: int = DEFAULT_BALANCE_MAX_ITER,
) -> BalanceResult:
    """Balance the per-user uplink SINRs under the sum-power constraint.

    Starting from a uniform split, each iteration recomputes the MMSE
    combiners, then scales q_k by min_i SINR_i / SINR_k and renormalizes to
    the budget.  Stops when the minimum SINR changes by less than ``eps_u``
    between iterations or after ``t_u`` iterations.
    """
    hm = _channel_matrix(h)
    k, m = hm.shape
    if p_bs <= 0:
        raise ValueError("power budget must be positive")
    if t_u < 1:
        raise ValueError("need at least one balancing iteration")
    if k > m:
        warnings.warn(
            f"K={k} users exceed M={m} antennas; balancing may converge to "
            "low SINRs",
            stacklevel=2,
        )
    row_power = np.linalg.norm(hm, axis=1)
    if np.any(row_power == 0):
        dead = int(np.argmin(row_power))
        raise InfeasibleUserError(
            f"user {dead} has an identically zero channel row"
        )
    q = np.full(k, p_bs / k)
    prev_min = None
    w = None
    sinr = None
    iterations = 0
    converged = False
    for iterations in range(1, t_u + 1):
        w = mmse_combiner(hm, q, sigma2)
        sinr = uplink_sinr(hm, w, q, sigma2)
        smin = float(sinr.min())
        if smin <= 0:
            raise InfeasibleUserError(
                "a user SINR collapsed to zero during balancing"
            )
        if prev_min is not None and abs(smin - prev_min) < eps_u:
            converged = True
            break
        prev_min = smin
        q = q * (smin / sinr)
        q = q * (p_bs / q.sum())
    return BalanceResult(
        powers=UplinkPowers(q=q, power_budget=p_bs),
        combiner=w,
        sinr=sinr,
        iterations=iterations,
        converged=converged,
    )


def downlink_power_recovery(
    h,
    w_ul: np.ndarray,
    sinr_ul: np.ndarray,
    sigma2: float,
    p_bs: float | None = None,
) -> np.ndarray:
    """Per-beam downlink powers reproducing the uplink SINRs.

    Solves p_k G(k,k) - SINR_k sum_{j != k} p_j G(k,j) = SINR_k sigma2 with
    G(k,j) = |h_k . w_j|^2.  Duality guarantees nonnegative powers and, for
    unit-norm combiners, total power equal to the uplink budget; both are
    checked and violations raise DualityError.
    """
    hm = _channel_matrix(h)
    sinr_ul = np.asarray(sinr_ul, dtype=float)
    gains = np.abs(hm @ w_ul) ** 2  # G[k, j]
    diag = np.diag(gains)
    if np.any(diag <= 0):
        raise DualityError("a desired-signal gain G(k,k) is zero")
    a = -sinr_ul[:, None] * gains
    np.fill_diagonal(a, diag)
    b = sinr_ul * sigma2
    try:
        p = np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise DualityError(f"downlink power system is singular: {exc}") from exc
    scale = p_bs if p_bs is not None else max(abs(p).max(), 1.0)
    if np.any(p < -1e-10 * scale):
        raise DualityError(
            f"negative downlink power recovered: {p.min()!r}"
        )
    p = np.maximum(p, 0.0)
    if p_bs is not None:
        drift = abs(p.sum() - p_bs) / p_bs
        if drift > POWER_CONSERVATION_TOL:
            raise DualityError(
                f"duality power conservation violated: sum(p) drifts by {drift:.3e}"
            )
    return p


def duality_beamformer(
    h,
    p_bs: float,
    sigma2: float,
    bandwidth: float = 1.0,
    eps_u: float = DEFAULT_BALANCE_TOL,
    t_u: int = DEFAULT_BALANCE_MAX_ITER,
) -> tuple[BeamformerMatrix, SinrReport]:
    """Max-min downlink beamformer for one channel state.

    Runs the uplink balance, recovers the downlink powers, and returns the
    finalized beamformer together with a report computed from the true
    downlink received signals (not the duality identity); a mismatch beyond
    1e-6 relative between the two is surfaced as a warning.
    """
    hm = _channel_matrix(h)
    balance = fixed_point_power_balance(hm, p_bs, sigma2, eps_u=eps_u, t_u=t_u)
    norms = np.linalg.norm(balance.combiner, axis=0)
    unit = balance.combiner / norms
    p = downlink_power_recovery(hm, unit, balance.sinr, sigma2, p_bs=p_bs)
    weights = unit * np.sqrt(p)
    beamformer = BeamformerMatrix(weights, power_budget=p_bs).finalized()
    y = hm @ beamformer.weights
    report = sinr_report(y, sigma2, bandwidth)
    rel = np.abs(report.sinr - balance.sinr) / np.maximum(balance.sinr, 1e-300)
    if np.any(rel > 1e-6):
        warnings.warn(
            f"downlink SINR deviates from the uplink duality value by up to "
            f"{rel.max():.3e}",
            stacklevel=2,
        )
    return beamformer, report


def no_ris_beamformer(
    components,
    p_bs: float,
    sigma2: float,
    bandwidth: float = 1.0,
) -> tuple[BeamformerMatrix, SinrReport]:
    """Baseline beamformer on the RIS-free channel (h_u alone)."""
    return duality_beamformer(components.h_u, p_bs, sigma2, bandwidth=bandwidth)
