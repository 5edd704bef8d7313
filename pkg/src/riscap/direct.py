"""Direct TX -> RX link: water filling, capacity and DFT precoding."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .channel import ArrayGeometry, VirtualChannel, dft_matrix, nonzero_tx_beams

__all__ = [
    "LinkBudget",
    "PowerAllocation",
    "DirectLinkResult",
    "waterfill",
    "direct_link_capacity",
    "build_precoder",
    "transmit_covariance",
]

_BISECTION_STEPS = 200


@dataclass(frozen=True)
class LinkBudget:
    """Noise power and transmit power budget.

    ``p_max`` is the per-antenna limit used by the direct link (total
    ``N_T * p_max``); ``total_power`` normalizes the reflected-pair SNRs.
    """

    noise_power: float = 1.0
    bandwidth: float = 1.0
    p_max: float = 1.0
    total_power: float = 1.0

    def __post_init__(self):
        for name in ("noise_power", "bandwidth", "p_max", "total_power"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ValueError(f"{name} must be a positive finite number, got {value!r}")


@dataclass(frozen=True)
class PowerAllocation:
    levels: np.ndarray
    total: float
    water_level: float = math.nan

    def __len__(self):
        return len(self.levels)


class DirectLinkResult(NamedTuple):
    capacity: float
    allocation: PowerAllocation
    beams: list[int]


def waterfill(noise_equivalents: Sequence[float], total_power: float) -> PowerAllocation:
    """Water filling over parallel AWGN channels.

    Solves ``p_i = (v - n_i)^+`` with ``sum(p) = total_power``.

    Parameters
    ----------
    noise_equivalents : sequence of float
        Noise-to-gain ratios ``n_i``.  ``inf`` marks an unusable channel,
        which always receives zero power.
    total_power : float
        Power to distribute.

    Returns
    -------
    PowerAllocation
        Levels in input order and the water level ``v``.  If every channel is
        unusable all levels are zero.
    """
    n = np.asarray(noise_equivalents, dtype=float)
    if n.ndim != 1 or n.size == 0:
        raise ValueError("noise_equivalents must be a nonempty 1-D sequence")
    if np.any(np.isnan(n)) or np.any(n <= 0):
        raise ValueError("noise equivalents must be positive (or +inf)")
    if not (total_power > 0):
        raise ValueError("total_power must be positive")

    usable = np.isfinite(n)
    if not usable.any():
        return PowerAllocation(np.zeros(n.size), 0.0, math.nan)
    nu = n[usable]

    lo = float(nu.min())
    hi = lo + total_power
    for _ in range(_BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        if np.maximum(mid - nu, 0.0).sum() > total_power:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-15 * max(1.0, abs(hi)):
            break
    v = 0.5 * (lo + hi)

    # Closed form on the bisected active set removes the residual sum error.
    active = nu < v
    if active.any():
        v = (total_power + nu[active].sum()) / active.sum()
    levels = np.zeros(n.size)
    levels[usable] = np.maximum(v - nu, 0.0)
    return PowerAllocation(levels, float(total_power), float(v))


def direct_link_capacity(h: VirtualChannel, budget: LinkBudget) -> DirectLinkResult:
    """Water-filled capacity (bits/s/Hz times bandwidth) of a row-sparse direct link.

    Total power is ``N_T * p_max``; beam ``k`` sees ``SNR_k = p_k s_k^2 / sigma^2``.
    """
    h.require_row_sparse("direct_link_capacity")
    beams = nonzero_tx_beams(h)
    if not beams:
        return DirectLinkResult(0.0, PowerAllocation(np.zeros(0), 0.0), [])
    cols = [k for k, _ in beams]
    gains = np.array([g for _, g in beams])
    alloc = waterfill(budget.noise_power / gains, h.n_cols * budget.p_max)
    snr = alloc.levels * gains / budget.noise_power
    capacity = budget.bandwidth * float(np.sum(np.log2(1.0 + snr)))
    return DirectLinkResult(capacity, alloc, cols)


def build_precoder(allocation: PowerAllocation, tx: ArrayGeometry,
                   beam_indices: Sequence[int]) -> np.ndarray:
    """Precoder ``P = DFT_{N_T} diag(sqrt(sp))`` with ``sp`` placed on ``beam_indices``."""
    n_t = tx.n_elements
    idx = [int(k) for k in beam_indices]
    if len(idx) != len(allocation.levels):
        raise ValueError("one beam index per allocation level is required")
    if len(set(idx)) != len(idx):
        raise ValueError("beam indices must be distinct")
    if any(k < 0 or k >= n_t for k in idx):
        raise ValueError(f"beam indices must lie in [0, {n_t})")
    sp = np.zeros(n_t)
    sp[idx] = allocation.levels
    return dft_matrix(n_t) * np.sqrt(sp)


def transmit_covariance(precoder: np.ndarray) -> np.ndarray:
    """``E[x_p x_p^H] = P P^H`` for independent unit-power symbols."""
    return precoder @ precoder.conj().T
