"""RIS reflection: beam pairing, cyclic-shift encoding and phase synthesis.

Conventions
-----------
``H_v1`` is the TX -> RIS virtual channel (``N_S x N_T``, rows are RIS arrival
beams ``i1``), ``H_v2`` the RIS -> RX channel (``N_R x N_S``, columns are RIS
departure beams ``k2``).  A subarray encoded with the linear phase
``exp(j m phi_c)``, ``phi_c = -2 pi N_c / N_S``, acts in beamspace as the
cyclic shift ``C(N_c)`` that moves RIS beam ``i`` to ``i + N_c``, so
``N_c = k2 - i1`` steers incident beam ``i1`` into outgoing beam ``k2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .channel import VirtualChannel, dft_matrix
from .direct import LinkBudget

__all__ = [
    "ReflectionError",
    "NoReflectableBeamError",
    "SubarrayVanishedError",
    "BeamPair",
    "RISEncoding",
    "cyclic_shift_matrix",
    "shift_phase_param",
    "subarray_element_counts",
    "synthesize_phase_vector",
    "quantize_phases",
    "pair_beams",
    "best_rank1_reflection",
    "verify_reflection_gain",
    "shared_beams",
]

TWO_PI = 2.0 * math.pi


class ReflectionError(ValueError):
    pass


class NoReflectableBeamError(ReflectionError):
    """One of the RIS legs has no nonzero beam."""


class SubarrayVanishedError(ReflectionError):
    """A subarray with a nonzero area share rounds to zero elements."""


@dataclass(frozen=True)
class BeamPair:
    """Matched incident (TX -> RIS) and outgoing (RIS -> RX) beams."""

    incident_row: int
    tx_col: int
    outgoing_col: int
    gain: float
    snr_normalized: float

    @property
    def shift(self) -> int:
        """Unreduced cyclic shift ``k2 - i1``."""
        return self.outgoing_col - self.incident_row


@dataclass(frozen=True)
class RISEncoding:
    """Partition of the surface into subarrays with linear phase ramps.

    ``subarray_sizes`` are relative areas ``r_j``; ``phase_params`` are the
    per-element phase steps ``phi_c^j`` in radians.
    """

    subarray_sizes: Sequence[float]
    phase_params: Sequence[float]
    n_elements: int
    counts: tuple = field(init=False, repr=False)

    def __post_init__(self):
        r = np.asarray(self.subarray_sizes, dtype=float)
        if r.ndim != 1 or r.size == 0 or r.size != len(self.phase_params):
            raise ReflectionError("need one phase parameter per subarray")
        if np.any(r < 0) or abs(r.sum() - 1.0) > 1e-9:
            raise ReflectionError("subarray sizes must be nonnegative and sum to 1")
        if self.n_elements < 1:
            raise ReflectionError("n_elements must be positive")
        object.__setattr__(self, "subarray_sizes", tuple(float(x) for x in r))
        object.__setattr__(self, "phase_params", tuple(float(x) for x in self.phase_params))
        object.__setattr__(self, "counts", tuple(subarray_element_counts(r, self.n_elements)))


def cyclic_shift_matrix(n: int, shift: int) -> np.ndarray:
    """Permutation ``C`` with ``(C x)[i] = x[(i - shift) mod n]``."""
    c = np.zeros((n, n))
    j = np.arange(n)
    c[(j + shift) % n, j] = 1.0
    return c


def shift_phase_param(shift: int, n_s: int) -> float:
    """Per-element phase step ``-2 pi (shift mod n_s) / n_s``.

    The deflection is an angle of the whole surface, so the shift is taken on
    the full ``n_s`` grid even when applied by a smaller subarray.
    """
    return -TWO_PI * (shift % n_s) / n_s


def subarray_element_counts(sizes: Sequence[float], n_elements: int) -> list[int]:
    """``floor(r_j * N_S)`` elements per subarray; the last active one gets the remainder."""
    r = np.asarray(sizes, dtype=float)
    counts = [int(math.floor(x * n_elements + 1e-9)) for x in r]
    active = [j for j, x in enumerate(r) if x > 0]
    if active:
        counts[active[-1]] += n_elements - sum(counts)
    for j in active:
        if counts[j] <= 0:
            raise SubarrayVanishedError(
                f"subarray {j} (r={r[j]:.3g}) has no elements at N_S={n_elements}")
    return counts


def synthesize_phase_vector(encoding: RISEncoding) -> np.ndarray:
    """Concatenate the per-subarray DFT vectors ``[1, e^{j phi}, e^{j 2 phi}, ...]``."""
    parts = [np.exp(1j * phi * np.arange(n))
             for n, phi in zip(encoding.counts, encoding.phase_params)]
    return np.concatenate(parts)


def quantize_phases(phases, bits: int) -> np.ndarray:
    """Snap each unit-modulus value to the nearest of ``2**bits`` uniform phases."""
    if bits < 1:
        raise ValueError("bits must be >= 1")
    z = np.asarray(phases, dtype=complex)
    step = TWO_PI / (1 << bits)
    q = np.round(np.angle(z) / step) * step
    return np.exp(1j * q)


def _sorted_incident(h1: VirtualChannel) -> list[tuple[int, int, float]]:
    mask = h1.nonzero_mask()
    rows, cols = np.nonzero(mask)
    mags = np.abs(h1.entries[rows, cols])
    items = [(int(i), int(k), float(m)) for i, k, m in zip(rows, cols, mags)]
    items.sort(key=lambda t: (-t[2], t[0], t[1]))
    return items


def _sorted_outgoing(h2: VirtualChannel) -> list[tuple[int, float]]:
    norms = h2.column_norms()
    items = [(k, float(norms[k])) for k in range(h2.n_cols) if norms[k] > h2.threshold]
    items.sort(key=lambda t: (-t[1], t[0]))
    return items


def pair_beams(h1: VirtualChannel, h2: VirtualChannel,
               budget: LinkBudget | None = None) -> list[BeamPair]:
    """Pair the j-th strongest incident entry with the j-th strongest outgoing column.

    Incident beams are ranked by ``|H_v1(i1, k1)|``, outgoing beams by
    ``||H_v2(:, k2)||``; ties go to the lower index.
    """
    h1.require_row_sparse("pair_beams (TX -> RIS leg)")
    h2.require_row_sparse("pair_beams (RIS -> RX leg)")
    if h1.n_rows != h2.n_cols:
        raise ReflectionError(
            f"RIS dimension mismatch: H_v1 has {h1.n_rows} rows, H_v2 has {h2.n_cols} columns")
    budget = budget or LinkBudget()
    scale = budget.total_power / budget.noise_power
    pairs = []
    for (i1, k1, a), (k2, b) in zip(_sorted_incident(h1), _sorted_outgoing(h2)):
        g = b * b * a * a
        pairs.append(BeamPair(i1, k1, k2, g, g * scale))
    return pairs


def best_rank1_reflection(h1: VirtualChannel, h2: VirtualChannel,
                          budget: LinkBudget | None = None) -> BeamPair:
    """Strongest single reflection: best incident entry onto the best outgoing column."""
    pairs = pair_beams(h1, h2, budget)
    if not pairs:
        leg = "TX -> RIS" if not _sorted_incident(h1) else "RIS -> RX"
        raise NoReflectableBeamError(f"{leg} channel has no nonzero beam")
    return pairs[0]


def verify_reflection_gain(h1: VirtualChannel, h2: VirtualChannel, pair: BeamPair,
                           n_s: int, shift: int | None = None) -> float:
    """Measure the reflected gain of ``pair`` through the full physical channel.

    The whole surface is encoded with ``phi_c = -2 pi N_c / N_S`` and the
    product ``DFT_R H_v2 (DFT_S^H H_R DFT_S) H_v1 DFT_T^H`` is formed
    explicitly; the return value is the energy received when transmitting on
    TX beam ``pair.tx_col``.  ``shift`` overrides the pair's own shift.
    """
    if h1.n_rows != n_s or h2.n_cols != n_s:
        raise ReflectionError(
            f"dimension mismatch: H_v1 is {h1.shape}, H_v2 is {h2.shape}, N_S={n_s}")
    n_c = pair.shift if shift is None else shift
    enc = RISEncoding([1.0], [shift_phase_param(n_c, n_s)], n_s)
    h_r = np.diag(synthesize_phase_vector(enc))
    f_s = dft_matrix(n_s)
    f_t = dft_matrix(h1.n_cols)
    f_r = dft_matrix(h2.n_rows)
    h_full = f_r @ h2.entries @ (f_s.conj().T @ h_r @ f_s) @ h1.entries @ f_t.conj().T
    column = h_full @ f_t[:, pair.tx_col]
    return float(np.vdot(column, column).real)


def shared_beams(h1: VirtualChannel, h2: VirtualChannel,
                 hd: VirtualChannel) -> tuple[list[int], list[int]]:
    """AODs shared by ``H_v1`` and ``H_vD`` and AOAs shared by ``H_v2`` and ``H_vD``.

    Both lists are empty when the composite-channel orthogonality assumption holds.
    """
    tx1 = set(np.flatnonzero(h1.nonzero_mask().any(axis=0)).tolist())
    txd = set(np.flatnonzero(hd.nonzero_mask().any(axis=0)).tolist())
    rx2 = set(np.flatnonzero(h2.nonzero_mask().any(axis=1)).tolist())
    rxd = set(np.flatnonzero(hd.nonzero_mask().any(axis=1)).tolist())
    return sorted(tx1 & txd), sorted(rx2 & rxd)
