"""Joint TX-power / RIS-area allocation over beam pairs.

Reflected pair ``j`` with area share ``r_j`` and power share ``q_j`` has SNR
``r_j^2 q_j snr_j``; a direct beam has ``q_j snr_j``.  For reflection-only
links the optimum satisfies ``r = q``, which reduces the problem to
maximizing ``sum log2(1 + r_j^3 snr_j)`` on the simplex.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .direct import waterfill

__all__ = [
    "SolverConfig",
    "AllocationResult",
    "capacity_p3",
    "capacity_p4",
    "opt_ris_rank",
    "joint_power_ris_alloc_1",
    "joint_power_ris_alloc_2",
    "opt_dir_ris_rank",
    "joint_power_dir_ris_alloc_1",
    "joint_power_dir_ris_alloc_2",
    "SweepRow",
    "mimo_vs_reflection_sweep",
    "db_to_linear",
]


def db_to_linear(db) -> np.ndarray:
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


@dataclass(frozen=True)
class SolverConfig:
    eps_conv: float = 1e-4
    max_iterations: int = 1000

    def __post_init__(self):
        if not self.eps_conv > 0:
            raise ValueError("eps_conv must be positive")
        if int(self.max_iterations) != self.max_iterations or self.max_iterations < 1:
            raise ValueError("max_iterations must be a positive integer")


@dataclass
class AllocationResult:
    """Outcome of an allocator.

    ``r`` and ``q_reflected`` are indexed like ``snr_reflected``, ``q_direct``
    like ``snr_direct``; pairs left out by rank selection carry zeros.
    ``trace_r``/``trace_q`` hold every iterate including the starting point
    (``trace_q`` rows are ``[q_reflected, q_direct]``).  ``candidates`` lists
    the per-rank sub-results evaluated by the rank-search algorithms.
    """

    rank: int
    r: np.ndarray
    q_reflected: np.ndarray
    q_direct: np.ndarray
    capacity: float
    iterations: int
    converged: bool
    snr_reflected: np.ndarray
    snr_direct: np.ndarray
    n_reflected_used: int = 0
    trace_r: list = field(default_factory=list, repr=False)
    trace_q: list = field(default_factory=list, repr=False)
    candidates: list = field(default_factory=list, repr=False)

    @property
    def capacity_reflected(self) -> float:
        return float(np.sum(np.log2(1.0 + self.r ** 2 * self.q_reflected * self.snr_reflected)))

    @property
    def capacity_direct(self) -> float:
        return float(np.sum(np.log2(1.0 + self.q_direct * self.snr_direct)))

    def recompute_capacity(self) -> float:
        return self.capacity_reflected + self.capacity_direct

    def padded(self, n_reflected: int, snr_reflected: np.ndarray) -> "AllocationResult":
        """Copy with reflected vectors zero-padded to ``n_reflected`` entries."""
        pad = n_reflected - len(self.r)
        return AllocationResult(
            rank=self.rank,
            r=np.concatenate([self.r, np.zeros(pad)]),
            q_reflected=np.concatenate([self.q_reflected, np.zeros(pad)]),
            q_direct=self.q_direct,
            capacity=self.capacity,
            iterations=self.iterations,
            converged=self.converged,
            snr_reflected=np.asarray(snr_reflected, dtype=float),
            snr_direct=self.snr_direct,
            n_reflected_used=len(self.r),
            trace_r=self.trace_r,
            trace_q=self.trace_q,
        )


def capacity_p3(r, snr) -> float:
    r = np.asarray(r, dtype=float)
    return float(np.sum(np.log2(1.0 + r ** 3 * np.asarray(snr, dtype=float))))


def capacity_p4(r, q_reflected, q_direct, snr_reflected, snr_direct) -> float:
    r = np.asarray(r, dtype=float)
    refl = np.log2(1.0 + r ** 2 * np.asarray(q_reflected) * np.asarray(snr_reflected, dtype=float))
    dirc = np.log2(1.0 + np.asarray(q_direct) * np.asarray(snr_direct, dtype=float))
    return float(np.sum(refl) + np.sum(dirc))


def _check_snr(snr, name: str, *, descending: bool, allow_empty: bool) -> np.ndarray:
    s = np.asarray(snr, dtype=float).reshape(-1)
    if s.size == 0 and not allow_empty:
        raise ValueError(f"{name} must not be empty")
    if np.any(~np.isfinite(s)) or np.any(s <= 0):
        raise ValueError(f"{name} entries must be positive and finite")
    if descending and np.any(np.diff(s) > 0):
        raise ValueError(f"{name} must be sorted in descending order")
    return s


def _noise_equivalents(gain: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.where(gain > 0, 1.0 / np.where(gain > 0, gain, 1.0), np.inf)


def _rank(*shares: np.ndarray) -> int:
    return int(sum(np.count_nonzero(s > 0) for s in shares))


def opt_ris_rank(snr: Sequence[float], cfg: SolverConfig = SolverConfig()) -> AllocationResult:
    """Fixed-point water filling on the RIS area shares of a reflection-only link.

    Starting from the centroid, each step applies
    ``r <- waterfill(1 / (r^2 snr), 1)`` until the infinity-norm change drops
    below ``cfg.eps_conv``.  A pair whose share hits zero stays at zero.
    """
    s = _check_snr(snr, "snr", descending=True, allow_empty=False)
    r = np.full(s.size, 1.0 / s.size)
    trace = [r.copy()]
    converged = False
    it = 0
    for it in range(1, cfg.max_iterations + 1):
        r_new = waterfill(_noise_equivalents(r ** 2 * s), 1.0).levels
        trace.append(r_new)
        step = np.max(np.abs(r_new - r))
        r = r_new
        if step < cfg.eps_conv:
            converged = True
            break
    return AllocationResult(
        rank=_rank(r), r=r, q_reflected=r.copy(), q_direct=np.zeros(0),
        capacity=capacity_p3(r, s), iterations=it, converged=converged,
        snr_reflected=s, snr_direct=np.zeros(0), n_reflected_used=s.size,
        trace_r=trace, trace_q=[t.copy() for t in trace])


def _induct(evaluate, n: int):
    """Grow the rank until capacity stops improving; return (best, evaluated)."""
    evaluated = []
    best = None
    prev = 0.0
    for k in range(1, n + 1):
        res = evaluate(k)
        evaluated.append(res)
        if res.capacity <= prev:
            break
        best, prev = res, res.capacity
    return best, evaluated


def joint_power_ris_alloc_1(snr: Sequence[float],
                            cfg: SolverConfig = SolverConfig()) -> AllocationResult:
    """Reflection-only allocation with rank chosen by running ``opt_ris_rank`` per rank.

    The strongest ``k`` pairs are solved for ``k = 1, 2, ...`` and the search
    stops at the first ``k`` that does not improve on ``k - 1``.
    """
    s = _check_snr(snr, "snr", descending=True, allow_empty=False)
    best, evaluated = _induct(lambda k: opt_ris_rank(s[:k], cfg), s.size)
    out = best.padded(s.size, s)
    out.candidates = evaluated
    return out


def joint_power_ris_alloc_2(snr: Sequence[float],
                            cfg: SolverConfig = SolverConfig()) -> AllocationResult:
    """Like :func:`joint_power_ris_alloc_1` but the rank comes from the uniform
    approximation ``c(k) = sum_{i<=k} log2(1 + snr_i / k^3)``."""
    s = _check_snr(snr, "snr", descending=True, allow_empty=False)
    rk = s.size
    prev = 0.0
    for k in range(1, s.size + 1):
        c = float(np.sum(np.log2(1.0 + s[:k] / k ** 3)))
        if c <= prev:
            rk = k - 1
            break
        prev = c
    out = opt_ris_rank(s[:rk], cfg).padded(s.size, s)
    return out


def opt_dir_ris_rank(snr_direct: Sequence[float], snr_reflected: Sequence[float],
                     cfg: SolverConfig = SolverConfig()) -> AllocationResult:
    """Joint water filling over direct beams and reflected pairs.

    Each iteration water-fills the total power over the noise equivalents
    ``[1 / (r^2 snr_reflected), 1 / snr_direct]`` and then sets the area
    shares proportional to the reflected power shares.  Convergence is
    measured on the power shares.
    """
    sd = _check_snr(snr_direct, "snr_direct", descending=False, allow_empty=True)
    sr = _check_snr(snr_reflected, "snr_reflected", descending=True, allow_empty=True)
    n_r, n_d = sr.size, sd.size
    if n_r + n_d == 0:
        raise ValueError("at least one direct beam or reflected pair is required")

    if n_r == 0:
        q = waterfill(1.0 / sd, 1.0).levels
        return AllocationResult(
            rank=_rank(q), r=np.zeros(0), q_reflected=np.zeros(0), q_direct=q,
            capacity=capacity_p4([], [], q, [], sd), iterations=1, converged=True,
            snr_reflected=sr, snr_direct=sd, n_reflected_used=0,
            trace_r=[np.zeros(0), np.zeros(0)],
            trace_q=[np.full(n_d, 1.0 / n_d), q])

    r = np.full(n_r, 1.0 / n_r)
    q = np.full(n_r + n_d, 1.0 / (n_r + n_d))
    trace_r, trace_q = [r.copy()], [q.copy()]
    converged = False
    it = 0
    direct_ne = 1.0 / sd
    for it in range(1, cfg.max_iterations + 1):
        ne = np.concatenate([_noise_equivalents(r ** 2 * sr), direct_ne])
        q_new = waterfill(ne, 1.0).levels
        q_refl = q_new[:n_r]
        total = q_refl.sum()
        r = q_refl / total if total > 0 else np.zeros(n_r)
        step = np.max(np.abs(q_new - q))
        q = q_new
        trace_r.append(r.copy())
        trace_q.append(q.copy())
        if step < cfg.eps_conv:
            converged = True
            break
    qr, qd = q[:n_r], q[n_r:]
    return AllocationResult(
        rank=_rank(np.minimum(r, qr), qd), r=r, q_reflected=qr, q_direct=qd,
        capacity=capacity_p4(r, qr, qd, sr, sd), iterations=it, converged=converged,
        snr_reflected=sr, snr_direct=sd, n_reflected_used=n_r,
        trace_r=trace_r, trace_q=trace_q)


def joint_power_dir_ris_alloc_1(snr_direct: Sequence[float], snr_reflected: Sequence[float],
                                cfg: SolverConfig = SolverConfig()) -> AllocationResult:
    """Composite-link allocation; the strongest ``k`` reflected pairs plus all
    direct beams are solved for growing ``k`` until capacity stops improving."""
    sd = _check_snr(snr_direct, "snr_direct", descending=False, allow_empty=True)
    sr = _check_snr(snr_reflected, "snr_reflected", descending=True, allow_empty=True)
    if sr.size == 0:
        return opt_dir_ris_rank(sd, sr, cfg)
    best, evaluated = _induct(lambda k: opt_dir_ris_rank(sd, sr[:k], cfg), sr.size)
    out = best.padded(sr.size, sr)
    out.candidates = evaluated
    return out


def joint_power_dir_ris_alloc_2(snr_direct: Sequence[float], snr_reflected: Sequence[float],
                                cfg: SolverConfig = SolverConfig()) -> AllocationResult:
    """Composite-link allocation with the reflection rank chosen under uniform areas.

    For each ``k`` the power is water-filled with ``r = 1/k`` fixed; the first
    non-improving ``k`` ends the search and the winner is refined by
    :func:`opt_dir_ris_rank`.
    """
    sd = _check_snr(snr_direct, "snr_direct", descending=False, allow_empty=True)
    sr = _check_snr(snr_reflected, "snr_reflected", descending=True, allow_empty=True)
    if sr.size == 0:
        return opt_dir_ris_rank(sd, sr, cfg)
    rk = sr.size
    prev = 0.0
    for k in range(1, sr.size + 1):
        eff = np.concatenate([sr[:k] / k ** 2, sd])
        q = waterfill(1.0 / eff, 1.0).levels
        c = float(np.sum(np.log2(1.0 + q * eff)))
        if c <= prev:
            rk = k - 1
            break
        prev = c
    return opt_dir_ris_rank(sd, sr[:rk], cfg).padded(sr.size, sr)


@dataclass(frozen=True)
class SweepRow:
    snr_db: float
    mimo_rank: int
    mimo_capacity: float
    refl_rank: int
    refl_capacity: float
    mimo_layer_snr: float
    refl_layer_snr: float


def mimo_vs_reflection_sweep(n_beams: int, snr_db_range: Sequence[float],
                             cfg: SolverConfig = SolverConfig()) -> list[SweepRow]:
    """Compare ``n_beams`` equal MIMO beams against ``n_beams`` equal reflected pairs.

    The per-layer SNR is ``snr q`` for MIMO and ``snr r^2 q`` for reflection,
    i.e. ``snr/k`` and ``snr/k^3`` at a uniform rank-``k`` allocation.
    """
    if n_beams < 1:
        raise ValueError("n_beams must be >= 1")
    rows = []
    for db in snr_db_range:
        s = float(db_to_linear(db))
        snr = np.full(n_beams, s)
        q = waterfill(1.0 / snr, 1.0).levels
        mimo_rank = _rank(q)
        mimo_cap = float(np.sum(np.log2(1.0 + q * snr)))
        refl = joint_power_ris_alloc_1(snr, cfg)
        active = refl.r > 0
        mimo_layer = float(s * q[q > 0][0])
        refl_layer = float(s * refl.r[active][0] ** 2 * refl.q_reflected[active][0])
        rows.append(SweepRow(float(db), mimo_rank, mimo_cap, refl.rank, refl.capacity,
                             mimo_layer, refl_layer))
    return rows
