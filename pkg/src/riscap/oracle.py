"""Independent checks for the allocators.

Two global searches that share nothing with the fixed-point water-filling
iterations: an exact maximum over a simplex lattice (reflection-only
objective, up to four pairs) and a seeded multistart projected-gradient
ascent on the product of simplices (reflection-only or composite objective).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

__all__ = [
    "OracleReport",
    "Objective",
    "p3_objective",
    "p4_objective",
    "project_simplex",
    "waterfill_active_set",
    "grid_search_p3",
    "enumerate_simplex_lattice",
    "projected_gradient_multistart",
    "kkt_residual",
    "check_agreement",
    "SurfaceGrid",
    "capacity_surface",
    "local_extrema_1d",
]

LN2 = math.log(2.0)
KKT_TOL = 1e-6


@dataclass(frozen=True)
class OracleReport:
    best_capacity: float
    best_r: np.ndarray
    best_q: np.ndarray
    method: str
    n_starts: int
    seed: int | None = None
    kkt_residual: float = 0.0
    agreement: bool | None = None
    reference_capacity: float | None = None

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "best_capacity": self.best_capacity,
            "best_r": [float(x) for x in self.best_r],
            "best_q": [float(x) for x in self.best_q],
            "n_starts": self.n_starts,
            "seed": self.seed,
            "kkt_residual": self.kkt_residual,
            "reference_capacity": self.reference_capacity,
            "agreement": self.agreement,
        }


def check_agreement(report: OracleReport, capacity: float, tol: float = 1e-4) -> OracleReport:
    """Attach the capacity of the algorithm under test and whether it is within ``tol``."""
    ok = abs(capacity - report.best_capacity) <= tol
    return replace(report, agreement=bool(ok), reference_capacity=float(capacity))


def project_simplex(y) -> np.ndarray:
    """Euclidean projection of each row of ``y`` onto the probability simplex.

    Sort-based method: with ``u`` sorted descending, ``rho`` is the last
    index where ``u_rho > (sum_{i<=rho} u_i - 1) / rho``.
    """
    y = np.asarray(y, dtype=float)
    squeeze = y.ndim == 1
    y2 = np.atleast_2d(y)
    n = y2.shape[1]
    u = -np.sort(-y2, axis=1)
    css = np.cumsum(u, axis=1) - 1.0
    idx = np.arange(1, n + 1)
    cond = u - css / idx > 0
    rho = n - 1 - np.argmax(cond[:, ::-1], axis=1)
    theta = css[np.arange(y2.shape[0]), rho] / (rho + 1)
    out = np.maximum(y2 - theta[:, None], 0.0)
    return out[0] if squeeze else out


def waterfill_active_set(noise_equivalents: Sequence[float], total_power: float) -> np.ndarray:
    """Water filling by enumerating active sets in closed form.

    With noise levels sorted ascending, the first ``m`` channels are active
    at level ``v = (P + sum_{i<m} n_i) / m`` for the unique ``m`` with
    ``n_{m-1} < v <= n_m``.
    """
    n = np.asarray(noise_equivalents, dtype=float)
    order = np.argsort(n, kind="stable")
    ns = n[order]
    finite = int(np.count_nonzero(np.isfinite(ns)))
    p = np.zeros(n.size)
    if finite == 0:
        return p
    for m in range(1, finite + 1):
        v = (total_power + ns[:m].sum()) / m
        if v > ns[m - 1] and (m == finite or v <= ns[m]):
            p[order[:m]] = v - ns[:m]
            return p
    raise RuntimeError("no consistent active set")  # unreachable for valid input


@dataclass(frozen=True)
class Objective:
    """Capacity on a product of simplices, batched over rows of ``x``.

    ``blocks`` lists the index sets that must each sum to one.  For the
    composite objective the layout is ``[r, q_reflected, q_direct]``.
    """

    name: str
    snr_reflected: np.ndarray
    snr_direct: np.ndarray

    @property
    def n_r(self) -> int:
        return self.snr_reflected.size

    @property
    def n_d(self) -> int:
        return self.snr_direct.size

    @property
    def dim(self) -> int:
        return self.n_r if self.name == "P3" else 2 * self.n_r + self.n_d

    @property
    def blocks(self) -> list[np.ndarray]:
        if self.name == "P3":
            return [np.arange(self.n_r)]
        b = []
        if self.n_r:
            b.append(np.arange(self.n_r))
        b.append(np.arange(self.n_r, self.dim))
        return b

    def split(self, x):
        x = np.asarray(x, dtype=float)
        if self.name == "P3":
            return x, x, x[..., :0]
        n_r = self.n_r
        return x[..., :n_r], x[..., n_r:2 * n_r], x[..., 2 * n_r:]

    def value(self, x) -> np.ndarray:
        if self.name == "P3":
            return np.log2(1.0 + x ** 3 * self.snr_reflected).sum(axis=-1)
        r, qr, qd = self.split(x)
        return (np.log2(1.0 + r ** 2 * qr * self.snr_reflected).sum(axis=-1)
                + np.log2(1.0 + qd * self.snr_direct).sum(axis=-1))

    def grad(self, x) -> np.ndarray:
        if self.name == "P3":
            s = self.snr_reflected
            return 3.0 * x ** 2 * s / (LN2 * (1.0 + x ** 3 * s))
        s, sd = self.snr_reflected, self.snr_direct
        r, qr, qd = self.split(x)
        den = LN2 * (1.0 + r ** 2 * qr * s)
        return np.concatenate([2.0 * r * qr * s / den, r ** 2 * s / den,
                               sd / (LN2 * (1.0 + qd * sd))], axis=-1)

    def hess(self, x) -> np.ndarray:
        """Hessian at a single point."""
        x = np.asarray(x, dtype=float)
        if self.name == "P3":
            s = self.snr_reflected
            u = x ** 3 * s
            return np.diag((6.0 * x * s * (1.0 + u) - 9.0 * x ** 4 * s ** 2)
                           / (LN2 * (1.0 + u) ** 2))
        s, sd = self.snr_reflected, self.snr_direct
        n_r = self.n_r
        r, qr, qd = self.split(x)
        u = r ** 2 * qr * s
        den = LN2 * (1.0 + u) ** 2
        h = np.zeros((self.dim, self.dim))
        i = np.arange(n_r)
        h[i, i] = (2.0 * qr * s * (1.0 + u) - 4.0 * r ** 2 * qr ** 2 * s ** 2) / den
        h[n_r + i, n_r + i] = -(r ** 2 * s) ** 2 / den
        h[i, n_r + i] = h[n_r + i, i] = 2.0 * r * s / den
        j = 2 * n_r + np.arange(self.n_d)
        h[j, j] = -sd ** 2 / (LN2 * (1.0 + qd * sd) ** 2)
        return h

    def project(self, x) -> np.ndarray:
        out = np.array(x, dtype=float, copy=True)
        for b in self.blocks:
            out[..., b] = project_simplex(out[..., b])
        return out


def p3_objective(snr: Sequence[float]) -> Objective:
    return Objective("P3", np.asarray(snr, dtype=float), np.zeros(0))


def p4_objective(snr_direct: Sequence[float], snr_reflected: Sequence[float]) -> Objective:
    return Objective("P4", np.asarray(snr_reflected, dtype=float),
                     np.asarray(snr_direct, dtype=float))


def kkt_residual(obj: Objective, x) -> np.ndarray:
    """Projected-gradient stationarity measure ``||P(x + grad f) - x||_inf``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    return np.abs(obj.project(x + obj.grad(x)) - x).max(axis=1)


def _random_starts(obj: Objective, n_starts: int, rng: np.random.Generator) -> np.ndarray:
    # Alternate full-simplex draws with draws on random faces so that small
    # basins near the boundary are visited too.
    x = np.zeros((n_starts, obj.dim))
    for i in range(n_starts):
        for b in obj.blocks:
            if i % 2 == 0:
                x[i, b] = rng.dirichlet(np.ones(b.size))
            else:
                m = int(rng.integers(1, b.size + 1))
                support = rng.choice(b, size=m, replace=False)
                x[i, support] = rng.dirichlet(np.ones(m))
    return x


def _ascend(obj: Objective, x: np.ndarray, iters: int) -> np.ndarray:
    step = np.ones(len(x))
    fx = obj.value(x)
    for _ in range(iters):
        g = obj.grad(x)
        for _ in range(60):
            xn = obj.project(x + step[:, None] * g)
            fn = obj.value(xn)
            ok = fn >= fx + 1e-4 * np.sum(g * (xn - x), axis=1) - 1e-13 * (1.0 + np.abs(fx))
            if ok.all():
                break
            step = np.where(ok, step, 0.5 * step)
        xn = np.where(ok[:, None], xn, x)
        fn = np.where(ok, fn, fx)
        moved = np.abs(xn - x).max(axis=1)
        x, fx = xn, fn
        step = np.clip(2.0 * step, 1e-12, 1e3)
        if moved.max() < 1e-13:
            break
    return x


def _polish(obj: Objective, x: np.ndarray) -> np.ndarray:
    """Newton iterations on the face spanned by the positive coordinates."""
    active = np.flatnonzero(x > 1e-12)
    blocks = [np.flatnonzero(np.isin(active, b)) for b in obj.blocks]
    n_a, n_b = active.size, len(blocks)
    a = np.zeros((n_b, n_a))
    for k, b in enumerate(blocks):
        a[k, b] = 1.0
    best = x
    f_best = float(obj.value(x))
    for _ in range(30):
        g = obj.grad(best)[active]
        h = obj.hess(best)[np.ix_(active, active)]
        kkt = np.block([[h, -a.T], [a, np.zeros((n_b, n_b))]])
        rhs = np.concatenate([-g, np.zeros(n_b)])
        # Minimum-norm solve: coordinates with zero curvature and zero
        # gradient (e.g. an area share whose power share is zero) stay put.
        sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
        if not np.all(np.isfinite(sol)) or np.abs(kkt @ sol - rhs).max() > 1e-8 * (1 + np.abs(rhs).max()):
            break
        dx = sol[:n_a]
        cand = best.copy()
        cand[active] += dx
        if np.any(cand[active] <= 0):
            break
        for b in obj.blocks:
            cand[b] /= cand[b].sum()
        f_cand = float(obj.value(cand))
        if f_cand < f_best - 1e-12:
            break
        best, f_best = cand, f_cand
        if np.abs(dx).max() < 1e-15:
            break
    return best


def projected_gradient_multistart(objective: str, snr_direct: Sequence[float],
                                  snr_reflected: Sequence[float], n_starts: int = 50,
                                  seed: int = 0, max_rounds: int = 8) -> OracleReport:
    """Best local maximum over ``n_starts`` seeded random starts.

    Each start runs projected gradient ascent with Armijo backtracking,
    followed by Newton refinement on its active face; rounds repeat until
    every terminal point has KKT residual below ``1e-6``.

    Half of the starts are drawn on random faces of the simplex.  Fifty
    starts reliably find the best face for up to four pairs; with five or
    six pairs the optimal face is one of up to 63 and a few hundred starts
    are needed.

    Parameters
    ----------
    objective : {"P3", "P4"}
        Reflection-only (``sum log2(1 + r^3 snr)``, ``snr_direct`` must be
        empty) or composite capacity over ``(r, q)``.
    """
    if n_starts < 1:
        raise ValueError("n_starts must be >= 1")
    if objective == "P3":
        if len(snr_direct):
            raise ValueError("P3 has no direct beams")
        obj = p3_objective(snr_reflected)
    elif objective == "P4":
        obj = p4_objective(snr_direct, snr_reflected)
    else:
        raise ValueError(f"unknown objective {objective!r}")
    if obj.dim == 0:
        raise ValueError("objective has no variables")

    rng = np.random.default_rng(seed)
    x = _random_starts(obj, n_starts, rng)
    for _ in range(max_rounds):
        x = _ascend(obj, x, iters=300)
        x = np.array([_polish(obj, xi) for xi in x])
        res = kkt_residual(obj, x)
        if res.max() < 0.1 * KKT_TOL:
            break
    vals = obj.value(x)
    i = int(np.argmax(vals))
    r, qr, qd = obj.split(x[i])
    q = qr if objective == "P3" else np.concatenate([qr, qd])
    return OracleReport(float(vals[i]), r.copy(), q.copy(), "projected-gradient-multistart",
                        n_starts, seed, float(res.max()))


def enumerate_simplex_lattice(dim: int, n: int) -> np.ndarray:
    """All points of the simplex with coordinates in ``{0, 1/n, ..., 1}``."""
    return _compositions(dim, n) / n


def _compositions(dim: int, n: int) -> np.ndarray:
    if dim == 1:
        return np.array([[n]])
    rows = []
    for a in range(n + 1):
        rest = _compositions(dim - 1, n - a)
        rows.append(np.column_stack([np.full(len(rest), a), rest]))
    return np.vstack(rows)


def grid_search_p3(snr: Sequence[float], step: float) -> OracleReport:
    """Maximum of ``sum log2(1 + r_j^3 snr_j)`` over the simplex lattice of spacing ``step``.

    The lattice has ``n = round(1/step)`` divisions per axis and includes
    every boundary face.  Because the objective is separable the lattice
    maximum is found exactly by max-plus dynamic programming over the
    per-pair totals instead of listing all points.
    """
    s = np.asarray(snr, dtype=float)
    if s.size == 0 or s.size > 4:
        raise ValueError("grid search supports 1 to 4 pairs; use projected gradient beyond")
    if not (1e-3 - 1e-15 <= step <= 0.1 + 1e-15):
        raise ValueError("step must lie in [1e-3, 0.1]")
    n = int(round(1.0 / step))
    grid = np.arange(n + 1) / n
    f = np.log2(1.0 + np.outer(s, grid ** 3))  # f[j, a]: pair j holding a/n of the area

    best = f[0].copy()
    choice = []
    m_idx = np.arange(n + 1)
    for j in range(1, s.size):
        # total[m, a] = f_j(a) + best(m - a) for a <= m
        diff = m_idx[:, None] - m_idx[None, :]
        total = np.where(diff >= 0, f[j][None, :] + best[np.clip(diff, 0, n)], -np.inf)
        arg = np.argmax(total, axis=1)
        choice.append(arg)
        best = total[m_idx, arg]
    units = np.zeros(s.size, dtype=int)
    m = n
    for j in range(s.size - 1, 0, -1):
        units[j] = choice[j - 1][m]
        m -= units[j]
    units[0] = m
    r = units / n
    return OracleReport(float(best[n]), r, r.copy(), "simplex-grid", 1)


@dataclass(frozen=True)
class SurfaceGrid:
    """Sampled reflection-only capacity; ``points`` rows are area shares."""

    snr: np.ndarray
    points: np.ndarray
    capacity: np.ndarray

    def rows(self) -> list[tuple]:
        j = self.points.shape[1]
        cols = 1 if j == 2 else 2
        return [tuple(float(v) for v in p[:cols]) + (float(c),)
                for p, c in zip(self.points, self.capacity)]


def capacity_surface(snr: Sequence[float], resolution: int) -> SurfaceGrid:
    """Sample the reflection-only capacity on the simplex for two or three pairs."""
    s = np.asarray(snr, dtype=float)
    if s.size not in (2, 3):
        raise ValueError("capacity_surface supports 2 or 3 pairs")
    if resolution < 1:
        raise ValueError("resolution must be positive")
    if s.size == 2:
        r1 = np.linspace(0.0, 1.0, resolution + 1)
        pts = np.column_stack([r1, 1.0 - r1])
    else:
        pts = enumerate_simplex_lattice(3, resolution)
    cap = np.log2(1.0 + pts ** 3 * s).sum(axis=1)
    return SurfaceGrid(s, pts, cap)


def local_extrema_1d(values: Sequence[float]) -> tuple[list[int], list[int]]:
    """Indices of strict local maxima and minima of a sampled curve.

    Endpoints are compared with their single neighbour.
    """
    v = np.asarray(values, dtype=float)
    maxima, minima = [], []
    for i in range(v.size):
        left = v[i - 1] if i > 0 else -np.inf
        right = v[i + 1] if i < v.size - 1 else -np.inf
        if v[i] > left and v[i] > right:
            maxima.append(i)
        left = v[i - 1] if i > 0 else np.inf
        right = v[i + 1] if i < v.size - 1 else np.inf
        if v[i] < left and v[i] < right:
            minima.append(i)
    return maxima, minima
