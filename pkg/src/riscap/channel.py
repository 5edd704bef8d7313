"""Beamspace (virtual) channel construction and the row-sparse SVD.

A physical channel made of a few discrete paths is projected onto the DFT
bases of the TX and RX arrays.  When every row of the resulting matrix holds
at most one significant entry the columns are mutually orthogonal, and the
SVD is available in closed form with ``V = I``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "SPARSITY_RTOL",
    "ChannelError",
    "DuplicateAOAError",
    "NotRowSparseError",
    "PathDescriptor",
    "ArrayGeometry",
    "VirtualChannel",
    "SparseSVD",
    "dft_matrix",
    "response_vector",
    "dirichlet_kernel",
    "build_virtual_channel",
    "hard_threshold",
    "sparse_svd",
    "nonzero_tx_beams",
]

TWO_PI = 2.0 * math.pi

# Entries below SPARSITY_RTOL * max|entry| are treated as zero.
SPARSITY_RTOL = 1e-6


class ChannelError(ValueError):
    """Base class for invalid channel inputs."""


class DuplicateAOAError(ChannelError):
    """Two paths in one channel share an angle of arrival."""


class NotRowSparseError(ChannelError):
    """A row of the virtual channel holds more than one significant entry."""

    def __init__(self, message: str, rows: Sequence[int] = ()):
        super().__init__(message)
        self.rows = list(rows)


@dataclass(frozen=True)
class PathDescriptor:
    """One propagation path.

    ``theta_t`` and ``theta_r`` are normalized angles (``2*pi*d*sin(phi)/lambda``)
    in ``[0, 2*pi)``.  ``tau`` is kept for bookkeeping only; the subband phase
    is assumed to be folded into ``beta`` already.
    """

    beta: complex
    theta_t: float
    theta_r: float
    tau: float = 0.0

    def __post_init__(self):
        for name in ("theta_t", "theta_r"):
            value = getattr(self, name)
            if not (0.0 <= value < TWO_PI):
                raise ChannelError(f"{name}={value!r} outside [0, 2*pi)")
        object.__setattr__(self, "beta", complex(self.beta))

    @classmethod
    def on_grid(cls, beta: complex, tx_bin: int, n_tx: int, rx_bin: int,
                n_rx: int, tau: float = 0.0) -> "PathDescriptor":
        """Path whose AOD/AOA fall exactly on DFT bins ``tx_bin``/``rx_bin``."""
        return cls(beta, TWO_PI * (tx_bin % n_tx) / n_tx,
                   TWO_PI * (rx_bin % n_rx) / n_rx, tau)


@dataclass(frozen=True)
class ArrayGeometry:
    """Uniform linear array."""

    n_elements: int
    spacing_over_lambda: float = 0.5

    def __post_init__(self):
        if int(self.n_elements) != self.n_elements or self.n_elements < 1:
            raise ChannelError(f"n_elements must be a positive integer, got {self.n_elements!r}")
        if not (0.0 < self.spacing_over_lambda <= 0.5):
            raise ChannelError(
                f"spacing_over_lambda must lie in (0, 0.5], got {self.spacing_over_lambda!r}")

    def normalized_angle(self, physical_angle: float) -> float:
        """Map a physical angle (radians from broadside) to ``[0, 2*pi)``."""
        theta = TWO_PI * self.spacing_over_lambda * math.sin(physical_angle)
        return theta % TWO_PI


def _mask_nonzero(entries: np.ndarray, rtol: float = SPARSITY_RTOL) -> np.ndarray:
    mags = np.abs(entries)
    peak = mags.max() if mags.size else 0.0
    if peak == 0.0:
        return np.zeros(entries.shape, dtype=bool)
    return mags > rtol * peak


@dataclass(frozen=True)
class VirtualChannel:
    """Beamspace channel matrix ``H_v`` (rows: RX beams, columns: TX beams)."""

    entries: np.ndarray
    rtol: float = SPARSITY_RTOL
    row_sparse: bool = field(init=False)

    def __post_init__(self):
        a = np.array(self.entries, dtype=complex)
        if a.ndim != 2:
            raise ChannelError("virtual channel must be a 2-D matrix")
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)
        counts = self.nonzero_mask().sum(axis=1)
        object.__setattr__(self, "row_sparse", bool(np.all(counts <= 1)))

    @property
    def n_rows(self) -> int:
        return self.entries.shape[0]

    @property
    def n_cols(self) -> int:
        return self.entries.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape

    def nonzero_mask(self) -> np.ndarray:
        return _mask_nonzero(self.entries, self.rtol)

    @property
    def threshold(self) -> float:
        """Absolute magnitude above which an entry counts as nonzero."""
        mags = np.abs(self.entries)
        return float(self.rtol * mags.max()) if mags.size else 0.0

    def dense_rows(self) -> list[int]:
        """Rows violating row-sparsity."""
        return [int(i) for i in np.flatnonzero(self.nonzero_mask().sum(axis=1) > 1)]

    def require_row_sparse(self, what: str = "operation"):
        if not self.row_sparse:
            rows = self.dense_rows()
            raise NotRowSparseError(
                f"{what} requires a row-sparse channel; rows {rows} have "
                "more than one significant entry", rows)

    def column_norms(self) -> np.ndarray:
        return np.linalg.norm(self.entries, axis=0)

    def to_csv(self, path) -> None:
        """Write the matrix as CSV, each cell as an adjacent ``re,im`` pair."""
        import csv

        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([f"{part}{k}" for k in range(self.n_cols) for part in ("re", "im")])
            for row in self.entries:
                writer.writerow([repr(float(v)) for z in row for v in (z.real, z.imag)])


def dft_matrix(n: int) -> np.ndarray:
    """Unitary DFT matrix whose column ``k`` is ``response_vector(2*pi*k/n, n)``."""
    m = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(m, m) / n) / np.sqrt(n)


def response_vector(theta: float, n: int) -> np.ndarray:
    """ULA response ``[1, e^{-j theta}, ..., e^{-j(n-1) theta}] / sqrt(n)``."""
    return np.exp(-1j * theta * np.arange(n)) / np.sqrt(n)


def dirichlet_kernel(theta, n: int):
    """Return ``(1/n) * sum_{m<n} exp(-j m theta)``.

    Accepts a scalar or an array of angles.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    theta_arr = np.asarray(theta, dtype=float)
    m = np.arange(n)
    values = np.exp(-1j * np.multiply.outer(theta_arr, m)).mean(axis=-1)
    if theta_arr.ndim == 0:
        return complex(values)
    return values


def build_virtual_channel(paths: Iterable[PathDescriptor], tx: ArrayGeometry,
                          rx: ArrayGeometry, rtol: float = SPARSITY_RTOL) -> VirtualChannel:
    """Project a discrete path set onto the TX/RX DFT grids.

    ``H_v = A_R^H H A_T`` evaluated per path with Dirichlet kernels:
    ``H_v[i, k] = sum_n beta_n f_{N_R}(theta_r - 2 pi i / N_R) f_{N_T}(2 pi k / N_T - theta_t)``.
    The RX factor carries ``theta_r - grid`` because it comes from
    ``a_R(grid)^H a_R(theta_r)``; magnitudes are symmetric either way.
    """
    paths = list(paths)
    if not paths:
        raise ChannelError("at least one path is required")
    aoas = sorted(p.theta_r for p in paths)
    for a, b in zip(aoas, aoas[1:]):
        if abs(b - a) < 1e-12:
            raise DuplicateAOAError(f"two paths share the angle of arrival {a!r}")
    if len(aoas) > 1 and abs(aoas[0] + TWO_PI - aoas[-1]) < 1e-12:
        raise DuplicateAOAError(f"two paths share the angle of arrival {aoas[0]!r}")

    n_t, n_r = tx.n_elements, rx.n_elements
    grid_r = TWO_PI * np.arange(n_r) / n_r
    grid_t = TWO_PI * np.arange(n_t) / n_t
    h = np.zeros((n_r, n_t), dtype=complex)
    for p in paths:
        fr = dirichlet_kernel(p.theta_r - grid_r, n_r)
        ft = dirichlet_kernel(grid_t - p.theta_t, n_t)
        h += p.beta * np.outer(fr, ft)
    return VirtualChannel(h, rtol)


def hard_threshold(h: VirtualChannel) -> VirtualChannel:
    """Zero every entry below the sparsity threshold.

    This is lossy; the result may still fail the row-sparse check if
    off-grid leakage is strong.
    """
    kept = np.where(h.nonzero_mask(), h.entries, 0.0)
    return VirtualChannel(kept, h.rtol)


@dataclass(frozen=True)
class SparseSVD:
    """Closed-form SVD ``H_v = U S`` of a row-sparse matrix (``V = I``).

    Only the columns with nonzero norm are kept; ``columns[k]`` is the TX beam
    index of ``singular_values[k]`` and ``left_vectors[:, k]``.
    """

    singular_values: np.ndarray
    columns: np.ndarray
    left_vectors: np.ndarray
    shape: tuple[int, int]

    def reconstruct(self) -> np.ndarray:
        h = np.zeros(self.shape, dtype=complex)
        h[:, self.columns] = self.left_vectors * self.singular_values
        return h


def sparse_svd(h: VirtualChannel) -> SparseSVD:
    """SVD of a row-sparse virtual channel.

    Singular values are the column norms, in column order (not sorted); left
    vectors are the normalized columns.

    Raises
    ------
    NotRowSparseError
        If ``h`` has a row with more than one significant entry.
    """
    h.require_row_sparse("sparse_svd")
    norms = h.column_norms()
    cols = np.flatnonzero(norms > h.threshold) if norms.size else np.array([], dtype=int)
    s = norms[cols]
    u = h.entries[:, cols] / s if cols.size else np.zeros((h.n_rows, 0), dtype=complex)
    return SparseSVD(s, cols, u, h.shape)


def nonzero_tx_beams(h: VirtualChannel) -> list[tuple[int, float]]:
    """TX beams with nonzero gain as ``(column, squared norm)``, strongest first.

    Ties are broken by ascending column index.
    """
    norms = h.column_norms()
    keep = [k for k in range(h.n_cols) if norms[k] > h.threshold]
    beams = [(k, float(norms[k] ** 2)) for k in keep]
    beams.sort(key=lambda kv: (-kv[1], kv[0]))
    return beams
