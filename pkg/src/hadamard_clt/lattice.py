"""Batched successive-cancellation engine on a shared lattice.

All conditional densities of a run live on one symmetric lattice wide enough
for the source, so a level of the recursion becomes a handful of array
operations over many rows at once.  Sources are centered before use: every
functional tracked here is shift invariant, and the output means are
recovered exactly from the source mean where needed.

Densities are stored as a table of distinct rows plus an integer map from
nodes to rows.  Nodes whose path prefix contains no minus step are not
conditioned on anything, so they share one row across all trials and blocks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import fft

from . import kernels
from .density import GridDensity
from .errors import InvalidParameter

CLEAN_REL = 1e-14
DEGENERATE_MASS = 1e-12
FFT_BATCH = 512


@dataclass(frozen=True)
class Lattice:
    """Grid ``x_j = (j - K) * dx`` with ``K = points // 2``."""

    points: int
    dx: float

    def __post_init__(self):
        if self.points < 16:
            raise InvalidParameter("lattice needs at least 16 points")
        if not self.dx > 0:
            raise InvalidParameter("lattice spacing must be positive")

    @classmethod
    def for_source(cls, source, points: int, width_sigmas: float = 7.0) -> "Lattice":
        lo, hi = source.support(8.0)
        c = source.mean
        half = max(width_sigmas * math.sqrt(source.variance), c - lo, hi - c)
        return cls(points, half / (points // 2))

    @property
    def K(self) -> int:
        return self.points // 2

    @property
    def lo(self) -> float:
        return -self.K * self.dx

    @property
    def x(self) -> np.ndarray:
        return (np.arange(self.points) - self.K) * self.dx

    def source_row(self, source) -> np.ndarray:
        """Centered source density sampled on the lattice, shape ``(1, M)``."""
        row = np.asarray(source.pdf(self.x + source.mean), dtype=float)[None, :].copy()
        kernels.clean_rows(row, CLEAN_REL, self.dx)
        return row

    def to_grid(self, row: np.ndarray, shift: float = 0.0) -> GridDensity:
        return GridDensity.from_values(self.lo + shift, self.dx, row)

    def cdf(self, row: np.ndarray) -> np.ndarray:
        c = np.concatenate(([0.0], np.cumsum(0.5 * (row[1:] + row[:-1]))))
        return c / c[-1]


class RowOps:
    """Plus and minus steps for one lattice and one kernel parameter."""

    def __init__(self, lattice: Lattice, lam: float):
        if not 0.0 < lam < 1.0:
            raise InvalidParameter(f"lambda must lie in (0, 1), got {lam}")
        self.lattice = lattice
        self.lam = float(lam)
        self.mu = math.sqrt(1.0 - lam * lam)
        # Rows vanish outside the lattice, so the scaled inputs live within
        # lam*K and mu*K of the centre.  A circular convolution of this length
        # leaves the lattice window free of wrap-around.
        M, K = lattice.points, lattice.K
        need = M + int(math.ceil((self.lam + self.mu - 1.0) * K)) + 8
        self.nfft = fft.next_fast_len(need, real=True)
        self._window = (K + np.arange(M)) % self.nfft

    def _spectra(self, rows: np.ndarray, c: float) -> np.ndarray:
        scaled = np.empty((rows.shape[0], self.nfft))
        kernels.scale_rows(rows, c, self.lattice.K, scaled)
        return fft.rfft(scaled, axis=1)

    def plus(self, F: np.ndarray, ia: np.ndarray, ib: np.ndarray) -> np.ndarray:
        """Density of ``lam*A + mu*B`` for each pair of rows ``(F[ia], F[ib])``."""
        lat = self.lattice
        out = np.empty((ia.size, lat.points))
        if ia.size == 0:
            return out
        used_a, inv_a = np.unique(ia, return_inverse=True)
        used_b, inv_b = np.unique(ib, return_inverse=True)
        sa = self._spectra(F[used_a], self.lam)
        sb = sa if (self.lam == self.mu and np.array_equal(used_a, used_b)) \
            else self._spectra(F[used_b], self.mu)
        for s in range(0, ia.size, FFT_BATCH):
            e = min(s + FFT_BATCH, ia.size)
            full = fft.irfft(sa[inv_a[s:e]] * sb[inv_b[s:e]], n=self.nfft, axis=1)
            np.multiply(full[:, self._window], lat.dx, out=out[s:e])
        kernels.clean_rows(out, CLEAN_REL, lat.dx)
        return out

    def minus(self, F, ia, ib, p) -> tuple[np.ndarray, np.ndarray]:
        """Conditional minus densities and the conditioning masses."""
        lat = self.lattice
        out = np.empty((ia.size, lat.points))
        mass = np.empty(ia.size)
        kernels.minus_rows(F, ia.astype(np.int64), ib.astype(np.int64),
                           np.ascontiguousarray(p, dtype=float),
                           self.lam, self.mu, lat.K, lat.dx, out, mass)
        kernels.clean_rows(out, CLEAN_REL, lat.dx)
        return out, mass

    def stats(self, F: np.ndarray) -> np.ndarray:
        out = np.empty((F.shape[0], kernels.N_STATS))
        kernels.row_stats(F, self.lattice.K, self.lattice.dx, out)
        return out


def _combine(ops: RowOps, F, rowmap, vals, bit_of_column):
    """One level of the recursion for every tracked column.

    ``rowmap`` and ``vals`` have shape ``(T, P, C)``: trial, block, column.
    Blocks ``2b`` and ``2b+1`` are merged.  ``bit_of_column`` is ``None`` to
    produce both children of every column (output shape ``(T, P/2, 2C)``,
    plus in even columns) or an integer bit to follow a single path.
    Returns the new row table, row map, values and the per-trial flag of
    degenerate conditioning.
    """
    ra, rb = rowmap[:, 0::2, :], rowmap[:, 1::2, :]
    va, vb = vals[:, 0::2, :], vals[:, 1::2, :]
    lam, mu = ops.lam, ops.mu
    T, H, C = ra.shape
    bad = np.zeros(T, dtype=bool)
    want_plus = bit_of_column in (None, 0)
    want_minus = bit_of_column in (None, 1)
    tables, maps, new_vals = [], [], []
    offset = 0
    if want_plus:
        keys = ra.ravel() * F.shape[0] + rb.ravel()
        uniq, inv = np.unique(keys, return_inverse=True)
        plus_rows = ops.plus(F, uniq // F.shape[0], uniq % F.shape[0])
        tables.append(plus_rows)
        maps.append(inv.reshape(T, H, C))
        new_vals.append(lam * va + mu * vb)
        offset = plus_rows.shape[0]
    if want_minus:
        p = lam * va + mu * vb
        minus_rows, mass = ops.minus(F, ra.ravel(), rb.ravel(), p.ravel())
        bad |= (mass.reshape(T, H * C) < DEGENERATE_MASS).any(axis=1)
        tables.append(minus_rows)
        maps.append(offset + np.arange(minus_rows.shape[0]).reshape(T, H, C))
        new_vals.append(mu * va - lam * vb)
    if len(tables) == 1:
        return tables[0], maps[0], new_vals[0], bad
    rowmap_new = np.empty((T, H, 2 * C), dtype=np.int64)
    rowmap_new[..., 0::2] = maps[0]
    rowmap_new[..., 1::2] = maps[1]
    vals_new = np.empty((T, H, 2 * C))
    vals_new[..., 0::2] = new_vals[0]
    vals_new[..., 1::2] = new_vals[1]
    return np.concatenate(tables), rowmap_new, vals_new, bad


@dataclass
class LevelArrays:
    """Per-node functionals at one level: ``stats[t, b, c, k]`` for stat ``k``."""

    depth: int
    stats: np.ndarray
    values: np.ndarray


def run_path(ops: RowOps, source_row: np.ndarray, leaves: np.ndarray, bits,
             keep_rows: bool = False):
    """Follow one path through the recursion for a batch of trials.

    ``leaves`` has shape ``(T, 2**n)`` with ``n >= len(bits)``; the first
    ``len(bits)`` levels are evaluated.  Returns a list of
    :class:`LevelArrays` for depths ``0..len(bits)`` (each with one column),
    the boolean vector of trials that hit a degenerate condition, and
    optionally the final row table and row map.
    """
    T, N = leaves.shape
    F = source_row
    rowmap = np.zeros((T, N, 1), dtype=np.int64)
    vals = leaves[:, :, None].astype(float)
    levels = [LevelArrays(0, ops.stats(F)[rowmap], vals)]
    bad = np.zeros(T, dtype=bool)
    for d, bit in enumerate(bits):
        F, rowmap, vals, b = _combine(ops, F, rowmap, vals, int(bit))
        bad |= b
        levels.append(LevelArrays(d + 1, ops.stats(F)[rowmap], vals))
    if keep_rows:
        return levels, bad, F, rowmap
    return levels, bad


def run_sweep(ops: RowOps, source_row: np.ndarray, leaves: np.ndarray, depth: int,
              keep_rows: bool = False):
    """Every path at every depth up to ``depth`` for a batch of trials.

    Level ``d`` of the result has ``2**d`` columns ordered by path index.
    """
    T, N = leaves.shape
    F = source_row
    rowmap = np.zeros((T, N, 1), dtype=np.int64)
    vals = leaves[:, :, None].astype(float)
    levels = [LevelArrays(0, ops.stats(F)[rowmap], vals)]
    bad = np.zeros(T, dtype=bool)
    for d in range(depth):
        F, rowmap, vals, b = _combine(ops, F, rowmap, vals, None)
        bad |= b
        levels.append(LevelArrays(d + 1, ops.stats(F)[rowmap], vals))
    if keep_rows:
        return levels, bad, F, rowmap
    return levels, bad
