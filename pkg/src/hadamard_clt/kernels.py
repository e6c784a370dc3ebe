"""Compiled row kernels for densities stored on a shared symmetric lattice.

Rows live on ``x_j = (j - K) * dx`` for ``j < M``.  Values are evaluated
between lattice points with Keys cubic convolution (``a = -1/2``) and clipped
at zero, which keeps the interpolation error well below the trapezoidal
error of the functionals for the grids used here.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

_JIT = dict(cache=True, fastmath=True, error_model="numpy", nogil=True)


@njit(**_JIT)
def _support(row):
    m = row.shape[0]
    a = 0
    while a < m and row[a] <= 0.0:
        a += 1
    b = m - 1
    while b > a and row[b] <= 0.0:
        b -= 1
    return a, b


@njit(**_JIT)
def _cubic(pad, u):
    # pad holds the row with two zeros on the left and three on the right;
    # u is a row coordinate in [-1, m]
    i = int(math.floor(u))
    t = u - i
    t2 = t * t
    t3 = t2 * t
    k = i + 2
    s = ((-0.5 * t3 + t2 - 0.5 * t) * pad[k - 1]
         + (1.5 * t3 - 2.5 * t2 + 1.0) * pad[k]
         + (-1.5 * t3 + 2.0 * t2 + 0.5 * t) * pad[k + 1]
         + (0.5 * t3 - 0.5 * t2) * pad[k + 2])
    return s if s > 0.0 else 0.0


@njit(**_JIT)
def scale_rows(F, c, K, out):
    """``out[r, j] = F_r(x_j / c) / c``: the density of ``c * X`` on the lattice.

    ``out`` may be wider than ``F``; columns beyond the lattice are zeroed so
    the result can be handed to a padded FFT directly.
    """
    R, m = F.shape
    width = out.shape[1]
    pad = np.zeros(m + 5)
    inv = 1.0 / c
    for r in range(R):
        for j in range(width):
            out[r, j] = 0.0
        a, b = _support(F[r])
        if b < a or F[r, a] <= 0.0:
            continue
        pad[2:m + 2] = F[r]
        # u = (j - K) / c + K must lie in (a - 2, b + 2)
        jlo = max(int(math.floor((a - 2 - K) * c + K)), 0)
        jhi = min(int(math.ceil((b + 2 - K) * c + K)), m - 1)
        for j in range(jlo, jhi + 1):
            u = (j - K) * inv + K
            if u > a - 2 and u < b + 2:
                out[r, j] = _cubic(pad, u) * inv


@njit(**_JIT)
def minus_rows(F, ia, ib, p, lam, mu, K, dx, out, mass):
    """Conditional density of ``mu*A - lam*B`` given ``lam*A + mu*B = p``.

    ``A`` has density ``F[ia[r]]`` and ``B`` has density ``F[ib[r]]``.  With
    ``m`` the minus value, ``A = lam*p + mu*m`` and ``B = mu*p - lam*m``, so
    the unnormalized conditional density is the product of the two inputs
    along that line.  ``mass[r]`` receives its integral, which equals the
    plus density at ``p``.
    """
    R = ia.shape[0]
    m = F.shape[1]
    pa = np.zeros(m + 5)
    pb = np.zeros(m + 5)
    lo = -K * dx
    for r in range(R):
        for j in range(m):
            out[r, j] = 0.0
        ra = F[ia[r]]
        rb = F[ib[r]]
        a1, a2 = _support(ra)
        b1, b2 = _support(rb)
        pa[2:m + 2] = ra
        pb[2:m + 2] = rb
        # row coordinates: uA = a0 + mu*j, uB = b0 - lam*j
        a0 = (lam * p[r] + mu * lo - lo) / dx
        b0 = (mu * p[r] - lam * lo - lo) / dx
        ua_lo = max(a1 - 2.0, -1.0)
        ua_hi = min(a2 + 2.0, m * 1.0)
        ub_lo = max(b1 - 2.0, -1.0)
        ub_hi = min(b2 + 2.0, m * 1.0)
        jlo = max((ua_lo - a0) / mu, (b0 - ub_hi) / lam, 0.0)
        jhi = min((ua_hi - a0) / mu, (b0 - ub_lo) / lam, m - 1.0)
        tot = 0.0
        if jhi >= jlo:
            for j in range(int(math.ceil(jlo)), int(math.floor(jhi)) + 1):
                v = _cubic(pa, a0 + mu * j) * _cubic(pb, b0 - lam * j)
                out[r, j] = v
                tot += v
        mass[r] = tot * dx
        if tot > 0.0:
            inv = 1.0 / (tot * dx)
            for j in range(m):
                out[r, j] *= inv


@njit(**_JIT)
def clean_rows(F, rel, dx):
    """Clip negatives, zero values below ``rel * rowmax`` and renormalize."""
    R, m = F.shape
    for r in range(R):
        top = 0.0
        for j in range(m):
            if F[r, j] > top:
                top = F[r, j]
        cut = rel * top
        tot = 0.0
        for j in range(m):
            v = F[r, j]
            if v < cut or v < 0.0:
                v = 0.0
            F[r, j] = v
            tot += v
        if tot > 0.0:
            inv = 1.0 / (tot * dx)
            for j in range(m):
                F[r, j] *= inv


# columns of the table returned by row_stats
STAT_H, STAT_MEAN, STAT_V, STAT_J, STAT_D = range(5)
N_STATS = 5
HALF_LOG_2PI_E = 0.5 * math.log(2.0 * math.pi * math.e)


@njit(**_JIT)
def row_stats(F, K, dx, out):
    """Entropy, mean, variance, Fisher information and Gaussianity gap per row.

    Rows vanish at both lattice ends, so the trapezoidal rule reduces to a
    plain sum over the support.  Fisher information uses central differences
    of ``sqrt(f)``.
    """
    R, m = F.shape
    for r in range(R):
        a, b = _support(F[r])
        lo = max(a - 1, 0)
        hi = min(b + 1, m - 1)
        s0 = 0.0
        s1 = 0.0
        ent = 0.0
        for j in range(a, b + 1):
            v = F[r, j]
            s0 += v
            s1 += v * (j - K)
            if v > 0.0:
                ent -= v * math.log(max(v, 1e-300))
        mu_idx = s1 / s0
        s2 = 0.0
        for j in range(a, b + 1):
            d = j - K - mu_idx
            s2 += F[r, j] * d * d
        var = s2 * dx * dx / s0
        # rows are zero outside [a, b], so the one-sided end differences
        # of np.gradient only matter when the support touches the lattice edge
        fis = 0.0
        prev = math.sqrt(F[r, lo])
        cur = math.sqrt(F[r, lo + 1])
        if lo == 0:
            fis += (cur - prev) * (cur - prev)
        for j in range(lo + 1, hi):
            nxt = math.sqrt(F[r, j + 1])
            g = 0.5 * (nxt - prev)
            fis += g * g
            prev = cur
            cur = nxt
        if hi == m - 1:
            fis += (cur - prev) * (cur - prev)
        h = ent * dx
        out[r, 0] = h
        out[r, 1] = mu_idx * dx
        out[r, 2] = var
        out[r, 3] = 4.0 * fis / dx
        out[r, 4] = HALF_LOG_2PI_E + 0.5 * math.log(var) - h if var > 0.0 else np.nan
