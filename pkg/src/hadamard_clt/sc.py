"""Successive-cancellation recursion on free-standing grid densities.

This is the direct implementation: every node carries its own grid, chosen
from the supports of its children.  It is exact enough to serve as the
reference for the batched lattice engine in :mod:`hadamard_clt.lattice`, and
small enough to check against brute-force joint-density oracles.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from .density import MAX_POINTS, MIN_POINTS, GridDensity, scaled_convolve, trim
from .errors import DegenerateCondition, InvalidInput, InvalidParameter
from .transform import PathSpec, TransformPlan, level_values

DEGENERATE_MASS = 1e-12


@dataclass(frozen=True)
class ScNode:
    depth: int
    block: int
    conditional_density: GridDensity
    realized_value: float


def branch_plus(f1: GridDensity, f2: GridDensity, lam: float) -> GridDensity:
    """Density of ``lam*X1 + sqrt(1-lam^2)*X2``."""
    return scaled_convolve(f1, f2, lam)


def branch_minus_given(f1: GridDensity, f2: GridDensity, lam: float, p: float) -> GridDensity:
    """Density of ``mu*X1 - lam*X2`` given ``lam*X1 + mu*X2 = p``.

    Writing ``m`` for the minus value, ``X1 = lam*p + mu*m`` and
    ``X2 = mu*p - lam*m``; the conditional density is proportional to
    ``f1(lam*p + mu*m) * f2(mu*p - lam*m)``.  Raises
    :class:`DegenerateCondition` when the normalizing mass (the plus density
    at ``p``) is below ``1e-12``.
    """
    if not 0.0 < lam < 1.0:
        raise InvalidParameter(f"lambda must lie in (0, 1), got {lam}")
    mu = math.sqrt(1.0 - lam * lam)
    lo = max((f1.lo - lam * p) / mu, (mu * p - f2.hi) / lam)
    hi = min((f1.hi - lam * p) / mu, (mu * p - f2.lo) / lam)
    if not hi > lo:
        raise DegenerateCondition(f"plus value {p:.6g} lies outside the joint support", 0.0)
    dx = min(f1.dx, f2.dx)
    points = max(int(math.ceil((hi - lo) / dx)) + 1, MIN_POINTS)
    points = min(points, MAX_POINTS)
    dx = (hi - lo) / (points - 1)
    m = lo + dx * np.arange(points)
    g = f1.pdf(lam * p + mu * m) * f2.pdf(mu * p - lam * m)
    mass = dx * (math.fsum(g) - 0.5 * (g[0] + g[-1]))
    if not mass >= DEGENERATE_MASS:
        raise DegenerateCondition(f"conditional mass {mass:.3g} at plus value {p:.6g}", mass)
    new_lo, g = trim(lo, dx, g)
    return GridDensity.from_values(new_lo, dx, g)


def _dump(node: ScNode, dump_dir: str, path: PathSpec):
    name = f"node_path{str(path.prefix(node.depth)) or 'root'}_depth{node.depth}_block{node.block}.csv"
    with open(os.path.join(dump_dir, name), "w") as fh:
        fh.write(node.conditional_density.to_csv())


def sc_trace(plan: TransformPlan, path: PathSpec, leaf_density: GridDensity, leaf_samples,
             dump_dir: str | None = None) -> list[ScNode]:
    """All nodes visited by the recursion, children before parents; the last is the root."""
    samples = np.asarray(leaf_samples, dtype=float)
    if samples.shape != (plan.N,):
        raise InvalidInput(f"expected {plan.N} leaf samples, got shape {samples.shape}")
    if path.depth != plan.n:
        raise InvalidInput(f"path depth {path.depth} does not match transform depth {plan.n}")
    if dump_dir is not None:
        os.makedirs(dump_dir, exist_ok=True)
    values = level_values(plan, samples)
    col = [int("".join(map(str, path.bits[:d])) or "0", 2) for d in range(plan.n + 1)]
    lam = plan.lam
    trace: list[ScNode] = []
    # nodes whose prefix has no minus step are the same in every block
    shared: dict[int, GridDensity] = {0: leaf_density}

    def node(d: int, b: int) -> GridDensity:
        if d in shared and 1 not in path.bits[:d]:
            f = shared[d]
        else:
            fa = node(d - 1, 2 * b)
            fb = node(d - 1, 2 * b + 1)
            if path.bits[d - 1] == 0:
                f = branch_plus(fa, fb, lam)
            else:
                va = values[d - 1][2 * b, col[d - 1]]
                vb = values[d - 1][2 * b + 1, col[d - 1]]
                f = branch_minus_given(fa, fb, lam, lam * va + plan.mu * vb)
            if 1 not in path.bits[:d]:
                shared[d] = f
        n = ScNode(d, b, f, float(values[d][b, col[d]]))
        trace.append(n)
        if dump_dir is not None:
            _dump(n, dump_dir, path)
        return f

    node(plan.n, 0)
    return trace


def sc_conditional_density(plan: TransformPlan, path: PathSpec, leaf_density: GridDensity,
                           leaf_samples, dump_dir: str | None = None) -> GridDensity:
    """Conditional density of the path's output given the realized earlier outputs."""
    return sc_trace(plan, path, leaf_density, leaf_samples, dump_dir)[-1].conditional_density


__all__ = ["ScNode", "branch_plus", "branch_minus_given", "sc_trace", "sc_conditional_density"]
