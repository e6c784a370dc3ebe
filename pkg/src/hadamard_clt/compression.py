"""Hadamard compression: keep high-entropy outputs, estimate the rest.

Positions are ranked by their estimated conditional entropy ``h_n`` and the
top fraction is kept.  Dropped outputs are replaced by an estimate and the
source vector is recovered with the inverse transform.  Two estimates are
available:

``"conditional"`` (default)
    the mean of the output's conditional density given the true values of
    all earlier outputs, as produced by the successive-cancellation sweep.
    Its expected squared error at position ``k`` is exactly the conditional
    variance ``V_n`` of that position, so the error budget of a selection is
    the sum of the dropped ``V_n``.
``"marginal"``
    the unconditional mean of the output.  Because the transform is
    orthogonal and the source i.i.d., every output then has error
    ``V(xi)`` and the choice of positions does not matter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import spearmanr

from . import rng
from .density import entropy, gaussianity_gap, variance
from .errors import InvalidInput, InvalidParameter
from .harness import (ExperimentConfig, context_for, estimate_all_paths, mean_se, run_trials)
from .kernels import STAT_H, STAT_MEAN, STAT_V
from .lattice import run_sweep
from .report import CheckResult, at_least, at_most
from .sources import SPLIT_SHIFT, source_density
from .transform import PathSpec, TransformPlan, apply_transform, inverse_transform, path_index

RULES = ("conditional", "marginal")


def keep_count(keep_fraction: float, N: int) -> int:
    """``round(keep_fraction * N)`` with halves rounded up."""
    if not 0.0 <= keep_fraction <= 1.0:
        raise InvalidParameter("keep_fraction must lie in [0, 1]")
    return min(N, int(math.floor(keep_fraction * N + 0.5)))


def _ordered(keys: dict, tie_tolerance: float) -> list[int]:
    """Indices by decreasing key; keys within ``tie_tolerance`` of their
    neighbour in that order form a tie group, sorted by index."""
    order = sorted(keys, key=lambda i: (-keys[i], i))
    groups, current = [], [order[0]]
    for prev, i in zip(order, order[1:]):
        if keys[prev] - keys[i] <= tie_tolerance:
            current.append(i)
        else:
            groups.append(current)
            current = [i]
    groups.append(current)
    return [i for g in groups for i in sorted(g)]


def rank_positions(stats: dict, keep_fraction: float, tie_tolerance: float = 1e-6,
                   key: str = "h_mean") -> tuple[int, ...]:
    """1-based output indices of the top ``keep_fraction`` positions by ``key``.

    ``stats`` maps every path of one depth to its :class:`LevelStats`.
    Estimates within ``tie_tolerance`` of each other are treated as equal and
    broken by the smaller index.
    """
    if not stats:
        raise InvalidInput("no statistics given")
    depths = {p.depth for p in stats}
    if len(depths) != 1:
        raise InvalidInput("statistics mix several depths")
    n = depths.pop()
    N = 2 ** n
    by_index = {path_index(p): getattr(s, key) for p, s in stats.items()}
    if sorted(by_index) != list(range(1, N + 1)):
        raise InvalidInput(f"statistics cover {len(by_index)} of {N} positions")
    order = _ordered(by_index, tie_tolerance)
    return tuple(sorted(order[:keep_count(keep_fraction, N)]))


def marginal_means(plan: TransformPlan, source_mean: float) -> np.ndarray:
    return source_mean * apply_transform(plan, np.ones(plan.N))


def reconstruct(plan: TransformPlan, kept_values, estimates) -> np.ndarray:
    """Source estimate from a partial output vector.

    ``kept_values`` has length ``N`` with ``nan`` at dropped positions (0-based
    along the last axis); those entries are filled from ``estimates``.
    """
    kept = np.asarray(kept_values, dtype=float)
    est = np.asarray(estimates, dtype=float)
    if kept.shape[-1] != plan.N or est.shape[-1] != plan.N:
        raise InvalidInput(f"expected vectors of length {plan.N}")
    return inverse_transform(plan, np.where(np.isnan(kept), est, kept))


@dataclass
class CompressionReport:
    n: int
    keep_fraction: float
    rule: str
    kept_positions: tuple
    oracle_positions: tuple
    h_est: np.ndarray
    V_est: np.ndarray
    mse_highentropy: float
    mse_highentropy_se: float
    mse_random: float
    mse_random_se: float
    mse_oracle_variance: float
    mse_oracle_se: float
    gain_se: float
    oracle_gap_se: float
    parseval_error: float
    trials: int

    @property
    def gain(self) -> float:
        """``mse_random - mse_highentropy``; ``gain_se`` is its paired standard error."""
        return self.mse_random - self.mse_highentropy

    def to_csv(self) -> str:
        kept = set(self.kept_positions)
        lines = ["index,path,h,V,kept"]
        for k in range(1, 2 ** self.n + 1):
            p = PathSpec.from_index(self.n, k)
            lines.append(f"{k},{p},{float(self.h_est[k - 1])!r},{float(self.V_est[k - 1])!r},"
                         f"{int(k in kept)}")
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {
            "n": self.n, "keep_fraction": self.keep_fraction, "rule": self.rule,
            "kept_positions": list(self.kept_positions),
            "oracle_positions": list(self.oracle_positions),
            "h_est": self.h_est.tolist(), "V_est": self.V_est.tolist(),
            "mse_highentropy": self.mse_highentropy,
            "mse_highentropy_se": self.mse_highentropy_se,
            "mse_random": self.mse_random, "mse_random_se": self.mse_random_se,
            "mse_oracle_variance": self.mse_oracle_variance,
            "mse_oracle_se": self.mse_oracle_se,
            "gain_se": self.gain_se, "oracle_gap_se": self.oracle_gap_se,
            "parseval_error": self.parseval_error, "trials": self.trials,
        }


def _mask(positions, N: int) -> np.ndarray:
    m = np.zeros(N, dtype=bool)
    m[np.asarray(positions, dtype=int) - 1] = True
    return m


def compression_experiment(cfg: ExperimentConfig, depth: int = 8, keep_fraction: float = 0.5,
                           rule: str = "conditional", ranking: dict | None = None,
                           workers: int | None = None) -> CompressionReport:
    """Compare entropy-ranked, random and variance-ranked selections.

    ``ranking`` defaults to the level-``depth`` statistics of an all-path
    sweep.  Evaluation trials use their own random stream, so the selection
    is independent of the data it is scored on.
    """
    if rule not in RULES:
        raise InvalidParameter(f"rule must be one of {RULES}")
    if ranking is None:
        ranking = estimate_all_paths(cfg, depth, workers).level(depth)
    plan = TransformPlan(cfg.lam, depth)
    N = plan.N
    kept = rank_positions(ranking, keep_fraction)
    oracle = rank_positions(ranking, keep_fraction, key="V_mean")
    K = len(kept)
    h_est = np.array([ranking[PathSpec.from_index(depth, k)].h_mean for k in range(1, N + 1)])
    V_est = np.array([ranking[PathSpec.from_index(depth, k)].V_mean for k in range(1, N + 1)])
    mask_high, mask_oracle = _mask(kept, N), _mask(oracle, N)
    ctx = context_for(cfg)

    def work(leaves):
        # centred coordinates: the source mean shifts outputs and estimates alike
        if rule == "conditional":
            levels, bad = run_sweep(ctx.ops, ctx.source_row, leaves, depth)
            est = levels[-1].stats[:, 0, :, STAT_MEAN]
        else:
            bad = np.zeros(leaves.shape[0], dtype=bool)
            est = np.zeros_like(leaves)
        return [leaves, est], bad

    (leaves, est), _ = run_trials(cfg, rng.STREAM_RECONSTRUCT, depth, work, workers)
    eta = apply_transform(plan, leaves)
    T = leaves.shape[0]
    mse = {"high": np.empty(T), "random": np.empty(T), "oracle": np.empty(T)}
    parseval = 0.0
    for t in range(T):
        gen = rng.trial_generator(cfg.seed, rng.STREAM_SELECTION, t)
        random_mask = _mask(np.sort(gen.permutation(N)[:K]) + 1, N)
        for name, m in (("high", mask_high), ("random", random_mask), ("oracle", mask_oracle)):
            partial = np.where(m, eta[t], np.nan)
            xi_hat = reconstruct(plan, partial, est[t])
            err_src = float(np.dot(xi_hat - leaves[t], xi_hat - leaves[t]))
            err_out = float(np.dot(np.where(m, 0.0, est[t] - eta[t]),
                                   np.where(m, 0.0, est[t] - eta[t])))
            parseval = max(parseval, abs(err_src - err_out) / max(1.0, err_out))
            mse[name][t] = err_src / N
    high, high_se = mean_se(mse["high"])
    rand, rand_se = mean_se(mse["random"])
    orc, orc_se = mean_se(mse["oracle"])
    _, gain_se = mean_se(mse["random"] - mse["high"])
    _, gap_se = mean_se(mse["high"] - mse["oracle"])
    return CompressionReport(depth, keep_fraction, rule, kept, oracle, h_est, V_est,
                             high, high_se, rand, rand_se, orc, orc_se, gain_se, gap_se,
                             parseval, T)


def split_shift_scenario(cfg: ExperimentConfig | None = None, depth: int = 8,
                        workers: int | None = None) -> list[CheckResult]:
    """Low entropy with large variance, and the ranking after polarization.

    The split-and-shift source has entropy more than one nat below the
    Gaussian with its variance even though the variance exceeds 10, so
    entropy alone says nothing about variance for the raw source.  After
    ``depth`` levels of polarization the conditional entropy and conditional
    variance of the outputs are ranked alike (Spearman correlation > 0.9).
    """
    cfg = cfg or ExperimentConfig(source=SPLIT_SHIFT, max_depth=depth)
    f = source_density(cfg.source, 2048)
    h, V = entropy(f), variance(f)
    results = [
        at_least("split_shift.variance", V, 10.0, 0.0, "raw source variance is large"),
        at_least("split_shift.entropy_deficit", gaussianity_gap(f), 1.0, 0.0,
                 f"h={h:.4f} below the matched Gaussian by more than one nat"),
        at_most("split_shift.normalization", abs(f.mass() - 1.0), 1e-6, 0.0,
                "blurred density is a valid grid density"),
    ]
    sweep = estimate_all_paths(cfg, depth, workers)
    rho = spearmanr(sweep.means(depth, STAT_H), sweep.means(depth, STAT_V)).statistic
    results.append(at_least("split_shift.rank_correlation", float(rho), 0.9, 0.0,
                            f"Spearman(h_n, V_n) over {2 ** depth} paths at depth {depth}"))
    return results
