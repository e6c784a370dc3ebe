"""Monte Carlo estimation of the path sequences h_n, V_n, J_n and D_n.

Trials are processed in fixed-size chunks whose composition depends only on
the configuration, so results are bit-for-bit identical for any number of
workers.  A trial in which some conditioning event has vanishing density is
discarded and redrawn from the next attempt of its random stream.

One depth-``n`` run yields every shallower level as well: level ``m`` of a
run consists of ``2**(n-m)`` independent depth-``m`` instances per trial.
Per-trial values average over those instances, so standard errors are taken
across trials.
"""

from __future__ import annotations

import dataclasses
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import rng
from .errors import BudgetExceeded, ConfigError, InvalidParameter
from .kernels import STAT_D, STAT_H, STAT_J, STAT_MEAN, STAT_V
from .lattice import Lattice, RowOps, run_path, run_sweep
from .sources import BIMODAL, source_from_dict
from .transform import DEFAULT_LAMBDA, PathSpec, all_paths

DEFAULT_SEED = 0x5EED_C1A7_2024_0001
MAX_SWEEP_DEPTH = 10
MAX_PATH_DEPTH = 14
MAX_ATTEMPTS = 16
GRID_FLOOR_NATS = 2e-3


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce a run.

    ``tolerances`` holds ``(name, value)`` overrides for the named thresholds
    used by the checks; ``budget_cells`` bounds ``trials * 2**depth *
    grid_points`` (times ``depth`` for full sweeps).
    """

    source: object = BIMODAL
    lam: float = DEFAULT_LAMBDA
    max_depth: int = 10
    grid_points: int = 1024
    trials: int = 256
    seed: int = DEFAULT_SEED
    width_sigmas: float = 7.0
    tolerances: tuple = ()
    budget_cells: float = 5e9
    chunk_trials: int = 8

    def __post_init__(self):
        if not 0.0 < self.lam < 1.0:
            raise InvalidParameter(f"lam must lie in (0, 1), got {self.lam}")
        if self.trials < 1:
            raise InvalidParameter("trials must be at least 1")
        if not 0 <= self.max_depth <= MAX_PATH_DEPTH:
            raise InvalidParameter(f"max_depth must lie in [0, {MAX_PATH_DEPTH}]")
        if self.grid_points < 16:
            raise InvalidParameter("grid_points must be at least 16")
        if self.chunk_trials < 1:
            raise InvalidParameter("chunk_trials must be at least 1")
        if not 0 <= self.seed < 1 << 64:
            raise InvalidParameter("seed must be a 64-bit unsigned integer")
        tol = self.tolerances
        if isinstance(tol, dict):
            tol = tol.items()
        object.__setattr__(self, "tolerances",
                           tuple(sorted((str(k), float(v)) for k, v in tol)))

    def tolerance(self, name: str, default: float) -> float:
        return dict(self.tolerances).get(name, default)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "source": self.source.to_dict(),
            "lam": self.lam,
            "max_depth": self.max_depth,
            "grid_points": self.grid_points,
            "trials": self.trials,
            "seed": self.seed,
            "width_sigmas": self.width_sigmas,
            "tolerances": dict(self.tolerances),
            "budget_cells": self.budget_cells,
            "chunk_trials": self.chunk_trials,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "ExperimentConfig":
        if not isinstance(obj, dict):
            raise ConfigError("configuration must be a JSON object")
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(obj) - names)
        if unknown:
            raise ConfigError(f"unknown configuration field {unknown[0]!r}")
        kwargs = {}
        for key, value in obj.items():
            try:
                if key == "source":
                    kwargs[key] = source_from_dict(value)
                elif key in ("max_depth", "grid_points", "trials", "seed", "chunk_trials"):
                    if isinstance(value, bool) or int(value) != value:
                        raise ValueError("expected an integer")
                    kwargs[key] = int(value)
                elif key == "tolerances":
                    if not isinstance(value, dict):
                        raise ValueError("expected an object of name: value pairs")
                    kwargs[key] = tuple((k, float(v)) for k, v in value.items())
                else:
                    kwargs[key] = float(value)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"field {key!r}: {exc}") from None
        try:
            return cls(**kwargs)
        except InvalidParameter as exc:
            raise ConfigError(str(exc)) from None


@dataclass(frozen=True)
class LevelStats:
    depth: int
    path: PathSpec
    h_mean: float
    h_se: float
    V_mean: float
    V_se: float
    J_mean: float
    J_se: float
    D_mean: float
    D_se: float
    trials: int
    discarded: int

    CSV_HEADER = "depth,path,h,h_se,V,V_se,J,J_se,D,D_se,trials,discarded"

    def csv_row(self) -> str:
        nums = [self.h_mean, self.h_se, self.V_mean, self.V_se, self.J_mean,
                self.J_se, self.D_mean, self.D_se]
        return ",".join([str(self.depth), str(self.path) or "-"]
                        + [repr(float(v)) for v in nums]
                        + [str(self.trials), str(self.discarded)])


def mean_se(values) -> tuple[float, float]:
    v = np.asarray(values, dtype=float)
    m = math.fsum(v) / v.size
    if v.size < 2:
        return m, 0.0
    var = math.fsum((v - m) ** 2) / (v.size - 1)
    return m, math.sqrt(var / v.size)


def level_stats(depth: int, path: PathSpec, per_trial: np.ndarray, discarded: int) -> LevelStats:
    """Aggregate a ``(trials, 5)`` array of per-trial functionals."""
    h = mean_se(per_trial[:, STAT_H])
    V = mean_se(per_trial[:, STAT_V])
    J = mean_se(per_trial[:, STAT_J])
    D = mean_se(per_trial[:, STAT_D])
    return LevelStats(depth, path, h[0], h[1], V[0], V[1], J[0], J[1], D[0], D[1],
                      per_trial.shape[0], discarded)


def check_budget(cfg: ExperimentConfig, depth: int, sweep: bool) -> None:
    def cost(d):
        return cfg.trials * (2 ** d) * cfg.grid_points * (max(d, 1) if sweep else 1)

    limit = MAX_SWEEP_DEPTH if sweep else MAX_PATH_DEPTH
    if depth > limit or cost(depth) > cfg.budget_cells:
        feasible = 0
        while feasible + 1 <= limit and cost(feasible + 1) <= cfg.budget_cells:
            feasible += 1
        raise BudgetExceeded(
            f"depth {depth} exceeds the budget ({cost(depth):.3g} cells > "
            f"{cfg.budget_cells:.3g}, depth limit {limit}); feasible depth is {feasible}",
            feasible,
        )


@dataclass
class EngineContext:
    lattice: Lattice
    ops: RowOps
    source_row: np.ndarray
    cdf: np.ndarray


@lru_cache(maxsize=16)
def engine_context(source, grid_points: int, width_sigmas: float, lam: float) -> EngineContext:
    lattice = Lattice.for_source(source, grid_points, width_sigmas)
    row = lattice.source_row(source)
    return EngineContext(lattice, RowOps(lattice, lam), row, lattice.cdf(row[0]))


def context_for(cfg: ExperimentConfig) -> EngineContext:
    return engine_context(cfg.source, cfg.grid_points, cfg.width_sigmas, cfg.lam)


def default_workers() -> int:
    return os.cpu_count() or 1


def chunk_ids(total: int, size: int) -> list[list[int]]:
    return [list(range(s, min(s + size, total))) for s in range(0, total, size)]


def map_ordered(fn, items, workers: int | None = None) -> list:
    """``[fn(i) for i in items]``, optionally on a thread pool; order is kept."""
    workers = workers or default_workers()
    if workers <= 1 or len(items) <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def run_trials(cfg: ExperimentConfig, stream: int, depth: int, work, workers: int | None = None,
               trials: int | None = None):
    """Run ``work(leaves) -> (outputs, bad)`` over all trials in fixed chunks.

    ``outputs`` is a list of arrays whose first axis is the trial.  Trials
    flagged in ``bad`` are redrawn with the next attempt number.  Returns the
    concatenated outputs in trial order and the number of discarded draws.
    """
    ctx = context_for(cfg)
    N = 2 ** depth

    def one_chunk(ids):
        attempts = [0] * len(ids)
        pending = list(range(len(ids)))
        pieces: list = [None] * len(ids)
        discarded = 0
        while pending:
            u = rng.uniform_block(cfg.seed, stream, [ids[i] for i in pending], N,
                                  [attempts[i] for i in pending])
            leaves = np.interp(u, ctx.cdf, ctx.lattice.x)
            outputs, bad = work(leaves)
            retry = []
            for k, i in enumerate(pending):
                if bad[k]:
                    attempts[i] += 1
                    discarded += 1
                    if attempts[i] >= MAX_ATTEMPTS:
                        raise RuntimeError(f"trial {ids[i]} kept hitting degenerate conditions")
                    retry.append(i)
                else:
                    pieces[i] = [o[k] for o in outputs]
            pending = retry
        stacked = [np.stack([p[j] for p in pieces]) for j in range(len(pieces[0]))]
        return stacked, discarded

    chunks = chunk_ids(cfg.trials if trials is None else trials, cfg.chunk_trials)
    results = map_ordered(one_chunk, chunks, workers)
    n_out = len(results[0][0])
    outputs = [np.concatenate([r[0][j] for r in results]) for j in range(n_out)]
    return outputs, sum(r[1] for r in results)


# ---------------------------------------------------------------------------
# single path


@dataclass
class PathResult:
    """Levels ``1..n`` of one path plus node-level arrays for every level.

    ``node_stats[m]`` has shape ``(trials, 2**(n-m), 5)``; its entries are
    independent draws of the depth-``m`` conditional functionals.
    """

    config: ExperimentConfig
    path: PathSpec
    levels: list
    node_stats: list
    discarded: int

    def node_values(self, depth: int, stat: int) -> np.ndarray:
        return self.node_stats[depth][..., stat].ravel()

    def median_D(self, depth: int) -> float:
        return float(np.median(self.node_values(depth, STAT_D)))

    def variance_mad(self, depth: int) -> float:
        """Mean absolute deviation of the conditional variance at ``depth``."""
        v = self.node_values(depth, STAT_V)
        return float(np.mean(np.abs(v - v.mean())))

    def to_csv(self) -> str:
        return "\n".join([LevelStats.CSV_HEADER] + [s.csv_row() for s in self.levels]) + "\n"


def _path_work(cfg, bits):
    ctx = context_for(cfg)

    def work(leaves):
        levels, bad = run_path(ctx.ops, ctx.source_row, leaves, bits)
        return [lv.stats[:, :, 0, :] for lv in levels], bad

    return work


_path_cache: dict = {}
_sweep_cache: dict = {}


def estimate_path_sequence(cfg: ExperimentConfig, path: PathSpec,
                           workers: int | None = None) -> PathResult:
    """Per-level statistics along ``path`` for prefix depths ``1..len(path)``."""
    if path.depth > cfg.max_depth:
        raise InvalidParameter(f"path depth {path.depth} exceeds max_depth {cfg.max_depth}")
    check_budget(cfg, path.depth, sweep=False)
    key = (cfg, path)
    if key not in _path_cache:
        node_stats, discarded = run_trials(cfg, rng.STREAM_PATH, path.depth,
                                           _path_work(cfg, path.bits), workers)
        levels = [level_stats(m, path.prefix(m), node_stats[m].mean(axis=1), discarded)
                  for m in range(1, path.depth + 1)]
        _path_cache[key] = PathResult(cfg, path, levels, node_stats, discarded)
    return _path_cache[key]


# ---------------------------------------------------------------------------
# all paths


@dataclass
class SweepResult:
    """Per-trial block means for every path at every level up to ``depth``.

    ``trial_means[d]`` has shape ``(trials, 2**d, 5)`` with columns ordered
    by path index.
    """

    config: ExperimentConfig
    depth: int
    trial_means: list
    discarded: int

    def level(self, depth: int) -> dict:
        arr = self.trial_means[depth]
        return {p: level_stats(depth, p, arr[:, i], self.discarded)
                for i, p in enumerate(all_paths(depth))}

    def stats(self, path: PathSpec) -> LevelStats:
        i = int("".join(map(str, path.bits)) or "0", 2)
        return level_stats(path.depth, path, self.trial_means[path.depth][:, i], self.discarded)

    def means(self, depth: int, stat: int) -> np.ndarray:
        """Trial-averaged ``stat`` for every path at ``depth`` (path-index order)."""
        return self.trial_means[depth][..., stat].mean(axis=0)

    def to_csv(self, depth: int | None = None) -> str:
        depth = self.depth if depth is None else depth
        rows = [s.csv_row() for s in self.level(depth).values()]
        return "\n".join([LevelStats.CSV_HEADER] + rows) + "\n"


def _sweep_work(cfg, depth):
    ctx = context_for(cfg)

    def work(leaves):
        levels, bad = run_sweep(ctx.ops, ctx.source_row, leaves, depth)
        return [lv.stats.mean(axis=1) for lv in levels], bad

    return work


def estimate_all_paths(cfg: ExperimentConfig, depth: int, workers: int | None = None) -> SweepResult:
    """Statistics for every path of every depth up to ``depth`` from one sweep."""
    if depth > cfg.max_depth:
        raise InvalidParameter(f"depth {depth} exceeds max_depth {cfg.max_depth}")
    check_budget(cfg, depth, sweep=True)
    key = (cfg, depth)
    if key not in _sweep_cache:
        means, discarded = run_trials(cfg, rng.STREAM_SWEEP, depth, _sweep_work(cfg, depth), workers)
        _sweep_cache[key] = SweepResult(cfg, depth, means, discarded)
    return _sweep_cache[key]


def clear_caches() -> None:
    _path_cache.clear()
    _sweep_cache.clear()


def source_functionals(cfg: ExperimentConfig) -> dict:
    """Entropy, variance and Fisher information of the source on the engine lattice."""
    ctx = context_for(cfg)
    s = ctx.ops.stats(ctx.source_row)[0]
    return {"h": float(s[STAT_H]), "V": float(s[STAT_V]), "J": float(s[STAT_J]),
            "D": float(s[STAT_D]), "mean": float(cfg.source.mean)}


__all__ = [
    "ExperimentConfig", "LevelStats", "PathResult", "SweepResult",
    "estimate_path_sequence", "estimate_all_paths", "source_functionals",
    "check_budget", "mean_se", "level_stats", "run_trials", "context_for",
    "GRID_FLOOR_NATS", "STAT_H", "STAT_V", "STAT_J", "STAT_D", "STAT_MEAN",
]
