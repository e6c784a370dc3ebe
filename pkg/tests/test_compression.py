import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hadamard_clt.compression import (split_shift_scenario, compression_experiment, keep_count,
                                      marginal_means, rank_positions, reconstruct)
from hadamard_clt.errors import InvalidInput, InvalidParameter
from hadamard_clt.harness import ExperimentConfig, LevelStats
from hadamard_clt.sources import BIMODAL, GAUSSIAN, SPLIT_SHIFT
from hadamard_clt.transform import PathSpec, TransformPlan, all_paths, apply_transform, path_index

SMALL = dict(grid_points=256, trials=32, max_depth=5, chunk_trials=8)


def fake_stats(depth, h):
    return {p: LevelStats(depth, p, h[i], 0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1, 0)
            for i, p in enumerate(all_paths(depth))}


def test_rank_positions_and_ties():
    assert rank_positions(fake_stats(2, [0.1, 0.9, 0.5, 0.7]), 0.5) == (2, 4)
    # equal estimates break ties by the smaller index
    assert rank_positions(fake_stats(3, [1.0] * 8), 0.5) == (1, 2, 3, 4)
    assert rank_positions(fake_stats(2, [1.0, 1.0 + 1e-9, 0.0, 0.5]), 0.25) == (1,)
    assert rank_positions(fake_stats(2, [0.1, 0.2, 0.3, 0.4]), 1.0) == (1, 2, 3, 4)
    assert rank_positions(fake_stats(2, [0.1, 0.2, 0.3, 0.4]), 0.0) == ()
    partial = fake_stats(2, [0.1, 0.2, 0.3, 0.4])
    partial.pop(PathSpec.parse("01"))
    with pytest.raises(InvalidInput):
        rank_positions(partial, 0.5)


def test_keep_count():
    assert keep_count(0.5, 256) == 128
    assert keep_count(0.3, 10) == 3 and keep_count(0.25, 2) == 1
    with pytest.raises(InvalidParameter):
        keep_count(1.5, 8)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 8), st.floats(0.1, 0.9), st.integers(0, 2 ** 31))
def test_reconstruction_is_exact_when_everything_is_kept(n, lam, seed):
    plan = TransformPlan(lam, n)
    x = np.random.default_rng(seed).standard_normal(plan.N)
    y = apply_transform(plan, x)
    assert np.sum((reconstruct(plan, y, np.zeros(plan.N)) - x) ** 2) < 1e-20
    # dropped outputs filled with their true values also reconstruct exactly
    dropped = y.copy()
    dropped[::2] = np.nan
    assert np.allclose(reconstruct(plan, dropped, y), x, atol=1e-12)


def test_reconstruct_rejects_bad_shapes():
    with pytest.raises(InvalidInput):
        reconstruct(TransformPlan(0.5, 2), np.zeros(3), np.zeros(4))


def test_marginal_means_are_transformed_constants():
    plan = TransformPlan(1 / math.sqrt(2), 3)
    m = marginal_means(plan, 2.0)
    assert m[0] == pytest.approx(2.0 * math.sqrt(8))
    assert np.allclose(m[1:], 0.0, atol=1e-12)


def test_keep_none_error_is_mean_conditional_variance():
    cfg = ExperimentConfig(**SMALL)
    rep = compression_experiment(cfg, 5, 0.0)
    assert rep.kept_positions == ()
    expected = rep.V_est.mean()
    # both sides are Monte Carlo estimates from independent streams
    assert abs(rep.mse_highentropy - expected) < 4 * rep.mse_highentropy_se + 0.02 * expected


def test_keep_all_is_exact():
    rep = compression_experiment(ExperimentConfig(**SMALL), 5, 1.0)
    assert rep.mse_highentropy < 1e-20 and rep.mse_random < 1e-20
    assert len(rep.kept_positions) == 32


def test_entropy_ranking_beats_random_selection():
    cfg = ExperimentConfig(**SMALL)
    rep = compression_experiment(cfg, 5, 0.5)
    assert rep.gain > 3 * rep.gain_se
    assert rep.parseval_error < 1e-10
    assert path_index(PathSpec((0,) * 5)) in rep.kept_positions
    assert rep.mse_oracle_variance <= rep.mse_highentropy + 3 * rep.oracle_gap_se
    lines = rep.to_csv().splitlines()
    assert lines[0] == "index,path,h,V,kept" and len(lines) == 33
    assert sum(int(l.rsplit(",", 1)[1]) for l in lines[1:]) == 16


def test_marginal_rule_does_not_depend_on_selection():
    cfg = ExperimentConfig(**SMALL)
    rep = compression_experiment(cfg, 5, 0.5, rule="marginal")
    assert abs(rep.gain) < 3 * rep.gain_se + 1e-9
    with pytest.raises(InvalidParameter):
        compression_experiment(cfg, 5, 0.5, rule="median")


def test_gaussian_source_ranks_by_index():
    rep = compression_experiment(ExperimentConfig(source=GAUSSIAN, **SMALL), 4, 0.5)
    assert rep.kept_positions == tuple(range(1, 9))


def test_split_shift_scenario_small():
    cfg = ExperimentConfig(source=SPLIT_SHIFT, grid_points=512, trials=16, max_depth=6)
    results = split_shift_scenario(cfg, 6)
    assert [r.name for r in results][:3] == ["split_shift.variance",
                                             "split_shift.entropy_deficit",
                                             "split_shift.normalization"]
    assert all(r.passed for r in results)
