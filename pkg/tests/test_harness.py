import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hadamard_clt import rng
from hadamard_clt.errors import BudgetExceeded, ConfigError, InvalidParameter
from hadamard_clt.harness import (ExperimentConfig, LevelStats, estimate_all_paths,
                                  estimate_path_sequence, mean_se, source_functionals)
from hadamard_clt.kernels import STAT_H, STAT_J, STAT_V
from hadamard_clt.sources import BIMODAL, GAUSSIAN, UNIFORM_NOISE
from hadamard_clt.transform import PathSpec, all_paths

HALF_LOG_2PI_E = 0.5 * math.log(2 * math.pi * math.e)
SMALL = dict(grid_points=256, trials=16, max_depth=6, chunk_trials=4)


def test_config_round_trip_and_errors():
    cfg = ExperimentConfig(source=UNIFORM_NOISE, trials=32, tolerances={"JV": 0.1})
    assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg
    assert cfg.tolerance("JV", 0.05) == 0.1 and cfg.tolerance("other", 2.0) == 2.0
    assert ExperimentConfig.from_dict({"source": "bimodal"}).source is BIMODAL
    with pytest.raises(ConfigError, match="'trails'"):
        ExperimentConfig.from_dict({"trails": 5})
    with pytest.raises(ConfigError, match="'trials'"):
        ExperimentConfig.from_dict({"trials": 2.5})
    with pytest.raises(ConfigError, match="'source'"):
        ExperimentConfig.from_dict({"source": "cauchy"})
    with pytest.raises(ConfigError, match="lam"):
        ExperimentConfig.from_dict({"lam": 1.5})
    with pytest.raises(InvalidParameter):
        ExperimentConfig(trials=0)


def test_budget_reports_feasible_depth():
    cfg = ExperimentConfig(trials=256, grid_points=1024, budget_cells=1e8, max_depth=14)
    with pytest.raises(BudgetExceeded) as info:
        estimate_all_paths(cfg, 10)
    assert info.value.feasible_depth == 5  # 256 * 2**6 * 1024 * 6 > 1e8
    with pytest.raises(BudgetExceeded):
        estimate_all_paths(ExperimentConfig(max_depth=14), 11)


def test_mean_se():
    m, se = mean_se([1.0, 2.0, 3.0, 4.0])
    assert m == 2.5 and se == pytest.approx(math.sqrt(5 / 3 / 4))
    assert mean_se([7.0]) == (7.0, 0.0)


def test_streams_are_independent_of_grouping():
    a = rng.uniform_block(9, rng.STREAM_SWEEP, [0, 1, 2], 5)
    b = rng.uniform_block(9, rng.STREAM_SWEEP, [2], 5)
    assert np.array_equal(a[2], b[0])
    assert not np.array_equal(a[0], rng.uniform_block(9, rng.STREAM_PATH, [0], 5)[0])
    assert not np.array_equal(a[0], rng.uniform_block(9, rng.STREAM_SWEEP, [0], 5, [1])[0])


def test_gaussian_source_stays_gaussian(fresh_caches):
    cfg = ExperimentConfig(source=GAUSSIAN, **SMALL)
    sw = estimate_all_paths(cfg, 4)
    for d in range(1, 5):
        assert np.allclose(sw.means(d, STAT_H), HALF_LOG_2PI_E, atol=1e-3)
        assert np.allclose(sw.means(d, STAT_V), 1.0, atol=1e-3)
        assert np.allclose(sw.means(d, STAT_J), 1.0, atol=1e-3)


def test_sweep_levels_and_csv(fresh_caches):
    cfg = ExperimentConfig(**SMALL)
    sw = estimate_all_paths(cfg, 3)
    lv = sw.level(3)
    assert list(lv) == all_paths(3)
    s = sw.stats(PathSpec.parse("101"))
    assert s == lv[PathSpec.parse("101")]
    rows = sw.to_csv(3).strip().splitlines()
    assert rows[0] == LevelStats.CSV_HEADER and len(rows) == 9
    assert rows[6].startswith("3,101,")
    # level 0 is the source itself
    f = source_functionals(cfg)
    assert sw.trial_means[0][..., STAT_H] == pytest.approx(f["h"])


def test_path_and_sweep_agree_within_noise(fresh_caches):
    cfg = ExperimentConfig(**SMALL)
    p = PathSpec.parse("0110")
    a = estimate_path_sequence(cfg, p).levels[-1]
    b = estimate_all_paths(cfg, 4).stats(p)
    assert abs(a.h_mean - b.h_mean) < 4 * math.hypot(a.h_se, b.h_se) + 1e-3
    assert abs(a.V_mean - b.V_mean) < 4 * math.hypot(a.V_se, b.V_se) + 1e-3


def test_path_result_shapes(fresh_caches):
    cfg = ExperimentConfig(**SMALL)
    res = estimate_path_sequence(cfg, PathSpec.parse("11111"))
    assert [s.depth for s in res.levels] == [1, 2, 3, 4, 5]
    assert res.node_stats[5].shape == (16, 1, 5)
    assert res.node_stats[2].shape == (16, 8, 5)
    assert res.to_csv().count("\n") == 6
    assert res.median_D(5) < res.median_D(1)


def test_results_do_not_depend_on_workers(fresh_caches):
    cfg = ExperimentConfig(**SMALL)
    a = estimate_all_paths(cfg, 4, workers=1).to_csv(4)
    from hadamard_clt.harness import clear_caches
    clear_caches()
    b = estimate_all_paths(cfg, 4, workers=3).to_csv(4)
    assert a == b


@settings(max_examples=5, deadline=None)
@given(st.integers(0, 2 ** 63))
def test_martingale_in_expectation(seed):
    cfg = ExperimentConfig(seed=seed, source=BIMODAL, grid_points=256, trials=24, max_depth=3,
                           chunk_trials=8)
    sw = estimate_all_paths(cfg, 3)
    for m in range(3):
        parent = sw.trial_means[m][..., STAT_H]
        kids = sw.trial_means[m + 1][..., STAT_H]
        diff = 0.5 * (kids[:, 0::2] + kids[:, 1::2]) - parent
        for c in range(diff.shape[1]):
            mu, se = mean_se(diff[:, c])
            assert abs(mu) <= 4 * (se + 2e-3)


@settings(max_examples=5, deadline=None)
@given(st.integers(0, 2 ** 63))
def test_cramer_rao_on_every_path(seed):
    cfg = ExperimentConfig(seed=seed, source=UNIFORM_NOISE, grid_points=512, trials=8,
                           max_depth=3, chunk_trials=8)
    sw = estimate_all_paths(cfg, 3)
    for d in range(4):
        per_trial = sw.trial_means[d][..., STAT_V] * sw.trial_means[d][..., STAT_J]
        assert per_trial.min() >= 1 - 1e-3
