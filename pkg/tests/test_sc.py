import math

import numpy as np
import pytest

from hadamard_clt.density import GaussianSpec, entropy, make_gaussian, variance
from hadamard_clt.errors import DegenerateCondition, InvalidInput
from hadamard_clt.harness import ExperimentConfig, context_for
from hadamard_clt.lattice import run_path
from hadamard_clt.sc import branch_minus_given, branch_plus, sc_conditional_density, sc_trace
from hadamard_clt.sources import BIMODAL, UNIFORM_NOISE, source_density
from hadamard_clt.transform import PathSpec, TransformPlan, all_paths, apply_transform, path_index

from oracles import conditional_oracle, l1_to_oracle

LAM = 1 / math.sqrt(2)


def leaves(seed, N):
    return 2.0 * np.random.default_rng(seed).standard_normal(N)


@pytest.mark.parametrize("seed", range(4))
@pytest.mark.parametrize("lam", [0.4, LAM])
def test_one_level_matches_joint_grid(seed, lam):
    f = source_density(BIMODAL)
    plan = TransformPlan(lam, 1)
    xi = leaves(seed, 2)
    eta = apply_transform(plan, xi)
    for p in all_paths(1):
        k = path_index(p)
        g, o = conditional_oracle(BIMODAL.pdf, lam, 2, k, tuple(eta[:k - 1]))
        assert l1_to_oracle(sc_conditional_density(plan, p, f, xi), g, o) < 1e-3


def test_two_levels_match_joint_grid():
    f = source_density(BIMODAL)
    plan = TransformPlan(LAM, 2)
    xi = leaves(0, 4)
    eta = apply_transform(plan, xi)
    for p in all_paths(2):
        k = path_index(p)
        g, o = conditional_oracle(BIMODAL.pdf, LAM, 4, k, tuple(eta[:k - 1]))
        assert l1_to_oracle(sc_conditional_density(plan, p, f, xi), g, o) < 2e-3


def test_gaussian_minus_given_plus_is_gaussian():
    g = make_gaussian(GaussianSpec(0.0, 1.0))
    d = branch_minus_given(g, g, 0.6, 1.7)
    # independent components: the minus output does not depend on the plus value
    assert variance(d) == pytest.approx(1.0, rel=1e-4)
    assert entropy(d) == pytest.approx(0.5 * math.log(2 * math.pi * math.e), abs=1e-4)
    assert variance(branch_plus(g, g, 0.6)) == pytest.approx(1.0, rel=1e-4)


def test_degenerate_condition_raises():
    f = source_density(UNIFORM_NOISE)
    with pytest.raises(DegenerateCondition):
        branch_minus_given(f, f, LAM, 1e3)


def test_trace_shares_plus_prefix_and_dumps(tmp_path):
    f = source_density(BIMODAL, 256)
    plan = TransformPlan(LAM, 3)
    xi = leaves(5, 8)
    trace = sc_trace(plan, PathSpec.parse("011"), f, xi, dump_dir=str(tmp_path))
    assert trace[-1].depth == 3 and trace[-1].block == 0
    assert trace[-1].realized_value == pytest.approx(apply_transform(plan, xi)[path_index(PathSpec.parse("011")) - 1])
    assert len(list(tmp_path.iterdir())) == len(trace)
    with pytest.raises(InvalidInput):
        sc_trace(plan, PathSpec.parse("01"), f, xi)


@pytest.mark.parametrize("bits", ["0110", "1111", "1010"])
def test_lattice_engine_agrees_with_reference(bits):
    cfg = ExperimentConfig(max_depth=4, grid_points=1024)
    ctx = context_for(cfg)
    x = np.random.default_rng(11).random(16)
    xi = np.interp(x, ctx.cdf, ctx.lattice.x)
    levels, bad, F, rowmap = run_path(ctx.ops, ctx.source_row, xi[None, :],
                                      tuple(int(b) for b in bits), keep_rows=True)
    assert not bad.any()
    lat = ctx.lattice.to_grid(F[rowmap[0, 0, 0]])
    ref = sc_conditional_density(TransformPlan(cfg.lam, 4), PathSpec.parse(bits),
                                 ctx.lattice.to_grid(ctx.source_row[0]), xi)
    grid = ctx.lattice.x
    diff = np.abs(lat.pdf(grid) - ref.pdf(grid))
    assert ctx.lattice.dx * diff.sum() < 1e-3
