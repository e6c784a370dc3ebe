import json
import math
from dataclasses import dataclass

import pytest

from hadamard_clt import checks
from hadamard_clt.density import GaussianSpec, default_corpus, make_gaussian
from hadamard_clt.errors import InvalidParameter
from hadamard_clt.harness import ExperimentConfig
from hadamard_clt.report import CheckResult, any_failed, at_least, at_most, close_to, report_json, skipped
from hadamard_clt.sources import BIMODAL, GAUSSIAN
from hadamard_clt.transform import PathSpec

SMALL = dict(grid_points=512, trials=16, max_depth=6, chunk_trials=8)


def test_result_helpers():
    assert at_most("a", 1.0, 1.0).passed and not at_most("a", 1.1, 1.0, 0.05).passed
    assert at_least("b", 0.96, 1.0, 0.05).passed
    assert close_to("c", 1.02, 1.0, 0.03).passed and not close_to("c", float("nan"), 1.0, 1).passed
    s = skipped("d", "why")
    assert s.skipped and not any_failed([s]) and any_failed([s, at_most("a", 2, 1)])
    assert s.line().startswith("SKIP d")
    doc = json.loads(report_json([s, at_most("a", 2, 1)], {"seed": 1}))
    assert doc["failed"] == 1 and doc["checks"][0]["measured"] is None
    assert doc["config"] == {"seed": 1}


def test_identities_pass_on_default_corpus():
    results = checks.check_identities()
    assert results and not any_failed(results)
    names = {r.name.split("[")[0] for r in results}
    assert {"closed_form.entropy", "cramer_rao", "entropy_jump", "entropy_jump_gaussian",
            "fisher_convolution", "de_bruijn.heat", "de_bruijn.ou", "gap_by_fisher",
            "gap_is_kl", "sum_moments.tail"} <= names


def test_identities_margins_on_gaussians():
    corpus = {"gauss_1": make_gaussian(GaussianSpec(0.0, 1.0))}
    results = {r.name: r for r in checks.check_identities(corpus)}
    assert results["closed_form.fisher[gauss_1]"].measured < 1e-3
    assert results["cramer_rao[gauss_1]"].measured == pytest.approx(1.0, abs=1e-3)
    with pytest.raises(InvalidParameter):
        checks.check_identities({})


def test_de_bruijn_on_bimodal_at_half():
    f = default_corpus()["bimodal"]
    res = {r.name: r for r in checks._flow_derivatives("bimodal", f, 5e-3)}
    r = res["de_bruijn.ou[bimodal,t=0.5]"]
    assert abs(r.measured - r.bound) < 5e-3


def test_gap_bound_on_bimodal_has_positive_margin():
    res = {r.name: r for r in checks.check_identities({"bimodal": default_corpus()["bimodal"]})}
    r = res["gap_by_fisher[bimodal]"]
    assert r.passed and r.bound - r.measured > 0.05


def test_vest_bracket_limits():
    h, V, J = 1.939669049681933, 4.75, 1.1
    lower, upper = checks.vest_bracket(h, V, J, V * (1 - 1e-9))
    assert upper > 1
    with pytest.raises(InvalidParameter):
        checks.vest_bracket(h, V, J, 0.5)
    with pytest.raises(InvalidParameter):
        checks.vest_bracket(h, V, J, 5.0)
    eps = checks.default_eps(ExperimentConfig())
    assert len(eps) == 3 and eps == sorted(eps)


@dataclass(frozen=True)
class NoiselessSource:
    mean: float = 0.0
    variance: float = 1.0


def test_inapplicable_source_is_skipped():
    cfg = ExperimentConfig(source=NoiselessSource(), **SMALL)
    res = checks.check_main_theorem_conclusions(cfg, PathSpec.parse("000"))
    assert len(res) == 1 and res[0].skipped
    assert checks.check_polar_theorem(cfg)[0].skipped
    assert checks.check_vest_bounds(cfg)[0].skipped


def test_gaussian_source_passes_trivially(fresh_caches):
    cfg = ExperimentConfig(source=GAUSSIAN, **SMALL)
    results = checks.check_main_theorem_conclusions(cfg, PathSpec((1,) * 6))
    results += checks.check_polar_theorem(cfg, 6)
    results += checks.check_fisher_limit(cfg, PathSpec((0,) * 6))
    assert not any_failed(results)
    jv = [r for r in results if r.name == "polar_theorem.JV"][0]
    assert jv.measured < 1e-3
    assert checks.check_vest_bounds(cfg, 4)[0].skipped


def test_tested_paths_are_deterministic():
    cfg = ExperimentConfig()
    a = checks.tested_paths(cfg, 10)
    assert a == checks.tested_paths(cfg, 10)
    assert a[:2] == [PathSpec((0,) * 10), PathSpec((1,) * 10)]
    assert len(set(a)) == len(a)


def test_small_verify_run(fresh_caches):
    cfg = ExperimentConfig(**SMALL)
    results = checks.run_verify(cfg, include_split_shift=False)
    names = [r.name for r in results]
    assert "martingale" in names and "polar_theorem.JV" in names and "cclt.h_limit" in names
    assert all(isinstance(r, CheckResult) for r in results)
    mart = results[names.index("martingale")]
    assert mart.passed
    # the report is plain JSON with the configuration echoed
    doc = json.loads(report_json(results, cfg.to_dict()))
    assert doc["config"]["trials"] == 16
