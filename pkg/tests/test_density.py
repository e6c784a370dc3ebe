import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hadamard_clt import density as dc
from hadamard_clt.density import GaussianSpec, GridDensity, MixtureSpec
from hadamard_clt.errors import InvalidInput, InvalidParameter
from hadamard_clt.sources import BIMODAL, SKEWED, source_density

LOG_2PI_E = math.log(2 * math.pi * math.e)


@pytest.mark.parametrize("var", [0.25, 1.0, 4.0])
def test_gaussian_closed_forms(var):
    f = dc.make_gaussian(GaussianSpec(0.5, var))
    assert dc.entropy(f) == pytest.approx(0.5 * (LOG_2PI_E + math.log(var)), rel=1e-6)
    assert dc.fisher_information(f) == pytest.approx(1 / var, rel=1e-3)
    assert dc.variance(f) == pytest.approx(var, rel=1e-6)
    assert dc.mean(f) == pytest.approx(0.5, abs=1e-9)


def test_tail_variance_standard_normal():
    # 2 * (phi(1) + 1 - Phi(1)), checked by scipy quad
    f = dc.make_gaussian(GaussianSpec(0.0, 1.0), 10.0, 4096)
    assert dc.tail_variance(f, 1.0) == pytest.approx(0.801251956901201, abs=1e-3)
    assert dc.tail_variance(f, 0.0) == pytest.approx(1.0, abs=1e-6)


def test_kl_between_gaussians():
    f1 = dc.make_gaussian(GaussianSpec(0.0, 1.0))
    f2 = dc.make_gaussian(GaussianSpec(1.0, 2.0), 10.0)
    # 0.5 * (log(2) + (1 + 1) / 2 - 1)
    assert dc.kl_divergence(f1, f2) == pytest.approx(0.5 * math.log(2.0), abs=1e-4)


def test_bimodal_functionals_against_quadrature():
    f = source_density(BIMODAL, 2048)
    assert dc.entropy(f) == pytest.approx(1.939669049681933, abs=1e-5)
    assert dc.variance(f) == pytest.approx(4.75, abs=1e-6)
    assert dc.gaussianity_gap(f) == pytest.approx(0.2583417925460143, abs=1e-5)
    assert dc.kl_divergence(f, dc.matched_gaussian(f)) == pytest.approx(dc.gaussianity_gap(f),
                                                                           abs=1e-4)


def test_scaled_convolution_of_gaussians():
    lam = 0.6
    f = dc.scaled_convolve(dc.make_gaussian(GaussianSpec(1.0, 1.0)),
                           dc.make_gaussian(GaussianSpec(-1.0, 4.0)), lam)
    assert dc.variance(f) == pytest.approx(lam ** 2 + 0.64 * 4.0, rel=1e-4)
    assert dc.mean(f) == pytest.approx(0.6 - 0.8, abs=1e-6)
    assert dc.gaussianity_gap(f) < 1e-5


def test_equal_variance_gaussians_have_zero_jump():
    g1 = dc.make_gaussian(GaussianSpec(0.0, 2.0))
    g2 = dc.make_gaussian(GaussianSpec(5.0, 2.0))
    assert abs(dc.entropy_jump(g1, g2, 0.3)) < 1e-4


def test_ou_flow_fixes_standard_normal_and_moves_toward_it():
    g = dc.make_gaussian(GaussianSpec(0.0, 1.0))
    assert dc.l1_distance(dc.ou_flow(g, 0.7), g) < 1e-4
    f = source_density(BIMODAL)
    gaps = [dc.gaussianity_gap(dc.ou_flow(f, t)) for t in (0.1, 0.5, 1.0, 2.0)]
    assert all(a > b for a, b in zip(gaps, gaps[1:]))
    assert dc.variance(dc.ou_flow(f, 1.0)) == pytest.approx(
        math.exp(-2) * 4.75 + 1 - math.exp(-2), rel=1e-4)


def test_gaussian_smooth_adds_variance():
    f = source_density(SKEWED)
    assert dc.variance(dc.gaussian_smooth(f, 0.3)) == pytest.approx(1.34 + 0.3, rel=1e-5)


def test_grid_density_validation():
    with pytest.raises(InvalidInput):
        GridDensity(0.0, 0.1, np.ones(8))
    with pytest.raises(InvalidInput):
        GridDensity(0.0, 0.1, np.full(32, -1.0))
    with pytest.raises(InvalidInput):
        GridDensity(0.0, 0.1, np.ones(32))  # mass 3.1
    with pytest.raises(InvalidParameter):
        dc.make_gaussian(GaussianSpec(0.0, 1.0), width_sigmas=4)
    with pytest.raises(InvalidParameter):
        MixtureSpec(((0.5, GaussianSpec()), (0.4, GaussianSpec())), 0.1)


def test_serialization_round_trips(tmp_path):
    f = source_density(BIMODAL, 256)
    g = GridDensity.from_json(f.to_json())
    assert g.same_grid(f) and np.array_equal(g.values, f.values)
    assert json.loads(f.to_json())["lo"] == f.lo
    p = tmp_path / "f.csv"
    p.write_text(f.to_csv())
    h = GridDensity.from_csv(p.read_text())
    assert h.same_grid(f)
    assert np.allclose(h.values, f.values, rtol=1e-12)


def test_sampling_matches_moments():
    f = source_density(BIMODAL)
    x = dc.sample(f, np.random.default_rng(1), 200_000)
    assert x.mean() == pytest.approx(0.0, abs=0.02)
    assert x.var() == pytest.approx(4.75, rel=0.01)


mixtures = st.builds(
    lambda w, m1, m2, v1, v2, a: MixtureSpec(((w, GaussianSpec(m1, v1)), (1 - w, GaussianSpec(m2, v2))), a),
    st.floats(0.1, 0.9), st.floats(-3, 3), st.floats(-3, 3), st.floats(0.05, 2.0),
    st.floats(0.05, 2.0), st.floats(0.05, 1.0),
)


@settings(max_examples=25, deadline=None)
@given(mixtures)
def test_information_inequalities_on_random_mixtures(spec):
    f = dc.make_mixture(spec, 1024)
    h, V, J = dc.entropy(f), dc.variance(f), dc.fisher_information(f)
    gap = dc.gaussianity_gap(f)
    assert J * V >= 1 - 1e-3
    assert gap >= -1e-6
    assert gap <= 0.5 * math.log(V * J) + 1e-3
    assert h <= 0.5 * (LOG_2PI_E + math.log(V)) + 1e-6


@settings(max_examples=20, deadline=None)
@given(mixtures, mixtures, st.floats(0.1, 0.95))
def test_entropy_jump_and_fisher_convolution(s1, s2, lam):
    f1, f2 = dc.make_mixture(s1, 512), dc.make_mixture(s2, 512)
    assert dc.entropy_jump(f1, f2, lam) >= -1e-3
    conv = dc.scaled_convolve(f1, f2, lam)
    bound = lam ** 2 * dc.fisher_information(f1) + (1 - lam ** 2) * dc.fisher_information(f2)
    assert dc.fisher_information(conv) <= bound * (1 + 1e-3)


@settings(max_examples=25, deadline=None)
@given(mixtures, st.floats(0.2, 5.0), st.floats(-4, 4))
def test_entropy_under_affine_maps(spec, a, b):
    f = dc.make_mixture(spec, 512)
    g = dc.scale_shift(f, a, b)
    assert dc.entropy(g) == pytest.approx(dc.entropy(f) + math.log(a), abs=1e-9)
    assert dc.variance(g) == pytest.approx(a * a * dc.variance(f), rel=1e-9)
    assert dc.entropy(dc.reflect(f)) == pytest.approx(dc.entropy(f), abs=1e-12)
