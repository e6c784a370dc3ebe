import math

import numpy as np
import pytest

from hadamard_clt import density as dc
from hadamard_clt.errors import InvalidParameter
from hadamard_clt.sources import (BIMODAL, NAMED_SOURCES, SPLIT_SHIFT, UNIFORM_NOISE,
                                  SplitShiftSpec, UniformNoiseSpec, gaussian_source, is_gaussian,
                                  source_density, source_from_dict)

# mass, mean, variance, entropy from scipy quad over 12 standard deviations
QUADRATURE = {
    "bimodal": (0.0, 4.75, 1.939669049681933),
    "uniform_noise": (0.0, 1.5833333333333333, 1.61209368228414),
    "split_shift": (-3.0, 14.737307364817191, 1.5309822629799827),
}


@pytest.mark.parametrize("name", sorted(QUADRATURE))
def test_named_sources_match_quadrature(name):
    src = NAMED_SOURCES[name]
    m, v, h = QUADRATURE[name]
    assert src.mean == pytest.approx(m, abs=1e-12)
    assert src.variance == pytest.approx(v, rel=1e-10)
    f = source_density(src, 4096)
    assert f.mass() == pytest.approx(1.0, abs=1e-6)
    assert dc.variance(f) == pytest.approx(v, rel=1e-5)
    assert dc.entropy(f) == pytest.approx(h, abs=1e-4)


def test_split_shift_is_a_variance_trap():
    f = source_density(SPLIT_SHIFT, 4096)
    assert dc.variance(f) > 10
    assert dc.gaussianity_gap(f) > 1.0


def test_split_shift_variance_grows_with_shift():
    v = [SplitShiftSpec(2.0, j, 0.2).variance for j in (0.0, 2.0, 6.0, 20.0)]
    assert all(a < b for a, b in zip(v, v[1:]))


def test_uniform_noise_pdf_is_convolution():
    x = np.linspace(-4, 4, 9)
    s = UniformNoiseSpec(1.0, 0.04)
    assert s.pdf(np.array([0.0]))[0] == pytest.approx(0.5, abs=1e-6)
    assert np.all(np.diff(s.pdf(x[x >= 0])) <= 0)


def test_round_trip_and_errors():
    for src in NAMED_SOURCES.values():
        assert source_from_dict(src.to_dict()) == src
    assert source_from_dict("bimodal") is BIMODAL
    with pytest.raises(InvalidParameter, match="unknown source"):
        source_from_dict("cauchy")
    with pytest.raises(InvalidParameter, match="missing field"):
        source_from_dict({"kind": "uniform_noise", "half_width": 1.0})
    with pytest.raises(InvalidParameter):
        gaussian_source(0.1, 0.25)
    assert is_gaussian(gaussian_source()) and not is_gaussian(BIMODAL)
    assert not is_gaussian(UNIFORM_NOISE)
    assert math.isclose(gaussian_source(2.0, 0.5).variance, 2.0)
