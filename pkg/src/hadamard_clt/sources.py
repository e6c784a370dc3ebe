"""Source laws of the form ``xi = xi_hat + G_a`` with closed-form densities.

Every source exposes ``pdf``, ``mean``, ``variance``, ``noise_variance``,
``support`` and a JSON-friendly ``to_dict``.  :func:`source_from_dict`
inverts ``to_dict`` for configuration files.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .density import GaussianSpec, GridDensity, MixtureSpec, grid_from_pdf
from .errors import InvalidParameter

SQRT_2PI = math.sqrt(2.0 * math.pi)


def _normal_pdf(x, var):
    return np.exp(-0.5 * x * x / var) / math.sqrt(2.0 * math.pi * var)


@dataclass(frozen=True)
class UniformNoiseSpec:
    """Uniform on ``[-half_width, half_width]`` plus independent N(0, a)."""

    half_width: float
    noise_variance: float

    def __post_init__(self):
        if not self.half_width > 0:
            raise InvalidParameter("half_width must be positive")
        if not self.noise_variance > 0:
            raise InvalidParameter("noise variance must be positive")

    @property
    def mean(self) -> float:
        return 0.0

    @property
    def variance(self) -> float:
        return self.half_width ** 2 / 3.0 + self.noise_variance

    def support(self, width_sigmas: float = 8.0) -> tuple[float, float]:
        r = self.half_width + width_sigmas * math.sqrt(self.noise_variance)
        return -r, r

    def pdf(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        s = math.sqrt(self.noise_variance)
        c = self.half_width
        return (ndtr((x + c) / s) - ndtr((x - c) / s)) / (2.0 * c)

    def to_dict(self) -> dict:
        return {"kind": "uniform_noise", "half_width": self.half_width,
                "noise_variance": self.noise_variance}


@dataclass(frozen=True)
class SplitShiftSpec:
    """Low-entropy, large-variance law blurred by N(0, a).

    Start from ``A / scale`` where ``A`` has density ``x^2 phi(x)`` (which
    vanishes at zero), keep the positive half in place and move the negative
    half left by ``shift``.  Entropy and Fisher information equal those of
    ``A / scale`` while the variance grows like ``shift^2 / 4``.
    """

    scale: float
    shift: float
    noise_variance: float

    def __post_init__(self):
        if not self.scale > 0 or self.shift < 0:
            raise InvalidParameter("scale must be positive and shift non-negative")
        if not self.noise_variance > 0:
            raise InvalidParameter("noise variance must be positive")

    @property
    def _abs_mean(self) -> float:
        # E|A| = 4 / sqrt(2 pi) for the x^2 phi(x) law
        return 4.0 / SQRT_2PI / self.scale

    @property
    def mean(self) -> float:
        return -0.5 * self.shift

    @property
    def variance(self) -> float:
        j = self.shift
        return 3.0 / self.scale ** 2 + 0.25 * j * j + j * self._abs_mean + self.noise_variance

    def support(self, width_sigmas: float = 8.0) -> tuple[float, float]:
        s = math.sqrt(self.noise_variance + 1.0 / self.scale ** 2)
        r = width_sigmas * s
        return -self.shift - r, r

    def _half(self, x):
        # integral over y > 0 of p(y) N(x - y; a) with p(y) = i^2 y^2 N(y; 0, 1/i^2)
        i2, a = self.scale ** 2, self.noise_variance
        s2 = 1.0 / (i2 + 1.0 / a)
        s = math.sqrt(s2)
        m = x * s2 / a
        z = m / s
        tail = (m * m + s2) * ndtr(z) + m * s * np.exp(-0.5 * z * z) / SQRT_2PI
        return i2 * _normal_pdf(x, a + 1.0 / i2) * tail

    def pdf(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self._half(x) + self._half(-x - self.shift)

    def to_dict(self) -> dict:
        return {"kind": "split_shift", "scale": self.scale, "shift": self.shift,
                "noise_variance": self.noise_variance}


def gaussian_source(variance: float = 1.0, noise_variance: float = 0.25) -> MixtureSpec:
    """N(0, variance) written as a one-component mixture plus N(0, a) noise."""
    if not variance > noise_variance > 0:
        raise InvalidParameter("need variance > noise_variance > 0")
    return MixtureSpec(((1.0, GaussianSpec(0.0, variance - noise_variance)),), noise_variance)


BIMODAL = MixtureSpec(((0.5, GaussianSpec(-2.0, 0.5)), (0.5, GaussianSpec(2.0, 0.5))), 0.25)
SKEWED = MixtureSpec(((0.7, GaussianSpec(-0.6, 0.3)), (0.3, GaussianSpec(1.4, 0.3))), 0.2)
UNIFORM_NOISE = UniformNoiseSpec(2.0, 0.25)
GAUSSIAN = gaussian_source(1.0, 0.25)
SPLIT_SHIFT = SplitShiftSpec(2.0, 6.0, 0.2)

NAMED_SOURCES = {
    "gaussian": GAUSSIAN,
    "bimodal": BIMODAL,
    "skewed": SKEWED,
    "uniform_noise": UNIFORM_NOISE,
    "split_shift": SPLIT_SHIFT,
}


def source_density(source, points: int = 1024, width_sigmas: float = 8.0) -> GridDensity:
    lo, hi = source.support(width_sigmas)
    return grid_from_pdf(source.pdf, lo, hi, points)


def source_from_dict(obj) -> object:
    """Build a source from a name or from the dictionary form of ``to_dict``."""
    if isinstance(obj, str):
        try:
            return NAMED_SOURCES[obj]
        except KeyError:
            raise InvalidParameter(
                f"unknown source {obj!r}; known: {', '.join(sorted(NAMED_SOURCES))}"
            ) from None
    if not isinstance(obj, dict) or "kind" not in obj:
        raise InvalidParameter("source must be a name or an object with a 'kind' field")
    kind = obj["kind"]
    try:
        if kind == "mixture":
            comps = tuple((float(w), GaussianSpec(float(m), float(v)))
                          for w, m, v in obj["components"])
            return MixtureSpec(comps, float(obj["noise_variance"]))
        if kind == "uniform_noise":
            return UniformNoiseSpec(float(obj["half_width"]), float(obj["noise_variance"]))
        if kind == "split_shift":
            return SplitShiftSpec(float(obj["scale"]), float(obj["shift"]),
                                  float(obj["noise_variance"]))
    except KeyError as exc:
        raise InvalidParameter(f"source of kind {kind!r} is missing field {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        raise InvalidParameter(f"malformed source of kind {kind!r}: {exc}") from None
    raise InvalidParameter(f"unknown source kind {kind!r}")


def is_gaussian(source) -> bool:
    return isinstance(source, MixtureSpec) and len(source.components) == 1
