"""Gridded probability densities and the information functionals on them.

A :class:`GridDensity` is a density sampled on a uniform grid
``x_i = lo + i * dx``.  All integrals use the trapezoidal rule, and sums are
accumulated with :func:`math.fsum` so results do not depend on element order.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import signal

from .errors import InvalidInput, InvalidParameter

EPS_NORM = 1e-6
DENSITY_FLOOR = 1e-300
TRIM_REL = 1e-14
MAX_POINTS = 4096
MIN_POINTS = 16

HALF_LOG_2PI_E = 0.5 * math.log(2.0 * math.pi * math.e)


def _trap(values: np.ndarray, dx: float) -> float:
    v = np.asarray(values, dtype=float)
    return dx * (math.fsum(v) - 0.5 * (v[0] + v[-1]))


@dataclass(frozen=True, eq=False)
class GridDensity:
    """Probability density sampled at ``lo + i*dx`` for ``i < len(values)``.

    Instances are immutable; the value array is stored read-only.  The
    constructor checks non-negativity, the minimum size and that the
    trapezoidal mass is within ``EPS_NORM`` of one.  Use :meth:`from_values`
    to normalize arbitrary non-negative samples.
    """

    lo: float
    dx: float
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 1 or values.size < MIN_POINTS:
            raise InvalidInput(f"need a 1-d grid with at least {MIN_POINTS} points")
        if not (self.dx > 0 and math.isfinite(self.dx)):
            raise InvalidParameter(f"grid spacing must be positive, got {self.dx}")
        if not np.all(np.isfinite(values)) or values.min() < 0:
            raise InvalidInput("density values must be finite and non-negative")
        mass = _trap(values, self.dx)
        if abs(mass - 1.0) > EPS_NORM:
            raise InvalidInput(f"density is not normalized (mass {mass:.9g})")
        values.setflags(write=False)
        object.__setattr__(self, "lo", float(self.lo))
        object.__setattr__(self, "dx", float(self.dx))
        object.__setattr__(self, "values", values)

    @classmethod
    def from_values(cls, lo: float, dx: float, values) -> "GridDensity":
        v = np.clip(np.asarray(values, dtype=float), 0.0, None)
        if v.size < MIN_POINTS:
            raise InvalidInput(f"need at least {MIN_POINTS} points")
        mass = _trap(v, dx)
        if not mass > 0:
            raise InvalidInput("density has zero mass")
        return cls(lo, dx, v / mass)

    @property
    def size(self) -> int:
        return self.values.size

    @property
    def hi(self) -> float:
        return self.lo + (self.size - 1) * self.dx

    @property
    def x(self) -> np.ndarray:
        return self.lo + self.dx * np.arange(self.size)

    def mass(self) -> float:
        return _trap(self.values, self.dx)

    def pdf(self, x) -> np.ndarray:
        """Linear interpolation of the samples, zero outside the grid."""
        return np.interp(np.asarray(x, dtype=float), self.x, self.values, left=0.0, right=0.0)

    def cdf(self) -> np.ndarray:
        v = self.values
        c = np.concatenate(([0.0], np.cumsum(0.5 * (v[1:] + v[:-1]) * self.dx)))
        return c / c[-1]

    def same_grid(self, other: "GridDensity", rtol: float = 1e-12) -> bool:
        return (
            self.size == other.size
            and math.isclose(self.dx, other.dx, rel_tol=rtol)
            and abs(self.lo - other.lo) <= rtol * max(1.0, abs(self.lo)) + 1e-12 * self.dx
        )

    # serialization -------------------------------------------------------

    def to_json(self) -> str:
        return json.dumps({"lo": self.lo, "dx": self.dx, "values": self.values.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "GridDensity":
        obj = json.loads(text)
        try:
            return cls(obj["lo"], obj["dx"], np.asarray(obj["values"], dtype=float))
        except KeyError as exc:
            raise InvalidInput(f"missing field {exc.args[0]!r}") from None

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "density"])
        for xi, vi in zip(self.x, self.values):
            w.writerow([repr(float(xi)), repr(float(vi))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "GridDensity":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or [c.strip() for c in rows[0]] != ["x", "density"]:
            raise InvalidInput("expected CSV header 'x,density'")
        data = np.array([[float(a), float(b)] for a, b in rows[1:]])
        x, v = data[:, 0], data[:, 1]
        dx = (x[-1] - x[0]) / (len(x) - 1)
        if not np.allclose(np.diff(x), dx, rtol=1e-9, atol=1e-12):
            raise InvalidInput("grid in CSV is not uniform")
        return cls.from_values(x[0], dx, v)


@dataclass(frozen=True)
class GaussianSpec:
    mean: float = 0.0
    variance: float = 1.0

    def __post_init__(self):
        if not self.variance > 0:
            raise InvalidParameter(f"variance must be positive, got {self.variance}")


@dataclass(frozen=True)
class MixtureSpec:
    """Law of ``xi_hat + G_a``: a Gaussian mixture blurred by N(0, a)."""

    components: tuple  # of (weight, GaussianSpec)
    noise_variance: float

    def __post_init__(self):
        comps = tuple((float(w), g if isinstance(g, GaussianSpec) else GaussianSpec(*g))
                      for w, g in self.components)
        if not comps:
            raise InvalidParameter("mixture needs at least one component")
        weights = np.array([w for w, _ in comps])
        if np.any(weights <= 0) or abs(weights.sum() - 1.0) > 1e-9:
            raise InvalidParameter("mixture weights must be positive and sum to one")
        if not self.noise_variance > 0:
            raise InvalidParameter("noise variance must be positive")
        object.__setattr__(self, "components", comps)

    @property
    def mean(self) -> float:
        return sum(w * g.mean for w, g in self.components)

    @property
    def variance(self) -> float:
        m = self.mean
        return sum(w * (g.variance + self.noise_variance + (g.mean - m) ** 2)
                   for w, g in self.components)

    def support(self, width_sigmas: float = 8.0) -> tuple[float, float]:
        lo = min(g.mean - width_sigmas * math.sqrt(g.variance + self.noise_variance)
                 for _, g in self.components)
        hi = max(g.mean + width_sigmas * math.sqrt(g.variance + self.noise_variance)
                 for _, g in self.components)
        return lo, hi

    def pdf(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for w, g in self.components:
            v = g.variance + self.noise_variance
            out += w * np.exp(-0.5 * (x - g.mean) ** 2 / v) / math.sqrt(2 * math.pi * v)
        return out

    def to_dict(self) -> dict:
        return {
            "kind": "mixture",
            "components": [[w, g.mean, g.variance] for w, g in self.components],
            "noise_variance": self.noise_variance,
        }


def grid_from_pdf(pdf, lo: float, hi: float, points: int) -> GridDensity:
    if points < MIN_POINTS:
        raise InvalidParameter(f"need at least {MIN_POINTS} points")
    dx = (hi - lo) / (points - 1)
    x = lo + dx * np.arange(points)
    return GridDensity.from_values(lo, dx, pdf(x))


def make_gaussian(spec: GaussianSpec, width_sigmas: float = 8.0, points: int = 1024) -> GridDensity:
    if width_sigmas < 6:
        raise InvalidParameter("width_sigmas must be at least 6")
    s = math.sqrt(spec.variance)
    return grid_from_pdf(
        lambda x: np.exp(-0.5 * ((x - spec.mean) / s) ** 2),
        spec.mean - width_sigmas * s, spec.mean + width_sigmas * s, points,
    )


def make_mixture(spec: MixtureSpec, points: int = 1024) -> GridDensity:
    lo, hi = spec.support(8.0)
    return grid_from_pdf(spec.pdf, lo, hi, points)


# ---------------------------------------------------------------------------
# functionals


def mean(f: GridDensity) -> float:
    return _trap(f.x * f.values, f.dx)


def variance(f: GridDensity) -> float:
    m = mean(f)
    return _trap((f.x - m) ** 2 * f.values, f.dx)


def moment(f: GridDensity, order: int, central: bool = True) -> float:
    c = mean(f) if central else 0.0
    return _trap((f.x - c) ** order * f.values, f.dx)


def _plogp(v: np.ndarray) -> np.ndarray:
    out = np.zeros_like(v)
    pos = v > 0
    out[pos] = v[pos] * np.log(np.maximum(v[pos], DENSITY_FLOOR))
    return out


def entropy(f: GridDensity) -> float:
    """Differential entropy in nats, with ``0 log 0 = 0``."""
    return -_trap(_plogp(f.values), f.dx)


def fisher_information(f: GridDensity) -> float:
    """``4 * integral of ((sqrt f)')^2`` with central differences."""
    s = np.sqrt(f.values)
    ds = np.gradient(s, f.dx)
    return 4.0 * _trap(ds * ds, f.dx)


def _cumtrap_at(x0: float, dx: float, g: np.ndarray, b: float) -> float:
    """Integral from the left edge to ``b`` of the linear interpolant of ``g``."""
    n = g.size
    u = (b - x0) / dx
    if u <= 0:
        return 0.0
    cells = 0.5 * (g[1:] + g[:-1]) * dx
    if u >= n - 1:
        return math.fsum(cells)
    i = int(math.floor(u))
    t = u - i
    gb = g[i] + t * (g[i + 1] - g[i])
    return math.fsum(cells[:i]) + 0.5 * t * dx * (g[i] + gb)


def tail_variance(f: GridDensity, R: float) -> float:
    """``E[(X - EX)^2 ; |X - EX| >= R]`` integrating the piecewise-linear integrand."""
    if R < 0:
        raise InvalidParameter("R must be non-negative")
    m = mean(f)
    g = (f.x - m) ** 2 * f.values
    total = _cumtrap_at(f.lo, f.dx, g, f.hi)
    inner = _cumtrap_at(f.lo, f.dx, g, m + R) - _cumtrap_at(f.lo, f.dx, g, m - R)
    return max(total - inner, 0.0)


# ---------------------------------------------------------------------------
# grid manipulation


def resample(f: GridDensity, lo: float, dx: float, points: int, normalize: bool = True):
    x = lo + dx * np.arange(points)
    v = f.pdf(x)
    if normalize:
        return GridDensity.from_values(lo, dx, v)
    return v


def common_grid(f1: GridDensity, f2: GridDensity) -> tuple[float, float, int]:
    """Grid with the finer spacing over the union of both supports."""
    dx = min(f1.dx, f2.dx)
    lo = min(f1.lo, f2.lo)
    hi = max(f1.hi, f2.hi)
    points = int(math.ceil((hi - lo) / dx - 1e-9)) + 1
    return lo, dx, points


def trim(lo: float, dx: float, values: np.ndarray, rel: float = TRIM_REL):
    """Drop leading and trailing samples below ``rel * max``."""
    keep = np.nonzero(values >= rel * values.max())[0]
    a, b = keep[0], keep[-1] + 1
    while b - a < MIN_POINTS:
        a, b = max(a - 1, 0), min(b + 1, values.size)
    return lo + a * dx, values[a:b]


def cap_points(lo: float, dx: float, values: np.ndarray, max_points: int = MAX_POINTS):
    if values.size <= max_points:
        return lo, dx, values
    hi = lo + (values.size - 1) * dx
    new_dx = (hi - lo) / (max_points - 1)
    x_old = lo + dx * np.arange(values.size)
    return lo, new_dx, np.interp(lo + new_dx * np.arange(max_points), x_old, values)


def l1_distance(f1: GridDensity, f2: GridDensity) -> float:
    lo, dx, n = common_grid(f1, f2)
    x = lo + dx * np.arange(n)
    return _trap(np.abs(f1.pdf(x) - f2.pdf(x)), dx)


# ---------------------------------------------------------------------------
# divergences


def kl_divergence(f1: GridDensity, f2: GridDensity) -> float:
    """``KL(f1 || f2)`` on a common grid with a density floor in the logs."""
    if f1.same_grid(f2):
        dx, v1, v2 = f1.dx, f1.values, f2.values
    else:
        lo, dx, n = common_grid(f1, f2)
        v1 = resample(f1, lo, dx, n).values
        v2 = resample(f2, lo, dx, n).values
    skip = TRIM_REL * max(v1.max(), v2.max())
    use = (v1 > 0) & ~((v1 < skip) & (v2 < skip))
    integrand = np.zeros_like(v1)
    integrand[use] = v1[use] * (np.log(np.maximum(v1[use], DENSITY_FLOOR))
                                - np.log(np.maximum(v2[use], DENSITY_FLOOR)))
    return _trap(integrand, dx)


def matched_gaussian(f: GridDensity, width_sigmas: float = 10.0) -> GridDensity:
    """Gaussian with the mean and variance of ``f`` on a grid aligned with ``f``."""
    m, v = mean(f), variance(f)
    if not v > 0:
        raise InvalidInput("density has degenerate variance")
    s = math.sqrt(v)
    left = max(0, int(math.ceil((f.lo - (m - width_sigmas * s)) / f.dx)))
    right = max(0, int(math.ceil((m + width_sigmas * s - f.hi) / f.dx)))
    lo = f.lo - left * f.dx
    n = f.size + left + right
    x = lo + f.dx * np.arange(n)
    return GridDensity.from_values(lo, f.dx, np.exp(-0.5 * (x - m) ** 2 / v))


def gaussianity_gap(f: GridDensity) -> float:
    """KL divergence from ``f`` to the Gaussian with the same two moments."""
    v = variance(f)
    if not v > 0:
        raise InvalidInput("density has degenerate variance")
    return 0.5 * math.log(2 * math.pi * math.e * v) - entropy(f)


# ---------------------------------------------------------------------------
# operations producing densities


def _check_lambda(lam: float):
    if not 0.0 < lam < 1.0:
        raise InvalidParameter(f"lambda must lie in (0, 1), got {lam}")


def scale_shift(f: GridDensity, scale: float, shift: float = 0.0) -> GridDensity:
    """Density of ``scale * X + shift`` (exact relabelling of the grid)."""
    if scale == 0:
        raise InvalidParameter("scale must be non-zero")
    if scale > 0:
        return GridDensity(scale * f.lo + shift, scale * f.dx, f.values / scale)
    return GridDensity(scale * f.hi + shift, -scale * f.dx, f.values[::-1] / -scale)


def reflect(f: GridDensity) -> GridDensity:
    """Density of ``-X``."""
    return GridDensity(-f.hi, f.dx, f.values[::-1])


def _convolve(a: GridDensity, b: GridDensity, max_points: int) -> GridDensity:
    dx = min(a.dx, b.dx)

    def on_dx(f):
        if math.isclose(f.dx, dx, rel_tol=1e-12):
            return f.lo, np.asarray(f.values)
        n = int(math.ceil((f.hi - f.lo) / dx)) + 1
        return f.lo, f.pdf(f.lo + dx * np.arange(n))

    lo_a, va = on_dx(a)
    lo_b, vb = on_dx(b)
    out = np.clip(signal.fftconvolve(va, vb), 0.0, None) * dx
    lo, out = trim(lo_a + lo_b, dx, out)
    lo, dx, out = cap_points(lo, dx, out, max_points)
    return GridDensity.from_values(lo, dx, out)


def scaled_convolve(f1: GridDensity, f2: GridDensity, lam: float,
                    max_points: int = MAX_POINTS) -> GridDensity:
    """Density of ``lam*X1 + sqrt(1-lam^2)*X2`` for independent ``X1 ~ f1``, ``X2 ~ f2``."""
    _check_lambda(lam)
    mu = math.sqrt(1.0 - lam * lam)
    return _convolve(scale_shift(f1, lam), scale_shift(f2, mu), max_points)


def gaussian_smooth(f: GridDensity, noise_variance: float, scale: float = 1.0,
                    grid: tuple[float, float, int] | None = None) -> GridDensity:
    """Density of ``scale*X + sqrt(noise_variance)*G`` by direct quadrature.

    Without ``grid`` the output keeps ``f.dx`` and spans the scaled support
    widened by eight noise standard deviations.  Passing an explicit
    ``(lo, dx, points)`` lets callers compare flows on one fixed grid.
    """
    if not noise_variance > 0:
        raise InvalidParameter("noise variance must be positive")
    s = math.sqrt(noise_variance)
    if grid is None:
        a, b = sorted((scale * f.lo, scale * f.hi))
        lo, dx = a - 8 * s, f.dx
        points = int(math.ceil((b - a + 16 * s) / dx)) + 1
        if points > MAX_POINTS:
            dx = (b - a + 16 * s) / (MAX_POINTS - 1)
            points = MAX_POINTS
    else:
        lo, dx, points = grid
    x_out = lo + dx * np.arange(points)
    y = f.x
    w = f.values * f.dx
    w = np.concatenate(([0.5 * w[0]], w[1:-1], [0.5 * w[-1]]))
    out = np.empty(points)
    norm = 1.0 / math.sqrt(2 * math.pi * noise_variance)
    for start in range(0, points, 512):
        xs = x_out[start:start + 512, None]
        k = np.exp(-0.5 * (xs - scale * y[None, :]) ** 2 / noise_variance)
        out[start:start + 512] = norm * (k @ w)
    return GridDensity.from_values(lo, dx, out)


def ou_grid(f: GridDensity) -> tuple[float, float, int]:
    """A grid that contains ``p_t* f`` for every ``t > 0``."""
    lo = min(f.lo, 0.0) - 8.0
    hi = max(f.hi, 0.0) + 8.0
    dx = f.dx
    points = int(math.ceil((hi - lo) / dx)) + 1
    if points > MAX_POINTS:
        dx = (hi - lo) / (MAX_POINTS - 1)
        points = MAX_POINTS
    return lo, dx, points


def ou_flow(f: GridDensity, t: float, grid: tuple[float, float, int] | None = None) -> GridDensity:
    """Ornstein-Uhlenbeck evolution: density of ``e^-t X + sqrt(1-e^-2t) G``."""
    if not t > 0:
        raise InvalidParameter("t must be positive")
    return gaussian_smooth(f, -math.expm1(-2 * t), math.exp(-t), grid or ou_grid(f))


def entropy_jump(f1: GridDensity, f2: GridDensity, lam: float) -> float:
    """``h(lam X + sqrt(1-lam^2) Y) - lam^2 h(X) - (1-lam^2) h(Y)``."""
    conv = scaled_convolve(f1, f2, lam)
    return entropy(conv) - lam * lam * entropy(f1) - (1 - lam * lam) * entropy(f2)


def sample(f: GridDensity, rng: np.random.Generator, count: int) -> np.ndarray:
    """Inverse-CDF sampling, linear within each cell."""
    if count < 1:
        raise InvalidParameter("count must be at least 1")
    return np.interp(rng.random(count), f.cdf(), f.x)


def default_corpus(points: int = 1024) -> dict[str, GridDensity]:
    """Named test densities used by the identity checks."""
    from .sources import BIMODAL, SKEWED, UNIFORM_NOISE, source_density

    return {
        "gauss_1": make_gaussian(GaussianSpec(0.0, 1.0), 8.0, points),
        "gauss_4": make_gaussian(GaussianSpec(1.0, 4.0), 8.0, points),
        "bimodal": source_density(BIMODAL, points),
        "skewed": source_density(SKEWED, points),
        "uniform_noise": source_density(UNIFORM_NOISE, points),
    }


def as_grid(values: Sequence[float], lo: float, dx: float) -> GridDensity:
    return GridDensity.from_values(lo, dx, np.asarray(values, dtype=float))
