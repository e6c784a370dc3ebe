"""Conditional central limit experiment for normalized sums with side information.

Pairs ``(xi_k, eta_k)`` are i.i.d.; given the side values ``y_1..y_n`` the
summands are independent with known conditional densities, so the
conditional density of ``W_n = sum(xi_k) / sqrt(n)`` is an ``n``-fold scaled
convolution.  For ``n = 2**k`` it is built as a balanced tree of
``lambda = 1/sqrt(2)`` plus steps, which also yields every smaller power of
two along the way.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import rng
from .density import MixtureSpec
from .errors import InvalidModel, InvalidParameter
from .harness import DEFAULT_SEED, chunk_ids, map_ordered, mean_se
from .kernels import HALF_LOG_2PI_E, STAT_D, STAT_H, STAT_V, clean_rows
from .lattice import CLEAN_REL, Lattice, RowOps
from .sources import BIMODAL, source_from_dict


def _normal_rows(lattice: Lattice, means, variances) -> np.ndarray:
    x = lattice.x[None, :]
    m = np.asarray(means, dtype=float)[:, None]
    v = np.asarray(variances, dtype=float)[:, None]
    return np.exp(-0.5 * (x - m) ** 2 / v) / np.sqrt(2 * np.pi * v)


@dataclass(frozen=True)
class IndependentSide:
    """Side information independent of the source: the plain entropic CLT."""

    source: object = BIMODAL

    @property
    def mean(self) -> float:
        return self.source.mean

    @property
    def variance(self) -> float:
        return self.source.variance

    def support(self, width_sigmas: float = 8.0):
        return self.source.support(width_sigmas)

    def sample_side(self, gen: np.random.Generator, n: int) -> np.ndarray:
        # the side value carries no information, so a constant stands in for it
        return np.zeros(n)

    def conditional_rows(self, y: np.ndarray, lattice: Lattice) -> np.ndarray:
        row = np.asarray(self.source.pdf(lattice.x + self.mean), dtype=float)
        return np.broadcast_to(row, (y.size, row.size)).copy()

    def to_dict(self) -> dict:
        return {"kind": "independent", "source": self.source.to_dict()}


@dataclass(frozen=True)
class LabelBlurMixture:
    """``xi`` from a Gaussian mixture; ``eta`` is its component label plus N(0, blur^2)."""

    mixture: MixtureSpec = BIMODAL
    blur: float = 1.0

    def __post_init__(self):
        if not self.blur > 0:
            raise InvalidParameter("blur must be positive")

    @property
    def mean(self) -> float:
        return self.mixture.mean

    @property
    def variance(self) -> float:
        return self.mixture.variance

    def support(self, width_sigmas: float = 8.0):
        return self.mixture.support(width_sigmas)

    def _weights(self) -> np.ndarray:
        return np.array([w for w, _ in self.mixture.components])

    def sample_side(self, gen: np.random.Generator, n: int) -> np.ndarray:
        cum = np.cumsum(self._weights())
        labels = np.minimum(np.searchsorted(cum, gen.random(n) * cum[-1], side="right"),
                            cum.size - 1)
        return labels + self.blur * gen.standard_normal(n)

    def posterior(self, y: np.ndarray) -> np.ndarray:
        labels = np.arange(len(self.mixture.components))
        logw = np.log(self._weights())[None, :] - 0.5 * ((y[:, None] - labels) / self.blur) ** 2
        logw -= logw.max(axis=1, keepdims=True)
        w = np.exp(logw)
        return w / w.sum(axis=1, keepdims=True)

    def conditional_rows(self, y: np.ndarray, lattice: Lattice) -> np.ndarray:
        a = self.mixture.noise_variance
        comps = _normal_rows(lattice,
                             [g.mean - self.mean for _, g in self.mixture.components],
                             [g.variance + a for _, g in self.mixture.components])
        return self.posterior(y) @ comps

    def to_dict(self) -> dict:
        return {"kind": "label_blur", "mixture": self.mixture.to_dict(), "blur": self.blur}


@dataclass(frozen=True)
class GaussianScale:
    """``eta`` uniform on [0, 1] and ``xi | eta = y`` distributed as N(0, base + slope*y)."""

    base_variance: float = 0.5
    slope: float = 1.0

    def __post_init__(self):
        if not self.base_variance > 0 or self.slope < 0:
            raise InvalidParameter("need base_variance > 0 and slope >= 0")

    @property
    def mean(self) -> float:
        return 0.0

    @property
    def variance(self) -> float:
        return self.base_variance + 0.5 * self.slope

    def support(self, width_sigmas: float = 8.0):
        r = width_sigmas * math.sqrt(self.base_variance + self.slope)
        return -r, r

    def sample_side(self, gen: np.random.Generator, n: int) -> np.ndarray:
        return gen.random(n)

    def conditional_rows(self, y: np.ndarray, lattice: Lattice) -> np.ndarray:
        return _normal_rows(lattice, np.zeros(y.size), self.base_variance + self.slope * y)

    def to_dict(self) -> dict:
        return {"kind": "gaussian_scale", "base_variance": self.base_variance,
                "slope": self.slope}


def model_from_dict(obj) -> object:
    if not isinstance(obj, dict) or "kind" not in obj:
        raise InvalidModel("side-information model must be an object with a 'kind' field")
    kind = obj["kind"]
    try:
        if kind == "independent":
            return IndependentSide(source_from_dict(obj.get("source", "bimodal")))
        if kind == "label_blur":
            mixture = source_from_dict(obj.get("mixture", "bimodal"))
            if not isinstance(mixture, MixtureSpec):
                raise InvalidModel("label_blur needs a mixture source")
            return LabelBlurMixture(mixture, float(obj.get("blur", 1.0)))
        if kind == "gaussian_scale":
            return GaussianScale(float(obj.get("base_variance", 0.5)), float(obj.get("slope", 1.0)))
    except (TypeError, ValueError) as exc:
        raise InvalidModel(f"malformed model of kind {kind!r}: {exc}") from None
    raise InvalidModel(f"unknown side-information model {kind!r}")


@dataclass(frozen=True)
class CcltRow:
    n: int
    h_mean: float
    h_se: float
    D_mean: float
    D_se: float
    V_mean: float
    trials: int

    CSV_HEADER = "n,h,h_se,D,D_se,V,trials"

    def csv_row(self) -> str:
        return ",".join([str(self.n)] + [repr(float(v)) for v in
                                         (self.h_mean, self.h_se, self.D_mean, self.D_se,
                                          self.V_mean)] + [str(self.trials)])


@dataclass
class CcltResult:
    """Per-``n`` averages plus the pooled conditional variance ``sigma2_hat``."""

    rows: list
    sigma2_hat: float
    sigma2_se: float
    per_trial_h: np.ndarray

    @property
    def target_entropy(self) -> float:
        return HALF_LOG_2PI_E + 0.5 * math.log(self.sigma2_hat)

    def row(self, n: int) -> CcltRow:
        for r in self.rows:
            if r.n == n:
                return r
        raise KeyError(n)

    def to_csv(self) -> str:
        return "\n".join([CcltRow.CSV_HEADER] + [r.csv_row() for r in self.rows]) + "\n"


def _check_n_list(n_list) -> list[int]:
    ns = sorted({int(n) for n in n_list})
    if not ns or any(n < 1 or n & (n - 1) for n in ns):
        raise InvalidParameter("n_list must contain powers of two")
    return ns


def cclt_experiment(model, n_list, trials: int = 256, seed: int = DEFAULT_SEED,
                    grid_points: int = 1024, width_sigmas: float = 7.0,
                    chunk_trials: int = 8, workers: int | None = None) -> CcltResult:
    """Average conditional entropy and Gaussianity gap of ``W_n`` given side values."""
    ns = _check_n_list(n_list)
    if trials < 1:
        raise InvalidParameter("trials must be at least 1")
    depth = ns[-1].bit_length() - 1
    N = ns[-1]
    lattice = Lattice.for_source(model, grid_points, width_sigmas)
    ops = RowOps(lattice, 1.0 / math.sqrt(2.0))
    wanted = [n.bit_length() - 1 for n in ns]

    def one_chunk(ids):
        y = np.stack([model.sample_side(rng.trial_generator(seed, rng.STREAM_CCLT, t), N)
                      for t in ids])
        y_unique, rowmap = np.unique(y, return_inverse=True)
        rowmap = rowmap.reshape(len(ids), N)
        F = np.ascontiguousarray(model.conditional_rows(y_unique, lattice), dtype=float)
        if not np.all(np.isfinite(F)) or np.any(F.sum(axis=1) <= 0):
            raise InvalidModel("conditional densities are not integrable on the lattice")
        clean_rows(F, CLEAN_REL, lattice.dx)
        level0 = ops.stats(F)[rowmap]
        per_level = {}
        if 0 in wanted:
            per_level[0] = level0.mean(axis=1)
        for k in range(1, depth + 1):
            ra, rb = rowmap[:, 0::2], rowmap[:, 1::2]
            keys = ra.ravel() * F.shape[0] + rb.ravel()
            uniq, inv = np.unique(keys, return_inverse=True)
            F = ops.plus(F, uniq // F.shape[0], uniq % F.shape[0])
            rowmap = inv.reshape(ra.shape)
            if k in wanted:
                per_level[k] = ops.stats(F)[rowmap].mean(axis=1)
        return per_level, level0[..., STAT_V].mean(axis=1)

    results = map_ordered(one_chunk, chunk_ids(trials, chunk_trials), workers)
    sig = np.concatenate([r[1] for r in results])
    out = []
    per_trial_h = []
    for n, k in zip(ns, wanted):
        arr = np.concatenate([r[0][k] for r in results])
        h, h_se = mean_se(arr[:, STAT_H])
        D, D_se = mean_se(arr[:, STAT_D])
        V, _ = mean_se(arr[:, STAT_V])
        out.append(CcltRow(n, h, h_se, D, D_se, V, trials))
        per_trial_h.append(arr[:, STAT_H])
    s2, s2_se = mean_se(sig)
    return CcltResult(out, s2, s2_se, np.stack(per_trial_h, axis=1))
