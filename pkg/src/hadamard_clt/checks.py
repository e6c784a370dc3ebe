"""Executable checks of the information inequalities and polarization claims.

Every check returns :class:`~hadamard_clt.report.CheckResult` objects that
record the measured quantity, the bound it was held to and the tolerance.
Monte Carlo checks use ``3 * se`` plus a small deterministic floor for the
lattice discretization; the floors are named and can be overridden through
``ExperimentConfig.tolerances``.
"""

from __future__ import annotations

import math

import numpy as np

from . import rng
from .cclt import LabelBlurMixture, cclt_experiment
from .compression import split_shift_scenario, compression_experiment
from .density import (GaussianSpec, GridDensity, MixtureSpec, default_corpus, entropy,
                      entropy_jump, fisher_information, gaussian_smooth, gaussianity_gap,
                      kl_divergence, make_gaussian, matched_gaussian, moment, ou_flow, ou_grid,
                      scale_shift, scaled_convolve, tail_variance, variance)
from .errors import InvalidParameter
from .harness import (GRID_FLOOR_NATS, MAX_SWEEP_DEPTH, ExperimentConfig, SweepResult,
                      estimate_all_paths, estimate_path_sequence, mean_se)
from .kernels import HALF_LOG_2PI_E, STAT_D, STAT_H, STAT_J, STAT_V
from .report import CheckResult, at_least, at_most, close_to, skipped
from .sources import BIMODAL, is_gaussian, source_density
from .transform import DEFAULT_LAMBDA, PathSpec, path_index

LAMBDAS = (0.3, DEFAULT_LAMBDA, 0.9)
FLOW_TIMES = (0.1, 0.5, 1.0)
FLOW_STEP = 1e-3

# default thresholds; each can be overridden by name in cfg.tolerances
DEFAULTS = {
    "closed_form_rel": 1e-3,
    "jump_floor": 1e-3,
    "flow_derivative": 5e-3,
    "identity_floor": 1e-6,
    "fisher_rel": 1e-3,
    "median_D": 0.02,
    "D_ratio": 0.25,
    "D_floor": 1e-6,
    "hv_gap": 0.02,
    "polar_hv_gap": 0.05,
    "JV": 0.05,
    "martingale_floor": 2e-3,
    "monotone_rel": 1e-3,
    "cclt_target": 0.01,
    "cclt_decay": 0.25,
    "parseval": 1e-10,
}


def _tol(cfg: ExperimentConfig | None, name: str) -> float:
    return DEFAULTS[name] if cfg is None else cfg.tolerance(name, DEFAULTS[name])


def _half_log(v: float) -> float:
    return HALF_LOG_2PI_E + 0.5 * math.log(v)


def inapplicable_reason(cfg: ExperimentConfig) -> str | None:
    """Why the polarization checks do not apply to ``cfg.source``, if they don't."""
    a = getattr(cfg.source, "noise_variance", None)
    if a is None or not a > 0:
        return "source is not of the form xi_hat + G_a with a > 0"
    return None


# ---------------------------------------------------------------------------
# identities on fixed densities


def _relative(measured: float, target: float) -> float:
    return abs(measured - target) / max(abs(target), 1e-300)


# variances of the Gaussian members of the default corpus
GAUSSIAN_VARIANCES = {"gauss_1": 1.0, "gauss_4": 4.0}


def _closed_forms(corpus, tol) -> list[CheckResult]:
    out = []
    for name, f in corpus.items():
        if name not in GAUSSIAN_VARIANCES:
            continue
        v = variance(f)
        spec_var = GAUSSIAN_VARIANCES[name]
        out += [
            at_most(f"closed_form.entropy[{name}]", _relative(entropy(f), _half_log(spec_var)),
                    tol, 0.0, "relative error of h against 0.5*log(2*pi*e*sigma^2)"),
            at_most(f"closed_form.fisher[{name}]",
                    _relative(fisher_information(f), 1.0 / spec_var), tol, 0.0,
                    "relative error of J against 1/sigma^2"),
            at_most(f"closed_form.variance[{name}]", _relative(v, spec_var), tol, 0.0,
                    "relative error of V against sigma^2"),
        ]
    return out


def _flow_derivatives(name: str, f: GridDensity, tol: float) -> list[CheckResult]:
    out = []
    heat_grid = (f.lo - 8.0 * math.sqrt(1.1), f.dx,
                 int(math.ceil((f.hi - f.lo + 16.0 * math.sqrt(1.1)) / f.dx)) + 1)
    if heat_grid[2] > 4096:
        width = heat_grid[2] * f.dx
        heat_grid = (heat_grid[0], width / 4095, 4096)
    og = ou_grid(f)
    for t in FLOW_TIMES:
        hp = entropy(gaussian_smooth(f, t + FLOW_STEP, grid=heat_grid))
        hm = entropy(gaussian_smooth(f, t - FLOW_STEP, grid=heat_grid))
        rhs = 0.5 * fisher_information(gaussian_smooth(f, t, grid=heat_grid))
        out.append(close_to(f"de_bruijn.heat[{name},t={t}]", (hp - hm) / (2 * FLOW_STEP), rhs, tol,
                            "central difference of h(X + sqrt(t) G) against J/2"))
        hp = entropy(ou_flow(f, t + FLOW_STEP, og))
        hm = entropy(ou_flow(f, t - FLOW_STEP, og))
        rhs = fisher_information(ou_flow(f, t, og)) - 1.0
        out.append(close_to(f"de_bruijn.ou[{name},t={t}]", (hp - hm) / (2 * FLOW_STEP), rhs, tol,
                            "central difference of h along the OU flow against J - 1"))
    return out


def _sum_moment_bounds(name: str, f: GridDensity, floor: float) -> list[CheckResult]:
    """Second and fourth moments and tail variance of normalized sums of copies."""
    centered = scale_shift(f, 1.0, -moment(f, 1, central=False))
    m2, m4 = moment(centered, 2), moment(centered, 4)
    y2 = scaled_convolve(centered, centered, DEFAULT_LAMBDA)
    y4 = scaled_convolve(y2, y2, DEFAULT_LAMBDA)
    out = []
    for label, y in (("2", y2), ("4", y4)):
        out.append(close_to(f"sum_moments.second[{name},k={label}]", moment(y, 2), m2,
                            1e-3 * m2, "E Y^2 = E X^2 for unit-norm weights"))
        out.append(at_most(f"sum_moments.fourth[{name},k={label}]", moment(y, 4),
                           m4 + 3 * m2 * m2, floor, "E Y^4 <= E X^4 + 3 (E X^2)^2"))
        for r_sd in (1.0, 2.0, 3.0):
            R = r_sd * math.sqrt(m2)
            bound = min(math.sqrt((m4 + 3 * m2 * m2) * m2) / R, m2)
            out.append(at_most(f"sum_moments.tail[{name},k={label},R={r_sd:g}sd]",
                               tail_variance(y, R), bound, floor,
                               "L_Y(R) <= min(sqrt((E X^4 + 3 (E X^2)^2) E X^2) / R, E X^2)"))
    return out


def check_identities(corpus: dict | None = None,
                     cfg: ExperimentConfig | None = None) -> list[CheckResult]:
    """Information inequalities evaluated by quadrature on every corpus density.

    Covers the Gaussian closed forms, the Cramer-Rao bound, the maximum
    entropy property, the entropy jump and Fisher convolution inequalities,
    de Bruijn's identity for the heat and Ornstein-Uhlenbeck flows, the bound
    of the Gaussianity gap by ``log(VJ)/2``, the identity between that gap
    and the KL divergence to the matched Gaussian, and moment and tail bounds
    for normalized sums.
    """
    corpus = default_corpus() if corpus is None else dict(corpus)
    if not corpus:
        raise InvalidParameter("corpus must not be empty")
    floor = _tol(cfg, "identity_floor")
    # finite-difference Fisher information is accurate to a relative 1e-4 or so,
    # so inequalities that are tight for Gaussians get a relative allowance
    frel = _tol(cfg, "fisher_rel")
    out = _closed_forms(corpus, _tol(cfg, "closed_form_rel"))
    funcs = {}
    for name, f in corpus.items():
        h, V, J = entropy(f), variance(f), fisher_information(f)
        funcs[name] = (h, V, J)
        gap = gaussianity_gap(f)
        out += [
            at_least(f"cramer_rao[{name}]", J * V, 1.0, frel, "J * V >= 1"),
            at_least(f"max_entropy[{name}]", gap, 0.0, floor, "0.5*log(2*pi*e*V) - h >= 0"),
            at_most(f"gap_by_fisher[{name}]", gap, 0.5 * math.log(V * J), frel,
                    "D <= 0.5*log(V J)"),
            close_to(f"gap_is_kl[{name}]", kl_divergence(f, matched_gaussian(f)), gap, 1e-3,
                     "KL to the matched Gaussian equals the Gaussianity gap"),
        ]
    jump_floor = _tol(cfg, "jump_floor")
    names = sorted(corpus)
    for lam in LAMBDAS:
        mu2 = 1.0 - lam * lam
        for a in names:
            for b in names:
                fa, fb = corpus[a], corpus[b]
                conv = scaled_convolve(fa, fb, lam)
                jump = entropy(conv) - lam * lam * funcs[a][0] - mu2 * funcs[b][0]
                out.append(at_least(f"entropy_jump[{a},{b},lam={lam:.4g}]", jump, 0.0, jump_floor,
                                    "h(lam X + mu Y) - lam^2 h(X) - mu^2 h(Y) >= 0"))
                out.append(at_most(f"fisher_convolution[{a},{b},lam={lam:.4g}]",
                                   fisher_information(conv),
                                   lam * lam * funcs[a][2] + mu2 * funcs[b][2],
                                   frel * (lam * lam * funcs[a][2] + mu2 * funcs[b][2]),
                                   "J(lam X + mu Y) <= lam^2 J(X) + mu^2 J(Y)"))
    for var in (1.0, 4.0):
        g1 = make_gaussian(GaussianSpec(0.0, var))
        g2 = make_gaussian(GaussianSpec(3.0, var))
        for lam in LAMBDAS:
            out.append(close_to(f"entropy_jump_gaussian[var={var:g},lam={lam:.4g}]",
                                entropy_jump(g1, g2, lam), 0.0, jump_floor,
                                "zero jump for equal-variance Gaussians"))
    flow_tol = _tol(cfg, "flow_derivative")
    for name in names:
        out += _flow_derivatives(name, corpus[name], flow_tol)
        out += _sum_moment_bounds(name, corpus[name], floor)
    return out


# ---------------------------------------------------------------------------
# polarization along single paths


def check_main_theorem_conclusions(cfg: ExperimentConfig, path: PathSpec,
                                   depth: int | None = None,
                                   workers: int | None = None) -> list[CheckResult]:
    """Gaussianization along ``path`` compared between depth ``n/2`` and ``n``.

    (i) the median per-node Gaussianity gap at depth ``n`` is below
    ``median_D`` and below ``D_ratio`` times its depth-``n/2`` value;
    (ii) the mean absolute deviation of the per-node conditional variance does
    not grow from ``n/2`` to ``n``; (iii) ``|h_n - log(2 pi e V_n)/2|`` is
    below ``hv_gap``.
    """
    tag = f"[{path}]"
    reason = inapplicable_reason(cfg)
    if reason:
        return [skipped("main_theorem" + tag, reason)]
    n = path.depth if depth is None else depth
    if n < 2 or n > path.depth:
        raise InvalidParameter("depth must lie in [2, len(path)]")
    res = estimate_path_sequence(cfg, path.prefix(n), workers)
    half = n // 2
    d_n, d_half = res.median_D(n), res.median_D(half)
    out = [
        at_most("main_theorem.median_D" + tag, d_n, _tol(cfg, "median_D"), 0.0,
                f"median per-node D at depth {n}"),
        at_most("main_theorem.D_contraction" + tag, d_n, _tol(cfg, "D_ratio") * d_half,
                _tol(cfg, "D_floor"), f"median D at depth {n} against D_ratio x depth {half}"),
    ]

    def mad_se(m):
        v = res.node_values(m, STAT_V)
        dev = np.abs(v - v.mean())
        return float(dev.mean()), float(dev.std(ddof=1) / math.sqrt(dev.size)) if dev.size > 1 else 0.0

    mad_n, se_n = mad_se(n)
    mad_h, se_h = mad_se(half)
    out.append(at_most("main_theorem.variance_spread" + tag, mad_n, mad_h,
                       3.0 * math.hypot(se_n, se_h) + 1e-12,
                       f"mean |V - E V| at depth {n} against depth {half}; tol = 3 se"))
    lv = res.levels[n - 1]
    out.append(at_most("main_theorem.h_vs_V" + tag, abs(lv.h_mean - _half_log(lv.V_mean)),
                       _tol(cfg, "hv_gap"), 3.0 * lv.h_se,
                       f"|h_n - 0.5*log(2*pi*e*V_n)| at depth {n}; tol = 3 se(h)"))
    return out


def check_fisher_limit(cfg: ExperimentConfig, path: PathSpec, depth: int | None = None,
                       workers: int | None = None) -> list[CheckResult]:
    """``J_n V_n`` close to one at depth ``n`` and ``J_n`` inside ``[1/V(xi), 1/a]``."""
    tag = f"[{path}]"
    reason = inapplicable_reason(cfg)
    if reason:
        return [skipped("fisher_limit" + tag, reason)]
    n = path.depth if depth is None else depth
    res = estimate_path_sequence(cfg, path.prefix(n), workers)
    lv = res.levels[n - 1]
    f = source_density(cfg.source, 2048)
    a = cfg.source.noise_variance
    frel = _tol(cfg, "fisher_rel")
    return [
        at_most("fisher_limit.JV" + tag, abs(lv.J_mean * lv.V_mean - 1.0), _tol(cfg, "JV"), 0.0,
                f"|J_n V_n - 1| at depth {n}"),
        at_least("fisher_limit.J_lower" + tag, lv.J_mean, 1.0 / variance(f),
                 3.0 * lv.J_se + frel / variance(f),
                 "J_n >= 1/V(xi); tol = 3 se + lattice floor"),
        at_most("fisher_limit.J_upper" + tag, lv.J_mean, 1.0 / a, 3.0 * lv.J_se + frel / a,
                "J_n <= 1/a; tol = 3 se + lattice floor"),
    ]


# ---------------------------------------------------------------------------
# all paths


def _sweep(cfg, depth, sweep, workers) -> SweepResult:
    if sweep is not None and sweep.depth >= depth and sweep.config == cfg:
        return sweep
    return estimate_all_paths(cfg, depth, workers)


def sweep_depth(cfg: ExperimentConfig) -> int:
    return min(cfg.max_depth, MAX_SWEEP_DEPTH)


def check_polar_theorem(cfg: ExperimentConfig, depth: int | None = None,
                        sweep: SweepResult | None = None,
                        workers: int | None = None) -> list[CheckResult]:
    """Worst case over all paths of one depth.

    Checks ``|h_n - log(2 pi e V_n)/2|``, ``|J_n V_n - 1|`` and the range
    ``1/J(xi) <= V_n <= V(xi)``; the range uses ``3 se`` of the extreme path
    plus the lattice floor.
    """
    reason = inapplicable_reason(cfg)
    if reason:
        return [skipped("polar_theorem", reason)]
    depth = sweep_depth(cfg) if depth is None else depth
    sw = _sweep(cfg, depth, sweep, workers)
    arr = sw.trial_means[depth]
    T = arr.shape[0]
    h = arr[..., STAT_H].mean(axis=0)
    V = arr[..., STAT_V].mean(axis=0)
    J = arr[..., STAT_J].mean(axis=0)
    V_se = arr[..., STAT_V].std(axis=0, ddof=1) / math.sqrt(T) if T > 1 else np.zeros_like(V)
    hv = np.abs(h - (HALF_LOG_2PI_E + 0.5 * np.log(V)))
    jv = np.abs(J * V - 1.0)
    f = source_density(cfg.source, 2048)
    J_src, V_src = fisher_information(f), variance(f)
    lo, hi = int(np.argmin(V)), int(np.argmax(V))
    worst = lambda i: str(PathSpec.from_index(depth, i + 1))  # noqa: E731
    floor = 1e-3
    return [
        at_most("polar_theorem.h_vs_V", float(hv.max()), _tol(cfg, "polar_hv_gap"), 0.0,
                f"max over {V.size} paths at depth {depth}; worst path {worst(int(hv.argmax()))}"),
        at_most("polar_theorem.JV", float(jv.max()), _tol(cfg, "JV"), 0.0,
                f"max |J_n V_n - 1| over {V.size} paths at depth {depth}; "
                f"worst path {worst(int(jv.argmax()))}"),
        at_least("polar_theorem.V_lower", float(V[lo]), 1.0 / J_src,
                 3.0 * float(V_se[lo]) + floor * V_src,
                 f"min V_n >= 1/J(xi) at path {worst(lo)}; tol = 3 se + lattice floor"),
        at_most("polar_theorem.V_upper", float(V[hi]), V_src,
                3.0 * float(V_se[hi]) + floor * V_src,
                f"max V_n <= V(xi) at path {worst(hi)}; tol = 3 se + lattice floor"),
    ]


def default_eps(cfg: ExperimentConfig, positions=(0.25, 0.5, 0.75)) -> list[float]:
    """Thresholds at geometric positions between ``1/J(xi)`` and ``V(xi)``."""
    f = source_density(cfg.source, 2048)
    lo, hi = 1.0 / fisher_information(f), variance(f)
    return [lo ** (1.0 - q) * hi ** q for q in positions]


def vest_bracket(h: float, V: float, J: float, eps: float) -> tuple[float, float]:
    """Lower and upper bound on the fraction of paths with limit variance at most ``eps``."""
    if not 1.0 / J < eps < V:
        raise InvalidParameter(f"eps={eps:.6g} must lie strictly between 1/J={1 / J:.6g} and V={V:.6g}")
    lower = 1.0 - (h - (HALF_LOG_2PI_E - 0.5 * math.log(J))) / (0.5 * math.log(eps * J))
    upper = (_half_log(V) - h) / (0.5 * math.log(V / eps))
    return lower, upper


def check_vest_bounds(cfg: ExperimentConfig, depth: int = 8, eps_list=None,
                      sweep: SweepResult | None = None,
                      workers: int | None = None) -> list[CheckResult]:
    """Fraction of depth-``n`` paths with ``V_n <= eps`` against its bracket.

    The slack is the fraction of paths whose ``V_n`` lies within ``3 se`` of
    ``eps``, i.e. the paths whose side of the threshold is not resolved by
    the Monte Carlo estimate.
    """
    reason = inapplicable_reason(cfg)
    if reason:
        return [skipped("vest_bounds", reason)]
    f = source_density(cfg.source, 2048)
    h, V, J = entropy(f), variance(f), fisher_information(f)
    if is_gaussian(cfg.source) or not 1.0 / J < V * (1 - 1e-6):
        return [skipped("vest_bounds", "1/J(xi) = V(xi): the admissible range of eps is empty")]
    eps_list = default_eps(cfg) if eps_list is None else list(eps_list)
    brackets = [vest_bracket(h, V, J, e) for e in eps_list]
    sw = _sweep(cfg, depth, sweep, workers)
    arr = sw.trial_means[depth][..., STAT_V]
    T = arr.shape[0]
    Vn = arr.mean(axis=0)
    se = arr.std(axis=0, ddof=1) / math.sqrt(T) if T > 1 else np.zeros_like(Vn)
    out = []
    for eps, (lower, upper) in zip(eps_list, brackets):
        frac = float(np.mean(Vn <= eps))
        slack = float(np.mean(np.abs(Vn - eps) <= 3.0 * se))
        ctx = f"fraction of {Vn.size} depth-{depth} paths with V_n <= {eps:.4g}; slack = unresolved paths"
        out.append(at_least(f"vest_bounds.lower[eps={eps:.4g}]", frac, lower, slack, ctx))
        out.append(at_most(f"vest_bounds.upper[eps={eps:.4g}]", frac, upper, slack, ctx))
    return out


def check_martingale(cfg: ExperimentConfig, depth: int = 6, sweep: SweepResult | None = None,
                     workers: int | None = None) -> CheckResult:
    """``(h_{m+1}(w0) + h_{m+1}(w1)) / 2 = h_m(w)`` for every node up to ``depth``.

    Differences are paired within trials; the measured value is the worst
    ratio of ``|mean difference|`` to ``3 (se + martingale_floor)``.
    """
    floor = _tol(cfg, "martingale_floor")
    sw = _sweep(cfg, depth, sweep, workers)
    worst, where = 0.0, ""
    for m in range(depth):
        parent = sw.trial_means[m][..., STAT_H]
        kids = sw.trial_means[m + 1][..., STAT_H]
        diff = 0.5 * (kids[:, 0::2] + kids[:, 1::2]) - parent
        for c in range(diff.shape[1]):
            mu, se = mean_se(diff[:, c])
            ratio = abs(mu) / (3.0 * (se + floor))
            if ratio > worst:
                worst = ratio
                where = f"node {PathSpec.from_index(m, c + 1) if m else 'root'} at depth {m}"
    return at_most("martingale", worst, 1.0, 0.0,
                   f"max |mean diff| / (3 (se + {floor:g})) over nodes up to depth {depth}; "
                   f"worst {where}")


def tested_paths(cfg: ExperimentConfig, depth: int, extra: int = 4) -> list[PathSpec]:
    """Constant, alternating and a few random paths of length ``depth``."""
    gen = rng.trial_generator(cfg.seed, rng.STREAM_PATH_SAMPLE, 0)
    paths = [PathSpec((0,) * depth), PathSpec((1,) * depth),
             PathSpec(tuple(i % 2 for i in range(depth))),
             PathSpec(tuple(1 - i % 2 for i in range(depth)))]
    for _ in range(extra):
        paths.append(PathSpec(tuple(int(b) for b in gen.integers(0, 2, depth))))
    unique = []
    for p in paths:
        if p not in unique:
            unique.append(p)
    return unique


def check_monotone(cfg: ExperimentConfig, depth: int | None = None,
                   sweep: SweepResult | None = None,
                   workers: int | None = None) -> list[CheckResult]:
    """``V_m`` and ``J_m`` nonincreasing along tested paths, ``V J >= 1`` everywhere.

    A step counts as an increase only beyond ``3 se`` of the paired
    difference; the measured value is the largest remaining increase relative
    to the previous level, held to ``monotone_rel``.
    """
    depth = sweep_depth(cfg) if depth is None else depth
    sw = _sweep(cfg, depth, sweep, workers)
    rel = _tol(cfg, "monotone_rel")
    out = []
    for stat, label in ((STAT_V, "V"), (STAT_J, "J")):
        worst, where = -math.inf, ""
        for p in tested_paths(cfg, depth):
            for m in range(depth):
                a = sw.trial_means[m][:, int(str(p.prefix(m)) or "0", 2), stat]
                b = sw.trial_means[m + 1][:, int(str(p.prefix(m + 1)), 2), stat]
                mu, se = mean_se(b - a)
                excess = (mu - 3.0 * se) / abs(float(np.mean(a)))
                if excess > worst:
                    worst, where = excess, f"{p} step {m}->{m + 1}"
        out.append(at_most(f"monotone.{label}", worst, rel, 0.0,
                           f"largest relative increase beyond 3 se; worst {where}"))
    worst, where = math.inf, ""
    for d in range(1, depth + 1):
        arr = sw.trial_means[d]
        T = arr.shape[0]
        V = arr[..., STAT_V].mean(axis=0)
        J = arr[..., STAT_J].mean(axis=0)
        lin = J[None, :] * arr[..., STAT_V] + V[None, :] * arr[..., STAT_J]
        se = lin.std(axis=0, ddof=1) / math.sqrt(T) if T > 1 else np.zeros_like(V)
        score = V * J + 3.0 * se
        i = int(np.argmin(score))
        if score[i] < worst:
            worst, where = float(score[i]), f"{PathSpec.from_index(d, i + 1)}"
    out.append(at_least("monotone.VJ", worst, 1.0, rel,
                        f"min over all paths up to depth {depth} of V_n J_n + 3 se; worst {where}"))
    return out


# ---------------------------------------------------------------------------
# conditional CLT and compression


def cclt_model(cfg: ExperimentConfig):
    src = cfg.source if isinstance(cfg.source, MixtureSpec) and not is_gaussian(cfg.source) \
        else BIMODAL
    return LabelBlurMixture(src, 1.0)


def check_cclt(cfg: ExperimentConfig, model=None, max_log_n: int = 10,
               workers: int | None = None) -> list[CheckResult]:
    """Conditional entropy of normalized sums given side information.

    ``h_n`` must increase along ``n = 2**k`` (paired differences, ``3 se``),
    reach ``log(2 pi e sigma^2)/2`` within ``cclt_target`` at the largest
    ``n``, and the gap ``D_n`` must not increase beyond ``2 se``.  The decay
    of ``D_n`` is checked only qualitatively: the last value is at most
    ``cclt_decay`` times the first.
    """
    model = cclt_model(cfg) if model is None else model
    ns = [2 ** k for k in range(max_log_n + 1)]
    res = cclt_experiment(model, ns, cfg.trials, cfg.seed, cfg.grid_points, cfg.width_sigmas,
                          cfg.chunk_trials, workers)
    worst_inc, where = math.inf, ""
    worst_d, where_d = -math.inf, ""
    for i in range(len(ns) - 1):
        mu, se = mean_se(res.per_trial_h[:, i + 1] - res.per_trial_h[:, i])
        if mu + 3.0 * se < worst_inc:
            worst_inc, where = mu + 3.0 * se, f"n={ns[i]}->{ns[i + 1]}"
        a, b = res.rows[i], res.rows[i + 1]
        excess = b.D_mean - a.D_mean - 2.0 * math.hypot(a.D_se, b.D_se)
        if excess > worst_d:
            worst_d, where_d = excess, f"n={ns[i]}->{ns[i + 1]}"
    last, first = res.rows[-1], res.rows[0]
    return [
        at_least("cclt.h_increasing", worst_inc, 0.0, 0.0,
                 f"min over steps of mean + 3 se of h_2n - h_n; worst {where}"),
        close_to("cclt.h_limit", last.h_mean, res.target_entropy, _tol(cfg, "cclt_target"),
                 f"h at n={last.n} against 0.5*log(2*pi*e*sigma2_hat), "
                 f"sigma2_hat={res.sigma2_hat:.6g}"),
        at_most("cclt.D_nonincreasing", worst_d, 0.0, 0.0,
                f"max over steps of D_2n - D_n - 2 se; worst {where_d}"),
        at_most("cclt.D_decay", last.D_mean, _tol(cfg, "cclt_decay") * first.D_mean, 0.0,
                f"D at n={last.n} against cclt_decay x D at n=1 (qualitative)"),
    ]


def check_compression(cfg: ExperimentConfig, depth: int = 8, sweep: SweepResult | None = None,
                      workers: int | None = None) -> list[CheckResult]:
    """Entropy-ranked selection beats random selection and nearly matches the variance oracle."""
    ranking = _sweep(cfg, depth, sweep, workers).level(depth)
    rep = compression_experiment(cfg, depth, 0.5, ranking=ranking, workers=workers)
    out = [at_most("compression.parseval", rep.parseval_error, _tol(cfg, "parseval"), 0.0,
                   "max relative gap between source and output squared errors")]
    if is_gaussian(cfg.source):
        out.append(skipped("compression.gain", "Gaussian source: every position has the same V"))
    else:
        out.append(at_least("compression.gain", rep.gain, 3.0 * rep.gain_se, 0.0,
                            f"mse_random - mse_highentropy >= 3 se; mse_high={rep.mse_highentropy:.6g}"
                            f" mse_random={rep.mse_random:.6g}"))
        all_zero = path_index(PathSpec((0,) * depth))
        out.append(at_least("compression.keeps_plus_chain", float(all_zero in rep.kept_positions),
                            1.0, 0.0, "the all-plus position is among the kept outputs"))
    out.append(at_most("compression.oracle_gap", rep.mse_oracle_variance, rep.mse_highentropy,
                       3.0 * rep.oracle_gap_se,
                       "variance-ranked selection is no worse than entropy-ranked; tol = 3 se"))
    return out


# ---------------------------------------------------------------------------
# full suite


def run_verify(cfg: ExperimentConfig, workers: int | None = None,
               include_split_shift: bool = True) -> list[CheckResult]:
    """Every check on one configuration, in a fixed order.

    Path checks use the all-zeros and all-ones paths of length
    ``cfg.max_depth``; all-path checks share one sweep of depth
    ``min(max_depth, 10)``.
    """
    n = cfg.max_depth
    d = sweep_depth(cfg)
    results = check_identities(cfg=cfg)
    reason = inapplicable_reason(cfg)
    if reason or n < 2:
        results.append(skipped("polarization", reason or "max_depth below 2"))
        return results
    for bits in ((0,) * n, (1,) * n):
        results += check_main_theorem_conclusions(cfg, PathSpec(bits), workers=workers)
        results += check_fisher_limit(cfg, PathSpec(bits), workers=workers)
    sw = estimate_all_paths(cfg, d, workers)
    results += check_polar_theorem(cfg, d, sw)
    results += check_vest_bounds(cfg, min(8, d), sweep=sw)
    results.append(check_martingale(cfg, min(6, d), sweep=sw))
    results += check_monotone(cfg, d, sweep=sw)
    results += check_cclt(cfg, max_log_n=n, workers=workers)
    results += check_compression(cfg, min(8, d), sweep=sw, workers=workers)
    if include_split_shift:
        from .sources import SPLIT_SHIFT
        sub = cfg.replace(source=SPLIT_SHIFT, max_depth=min(8, d), tolerances=())
        results += split_shift_scenario(sub, min(8, d), workers)
    return results
