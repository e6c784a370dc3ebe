"""Command-line front end.

Every subcommand reads an optional JSON configuration (all fields optional),
writes its CSV or JSON artifacts into the output directory and prints a
one-line summary per level or check.  CSV files start with a ``# config=``
comment line holding the resolved configuration.

Exit status: 0 on success, 1 if a check failed, 2 on configuration errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time

import numpy as np

from .cclt import LabelBlurMixture, cclt_experiment, model_from_dict
from .checks import run_verify
from .compression import RULES, compression_experiment
from .errors import BudgetExceeded, ConfigError, InvalidInput, InvalidModel, InvalidParameter
from .harness import (ExperimentConfig, default_workers, estimate_all_paths,
                      estimate_path_sequence)
from .kernels import STAT_J, STAT_V
from .report import any_failed, report_json
from .transform import PathSpec, TransformPlan, apply_transform, inverse_transform

OUT_ENV = "HADAMARD_CLT_OUT"
DEFAULT_OUT = "hadamard_clt_out"

log = logging.getLogger("hadamard_clt")


def load_config(path: str | None) -> ExperimentConfig:
    """Parse a JSON configuration file; errors name the line or the field."""
    if path is None:
        return ExperimentConfig()
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read configuration: {exc.strerror}") from None
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    try:
        return ExperimentConfig.from_dict(obj)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _config_line(cfg: ExperimentConfig) -> str:
    return "# config=" + json.dumps(cfg.to_dict(), sort_keys=True) + "\n"


def _write(out_dir: str, name: str, text: str) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, name)
    with open(path, "w") as fh:
        fh.write(text)
    log.info("wrote %s", path)
    return path


def _cmd_simulate_path(args, cfg) -> int:
    path = PathSpec.parse(args.path)
    if path.depth > cfg.max_depth:
        cfg = cfg.replace(max_depth=path.depth)
    res = estimate_path_sequence(cfg, path, args.workers)
    _write(args.out, f"path_{path}.csv", _config_line(cfg) + res.to_csv())
    for s in res.levels:
        print(f"depth {s.depth} path {s.path}: h={s.h_mean:.6f}±{s.h_se:.1e} "
              f"V={s.V_mean:.6f} J={s.J_mean:.6f} D={s.D_mean:.3e} discarded={s.discarded}")
    return 0


def _cmd_sweep_paths(args, cfg) -> int:
    depth = cfg.max_depth if args.depth is None else args.depth
    if depth > cfg.max_depth:
        cfg = cfg.replace(max_depth=depth)
    sw = estimate_all_paths(cfg, depth, args.workers)
    for d in range(1, depth + 1):
        _write(args.out, f"sweep_depth{d}.csv", _config_line(cfg) + sw.to_csv(d))
        jv = np.abs(sw.means(d, STAT_J) * sw.means(d, STAT_V) - 1.0)
        v = sw.means(d, STAT_V)
        print(f"depth {d}: {2 ** d} paths, V in [{v.min():.6f}, {v.max():.6f}], "
              f"max |JV-1|={jv.max():.4f}")
    return 0


def _cmd_cclt(args, cfg) -> int:
    if args.model is None:
        model = LabelBlurMixture()
    else:
        try:
            model = model_from_dict(json.loads(args.model))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"--model:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    ns = [2 ** k for k in range(args.max_log_n + 1)]
    res = cclt_experiment(model, ns, cfg.trials, cfg.seed, cfg.grid_points, cfg.width_sigmas,
                          cfg.chunk_trials, args.workers)
    header = _config_line(cfg) + "# model=" + json.dumps(model.to_dict(), sort_keys=True) + "\n"
    _write(args.out, "cclt.csv", header + res.to_csv())
    for r in res.rows:
        print(f"n={r.n}: h={r.h_mean:.6f}±{r.h_se:.1e} D={r.D_mean:.3e}±{r.D_se:.1e}")
    print(f"target 0.5*log(2*pi*e*sigma2_hat) = {res.target_entropy:.6f}")
    return 0


def _cmd_verify(args, cfg) -> int:
    results = run_verify(cfg, args.workers, include_split_shift=not args.skip_split_shift)
    _write(args.out, "verify_report.json", report_json(results, cfg.to_dict()))
    for r in results:
        print(r.line())
    failed = any_failed(results)
    print(f"{sum(1 for r in results if not r.skipped)} checks, "
          f"{sum(1 for r in results if not r.passed and not r.skipped)} failed")
    return 1 if failed else 0


def _cmd_compress(args, cfg) -> int:
    if args.depth > cfg.max_depth:
        cfg = cfg.replace(max_depth=args.depth)
    rep = compression_experiment(cfg, args.depth, args.keep_fraction, args.rule,
                                 workers=args.workers)
    _write(args.out, "compression.csv", _config_line(cfg) + rep.to_csv())
    doc = {"config": cfg.to_dict(), "report": rep.to_dict()}
    _write(args.out, "compression.json", json.dumps(doc, indent=2, sort_keys=True) + "\n")
    print(f"kept {len(rep.kept_positions)} of {2 ** rep.n}: "
          f"mse_highentropy={rep.mse_highentropy:.6g}±{rep.mse_highentropy_se:.1e} "
          f"mse_random={rep.mse_random:.6g}±{rep.mse_random_se:.1e} "
          f"mse_oracle_variance={rep.mse_oracle_variance:.6g}±{rep.mse_oracle_se:.1e}")
    return 0


def read_vector(path: str) -> np.ndarray:
    """Numbers from a CSV file, comma- or newline-separated; ``#`` lines are skipped."""
    values = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            for item in line.split(","):
                item = item.strip()
                if not item:
                    continue
                try:
                    values.append(float(item))
                except ValueError:
                    raise InvalidInput(f"{path}:{lineno}: not a number: {item!r}") from None
    return np.array(values)


def _cmd_transform(args, cfg) -> int:
    plan = TransformPlan(args.lam, args.n)
    x = read_vector(args.input)
    y = inverse_transform(plan, x) if args.inverse else apply_transform(plan, x)
    header = "# " + json.dumps({"lambda": plan.lam, "n": plan.n, "inverse": args.inverse},
                               sort_keys=True) + "\n"
    text = header + "".join(f"{float(v)!r}\n" for v in y)
    _write(args.out, "transform.csv", text)
    print(f"{'inverse ' if args.inverse else ''}transform of {x.size} values, "
          f"lambda={plan.lam:.6g}, n={plan.n}")
    return 0


COMMANDS = {
    "simulate-path": _cmd_simulate_path,
    "sweep-paths": _cmd_sweep_paths,
    "cclt": _cmd_cclt,
    "verify": _cmd_verify,
    "compress": _cmd_compress,
    "transform": _cmd_transform,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration file (every field optional)")
    common.add_argument("--out", default=os.environ.get(OUT_ENV, DEFAULT_OUT),
                        help=f"output directory (default: ${OUT_ENV} or ./{DEFAULT_OUT})")
    common.add_argument("--seed", type=int, help="override the configured seed")
    common.add_argument("--workers", type=int, default=None,
                        help="worker threads (default: logical cores)")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = argparse.ArgumentParser(prog="hadamard-clt", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("simulate-path", parents=[common], help="statistics along one path")
    p.add_argument("--path", required=True, help="bit string, first performed step first")
    p = sub.add_parser("sweep-paths", parents=[common], help="statistics for every path")
    p.add_argument("--depth", type=int, help="sweep depth (default: max_depth)")
    p = sub.add_parser("cclt", parents=[common], help="conditional CLT with side information")
    p.add_argument("--model", help="side-information model as a JSON object")
    p.add_argument("--max-log-n", type=int, default=10, help="largest n is 2**max_log_n")
    p = sub.add_parser("verify", parents=[common], help="run every check")
    p.add_argument("--skip-split-shift", action="store_true",
                   help="leave out the split-and-shift ranking scenario")
    p = sub.add_parser("compress", parents=[common], help="entropy-ranked compression")
    p.add_argument("--depth", type=int, default=8)
    p.add_argument("--keep-fraction", type=float, default=0.5)
    p.add_argument("--rule", choices=RULES, default="conditional",
                   help="estimate used for dropped outputs")
    p = sub.add_parser("transform", parents=[common], help="apply the transform to a vector")
    p.add_argument("--input", required=True, help="CSV file with 2**n numbers")
    p.add_argument("--lambda", dest="lam", type=float, default=2 ** -0.5)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--inverse", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(message)s")
    if args.workers is None:
        args.workers = default_workers()
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = cfg.replace(seed=args.seed)
        start = time.perf_counter()
        status = COMMANDS[args.command](args, cfg)
        log.info("%s finished in %.1f s", args.command, time.perf_counter() - start)
        return status
    except (ConfigError, InvalidParameter, InvalidInput, InvalidModel) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except BudgetExceeded as exc:
        print(f"configuration error: {exc} (feasible depth {exc.feasible_depth})",
              file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
