"""Command line entry point: ``ppclass {simulate,estimate,bench,classify}``.

Exit codes: 0 success, 2 configuration or parse error, 3 numeric or invariant failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .core import InvariantError, LabeledPattern, Window
from .io import (
    ConfigError,
    experiment_spec_from_config,
    load_config,
    read_dataset,
    read_patterns,
    window_from_config,
    write_grid,
    write_patterns,
    write_result,
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

logger = logging.getLogger("ppclass")


def _cmd_simulate(args) -> None:
    from .simulate import SCENARIO_INTENSITIES, StraussSpec, sample_poisson, sample_strauss, scenario_intensity

    seeds = np.random.SeedSequence(args.seed).spawn(args.n)
    if args.scenario == "strauss":
        if len(args.params) not in (3, 4):
            raise ConfigError("strauss takes parameters: beta gamma r [side]")
        beta, gamma, r = args.params[:3]
        side = args.params[3] if len(args.params) == 4 else 10.0
        try:
            spec = StraussSpec(beta, gamma, r, Window.square(0.0, side), args.mcmc_steps)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        patterns = [sample_strauss(spec, s) for s in seeds]
    elif args.scenario in SCENARIO_INTENSITIES:
        try:
            spec = scenario_intensity(args.scenario, args.params)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        patterns = [sample_poisson(spec, s) for s in seeds]
    else:
        raise ConfigError(f"unknown scenario {args.scenario!r}")
    labeled = [LabeledPattern(p, args.label, f"{args.prefix}{i}") for i, p in enumerate(patterns)]
    write_patterns(args.out, labeled)


def _cmd_estimate(args) -> None:
    from .intensity import IntensityEstimate, KernelSpec

    window = Window(tuple(args.window[0::2]), tuple(args.window[1::2])) if args.window else None
    patterns = read_patterns(args.input, window)
    if not patterns:
        raise ConfigError(f"{args.input}: no patterns to estimate from")
    w = patterns[0].pattern.window
    try:
        kernel = KernelSpec(args.kernel, args.sigma, w.dim)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    est = IntensityEstimate([lp.pattern for lp in patterns], kernel, args.grid)
    nodes, _ = w.grid(args.grid)
    write_grid(args.out, nodes, est(nodes))


def _cmd_bench(args) -> None:
    from .experiments import run_experiment, sweep_k, sweep_sigma

    cfg = load_config(args.config)
    spec = experiment_spec_from_config(cfg)
    mode = cfg.get("mode", "experiment")
    if mode == "experiment":
        result = run_experiment(spec)
    elif mode == "sweep_k":
        result = sweep_k(spec, cfg.get("k_list", [1, 3, 5, 7, 9, 11, 15]))
    elif mode == "sweep_sigma":
        if "sigma_pairs" not in cfg:
            raise ConfigError("sweep_sigma needs sigma_pairs")
        result = sweep_sigma(spec, cfg["sigma_pairs"])
    else:
        raise ConfigError(f"bench does not run mode {mode!r}")
    out = cfg.get("output", {})
    json_path = Path(args.out or out.get("json", "result.json"))
    write_result(result, json_path, out.get("csv"))
    for name, mean in result.means.items():
        logger.info("%s mean error %.4f", name, mean)


def _cmd_classify(args) -> None:
    from .experiments import classify_dataset

    cfg = load_config(args.config) if args.config else {}
    train, test = read_dataset(args.train, args.test, window_from_config(cfg))
    options = {k: cfg[k] for k in ("classifiers", "k", "sigma", "cv", "kernel", "grid") if k in cfg}
    try:
        report = classify_dataset(train, test, options)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    Path(args.out).write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    for name, err in report.errors.items():
        logger.info("%s test error %.4f", name, err)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ppclass", description="Classification of spatial point patterns.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="sample patterns from a scenario intensity or a Strauss process")
    p.add_argument("--scenario", required=True)
    p.add_argument("--params", type=float, nargs="*", default=[])
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--label", type=int, default=None)
    p.add_argument("--prefix", default="p", help="pattern_id prefix")
    p.add_argument("--mcmc-steps", type=int, default=20000)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("estimate", help="export the kernel intensity estimate on a grid")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--grid", type=int, default=64)
    p.add_argument("--kernel", default="gaussian")
    p.add_argument("--window", type=float, nargs=4, metavar=("XMIN", "XMAX", "YMIN", "YMAX"))
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser("bench", help="run an experiment or sweep from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="result JSON path (overrides output.json)")
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("classify", help="train on one CSV, evaluate on another")
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_classify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "n", 1) is not None and getattr(args, "n", 1) < 0:
        print("error: --n must be nonnegative", file=sys.stderr)
        return EXIT_CONFIG
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InvariantError, FloatingPointError, ArithmeticError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except Exception as exc:
        cause = exc.__cause__
        if isinstance(cause, ConfigError):
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        if isinstance(cause, InvariantError):
            print(f"numeric error: {exc}", file=sys.stderr)
            return EXIT_NUMERIC
        raise
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
