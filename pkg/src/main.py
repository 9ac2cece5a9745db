import argparse
import json
import sys
from typing import List, Optional
import numpy as np
from pydantic import ValidationError
from src.config import OUTPUT_DIR, THREADS
from src.csv_processor import save_dataset_csv, save_prior_csv
from src.data_loader import generate_concentric_circles, generate_spiral
from src.evaluate import run_evaluation
from src.exceptions import HeatflowError, ReportError
from src.experiment import ExperimentRunner, fit_method, method_config, run_experiment
from src.logging_config import logger
from src.schemas import ExperimentConfig, load_experiment_config

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_PARTIAL = 2


def _load_config(path: str, overrides: dict) -> ExperimentConfig:
    """Parse the JSON config; flags given on the command line win over its fields."""
    with open(path, 'r', encoding='utf-8') as f:
        data = json.load(f)
    data.update({k: v for k, v in overrides.items() if v is not None})
    return load_experiment_config(data)


def cmd_run(args) -> int:
    config = _load_config(args.config, {'seed': args.seed, 'output_dir': args.out, 'threads': args.threads})
    threads = config.threads or THREADS
    logger.info(f"Experiment {config.experiment}: methods={config.methods}, n={config.n}, m={config.m}, "
                f"repetitions={config.repetitions}")
    try:
        result = run_experiment(config, out_dir=config.output_dir, threads=threads)
    except ReportError:
        return EXIT_PARTIAL
    total = len(result.runs)
    print(f"\n=== Experiment Summary ===")
    print(f"Runs: {total}, failed: {result.failed}")
    print(f"Reports: {config.output_dir}")
    return EXIT_PARTIAL if result.failed else EXIT_OK


def cmd_gen(args) -> int:
    if args.kind == "circles":
        dataset = generate_concentric_circles(args.n, args.m, args.seed)
    else:
        dataset = generate_spiral(args.n, args.m, args.noise_sd, args.seed)
    save_dataset_csv(dataset, args.out)
    logger.info(f"Wrote {args.kind} dataset (n={dataset.n}, m={dataset.m}) to {args.out}")
    return EXIT_OK


def cmd_prior(args) -> int:
    config = _load_config(args.config, {'seed': args.seed})
    if args.method not in config.methods:
        config = config.model_copy(update={'methods': [args.method]})
    runner = ExperimentRunner(config)
    dataset = runner.make_dataset(runner.seed_for(0))
    if not 0 <= args.reference < dataset.n:
        raise ValueError(f"reference index must lie in [0, {dataset.n}), got {args.reference}")
    report = fit_method(args.method, dataset, method_config(config, args.method, runner.seed_for(0)))
    values = report.kernel.block([args.reference], np.arange(dataset.n))[0]
    save_prior_csv(dataset.cloud.points, values, args.reference, args.out)
    logger.info(f"Prior covariance against point {args.reference} written to {args.out}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    try:
        run_evaluation(args.runs, args.out)
    except ReportError as e:
        logger.error(str(e))
        return EXIT_PARTIAL
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="heatflow", description="Heat-kernel Gaussian process experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Run an experiment config")
    run.add_argument('--config', required=True, help='Experiment JSON file')
    run.add_argument('--threads', type=int, help='Worker pool size (default: HEATFLOW_THREADS)')
    run.add_argument('--seed', type=int, help='Base seed')
    run.add_argument('--out', type=str, help=f'Output directory (default: config or {OUTPUT_DIR})')
    run.set_defaults(handler=cmd_run)

    gen = sub.add_parser("gen", help="Generate a synthetic dataset CSV")
    gen.add_argument('kind', choices=["circles", "spiral"])
    gen.add_argument('--n', type=int, required=True)
    gen.add_argument('--m', type=int, required=True)
    gen.add_argument('--seed', type=int, default=0)
    gen.add_argument('--noise-sd', type=float, default=0.1, help='Spiral response noise')
    gen.add_argument('--out', type=str, required=True)
    gen.set_defaults(handler=cmd_gen)

    prior = sub.add_parser("prior", help="Export the fitted covariance against one reference point")
    prior.add_argument('--config', required=True)
    prior.add_argument('--method', required=True)
    prior.add_argument('--reference', type=int, required=True, help='0-based cloud index')
    prior.add_argument('--seed', type=int)
    prior.add_argument('--out', type=str, required=True)
    prior.set_defaults(handler=cmd_prior)

    evaluate = sub.add_parser("evaluate", help="Recompute summary files from runs.csv")
    evaluate.add_argument('--runs', required=True)
    evaluate.add_argument('--out', type=str, default=OUTPUT_DIR)
    evaluate.set_defaults(handler=cmd_evaluate)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except (ValidationError, ValueError, FileNotFoundError, json.JSONDecodeError) as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG
    except HeatflowError as e:
        logger.error(f"{args.command} failed: {e}")
        return EXIT_PARTIAL


if __name__ == '__main__':
    sys.exit(main())
