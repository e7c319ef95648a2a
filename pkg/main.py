#!/usr/bin/env python3
"""
Soil moisture adaptive-sampling simulator
Command-line entry point: map generation, batch runs, summaries, heatmaps
and reconstruction comparison.
"""

import sys
import os
import json
import argparse
import logging
from pathlib import Path

# Add the repository root to the path so `config` and `src` import from anywhere
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import config
from src.error_handler import (
    ArtifactError,
    ConfigError,
    SimulationError,
    initialize_error_handling,
)


def setup_logging(verbose: bool = False):
    """Setup logging configuration"""
    log_level = logging.DEBUG if (config.ENABLE_LOGGING or verbose) else logging.INFO
    logging.basicConfig(
        level=log_level,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=[
            logging.StreamHandler(sys.stdout)
        ]
    )


def _parse_sizes(text):
    try:
        sizes = json.loads(text) if text.strip().startswith("[") else [float(s) for s in text.split(",")]
    except (ValueError, json.JSONDecodeError):
        raise argparse.ArgumentTypeError(f"invalid size list: {text}")
    return [float(s) for s in sizes]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="main.py",
        description="GP-based adaptive sampling simulator for soil moisture mapping")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_plan_arguments(p):
        p.add_argument("--config", help="JSON experiment config file")
        p.add_argument("--output-dir", dest="output_dir", help=f"output directory (default {config.OUTPUT_DIR})")
        p.add_argument("--base-seed", dest="base_seed", type=int, help=f"base seed (default {config.BASE_SEED})")
        p.add_argument("--sizes", type=_parse_sizes, help="environment sizes, e.g. 20,40 or [20, 40]")

    p = sub.add_parser("generate-fields", help="generate the map suite")
    add_plan_arguments(p)

    p = sub.add_parser("run", help="run the experiment plan (resumes completed tuples)")
    add_plan_arguments(p)
    p.add_argument("--workers", type=int, help=f"parallel campaigns (default {config.WORKERS})")
    p.add_argument("--no-render", dest="render_heatmaps", action="store_false", default=None,
                   help="skip per-campaign heatmaps")

    p = sub.add_parser("summarize", help="rebuild summary tables from persisted campaigns")
    p.add_argument("--output-dir", dest="output_dir", default=config.OUTPUT_DIR)
    p.add_argument("--c-sample", dest="c_sample", type=float, default=config.C_SAMPLE,
                   help="per-sample cost used by total_cost")

    p = sub.add_parser("render", help="render heatmaps of a field JSON or a campaign directory")
    p.add_argument("input", help="fields/<map-id>.json or results/<tuple-id>/")
    p.add_argument("--out", help="output directory (default: next to the input)")

    p = sub.add_parser("compare", help="compare GP reconstructions of two observation CSVs")
    p.add_argument("reference", help="x,y,value CSV (e.g. probe readings)")
    p.add_argument("candidate", help="x,y,value CSV (e.g. robot readings)")
    p.add_argument("--side", type=float, required=True, help="side length of the square field")
    p.add_argument("--resolution", type=int, help="grid nodes per side (default side + 1)")
    p.add_argument("--length-scale", dest="length_scale", type=float, help="RBF length scale (default side / 5)")
    p.add_argument("--noise-variance", dest="noise_variance", type=float, default=config.NOISE_VARIANCE)
    p.add_argument("--vwc-percent", dest="vwc_percent", action="store_true",
                   help="values are VWC percentages")
    p.add_argument("--out", help="write both mean grids and heatmaps here")
    return parser


def _load_plan(args):
    from src.experiment import load_plan
    overrides = {key: getattr(args, key, None)
                 for key in ("output_dir", "base_seed", "sizes", "workers", "render_heatmaps")}
    return load_plan(args.config, overrides)


def cmd_generate_fields(args) -> int:
    from src.experiment import generate_fields
    plan = _load_plan(args)
    suite = generate_fields(plan)
    print(f"✓ {len(suite)} fields in {plan.output_dir / 'fields'}")
    return config.EXIT_SUCCESS


def cmd_run(args) -> int:
    logger = logging.getLogger(__name__)
    from src.experiment import run_experiment

    plan = _load_plan(args)
    if not initialize_error_handling(str(plan.output_dir)):
        print("❌ System validation failed")
        return config.EXIT_CONFIG_ERROR

    logger.info(f"Running {plan.n_tuples} tuples into {plan.output_dir}")
    report = run_experiment(plan)

    print(f"✓ executed {len(report.executed)}, skipped {len(report.skipped)}")
    if report.failed:
        print(f"❌ {len(report.failed)} campaigns failed, see {report.manifest_path}")
    if report.pending:
        print(f"⚠ {len(report.pending)} campaigns pending (interrupted); rerun to resume")
    if report.summary_dir is not None:
        print(f"Summary: {report.summary_dir}")
    return report.exit_code


def cmd_summarize(args) -> int:
    from src.experiment import summarize
    summary_dir = summarize(args.output_dir, args.c_sample)
    if summary_dir is None:
        print(f"❌ No completed campaigns under {Path(args.output_dir) / 'results'}")
        return config.EXIT_CONFIG_ERROR
    print(f"✓ Summary written to {summary_dir}")
    return config.EXIT_SUCCESS


def cmd_render(args) -> int:
    from src.rendering import render_heatmaps
    written = render_heatmaps(args.input, args.out)
    for path in written:
        print(f"✓ {path}")
    return config.EXIT_SUCCESS


def cmd_compare(args) -> int:
    from src.gp_core import GpHyperparams
    from src.fields import GridSpec
    from src.metrics import compare_reconstructions
    from src.storage import load_observations, write_grid_csv
    from src.rendering import write_heatmap

    try:
        spec = GridSpec(args.side, args.resolution)
        h = GpHyperparams.for_side(args.side, length_scale=args.length_scale,
                                   noise_variance=args.noise_variance)
    except ValueError as e:
        raise ConfigError(str(e))

    reference = load_observations(args.reference, args.vwc_percent)
    candidate = load_observations(args.candidate, args.vwc_percent)
    comparison = compare_reconstructions(reference, candidate, spec, h)

    print(f"RMSE (normalized): {comparison.rmse:.6f}")
    print(f"RMSE (VWC %):      {comparison.rmse_percent:.4f}")

    if args.out:
        out = Path(args.out)
        write_grid_csv(out / "reference_mean.csv", comparison.reference_mean)
        write_grid_csv(out / "candidate_mean.csv", comparison.candidate_mean)
        write_heatmap(out / "reference_mean", comparison.reference_mean)
        write_heatmap(out / "candidate_mean", comparison.candidate_mean)
        print(f"✓ Grids and heatmaps written to {out}")
    return config.EXIT_SUCCESS


COMMANDS = {
    "generate-fields": cmd_generate_fields,
    "run": cmd_run,
    "summarize": cmd_summarize,
    "render": cmd_render,
    "compare": cmd_compare,
}


def main(argv=None) -> int:
    """Main entry point; returns the process exit code"""
    args = build_parser().parse_args(argv)
    setup_logging(args.verbose)
    logger = logging.getLogger(__name__)

    try:
        return COMMANDS[args.command](args)
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        print(f"❌ Configuration error: {e}")
        return config.EXIT_CONFIG_ERROR
    except ArtifactError as e:
        logger.error(f"Artifact error: {e}")
        print(f"❌ {e}")
        return config.EXIT_CONFIG_ERROR
    except SimulationError as e:
        logger.error(f"Simulation error: {e}")
        print(f"❌ {e}")
        return config.EXIT_PARTIAL_FAILURE


if __name__ == "__main__":
    sys.exit(main())
