#!/usr/bin/env python3
"""
Example script: run a reduced experiment batch and check the policy trends.

Runs every policy on the 12-map suite under the variance threshold and the
smaller distance and sample budgets, then hands the batch to TrendEvaluator.

Usage:
    python3 scripts/run_evaluation_example.py [output_dir] [sizes]

    sizes defaults to 20,40,60,80,100; pass e.g. 20,40 for a quick run.
"""

import os
import sys
import logging

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import config
from src.experiment import load_plan, run_experiment
from evaluation.evaluation import TrendEvaluator


def main():
    print("Adaptive Sampling Evaluation Example")
    print("=" * 40)

    logging.basicConfig(level=logging.INFO,
                        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')

    output_dir = sys.argv[1] if len(sys.argv) > 1 else os.path.join(config.OUTPUT_DIR, "evaluation_run")
    sizes = ([float(s) for s in sys.argv[2].split(",")] if len(sys.argv) > 2
             else list(config.DEFAULT_ENVIRONMENT_SIZES))

    plan = load_plan(overrides={
        "output_dir": output_dir,
        "sizes": sizes,
        "stopping_grid": (
            [{"variance_threshold": 0.4}]
            + [{"max_distance": d} for d in (300, 600, 900)]
            + [{"max_samples": n} for n in (20, 40, 60)]
        ),
        "render_heatmaps": False,
    })
    print(f"Running {plan.n_tuples} campaigns into {output_dir}")

    report = run_experiment(plan)
    print(f"Executed {len(report.executed)}, skipped {len(report.skipped)}, failed {len(report.failed)}")
    print()

    evaluator = TrendEvaluator.from_output_dir(output_dir)
    results = evaluator.run_complete_evaluation()

    for name, check in results["checks"].items():
        if not check["available"]:
            print(f"– {name}: not available ({check['reason']})")
        else:
            print(f"{'✓' if check['passed'] else '❌'} {name}")

    return report.exit_code == config.EXIT_SUCCESS and results["all_passed"]


if __name__ == "__main__":
    success = main()
    sys.exit(0 if success else 1)
