"""
Batch evaluation for the adaptive-sampling simulator.

Checks a finished batch for the qualitative trends the travel-aware
policies are expected to show (distance, sample count, residual variance)
and for stopping soundness, then writes JSON and markdown reports.
"""

import json
import os
from datetime import datetime
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import pandas as pd

# Import system modules
import sys
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.storage import CAMPAIGN_FILE, collect_rows, read_json

BENCHMARK = "benchmark"
DETERMINISTIC = ["a1", "a2"]
RANDOMIZED = ["a1_randomized", "a2_randomized"]
ALL_POLICIES = [BENCHMARK] + DETERMINISTIC + RANDOMIZED


class TrendEvaluator:
    """
    Evaluates per-campaign result rows of a batch.

    Thresholds are conservative floors: the travel-aware rule must cut mean
    distance by at least ``min_distance_reduction`` against the benchmark.
    """

    def __init__(self, rows: Union[pd.DataFrame, Sequence[Dict]], results_dir: Optional[str] = None,
                 output_dir: str = "evaluation_results",
                 variance_threshold: float = 0.4,
                 distance_budgets: Sequence[float] = (300, 600, 900),
                 sample_budgets: Sequence[int] = (20, 40, 60),
                 min_distance_reduction: float = 0.10,
                 min_low_variance_fraction: float = 0.75):
        """
        Initialize the evaluator.

        Args:
            rows: Per-campaign rows (see metrics.campaign_row)
            results_dir: ``results/`` directory for the stopping-soundness check
            output_dir: Where reports are written
            variance_threshold: psi used by the distance and soundness checks
            distance_budgets: delta values used by the sample-count check
            sample_budgets: eta values used by the residual-variance check
            min_distance_reduction: Required relative distance cut of a2 vs benchmark
            min_low_variance_fraction: Required share of runs with average variance below psi
        """
        self.rows = rows if isinstance(rows, pd.DataFrame) else pd.DataFrame(list(rows))
        self.results_dir = results_dir
        self.output_dir = output_dir
        self.variance_threshold = variance_threshold
        self.distance_budgets = [float(d) for d in distance_budgets]
        self.sample_budgets = [float(n) for n in sample_budgets]
        self.min_distance_reduction = min_distance_reduction
        self.min_low_variance_fraction = min_low_variance_fraction
        self.evaluation_results: Dict = {}

    @classmethod
    def from_output_dir(cls, output_dir: str, **kwargs) -> 'TrendEvaluator':
        """Load every completed campaign of a batch output directory."""
        results_dir = os.path.join(output_dir, "results")
        kwargs.setdefault("output_dir", os.path.join(output_dir, "evaluation"))
        return cls(collect_rows(results_dir), results_dir=results_dir, **kwargs)

    def _select(self, family: str, values: Sequence[float]) -> pd.DataFrame:
        if self.rows.empty:
            return self.rows
        mask = (self.rows["stopping_family"] == family) & self.rows["stopping_value"].isin(values)
        return self.rows[mask]

    @staticmethod
    def _policy_means(frame: pd.DataFrame, metric: str) -> Dict[str, float]:
        means = frame.groupby("policy")[metric].mean()
        return {policy: float(value) for policy, value in means.items()}

    @staticmethod
    def _unavailable(reason: str) -> Dict:
        return {"available": False, "passed": None, "reason": reason}

    def evaluate_travel_distance(self) -> Dict:
        """
        Under the variance threshold: benchmark > randomized > deterministic in
        mean total distance, and a2 cuts distance by the required fraction.
        """
        frame = self._select("variance", [self.variance_threshold])
        means = self._policy_means(frame, "total_distance") if not frame.empty else {}
        if not set(ALL_POLICIES) <= set(means):
            return self._unavailable("variance-threshold runs missing for some policies")

        ordering = (all(means[BENCHMARK] > means[r] for r in RANDOMIZED)
                    and all(means[r] > means[d] for r in RANDOMIZED for d in DETERMINISTIC))
        reduction = 1.0 - means["a2"] / means[BENCHMARK] if means[BENCHMARK] > 0 else 0.0
        results = {
            "available": True,
            "mean_total_distance": means,
            "ordering_holds": bool(ordering),
            "a2_reduction": round(reduction, 4),
            "passed": bool(ordering and reduction >= self.min_distance_reduction),
        }
        print(f"Travel distance: a2 reduction {reduction:.1%}, ordering {'holds' if ordering else 'broken'}")
        return results

    def evaluate_sample_count(self) -> Dict:
        """Under distance budgets the benchmark collects the fewest samples."""
        frame = self._select("distance", self.distance_budgets)
        means = self._policy_means(frame, "n_samples") if not frame.empty else {}
        if not set(ALL_POLICIES) <= set(means):
            return self._unavailable("distance-budget runs missing for some policies")

        per_budget = {}
        for budget, group in frame.groupby("stopping_value"):
            per_budget[f"{budget:g}"] = self._policy_means(group, "n_samples")

        lowest = min(means, key=means.get)
        results = {
            "available": True,
            "mean_n_samples": means,
            "per_budget": per_budget,
            "lowest_policy": lowest,
            "passed": bool(all(means[BENCHMARK] < means[p] for p in ALL_POLICIES if p != BENCHMARK)),
        }
        print(f"Sample count: fewest samples collected by {lowest}")
        return results

    def evaluate_average_variance(self) -> Dict:
        """Under sample budgets randomized a2 leaves no more average variance than the benchmark."""
        frame = self._select("samples", self.sample_budgets)
        means = self._policy_means(frame, "final_avg_variance") if not frame.empty else {}
        if BENCHMARK not in means or "a2_randomized" not in means:
            return self._unavailable("sample-budget runs missing for benchmark or a2_randomized")

        gap = 1.0 - means["a2_randomized"] / means[BENCHMARK] if means[BENCHMARK] > 0 else 0.0
        low_fraction = float((frame["final_avg_variance"] < self.variance_threshold).mean())
        results = {
            "available": True,
            "mean_final_avg_variance": means,
            "a2_randomized_gap": round(gap, 4),
            "gap_at_least_1_percent": bool(gap >= 0.01),
            "low_variance_fraction": round(low_fraction, 4),
            "passed": bool(means["a2_randomized"] <= means[BENCHMARK]
                           and low_fraction >= self.min_low_variance_fraction),
        }
        print(f"Average variance: a2_randomized gap {gap:.1%}, "
              f"{low_fraction:.0%} of runs below {self.variance_threshold:g}")
        return results

    def evaluate_stopping_soundness(self) -> Dict:
        """
        Every variance-threshold campaign ended below psi and was at or above
        psi at the preceding check.
        """
        if not self.results_dir or not os.path.isdir(self.results_dir):
            return self._unavailable("results directory not available")

        checked = 0
        violations: List[str] = []
        for campaign_dir in sorted(Path(self.results_dir).iterdir()):
            path = campaign_dir / CAMPAIGN_FILE
            if not path.is_file():
                continue
            record = read_json(path)
            if record["stopping"].get("variance_threshold") != self.variance_threshold:
                continue
            if record["stopping_reason"] != "variance_threshold":
                continue
            checked += 1
            history = [r["max_variance"] for r in record["per_iteration"]]
            final_ok = history[-1] < self.variance_threshold
            previous_ok = len(history) < 2 or history[-2] >= self.variance_threshold
            if not (final_ok and previous_ok):
                violations.append(campaign_dir.name)

        results = {
            "available": checked > 0,
            "campaigns_checked": checked,
            "violations": violations,
            "passed": (not violations) if checked else None,
        }
        print(f"Stopping soundness: {checked} campaigns checked, {len(violations)} violations")
        return results

    def log_results(self, filename: str = "trend_evaluation.json") -> str:
        """
        Save the evaluation results as JSON.

        Returns:
            Path to the written file
        """
        os.makedirs(self.output_dir, exist_ok=True)
        filepath = os.path.join(self.output_dir, filename)
        with open(filepath, "w") as f:
            json.dump(self.evaluation_results, f, indent=2)
        print(f"Evaluation results logged to: {filepath}")
        return filepath

    def run_complete_evaluation(self) -> Dict:
        """
        Run every check, save JSON and a markdown summary.

        Returns:
            Complete evaluation results dictionary
        """
        print("Starting trend evaluation...")
        print("=" * 50)

        checks = {
            "travel_distance": self.evaluate_travel_distance(),
            "sample_count": self.evaluate_sample_count(),
            "average_variance": self.evaluate_average_variance(),
            "stopping_soundness": self.evaluate_stopping_soundness(),
        }
        evaluated = [c["passed"] for c in checks.values() if c["available"]]
        self.evaluation_results = {
            "evaluation_timestamp": datetime.now().isoformat(),
            "n_campaigns": int(len(self.rows)),
            "checks": checks,
            "all_passed": bool(evaluated) and all(evaluated),
        }

        self.log_results()
        self._create_summary_report(self.evaluation_results)

        print("=" * 50)
        print(f"Trend evaluation {'passed' if self.evaluation_results['all_passed'] else 'did not pass'}")
        return self.evaluation_results

    def _create_summary_report(self, results: Dict) -> str:
        """Markdown summary next to the JSON results."""
        report_file = os.path.join(self.output_dir, "evaluation_summary.md")

        def status(check):
            if not check["available"]:
                return "– N/A"
            return "✓ PASS" if check["passed"] else "✗ FAIL"

        with open(report_file, "w") as f:
            f.write("# Adaptive Sampling Trend Evaluation\n\n")
            f.write(f"**Evaluation Date:** {results['evaluation_timestamp']}\n\n")
            f.write(f"**Campaigns:** {results['n_campaigns']}\n\n")
            f.write("| Check | Status |\n|-------|--------|\n")
            for name, check in results["checks"].items():
                f.write(f"| {name.replace('_', ' ')} | {status(check)} |\n")
            f.write("\n")

            distance = results["checks"]["travel_distance"]
            if distance["available"]:
                f.write("## Travel distance (variance threshold)\n")
                for policy, value in distance["mean_total_distance"].items():
                    f.write(f"- {policy}: {value:.2f}\n")
                f.write(f"- a2 reduction vs benchmark: {distance['a2_reduction']:.1%}\n\n")

            variance = results["checks"]["average_variance"]
            if variance["available"]:
                f.write("## Average residual variance (sample budgets)\n")
                for policy, value in variance["mean_final_avg_variance"].items():
                    f.write(f"- {policy}: {value:.4f}\n")
                f.write(f"- runs below threshold: {variance['low_variance_fraction']:.0%}\n")

        return report_file


if __name__ == "__main__":
    output = sys.argv[1] if len(sys.argv) > 1 else os.getenv("OUTPUT_DIR", "sim_output/")
    print("Adaptive Sampling Trend Evaluation")
    print("=" * 40)
    evaluator = TrendEvaluator.from_output_dir(output)
    results = evaluator.run_complete_evaluation()
    sys.exit(0 if results["all_passed"] else 1)
