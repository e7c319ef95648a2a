"""
Generate the report figure: the four batch metrics against environment size,
one line per policy, one panel per metric.
Uses the summary tables written by `main.py run` / `main.py summarize`.

Usage:
    python3 scripts/generate_report_figures.py [output_dir]
"""
import os
import sys
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import config
from src.storage import read_summary
from src.error_handler import ArtifactError

PANELS = [
    ("total_distance", "Total distance travelled"),
    ("n_samples", "Number of samples"),
    ("final_max_variance", "Final maximum variance"),
    ("final_avg_variance", "Final average variance"),
]

# Per-panel stopping family whose runs are plotted; the conditioned metric
# of each family is flagged in the summary and skipped here.
PANEL_STOPPING = {
    "total_distance": "variance",
    "n_samples": "distance",
    "final_max_variance": "samples",
    "final_avg_variance": "samples",
}


def generate_metrics_vs_size(summary, figures_dir: Path, stopping_label: str = None) -> Path:
    """Four-panel figure; ``stopping_label`` pins one stopping configuration for every panel."""
    fig, axes = plt.subplots(2, 2, figsize=(10, 7))

    for ax, (metric, title) in zip(axes.ravel(), PANELS):
        table = summary[(summary["metric"] == metric) & ~summary["excluded_flag"]]
        if stopping_label is not None:
            table = table[table["stopping"] == stopping_label]
        else:
            family = PANEL_STOPPING[metric]
            table = table[table["stopping"].str.startswith(family)]
        if table.empty:
            ax.set_title(f"{title}\n(no data)")
            continue

        # average over the stopping values of the family
        by_size = table.groupby(["policy", "size"])["mean"].mean().reset_index()
        for policy, group in by_size.groupby("policy"):
            ax.plot(group["size"], group["mean"], marker="o", label=policy)
        ax.set_title(title, fontsize=11, fontweight="bold")
        ax.set_xlabel("Environment size s")
        ax.grid(alpha=0.3)

    handles, labels = axes.ravel()[0].get_legend_handles_labels()
    if handles:
        fig.legend(handles, labels, loc="lower center", ncol=len(labels), fontsize=9)
    fig.tight_layout(rect=(0, 0.06, 1, 1))

    suffix = f"_{stopping_label}" if stopping_label else ""
    path = figures_dir / f"metrics_vs_size{suffix}.png"
    fig.savefig(path, dpi=200, bbox_inches="tight")
    plt.close(fig)
    print(f"✓ Generated {path}")
    return path


def main():
    output_dir = Path(sys.argv[1] if len(sys.argv) > 1 else config.OUTPUT_DIR)
    try:
        summary = read_summary(output_dir / "summary")
    except ArtifactError as e:
        print(f"⚠️  {e}. Run: python3 main.py run (or main.py summarize)")
        return False

    summary["excluded_flag"] = summary["excluded_flag"].astype(bool)
    figures_dir = output_dir / "figures"
    figures_dir.mkdir(parents=True, exist_ok=True)
    generate_metrics_vs_size(summary, figures_dir)
    return True


if __name__ == "__main__":
    sys.exit(0 if main() else 1)
