"""
Campaign metrics and GP map reconstruction.

Cost of a campaign, reconstruction of the moisture map from a dataset,
RMSE against ground truth, and grouped aggregation of many campaigns.
"""

import logging
from typing import Dict, Iterable, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

import config
from .gp_core import GpHyperparams, Observation, Point2, as_points, fit
from .fields import GridSpec, GroundTruthField
from .error_handler import ShapeMismatch

# metric -> stopping family whose criterion conditions it (excluded from plots)
SUMMARY_METRICS = {
    "total_distance": "distance",
    "n_samples": "samples",
    "final_max_variance": "variance",
    "final_avg_variance": None,
    "distance_per_sample": None,
    "rmse": None,
    "total_cost": None,
}


class IterationRecord(NamedTuple):
    """Snapshot after the bootstrap (iteration 0) and after each iterative sample."""
    iteration: int
    location: Optional[Point2]
    score: Optional[float]
    max_variance: float
    avg_variance: float
    cumulative_distance: float
    n_samples: int
    rmse: float


class CampaignResult:
    """Everything one campaign produced."""

    def __init__(self, policy, stopping, stopping_reason: str, sample_log: Sequence[Observation],
                 trajectory: Sequence[Point2], per_iteration: Sequence[IterationRecord],
                 final_reconstruction: np.ndarray, final_variance_grid: np.ndarray,
                 spec: GridSpec, hyperparams: GpHyperparams, n_bootstrap: int,
                 metadata: Optional[dict] = None):
        self.policy = policy
        self.stopping = stopping
        self.stopping_reason = stopping_reason
        self.sample_log = list(sample_log)
        self.trajectory = list(trajectory)
        self.per_iteration = list(per_iteration)
        self.final_reconstruction = np.asarray(final_reconstruction, dtype=float)
        self.final_variance_grid = np.asarray(final_variance_grid, dtype=float)
        self.spec = spec
        self.hyperparams = hyperparams
        self.n_bootstrap = int(n_bootstrap)
        self.metadata = dict(metadata or {})

    @property
    def n_samples(self) -> int:
        return len(self.sample_log)

    @property
    def n_iterative(self) -> int:
        return self.n_samples - self.n_bootstrap

    @property
    def total_distance(self) -> float:
        return self.per_iteration[-1].cumulative_distance

    @property
    def final_max_variance(self) -> float:
        return self.per_iteration[-1].max_variance

    @property
    def final_avg_variance(self) -> float:
        return self.per_iteration[-1].avg_variance

    @property
    def final_rmse(self) -> float:
        return self.per_iteration[-1].rmse


def path_length(points: Sequence[Point2]) -> float:
    """Sum of Euclidean legs between consecutive points."""
    if len(points) < 2:
        return 0.0
    array = as_points(points)
    return float(np.sum(np.hypot(*np.diff(array, axis=0).T)))


def total_cost(result: CampaignResult, c_sample: float = config.C_SAMPLE) -> float:
    """C(D_M): M * c_sample plus Euclidean trajectory length (unit cost per unit length)."""
    return result.n_samples * c_sample + path_length(result.trajectory)


def reconstruct(dataset: Sequence[Observation], spec: GridSpec, h: GpHyperparams) -> Tuple[np.ndarray, np.ndarray]:
    """
    GP reconstruction of the map at every grid node.

    Returns:
        (mean grid, variance grid), each (resolution, resolution)
    """
    model = fit(dataset, h)
    mean, variance = model.predict(spec.node_points())
    shape = (spec.resolution, spec.resolution)
    return mean.reshape(shape), variance.reshape(shape)


def grid_rmse(a: np.ndarray, b: np.ndarray) -> float:
    """Root mean squared difference of two equally sized arrays."""
    diff = np.ravel(a) - np.ravel(b)
    return float(np.sqrt(np.mean(diff * diff)))


def rmse(reconstruction: np.ndarray, truth: Union[GroundTruthField, np.ndarray]) -> float:
    """
    RMSE between a reconstructed mean grid and the truth grid.

    Raises:
        ShapeMismatch: If the grids do not share a shape
    """
    a = np.asarray(reconstruction, dtype=float)
    b = truth.values if isinstance(truth, GroundTruthField) else np.asarray(truth, dtype=float)
    if a.size != b.size or (a.ndim == b.ndim and a.shape != b.shape):
        raise ShapeMismatch(f"grid shapes differ: {a.shape} vs {b.shape}")
    return grid_rmse(a, b)


class ReconstructionComparison(NamedTuple):
    reference_mean: np.ndarray
    candidate_mean: np.ndarray
    rmse: float
    rmse_percent: float


def compare_reconstructions(reference: Sequence[Observation], candidate: Sequence[Observation],
                            spec: GridSpec, h: GpHyperparams) -> ReconstructionComparison:
    """
    Reconstruct two datasets on one grid and compare them.

    Used for field-style comparisons (ground-truth probe readings vs robot
    readings). RMSE is reported on the normalized scale and on the
    VWC-percent scale.
    """
    reference_mean, _ = reconstruct(reference, spec, h)
    candidate_mean, _ = reconstruct(candidate, spec, h)
    error = grid_rmse(reference_mean, candidate_mean)
    return ReconstructionComparison(reference_mean, candidate_mean, error, error * config.VWC_PERCENT_SCALE)


def campaign_row(result: CampaignResult, c_sample: float = config.C_SAMPLE) -> Dict:
    """Flat per-campaign record used for aggregation and persisted alongside the result."""
    stopping = result.stopping
    family = stopping.family
    value = {
        "samples": stopping.max_samples,
        "distance": stopping.max_distance,
        "variance": stopping.variance_threshold,
    }.get(family) or 0.0

    n_samples = result.n_samples
    return {
        "tuple_id": result.metadata.get("tuple_id", ""),
        "policy": result.policy.label,
        "size": result.spec.side,
        "field_kind": result.metadata.get("field_kind", ""),
        "stopping": stopping.label,
        "stopping_family": family,
        "stopping_value": float(value),
        "stopping_reason": result.stopping_reason,
        "total_distance": result.total_distance,
        "n_samples": n_samples,
        "final_max_variance": result.final_max_variance,
        "final_avg_variance": result.final_avg_variance,
        "distance_per_sample": result.total_distance / n_samples if n_samples else 0.0,
        "rmse": result.final_rmse,
        "total_cost": total_cost(result, c_sample),
    }


def summarize_batch(results: Iterable[Union[CampaignResult, Dict]],
                    c_sample: float = config.C_SAMPLE) -> pd.DataFrame:
    """
    Mean and population std of each metric per (policy, size, stopping) group.

    Args:
        results: CampaignResult objects or rows from campaign_row()
        c_sample: Per-sample cost used for total_cost (recomputed for row inputs)

    Returns:
        Long-format DataFrame with columns
        metric, policy, size, stopping, mean, std, n, excluded_flag
    """
    logger = logging.getLogger(__name__)

    rows = [dict(r, total_cost=r["n_samples"] * c_sample + r["total_distance"]) if isinstance(r, dict)
            else campaign_row(r, c_sample) for r in results]
    if not rows:
        raise ValueError("summarize_batch needs at least one result")

    df = pd.DataFrame(rows)
    keys = ["policy", "size", "stopping_family", "stopping_value", "stopping"]
    grouped = df.groupby(keys, sort=True)

    tables = []
    for metric, conditioned_on in SUMMARY_METRICS.items():
        stats = grouped[metric].agg(["mean", "count"])
        stats["std"] = grouped[metric].std(ddof=0)
        stats = stats.reset_index().rename(columns={"count": "n"})
        stats["metric"] = metric
        stats["excluded_flag"] = stats["stopping_family"] == conditioned_on
        tables.append(stats)

    summary = pd.concat(tables, ignore_index=True)
    logger.debug(f"Summarized {len(df)} campaigns into {len(summary)} rows")
    return summary[["metric", "policy", "size", "stopping", "mean", "std", "n", "excluded_flag"]]


def split_by_metric(summary: pd.DataFrame) -> Dict[str, pd.DataFrame]:
    """One table per metric, in SUMMARY_METRICS order."""
    tables = {}
    for metric in SUMMARY_METRICS:
        table = summary[summary["metric"] == metric].drop(columns="metric").reset_index(drop=True)
        tables[metric] = table
    return tables
