"""Tests for campaign metrics, reconstruction and batch summaries."""

import json
from collections import defaultdict

import numpy as np
import pytest

from src.metrics import (SUMMARY_METRICS, campaign_row, compare_reconstructions, path_length,
                         reconstruct, rmse, split_by_metric, summarize_batch, total_cost)
from src.planner import SamplingPolicy, StoppingCriteria, run_campaign
from src.fields import GridSpec, generate_gaussian, generate_uniform
import config
from src.gp_core import GpHyperparams, Observation, Point2, kernel_matrix
from src.storage import collect_rows, write_campaign
from src.error_handler import ShapeMismatch


def make_row(policy, size, stopping, family, value, **metrics):
    row = {
        "tuple_id": f"{policy}-{size}-{stopping}",
        "policy": policy,
        "size": size,
        "field_kind": "hybrid",
        "stopping": stopping,
        "stopping_family": family,
        "stopping_value": float(value),
        "stopping_reason": "max_samples",
    }
    for metric in SUMMARY_METRICS:
        row[metric] = metrics.get(metric, 0.0)
    return row


@pytest.fixture(scope="module")
def campaign():
    truth = generate_gaussian(GridSpec(10), n_clusters=3, seed=2)
    return run_campaign(truth, SamplingPolicy("a2"), StoppingCriteria(max_samples=8))


def test_path_length():
    assert path_length([Point2(0, 0), Point2(3, 4), Point2(3, 0)]) == pytest.approx(9.0)
    assert path_length([Point2(1, 1)]) == 0.0


def test_total_cost_adds_per_sample_cost(campaign):
    assert total_cost(campaign, 0.0) == pytest.approx(campaign.total_distance)
    assert total_cost(campaign, 2.5) == pytest.approx(campaign.total_distance + 2.5 * 8)


def test_rmse_identical_grids():
    grid = np.random.default_rng(0).uniform(size=(5, 5))
    assert rmse(grid, grid) == 0.0


def test_rmse_known_value():
    assert rmse(np.zeros((2, 2)), np.full((2, 2), 0.5)) == pytest.approx(0.5)


def test_rmse_is_symmetric():
    rng = np.random.default_rng(1)
    a, b = rng.uniform(size=(2, 6, 6))
    assert rmse(a, b) == rmse(b, a)


def test_rmse_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        rmse(np.zeros((3, 3)), np.zeros((4, 4)))


def test_reconstruct_shapes(small_spec, small_hyperparams):
    data = [Observation(Point2(2, 2), 0.4), Observation(Point2(8, 5), 0.9)]
    mean, variance = reconstruct(data, small_spec, small_hyperparams)
    assert mean.shape == (11, 11)
    assert variance.shape == (11, 11)
    # row = y, column = x
    assert mean[5, 8] == pytest.approx(0.9, abs=1e-4)


def test_sampled_nodes_have_noise_level_variance():
    spec = GridSpec(10)
    h = GpHyperparams.for_side(10)
    rng = np.random.default_rng(21)
    nodes = spec.node_points()
    picked = rng.choice(len(nodes), size=12, replace=False)
    data = [Observation(Point2(*nodes[i]), float(v)) for i, v in zip(picked, rng.uniform(size=12))]
    _, variance = reconstruct(data, spec, h)
    for obs in data:
        assert variance[int(obs.location.y), int(obs.location.x)] <= h.noise_variance + 1e-6


def test_reconstruction_matches_dense_inversion():
    spec = GridSpec(10)
    h = GpHyperparams.for_side(10)
    rng = np.random.default_rng(22)
    X = rng.uniform(0.0, 10.0, size=(10, 2))
    y = rng.uniform(size=10)
    mean, variance = reconstruct([Observation(Point2(*p), v) for p, v in zip(X, y)], spec, h)

    nodes = spec.node_points()
    K_inv = np.linalg.inv(kernel_matrix(X, X, h) + (h.noise_variance + config.CHOLESKY_JITTER) * np.eye(10))
    Ks = kernel_matrix(nodes, X, h)
    np.testing.assert_allclose(mean.ravel(), Ks @ K_inv @ y, atol=1e-6)
    oracle_variance = h.signal_variance - np.einsum("ij,jk,ik->i", Ks, K_inv, Ks)
    np.testing.assert_allclose(variance.ravel(), np.clip(oracle_variance, 0.0, h.signal_variance), atol=1e-6)


def test_compare_identical_datasets(small_spec, small_hyperparams):
    data = [Observation(Point2(1, 1), 0.3), Observation(Point2(9, 9), 0.6)]
    comparison = compare_reconstructions(data, data, small_spec, small_hyperparams)
    assert comparison.rmse == 0.0
    assert comparison.rmse_percent == 0.0


def test_compare_reports_percent_scale(small_spec):
    h = GpHyperparams(length_scale=2.0)
    reference = [Observation(Point2(5, 5), 0.30)]
    candidate = [Observation(Point2(5, 5), 0.35)]
    comparison = compare_reconstructions(reference, candidate, small_spec, h)
    assert comparison.rmse > 0
    assert comparison.rmse_percent == pytest.approx(100.0 * comparison.rmse)


def test_final_reconstruction_of_uniform_field_is_accurate():
    truth = generate_uniform(GridSpec(10), 0.5)
    result = run_campaign(truth, SamplingPolicy("benchmark"), StoppingCriteria(variance_threshold=0.05))
    assert result.final_rmse < 0.05
    assert rmse(result.final_reconstruction, truth) == pytest.approx(result.final_rmse)


def test_average_variance_never_exceeds_max(campaign):
    truth = generate_gaussian(GridSpec(10), n_clusters=3, seed=3)
    other = run_campaign(truth, SamplingPolicy("a1_randomized", rng_seed=5), StoppingCriteria(max_distance=60))
    for record in campaign.per_iteration + other.per_iteration:
        assert record.avg_variance <= record.max_variance


def test_campaign_row(campaign):
    row = campaign_row(campaign)
    assert row["policy"] == "a2"
    assert row["stopping"] == "samples-8"
    assert row["stopping_family"] == "samples"
    assert row["stopping_value"] == 8.0
    assert row["n_samples"] == 8
    assert row["distance_per_sample"] == pytest.approx(campaign.total_distance / 8)
    assert set(SUMMARY_METRICS) <= set(row)


class TestSummarizeBatch:
    def rows(self):
        return [
            make_row("a1", 20, "samples-20", "samples", 20, total_distance=100.0, n_samples=20),
            make_row("a1", 20, "samples-20", "samples", 20, total_distance=200.0, n_samples=20),
            make_row("benchmark", 20, "samples-20", "samples", 20, total_distance=400.0, n_samples=20),
            make_row("a1", 20, "distance-300", "distance", 300, total_distance=310.0, n_samples=30),
        ]

    def test_mean_and_population_std(self):
        summary = summarize_batch(self.rows())
        row = summary[(summary["metric"] == "total_distance") & (summary["policy"] == "a1")
                      & (summary["stopping"] == "samples-20")].iloc[0]
        assert row["mean"] == pytest.approx(150.0)
        assert row["std"] == pytest.approx(50.0)
        assert row["n"] == 2

    def test_single_run_has_zero_std(self):
        summary = summarize_batch(self.rows())
        row = summary[(summary["metric"] == "total_distance") & (summary["policy"] == "benchmark")].iloc[0]
        assert row["std"] == 0.0

    def test_conditioned_metric_flagged(self):
        summary = summarize_batch(self.rows())
        flagged = summary[summary["excluded_flag"]]
        assert set(zip(flagged["metric"], flagged["stopping"])) == {
            ("n_samples", "samples-20"), ("total_distance", "distance-300")}

    def test_columns_and_split(self):
        summary = summarize_batch(self.rows())
        assert list(summary.columns) == ["metric", "policy", "size", "stopping", "mean", "std", "n", "excluded_flag"]
        tables = split_by_metric(summary)
        assert list(tables) == list(SUMMARY_METRICS)
        assert list(tables["rmse"].columns) == ["policy", "size", "stopping", "mean", "std", "n", "excluded_flag"]

    def test_total_cost_uses_requested_sample_cost(self):
        summary = summarize_batch(self.rows(), c_sample=2.0)
        row = summary[(summary["metric"] == "total_cost") & (summary["policy"] == "benchmark")].iloc[0]
        assert row["mean"] == pytest.approx(400.0 + 2.0 * 20)

    def test_accepts_campaign_results(self, campaign):
        summary = summarize_batch([campaign])
        assert len(summary) == len(SUMMARY_METRICS)

    def test_persisted_runs_aggregate_like_their_logs(self, tmp_path):
        results_dir = tmp_path / "results"
        for seed in range(3):
            truth = generate_gaussian(GridSpec(10), n_clusters=3, seed=seed)
            for rule in ("benchmark", "a1_randomized"):
                for stopping in (StoppingCriteria(max_samples=6), StoppingCriteria(max_distance=40)):
                    result = run_campaign(truth, SamplingPolicy(rule, rng_seed=seed), stopping)
                    tuple_id = f"s010-m{seed:02d}-gaussian__{rule}__{stopping.label}"
                    result.metadata.update({"tuple_id": tuple_id, "field_kind": "gaussian"})
                    write_campaign(result, results_dir / tuple_id)

        summary = summarize_batch(collect_rows(results_dir))

        logs = defaultdict(list)
        for path in sorted(results_dir.glob("*/campaign.json")):
            record = json.loads(path.read_text())
            logs[(record["policy"]["rule"], record["summary"]["stopping"])].append(record)
        assert sum(len(group) for group in logs.values()) == 12

        for (policy, stopping), group in logs.items():
            distances = [r["per_iteration"][-1]["cumulative_distance"] for r in group]
            counts = [len(r["sample_log"]) for r in group]
            avg_variances = [r["per_iteration"][-1]["avg_variance"] for r in group]
            for metric, values in (("total_distance", distances), ("n_samples", counts),
                                   ("final_avg_variance", avg_variances)):
                row = summary[(summary["metric"] == metric) & (summary["policy"] == policy)
                              & (summary["stopping"] == stopping)].iloc[0]
                assert row["n"] == 3
                assert row["mean"] == pytest.approx(np.mean(values))
                assert row["std"] == pytest.approx(np.std(values), abs=1e-12)

    def test_empty_batch(self):
        with pytest.raises(ValueError):
            summarize_batch([])
