"""Tests for the batch experiment driver."""

import json

import pytest

import config
from src import experiment
from src.experiment import (ExperimentPlan, default_protocol_plan, enumerate_tuples, load_plan, map_seed,
                            plan_from_dict, policy_seed, read_manifest, run_experiment)
from src.campaign_processor import CampaignJob, CampaignProcessor, SimpleCampaignProcessor
from src.planner import run_campaign
from src.rendering import render_heatmaps
from src.error_handler import ConfigError, FactorizationFailure, get_error_handler, get_graceful_shutdown


def tiny_plan(output_dir, **overrides) -> ExperimentPlan:
    data = {
        "output_dir": str(output_dir),
        "sizes": [8],
        "maps_per_size": {"uniform": 1, "sloped": 0, "gaussian": 0, "hybrid": 1},
        "policies": ["benchmark", "a2_randomized"],
        "stopping_grid": [{"max_samples": 6}, {"max_distance": 40}],
        "base_seed": 11,
        "workers": 1,
        "render_heatmaps": False,
    }
    data.update(overrides)
    return plan_from_dict(data)


def summary_bytes(output_dir):
    return {p.name: p.read_bytes() for p in sorted((output_dir / "summary").glob("*.csv"))}


def result_files(output_dir):
    return sorted((output_dir / "results").glob("*/campaign.json"))


class TestPlan:
    def test_default_protocol_plan_size(self, tmp_path):
        plan = default_protocol_plan(str(tmp_path))
        assert plan.n_tuples == 5 * 12 * 5 * 11
        tuples = enumerate_tuples(plan)
        assert len(tuples) == 3300
        assert len({t.tuple_id for t in tuples}) == 3300

    def test_tuple_id_format(self, tmp_path):
        ids = {t.tuple_id for t in enumerate_tuples(default_protocol_plan(str(tmp_path)))}
        assert "s020-m00-uniform__a1_randomized__distance-300" in ids
        assert "s100-m11-hybrid__benchmark__variance-0.4" in ids

    def test_map_suite_shared_across_policies(self, tmp_path):
        tuples = enumerate_tuples(tiny_plan(tmp_path))
        assert {t.map_id for t in tuples} == {"s008-m00-uniform", "s008-m01-hybrid"}

    def test_seeds_are_stable_and_distinct(self):
        assert map_seed(1, 20, 0) == map_seed(1, 20, 0)
        assert map_seed(1, 20, 0) != map_seed(1, 20, 1)
        assert map_seed(1, 20, 0) != map_seed(1, 40, 0)
        assert map_seed(1, 20, 0) != map_seed(2, 20, 0)
        assert policy_seed(1, "a") != policy_seed(1, "b")

    def test_pool_scales_reach_the_planner(self, tmp_path):
        plan = tiny_plan(tmp_path, planner={"pool_exclusion_scale": 2.0, "pool_separation_scale": 0.0})
        cfg = plan.planner_config(8)
        assert (cfg.pool_exclusion_scale, cfg.pool_separation_scale) == (2.0, 0.0)

    def test_policy_seed_assigned_per_tuple(self, tmp_path):
        tuples = enumerate_tuples(tiny_plan(tmp_path))
        assert len({t.policy.rng_seed for t in tuples}) == len(tuples)

    @pytest.mark.parametrize("data", [
        {"colour": "blue"},
        {"sizes": []},
        {"sizes": [-20]},
        {"maps_per_size": {"uniform": 0, "sloped": 0, "gaussian": 0, "hybrid": 0}},
        {"maps_per_size": {"swamp": 1}},
        {"policies": []},
        {"policies": ["greedy"]},
        {"stopping_grid": []},
        {"stopping_grid": [{}]},
        {"stopping_grid": [{"max_samples": 0}]},
        {"gp": {"kernel": "matern"}},
        {"gp": {"noise_variance": -1}},
        {"planner": {"coarse_k": 0}},
        {"workers": 0},
        {"base_seed": -1},
    ])
    def test_invalid_plans_raise_config_error(self, tmp_path, data):
        with pytest.raises(ConfigError):
            tiny_plan(tmp_path, **data)

    def test_precedence(self, tmp_path):
        path = tmp_path / "plan.json"
        path.write_text(json.dumps({"sizes": [8], "base_seed": 5, "workers": 1}))
        plan = load_plan(str(path), {"sizes": [10], "base_seed": None})
        assert plan.sizes == [10.0]
        assert plan.base_seed == 5
        assert plan.workers == 1
        assert plan.n_clusters == config.N_CLUSTERS

    def test_unreadable_config(self, tmp_path):
        path = tmp_path / "plan.json"
        path.write_text("[1, 2")
        with pytest.raises(ConfigError):
            load_plan(str(path))

    def test_gp_overrides(self, tmp_path):
        plan = tiny_plan(tmp_path, gp={"length_scale_fraction": 0.5, "noise_variance": 1e-4})
        h = plan.hyperparams(8)
        assert h.length_scale == pytest.approx(4.0)
        assert h.noise_variance == 1e-4


class TestRun:
    def test_single_tuple_single_result(self, tmp_path):
        plan = tiny_plan(tmp_path, maps_per_size={"uniform": 1}, policies=["a1"],
                         stopping_grid=[{"max_samples": 5}])
        report = run_experiment(plan)
        assert report.exit_code == config.EXIT_SUCCESS
        assert len(result_files(tmp_path)) == 1
        assert len(report.executed) == 1

    def test_manifest_covers_every_tuple_once(self, tmp_path):
        plan = tiny_plan(tmp_path)
        run_experiment(plan)
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        ids = [entry["tuple_id"] for entry in manifest["tuples"]]
        assert sorted(ids) == sorted(t.tuple_id for t in enumerate_tuples(plan))
        assert len(ids) == len(set(ids))
        assert all(entry["status"] == "completed" for entry in manifest["tuples"])
        assert len(result_files(tmp_path)) == plan.n_tuples

    def test_reproducible_summary(self, tmp_path):
        run_experiment(tiny_plan(tmp_path / "a"))
        run_experiment(tiny_plan(tmp_path / "b"))
        first = summary_bytes(tmp_path / "a")
        assert first
        assert first == summary_bytes(tmp_path / "b")

    def test_threaded_run_matches_sequential(self, tmp_path):
        run_experiment(tiny_plan(tmp_path / "seq"))
        run_experiment(tiny_plan(tmp_path / "par", workers=3))
        assert summary_bytes(tmp_path / "seq") == summary_bytes(tmp_path / "par")

    def test_rerun_executes_nothing(self, tmp_path):
        plan = tiny_plan(tmp_path)
        run_experiment(plan)
        before = summary_bytes(tmp_path)

        report = run_experiment(plan)
        assert report.executed == []
        assert len(report.skipped) == plan.n_tuples
        assert report.exit_code == config.EXIT_SUCCESS
        assert summary_bytes(tmp_path) == before
        assert set(read_manifest(tmp_path).values()) == {"skipped"}

    def test_fields_written_once(self, tmp_path):
        plan = tiny_plan(tmp_path)
        run_experiment(plan)
        assert sorted(p.name for p in (tmp_path / "fields").glob("*.json")) == [
            "s008-m00-uniform.json", "s008-m01-hybrid.json"]

    def test_failed_campaigns_reported_and_retried(self, tmp_path, monkeypatch):
        def failing(truth, policy, stopping, planner_config=None):
            if truth.kind == "hybrid":
                raise FactorizationFailure("forced")
            return run_campaign(truth, policy, stopping, planner_config)

        plan = tiny_plan(tmp_path)
        monkeypatch.setattr(experiment, "run_campaign", failing)
        report = run_experiment(plan)
        assert report.exit_code == config.EXIT_PARTIAL_FAILURE
        assert len(report.failed) == 4
        assert all("hybrid" in t for t in report.failed)

        manifest = json.loads((tmp_path / "manifest.json").read_text())
        failed = [e for e in manifest["tuples"] if e["status"] == "failed"]
        assert len(failed) == 4
        assert all("FactorizationFailure" in e["error"] for e in failed)

        monkeypatch.setattr(experiment, "run_campaign", run_campaign)
        report = run_experiment(plan)
        assert sorted(report.executed) == sorted(t for t in read_manifest(tmp_path) if "hybrid" in t)
        assert report.exit_code == config.EXIT_SUCCESS

    def test_interrupted_run_leaves_pending_and_resumes(self, tmp_path, monkeypatch):
        def interrupting(*args, **kwargs):
            get_graceful_shutdown().shutdown()
            return run_campaign(*args, **kwargs)

        plan = tiny_plan(tmp_path)
        monkeypatch.setattr(experiment, "run_campaign", interrupting)
        report = run_experiment(plan)
        assert len(report.executed) == 1
        assert len(report.pending) == plan.n_tuples - 1
        assert report.exit_code == config.EXIT_PARTIAL_FAILURE

        monkeypatch.setattr(experiment, "run_campaign", run_campaign)
        report = run_experiment(plan)
        assert len(report.skipped) == 1
        assert len(report.executed) == plan.n_tuples - 1

    def test_heatmaps_rendered_with_results(self, tmp_path):
        plan = tiny_plan(tmp_path, maps_per_size={"hybrid": 1}, policies=["a2"],
                         stopping_grid=[{"max_samples": 6}], render_heatmaps=True)
        run_experiment(plan)
        (campaign_dir,) = [p.parent for p in result_files(tmp_path)]
        for name in ("truth", "mean", "variance"):
            assert (campaign_dir / f"{name}.pgm").is_file()
            assert (campaign_dir / f"{name}.ppm").is_file()
        names = {p.name for p in render_heatmaps(campaign_dir, tmp_path / "again")}
        assert "truth.pgm" in names

    def test_unwritable_output_dir(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        with pytest.raises(ConfigError):
            run_experiment(tiny_plan(blocker / "out"))


def test_processor_records_statuses():
    processor = CampaignProcessor(workers=2)

    def boom():
        raise ValueError("bad")

    finished = []
    processor.on_processing_complete = lambda tuple_id, status: finished.append((tuple_id, status))
    statuses = processor.run_all([CampaignJob("ok", lambda: None), CampaignJob("bad", boom)])
    assert statuses == {"ok": "completed", "bad": "failed"}
    assert sorted(finished) == [("bad", "failed"), ("ok", "completed")]


def test_processor_retries_after_recreating_directory(tmp_path):
    target = tmp_path / "results" / "t1" / "campaign.json"
    attempts = []

    def write():
        attempts.append(1)
        if not target.parent.is_dir():
            raise FileNotFoundError(2, "No such file or directory", str(target))
        target.write_text("{}")

    statuses = SimpleCampaignProcessor().run_all([CampaignJob("t1", write)])
    assert statuses == {"t1": "completed"}
    assert len(attempts) == 2
    assert target.exists()


def test_processor_fails_when_io_cannot_recover():
    def write():
        raise PermissionError("denied")

    statuses = SimpleCampaignProcessor().run_all([CampaignJob("t1", write)])
    assert statuses == {"t1": "failed"}
    failures = get_error_handler().get_failures()
    assert [f["exception"] for f in failures] == ["PermissionError"]
