"""Tests for flat-file persistence."""

import json

import numpy as np
import pandas as pd
import pytest

from src.storage import (collect_rows, is_campaign_complete, load_field, load_observations, read_campaign,
                         read_grid_csv, read_json, read_summary, save_field, write_campaign,
                         write_grid_csv, write_summary)
from src.fields import GridSpec, generate_field
from src.metrics import summarize_batch
from src.planner import SamplingPolicy, StoppingCriteria, run_campaign
from src.error_handler import ArtifactError


@pytest.fixture(scope="module")
def result():
    truth = generate_field("gaussian", GridSpec(10), seed=8, n_clusters=3)
    campaign = run_campaign(truth, SamplingPolicy("a1_randomized", rng_seed=4), StoppingCriteria(max_samples=7))
    campaign.metadata.update({"tuple_id": "s010-m00-gaussian__a1_randomized__samples-7", "field_kind": "gaussian"})
    return campaign


@pytest.mark.parametrize("kind", ["uniform", "sloped", "gaussian", "hybrid"])
def test_field_round_trip_is_exact(tmp_path, kind):
    field = generate_field(kind, GridSpec(12), seed=21)
    header = save_field(field, tmp_path / "fields" / "m.json")
    loaded = load_field(header)
    np.testing.assert_array_equal(loaded.values, field.values)
    assert loaded.kind == kind
    assert loaded.seed == 21
    assert loaded.spec == field.spec


def test_field_header_format(tmp_path):
    field = generate_field("sloped", GridSpec(4), seed=1)
    header = save_field(field, tmp_path / "m.json")
    data = json.loads(header.read_text())
    assert set(data) == {"kind", "seed", "side", "resolution", "params", "grid_file"}
    assert data["grid_file"] == "m.csv"
    lines = (tmp_path / "m.csv").read_text().strip().splitlines()
    assert len(lines) == 5
    assert all(len(line.split(",")) == 5 for line in lines)


def test_missing_field_reports_path(tmp_path):
    with pytest.raises(ArtifactError) as excinfo:
        load_field(tmp_path / "nope.json")
    assert excinfo.value.path == tmp_path / "nope.json"


def test_malformed_json_reports_path(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(ArtifactError) as excinfo:
        read_json(path)
    assert "bad.json" in str(excinfo.value)


def test_grid_csv_round_trip(tmp_path):
    grid = np.random.default_rng(2).uniform(size=(4, 4))
    write_grid_csv(tmp_path / "g.csv", grid)
    np.testing.assert_array_equal(read_grid_csv(tmp_path / "g.csv"), grid)


class TestCampaignFiles:
    def test_written_files(self, tmp_path, result):
        write_campaign(result, tmp_path / "c")
        for name in ("campaign.json", "trajectory.csv", "mean.csv", "variance.csv"):
            assert (tmp_path / "c" / name).is_file()
        assert is_campaign_complete(tmp_path / "c")
        assert not list((tmp_path / "c").glob("*.tmp"))

    def test_trajectory_csv(self, tmp_path, result):
        write_campaign(result, tmp_path / "c")
        trajectory = pd.read_csv(tmp_path / "c" / "trajectory.csv")
        assert list(trajectory.columns) == ["step", "x", "y", "cumulative_distance"]
        assert len(trajectory) == result.n_samples + 1
        assert trajectory["cumulative_distance"].iloc[-1] == pytest.approx(result.total_distance)

    def test_read_back(self, tmp_path, result):
        write_campaign(result, tmp_path / "c")
        loaded = read_campaign(tmp_path / "c")
        assert loaded.policy.rule == result.policy.rule
        assert loaded.stopping.label == result.stopping.label
        assert loaded.sample_log == result.sample_log
        assert loaded.per_iteration == result.per_iteration
        np.testing.assert_array_equal(loaded.final_reconstruction, result.final_reconstruction)
        assert loaded.metadata["tuple_id"] == result.metadata["tuple_id"]

    def test_incomplete_directory(self, tmp_path):
        (tmp_path / "c").mkdir()
        assert not is_campaign_complete(tmp_path / "c")

    def test_collect_rows_skips_incomplete(self, tmp_path, result):
        write_campaign(result, tmp_path / "results" / result.metadata["tuple_id"])
        (tmp_path / "results" / "zz-partial").mkdir()
        rows = collect_rows(tmp_path / "results")
        assert len(rows) == 1
        assert rows[0]["tuple_id"] == result.metadata["tuple_id"]


def test_summary_files(tmp_path, result):
    written = write_summary(summarize_batch([result]), tmp_path / "summary")
    assert (tmp_path / "summary" / "total_distance.csv") in written
    table = pd.read_csv(tmp_path / "summary" / "n_samples.csv")
    assert list(table.columns) == ["policy", "size", "stopping", "mean", "std", "n", "excluded_flag"]
    assert bool(table["excluded_flag"].iloc[0])
    assert len(json.loads((tmp_path / "summary" / "summary.json").read_text())) == len(written) - 1

    combined = read_summary(tmp_path / "summary")
    assert set(combined["metric"]) == {p.stem for p in written if p.suffix == ".csv"}


class TestObservations:
    def test_values(self, tmp_path):
        path = tmp_path / "obs.csv"
        path.write_text("x,y,value\n1,2,0.25\n3.5,4,0.75\n")
        observations = load_observations(path)
        assert [tuple(o.location) for o in observations] == [(1.0, 2.0), (3.5, 4.0)]
        assert [o.value for o in observations] == [0.25, 0.75]

    def test_vwc_percent(self, tmp_path):
        path = tmp_path / "obs.csv"
        path.write_text("x,y,vwc\n0,0,32.5\n")
        assert load_observations(path, vwc_percent=True)[0].value == pytest.approx(0.325)

    def test_missing_column(self, tmp_path):
        path = tmp_path / "obs.csv"
        path.write_text("x,value\n0,0.5\n")
        with pytest.raises(ArtifactError):
            load_observations(path)

    def test_non_finite(self, tmp_path):
        path = tmp_path / "obs.csv"
        path.write_text("x,y,value\n0,0,\n")
        with pytest.raises(ArtifactError):
            load_observations(path)
