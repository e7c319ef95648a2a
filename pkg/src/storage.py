"""
Flat-file persistence: field export/import, campaign result files,
summary tables and observation CSV ingest.
"""

import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np
import pandas as pd

import config
from .gp_core import GpHyperparams, Observation, Point2
from .fields import GridSpec, GroundTruthField
from .metrics import CampaignResult, IterationRecord, campaign_row, split_by_metric
from .planner import SamplingPolicy, StoppingCriteria
from .error_handler import ArtifactError

PathLike = Union[str, Path]
CAMPAIGN_FILE = "campaign.json"


def atomic_write_text(path: PathLike, text: str):
    """Write via a temporary file in the same directory, then rename into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path: PathLike, data):
    atomic_write_text(path, json.dumps(data, indent=2, sort_keys=True) + "\n")


def read_json(path: PathLike):
    path = Path(path)
    try:
        with open(path, "r") as f:
            return json.load(f)
    except FileNotFoundError:
        raise ArtifactError(path, "file not found")
    except (OSError, json.JSONDecodeError) as e:
        raise ArtifactError(path, f"cannot parse JSON: {e}")


def write_grid_csv(path: PathLike, grid: np.ndarray):
    """Grid as comma-separated rows, row 0 = y=0, full float precision."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, np.atleast_2d(grid), delimiter=",", fmt="%.17g")


def read_grid_csv(path: PathLike) -> np.ndarray:
    path = Path(path)
    try:
        return np.atleast_2d(np.loadtxt(path, delimiter=",", dtype=float))
    except (OSError, ValueError) as e:
        raise ArtifactError(path, f"cannot read grid CSV: {e}")


# ---------------------------------------------------------------------------
# Fields
# ---------------------------------------------------------------------------

def save_field(field: GroundTruthField, header_path: PathLike) -> Path:
    """
    Export a field as a JSON header plus a CSV grid next to it.

    Returns:
        Path of the JSON header
    """
    header_path = Path(header_path)
    grid_path = header_path.with_suffix(".csv")
    write_grid_csv(grid_path, field.values)
    write_json(header_path, {
        "kind": field.kind,
        "seed": field.seed,
        "side": field.spec.side,
        "resolution": field.spec.resolution,
        "params": field.params,
        "grid_file": grid_path.name,
    })
    return header_path


def load_field(header_path: PathLike) -> GroundTruthField:
    """Import a field written by save_field."""
    header_path = Path(header_path)
    header = read_json(header_path)
    try:
        spec = GridSpec(header["side"], header["resolution"])
        values = read_grid_csv(header_path.parent / header["grid_file"])
        return GroundTruthField(spec, values, header["kind"], header.get("seed"), header.get("params"))
    except KeyError as e:
        raise ArtifactError(header_path, f"missing header key {e}")
    except ValueError as e:
        raise ArtifactError(header_path, str(e))


# ---------------------------------------------------------------------------
# Campaign results
# ---------------------------------------------------------------------------

def _point(p) -> Optional[List[float]]:
    return None if p is None else [float(p[0]), float(p[1])]


def campaign_to_dict(result: CampaignResult, c_sample: float = config.C_SAMPLE) -> Dict:
    """JSON-ready representation of a result (grids are stored separately)."""
    return {
        "metadata": result.metadata,
        "policy": result.policy.to_dict(),
        "stopping": result.stopping.to_dict(),
        "stopping_reason": result.stopping_reason,
        "spec": result.spec.to_dict(),
        "hyperparams": result.hyperparams.to_dict(),
        "n_bootstrap": result.n_bootstrap,
        "sample_log": [{"x": o.location.x, "y": o.location.y, "value": o.value} for o in result.sample_log],
        "trajectory": [_point(p) for p in result.trajectory],
        "per_iteration": [
            {
                "iteration": r.iteration,
                "location": _point(r.location),
                "score": r.score,
                "max_variance": r.max_variance,
                "avg_variance": r.avg_variance,
                "cumulative_distance": r.cumulative_distance,
                "n_samples": r.n_samples,
                "rmse": r.rmse,
            }
            for r in result.per_iteration
        ],
        "summary": campaign_row(result, c_sample),
    }


def campaign_from_dict(data: Dict, mean: np.ndarray, variance: np.ndarray) -> CampaignResult:
    spec = GridSpec(**data["spec"])
    records = [
        IterationRecord(
            iteration=r["iteration"],
            location=None if r["location"] is None else Point2(*r["location"]),
            score=r["score"],
            max_variance=r["max_variance"],
            avg_variance=r["avg_variance"],
            cumulative_distance=r["cumulative_distance"],
            n_samples=r["n_samples"],
            rmse=r["rmse"],
        )
        for r in data["per_iteration"]
    ]
    return CampaignResult(
        policy=SamplingPolicy.from_dict(data["policy"]),
        stopping=StoppingCriteria.from_dict(data["stopping"]),
        stopping_reason=data["stopping_reason"],
        sample_log=[Observation(Point2(o["x"], o["y"]), o["value"]) for o in data["sample_log"]],
        trajectory=[Point2(*p) for p in data["trajectory"]],
        per_iteration=records,
        final_reconstruction=mean,
        final_variance_grid=variance,
        spec=spec,
        hyperparams=GpHyperparams.from_dict(data["hyperparams"]),
        n_bootstrap=data["n_bootstrap"],
        metadata=data.get("metadata"),
    )


def write_trajectory_csv(path: PathLike, result: CampaignResult):
    points = np.asarray(result.trajectory, dtype=float)
    legs = np.hypot(*np.diff(points, axis=0).T) if len(points) > 1 else np.zeros(0)
    frame = pd.DataFrame({
        "step": np.arange(len(points)),
        "x": points[:, 0],
        "y": points[:, 1],
        "cumulative_distance": np.concatenate([[0.0], np.cumsum(legs)]),
    })
    frame.to_csv(path, index=False, float_format="%.12g")


def write_campaign(result: CampaignResult, directory: PathLike, c_sample: float = config.C_SAMPLE) -> Path:
    """
    Persist a campaign: trajectory.csv, mean.csv, variance.csv, then campaign.json.

    campaign.json is written last and atomically; its presence marks the
    campaign complete.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_trajectory_csv(directory / "trajectory.csv", result)
    write_grid_csv(directory / "mean.csv", result.final_reconstruction)
    write_grid_csv(directory / "variance.csv", result.final_variance_grid)
    write_json(directory / CAMPAIGN_FILE, campaign_to_dict(result, c_sample))
    return directory / CAMPAIGN_FILE


def read_campaign(directory: PathLike) -> CampaignResult:
    directory = Path(directory)
    data = read_json(directory / CAMPAIGN_FILE)
    try:
        return campaign_from_dict(data, read_grid_csv(directory / "mean.csv"),
                                  read_grid_csv(directory / "variance.csv"))
    except (KeyError, TypeError, ValueError) as e:
        raise ArtifactError(directory / CAMPAIGN_FILE, f"malformed campaign record: {e}")


def is_campaign_complete(directory: PathLike) -> bool:
    return (Path(directory) / CAMPAIGN_FILE).is_file()


def collect_rows(results_dir: PathLike, tuple_ids: Optional[List[str]] = None) -> List[Dict]:
    """
    Summary rows of persisted campaigns, in tuple-id order.

    Args:
        results_dir: The ``results/`` directory of a batch
        tuple_ids: Restrict to these tuples (all completed campaigns if None)
    """
    results_dir = Path(results_dir)
    if tuple_ids is None:
        directories = sorted(p for p in results_dir.iterdir() if p.is_dir()) if results_dir.is_dir() else []
    else:
        directories = [results_dir / t for t in sorted(tuple_ids)]

    rows = []
    for directory in directories:
        if is_campaign_complete(directory):
            rows.append(read_json(directory / CAMPAIGN_FILE)["summary"])
    return rows


def write_summary(summary: pd.DataFrame, summary_dir: PathLike) -> List[Path]:
    """Write summary/<metric>.csv for every metric plus summary/summary.json."""
    logger = logging.getLogger(__name__)
    summary_dir = Path(summary_dir)
    summary_dir.mkdir(parents=True, exist_ok=True)

    written = []
    for metric, table in split_by_metric(summary).items():
        path = summary_dir / f"{metric}.csv"
        atomic_write_text(path, table.to_csv(index=False, float_format="%.12g", lineterminator="\n"))
        written.append(path)

    records = summary.to_dict(orient="records")
    for record in records:
        record["n"] = int(record["n"])
        record["excluded_flag"] = bool(record["excluded_flag"])
    write_json(summary_dir / "summary.json", records)
    written.append(summary_dir / "summary.json")

    logger.info(f"Wrote {len(written)} summary files to {summary_dir}")
    return written


def read_summary(summary_dir: PathLike) -> pd.DataFrame:
    """Reassemble the long-format summary from summary/<metric>.csv files."""
    summary_dir = Path(summary_dir)
    tables = []
    for path in sorted(summary_dir.glob("*.csv")):
        try:
            table = pd.read_csv(path)
        except (OSError, pd.errors.ParserError) as e:
            raise ArtifactError(path, f"cannot read summary CSV: {e}")
        table.insert(0, "metric", path.stem)
        tables.append(table)
    if not tables:
        raise ArtifactError(summary_dir, "no summary CSV files found")
    return pd.concat(tables, ignore_index=True)


# ---------------------------------------------------------------------------
# Observations
# ---------------------------------------------------------------------------

def load_observations(path: PathLike, vwc_percent: bool = False) -> List[Observation]:
    """
    Read ``x,y,value`` rows as observations.

    Args:
        path: CSV file with columns x, y and value (or vwc)
        vwc_percent: Values are VWC percentages; divide by VWC_PERCENT_SCALE

    Raises:
        ArtifactError: If the file is missing, malformed or non-finite
    """
    path = Path(path)
    try:
        frame = pd.read_csv(path)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise ArtifactError(path, f"cannot read observations: {e}")

    value_column = "value" if "value" in frame.columns else "vwc"
    missing = {"x", "y", value_column} - set(frame.columns)
    if missing:
        raise ArtifactError(path, f"missing columns {sorted(missing)}")

    values = frame[value_column].to_numpy(dtype=float)
    if vwc_percent:
        values = values / config.VWC_PERCENT_SCALE
    coords = frame[["x", "y"]].to_numpy(dtype=float)
    if not (np.all(np.isfinite(coords)) and np.all(np.isfinite(values))):
        raise ArtifactError(path, "observations must be finite")

    return [Observation(Point2(float(x), float(y)), float(v)) for (x, y), v in zip(coords, values)]
