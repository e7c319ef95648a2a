"""
Batch experiment driver.

Builds the map suite, sweeps sizes x maps x policies x stopping criteria,
persists one result directory per tuple, and writes the manifest and the
per-metric summary tables. Reruns over an existing output directory skip
tuples whose campaign.json is already present.
"""

import json
import logging
import os
import zlib
from pathlib import Path
from typing import Any, Dict, List, NamedTuple, Optional, Sequence

import numpy as np

import config
from .gp_core import GpHyperparams
from .fields import GridSpec, GroundTruthField, generate_field
from .planner import PlannerConfig, SamplingPolicy, StoppingCriteria, run_campaign
from .metrics import summarize_batch
from .storage import (collect_rows, is_campaign_complete, load_field, read_json, save_field,
                      write_campaign, write_json, write_summary)
from .rendering import render_result
from .campaign_processor import COMPLETED, FAILED, PENDING, CampaignJob, create_campaign_processor
from .error_handler import ConfigError, get_error_handler, get_graceful_shutdown

SKIPPED = "skipped"
MANIFEST_FILE = "manifest.json"

PLAN_KEYS = {
    "sizes", "maps_per_size", "policies", "stopping_grid", "base_seed", "output_dir",
    "workers", "n_clusters", "c_sample", "render_heatmaps", "gp", "planner",
}
GP_KEYS = {"length_scale_fraction", "length_scale", "signal_variance", "noise_variance"}
PLANNER_KEYS = {"coarse_k", "start_location", "candidate_stride", "revisit_tolerance",
                "pool_exclusion_scale", "pool_separation_scale"}


class MapComposition(NamedTuple):
    """Number of maps of each kind generated per environment size."""
    n_uniform: int = 1
    n_sloped: int = 1
    n_gaussian: int = 5
    n_hybrid: int = 5

    @property
    def total(self) -> int:
        return self.n_uniform + self.n_sloped + self.n_gaussian + self.n_hybrid

    def kinds(self) -> List[str]:
        """Field kind of every map index, uniform maps first."""
        return (["uniform"] * self.n_uniform + ["sloped"] * self.n_sloped
                + ["gaussian"] * self.n_gaussian + ["hybrid"] * self.n_hybrid)

    def to_dict(self) -> dict:
        return {"uniform": self.n_uniform, "sloped": self.n_sloped,
                "gaussian": self.n_gaussian, "hybrid": self.n_hybrid}

    @classmethod
    def from_dict(cls, data: dict) -> 'MapComposition':
        unknown = set(data) - set(config.FIELD_KINDS)
        if unknown:
            raise ConfigError(f"Unknown map kinds in maps_per_size: {sorted(unknown)}")
        return cls(*(int(data.get(kind, 0)) for kind in config.FIELD_KINDS))


class ExperimentPlan:
    """Everything a batch run needs; validated on construction."""

    def __init__(self, sizes: Sequence[float], maps_per_size: MapComposition,
                 policies: Sequence[SamplingPolicy], stopping_grid: Sequence[StoppingCriteria],
                 base_seed: int = config.BASE_SEED, output_dir: str = config.OUTPUT_DIR,
                 workers: int = config.WORKERS, n_clusters: int = config.N_CLUSTERS,
                 c_sample: float = config.C_SAMPLE, render_heatmaps: bool = config.RENDER_HEATMAPS,
                 gp: Optional[Dict[str, float]] = None, planner: Optional[Dict[str, Any]] = None):
        """
        Raises:
            ConfigError: If any part of the plan is invalid
        """
        self.sizes = [float(s) for s in sizes]
        self.maps_per_size = maps_per_size
        self.policies = list(policies)
        self.stopping_grid = list(stopping_grid)
        self.base_seed = int(base_seed)
        self.output_dir = Path(output_dir)
        self.workers = int(workers)
        self.n_clusters = int(n_clusters)
        self.c_sample = float(c_sample)
        self.render_heatmaps = bool(render_heatmaps)
        self.gp = dict(gp or {})
        self.planner = dict(planner or {})
        self.validate()

    def validate(self):
        if not self.sizes:
            raise ConfigError("sizes must not be empty")
        if any(not np.isfinite(s) or s <= 0 for s in self.sizes):
            raise ConfigError(f"sizes must be positive, got {self.sizes}")
        if len(set(self.sizes)) != len(self.sizes):
            raise ConfigError(f"sizes must be distinct, got {self.sizes}")
        if any(n < 0 for n in self.maps_per_size) or self.maps_per_size.total < 1:
            raise ConfigError(f"maps_per_size counts must be >= 0 with total >= 1, got {self.maps_per_size.to_dict()}")
        if not self.policies:
            raise ConfigError("policies must not be empty")
        if len({p.label for p in self.policies}) != len(self.policies):
            raise ConfigError("policies must be distinct")
        if not self.stopping_grid:
            raise ConfigError("stopping_grid must not be empty")
        if len({s.label for s in self.stopping_grid}) != len(self.stopping_grid):
            raise ConfigError("stopping_grid entries must be distinct")
        if self.base_seed < 0:
            raise ConfigError(f"base_seed must be non-negative, got {self.base_seed}")
        if self.workers < 1:
            raise ConfigError(f"workers must be at least 1, got {self.workers}")
        if self.c_sample < 0:
            raise ConfigError(f"c_sample must be non-negative, got {self.c_sample}")
        if self.maps_per_size.n_gaussian > 0 and self.n_clusters < 1:
            raise ConfigError(f"n_clusters must be at least 1 for gaussian maps, got {self.n_clusters}")

        unknown = set(self.gp) - GP_KEYS
        if unknown:
            raise ConfigError(f"Unknown gp keys: {sorted(unknown)}")
        unknown = set(self.planner) - PLANNER_KEYS
        if unknown:
            raise ConfigError(f"Unknown planner keys: {sorted(unknown)}")

        # build every size's planner config once so bad values fail before any run
        try:
            for size in self.sizes:
                self.planner_config(size)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"Invalid gp/planner settings: {e}")

    def hyperparams(self, size: float) -> GpHyperparams:
        gp = dict(self.gp)
        fraction = gp.pop("length_scale_fraction", config.LENGTH_SCALE_FRACTION)
        gp.setdefault("length_scale", size * fraction)
        return GpHyperparams(**gp)

    def planner_config(self, size: float) -> PlannerConfig:
        return PlannerConfig(self.hyperparams(size), **self.planner)

    @property
    def n_tuples(self) -> int:
        return len(self.sizes) * self.maps_per_size.total * len(self.policies) * len(self.stopping_grid)

    def to_dict(self) -> dict:
        return {
            "sizes": self.sizes,
            "maps_per_size": self.maps_per_size.to_dict(),
            "policies": [{"rule": p.rule.value, "top_k": p.top_k} for p in self.policies],
            "stopping_grid": [s.to_dict() for s in self.stopping_grid],
            "base_seed": self.base_seed,
            "output_dir": str(self.output_dir),
            "workers": self.workers,
            "n_clusters": self.n_clusters,
            "c_sample": self.c_sample,
            "render_heatmaps": self.render_heatmaps,
            "gp": self.gp,
            "planner": self.planner,
        }


def default_stopping_grid() -> List[StoppingCriteria]:
    """One criterion per campaign: every sample budget, distance budget and threshold."""
    return ([StoppingCriteria(max_samples=n) for n in config.SAMPLE_BUDGETS]
            + [StoppingCriteria(max_distance=d) for d in config.DISTANCE_BUDGETS]
            + [StoppingCriteria(variance_threshold=v) for v in config.VARIANCE_THRESHOLDS])


def default_plan_dict() -> dict:
    return {
        "sizes": list(config.ENVIRONMENT_SIZES),
        "maps_per_size": dict(config.MAPS_PER_SIZE),
        "policies": list(config.POLICY_RULES),
        "stopping_grid": [s.to_dict() for s in default_stopping_grid()],
        "base_seed": config.BASE_SEED,
        "output_dir": config.OUTPUT_DIR,
        "workers": config.WORKERS,
        "n_clusters": config.N_CLUSTERS,
        "c_sample": config.C_SAMPLE,
        "render_heatmaps": config.RENDER_HEATMAPS,
        "gp": {},
        "planner": {},
    }


def plan_from_dict(data: dict) -> ExperimentPlan:
    """
    Build a plan from a JSON-style dict.

    Raises:
        ConfigError: On unknown keys or invalid values
    """
    unknown = set(data) - PLAN_KEYS
    if unknown:
        raise ConfigError(f"Unknown experiment config keys: {sorted(unknown)}")

    merged = default_plan_dict()
    merged.update(data)
    try:
        policies = [SamplingPolicy.from_dict(p) for p in merged["policies"]]
        stopping_grid = [StoppingCriteria.from_dict(s) for s in merged["stopping_grid"]]
        return ExperimentPlan(
            sizes=merged["sizes"],
            maps_per_size=MapComposition.from_dict(merged["maps_per_size"]),
            policies=policies,
            stopping_grid=stopping_grid,
            base_seed=merged["base_seed"],
            output_dir=merged["output_dir"],
            workers=merged["workers"],
            n_clusters=merged["n_clusters"],
            c_sample=merged["c_sample"],
            render_heatmaps=merged["render_heatmaps"],
            gp=merged["gp"],
            planner=merged["planner"],
        )
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"Invalid experiment config: {e}")


def load_plan(path: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None) -> ExperimentPlan:
    """
    Resolve a plan: defaults < config file < overrides (None values ignored).

    Args:
        path: Optional JSON config file
        overrides: Values from command-line flags

    Raises:
        ConfigError: If the file cannot be read or the plan is invalid
    """
    data: Dict[str, Any] = {}
    if path is not None:
        try:
            with open(path, "r") as f:
                data = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"Cannot read experiment config {path}: {e}")
        if not isinstance(data, dict):
            raise ConfigError(f"Experiment config {path} must hold a JSON object")

    for key, value in (overrides or {}).items():
        if value is not None:
            data[key] = value
    return plan_from_dict(data)


def default_protocol_plan(output_dir: str = config.OUTPUT_DIR, base_seed: int = config.BASE_SEED) -> ExperimentPlan:
    """5 sizes x 12 maps x 5 policies x 11 stopping configurations."""
    return plan_from_dict({"output_dir": output_dir, "base_seed": base_seed})


# ---------------------------------------------------------------------------
# Seeds and tuple enumeration
# ---------------------------------------------------------------------------

def _size_key(size: float) -> int:
    return int(round(size * 1000))


def map_seed(base_seed: int, size: float, map_index: int) -> int:
    """Seed of map ``map_index`` at ``size``, shared by every policy and stopping rule."""
    sequence = np.random.SeedSequence([base_seed, _size_key(size), map_index])
    return int(sequence.generate_state(1)[0])


def policy_seed(base_seed: int, tuple_id: str) -> int:
    """Selection-RNG seed of one campaign (CRC32 keeps it stable across processes)."""
    sequence = np.random.SeedSequence([base_seed, zlib.crc32(tuple_id.encode("utf-8"))])
    return int(sequence.generate_state(1)[0])


def map_id(size: float, map_index: int, kind: str) -> str:
    return f"s{size:03g}-m{map_index:02d}-{kind}"


class ExperimentTuple(NamedTuple):
    tuple_id: str
    map_id: str
    size: float
    map_index: int
    kind: str
    policy: SamplingPolicy
    stopping: StoppingCriteria


def enumerate_tuples(plan: ExperimentPlan) -> List[ExperimentTuple]:
    """Every (size, map, policy, stopping) tuple, sorted by tuple id."""
    tuples = []
    kinds = plan.maps_per_size.kinds()
    for size in plan.sizes:
        for map_index, kind in enumerate(kinds):
            mid = map_id(size, map_index, kind)
            for policy in plan.policies:
                for stopping in plan.stopping_grid:
                    tuple_id = f"{mid}__{policy.label}__{stopping.label}"
                    seeded = policy.with_seed(policy_seed(plan.base_seed, tuple_id))
                    tuples.append(ExperimentTuple(tuple_id, mid, size, map_index, kind, seeded, stopping))
    return sorted(tuples, key=lambda t: t.tuple_id)


# ---------------------------------------------------------------------------
# Running
# ---------------------------------------------------------------------------

class ExperimentReport(NamedTuple):
    statuses: Dict[str, str]
    failures: List[Dict[str, Any]]
    manifest_path: Path
    summary_dir: Optional[Path]

    def ids_with(self, status: str) -> List[str]:
        return sorted(t for t, s in self.statuses.items() if s == status)

    @property
    def executed(self) -> List[str]:
        return self.ids_with(COMPLETED)

    @property
    def skipped(self) -> List[str]:
        return self.ids_with(SKIPPED)

    @property
    def failed(self) -> List[str]:
        return self.ids_with(FAILED)

    @property
    def pending(self) -> List[str]:
        return self.ids_with(PENDING)

    @property
    def exit_code(self) -> int:
        if self.failed or self.pending:
            return config.EXIT_PARTIAL_FAILURE
        return config.EXIT_SUCCESS


def ensure_output_dir(output_dir: Path):
    """
    Raises:
        ConfigError: If output_dir cannot be created or written
    """
    try:
        output_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ConfigError(f"Cannot create output directory {output_dir}: {e}")
    if not os.access(output_dir, os.W_OK):
        raise ConfigError(f"Output directory {output_dir} is not writable")


def generate_fields(plan: ExperimentPlan) -> Dict[str, GroundTruthField]:
    """
    Generate (or reload) the map suite into ``<output_dir>/fields``.

    Returns:
        Mapping map id -> field
    """
    logger = logging.getLogger(__name__)
    ensure_output_dir(plan.output_dir)
    fields_dir = plan.output_dir / "fields"

    suite = {}
    for size in plan.sizes:
        spec = GridSpec(size)
        for map_index, kind in enumerate(plan.maps_per_size.kinds()):
            mid = map_id(size, map_index, kind)
            header = fields_dir / f"{mid}.json"
            if header.is_file():
                suite[mid] = load_field(header)
                continue
            field = generate_field(kind, spec, map_seed(plan.base_seed, size, map_index), plan.n_clusters)
            save_field(field, header)
            suite[mid] = field

    logger.info(f"Map suite ready: {len(suite)} fields in {fields_dir}")
    return suite


def _campaign_job(plan: ExperimentPlan, item: ExperimentTuple, field: GroundTruthField) -> CampaignJob:
    def run():
        result = run_campaign(field, item.policy, item.stopping, plan.planner_config(item.size))
        result.metadata.update({
            "tuple_id": item.tuple_id,
            "map_id": item.map_id,
            "field_path": f"../../fields/{item.map_id}.json",
            "field_kind": item.kind,
            "size": item.size,
            "base_seed": plan.base_seed,
        })
        campaign_dir = plan.output_dir / "results" / item.tuple_id
        if plan.render_heatmaps:
            # campaign.json must stay the last file written
            render_result(result, field, campaign_dir)
        write_campaign(result, campaign_dir, plan.c_sample)
    return CampaignJob(item.tuple_id, run)


def write_manifest(plan: ExperimentPlan, statuses: Dict[str, str], failures: List[Dict[str, Any]]) -> Path:
    errors = {f["tuple_id"]: f"{f['exception']}: {f['message']}" for f in failures}
    entries = []
    for tuple_id in sorted(statuses):
        entry = {"tuple_id": tuple_id, "status": statuses[tuple_id]}
        if statuses[tuple_id] == FAILED:
            entry["error"] = errors.get(tuple_id, "unknown error")
        entries.append(entry)

    path = plan.output_dir / MANIFEST_FILE
    write_json(path, {"base_seed": plan.base_seed, "n_tuples": len(entries), "tuples": entries})
    return path


def summarize(output_dir, c_sample: float = config.C_SAMPLE,
              tuple_ids: Optional[List[str]] = None) -> Optional[Path]:
    """
    Aggregate persisted campaigns into ``<output_dir>/summary``.

    Returns:
        Summary directory, or None when no completed campaign exists
    """
    logger = logging.getLogger(__name__)
    output_dir = Path(output_dir)
    rows = collect_rows(output_dir / "results", tuple_ids)
    if not rows:
        logger.warning(f"No completed campaigns under {output_dir / 'results'}; summary not written")
        return None
    summary_dir = output_dir / "summary"
    write_summary(summarize_batch(rows, c_sample), summary_dir)
    return summary_dir


def run_experiment(plan: ExperimentPlan, processor=None) -> ExperimentReport:
    """
    Run every tuple of a plan that is not yet complete.

    Args:
        plan: Validated experiment plan
        processor: Optional campaign processor (default from plan.workers)

    Returns:
        ExperimentReport; exit_code is 0 on full success, 2 if any tuple failed or is pending

    Raises:
        ConfigError: If the output directory is unusable
    """
    logger = logging.getLogger(__name__)

    error_handler = get_error_handler()
    error_handler.reset()
    shutdown = get_graceful_shutdown()
    shutdown.reset()

    suite = generate_fields(plan)
    write_json(plan.output_dir / "plan.json", plan.to_dict())

    tuples = enumerate_tuples(plan)
    statuses: Dict[str, str] = {}
    jobs = []
    for item in tuples:
        if is_campaign_complete(plan.output_dir / "results" / item.tuple_id):
            statuses[item.tuple_id] = SKIPPED
        else:
            jobs.append(_campaign_job(plan, item, suite[item.map_id]))

    logger.info(f"Experiment: {len(tuples)} tuples, {len(jobs)} to run, "
                f"{len(statuses)} already complete, {plan.workers} workers")

    processor = processor or create_campaign_processor(plan.workers)
    finished: List[str] = []

    def log_progress(tuple_id: str, status: str):
        finished.append(tuple_id)
        logger.info(f"[{len(finished)}/{len(jobs)}] {tuple_id}: {status}")

    processor.on_processing_complete = log_progress
    if jobs:
        statuses.update(processor.run_all(jobs))

    failures = error_handler.get_failures()
    manifest_path = write_manifest(plan, statuses, failures)
    summary_dir = summarize(plan.output_dir, plan.c_sample, [t.tuple_id for t in tuples])

    report = ExperimentReport(statuses, failures, manifest_path, summary_dir)
    logger.info(f"Experiment finished: {len(report.executed)} executed, {len(report.skipped)} skipped, "
                f"{len(report.failed)} failed, {len(report.pending)} pending")
    return report


def read_manifest(output_dir) -> Dict[str, str]:
    """Mapping tuple_id -> status from ``manifest.json``."""
    data = read_json(Path(output_dir) / MANIFEST_FILE)
    return {entry["tuple_id"]: entry["status"] for entry in data["tuples"]}
