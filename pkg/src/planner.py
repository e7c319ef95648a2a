"""
Two-phase adaptive sampling planner.

Phase 1 visits a coarse lattice in serpentine order to bootstrap the GP.
Phase 2 repeatedly picks the candidate maximizing an acquisition rule,
travels there, samples the truth, refits and checks the stopping criteria.
"""

import logging
from enum import Enum
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.distance import cdist

import config
from .gp_core import GpHyperparams, GpModel, Observation, Point2, as_points, fit
from .fields import GridSpec, GroundTruthField, make_rng
from .metrics import CampaignResult, IterationRecord, grid_rmse
from .error_handler import ConfigError, EmptyCandidates

TruthSource = Callable[[Point2], float]


class SamplingRule(str, Enum):
    BENCHMARK = "benchmark"
    A1 = "a1"
    A2 = "a2"
    A1_RANDOMIZED = "a1_randomized"
    A2_RANDOMIZED = "a2_randomized"


RANDOMIZED_RULES = (SamplingRule.A1_RANDOMIZED, SamplingRule.A2_RANDOMIZED)


class StoppingReason(str, Enum):
    MAX_SAMPLES = "max_samples"
    MAX_DISTANCE = "max_distance"
    VARIANCE_THRESHOLD = "variance_threshold"
    CANDIDATES_EXHAUSTED = "candidates_exhausted"


class SamplingPolicy:
    """Which acquisition rule picks the next sample, plus its parameters."""

    def __init__(self, rule, top_k: int = config.TOP_K, rng_seed: int = 0):
        """
        Args:
            rule: SamplingRule or its string value
            top_k: Pool size for the randomized rules (>= 1)
            rng_seed: Seed of the selection RNG

        Raises:
            ValueError: If the rule is unknown or top_k < 1
        """
        try:
            self.rule = SamplingRule(rule)
        except ValueError:
            raise ValueError(f"Unknown sampling rule: {rule}. Expected one of {[r.value for r in SamplingRule]}")
        if int(top_k) != top_k or top_k < 1:
            raise ValueError(f"top_k must be an integer >= 1, got {top_k}")

        self.top_k = int(top_k)
        self.rng_seed = int(rng_seed)

    @property
    def is_randomized(self) -> bool:
        return self.rule in RANDOMIZED_RULES

    @property
    def label(self) -> str:
        if self.is_randomized and self.top_k != config.TOP_K:
            return f"{self.rule.value}-k{self.top_k}"
        return self.rule.value

    def with_seed(self, rng_seed: int) -> 'SamplingPolicy':
        return SamplingPolicy(self.rule, self.top_k, rng_seed)

    def to_dict(self) -> dict:
        return {"rule": self.rule.value, "top_k": self.top_k, "rng_seed": self.rng_seed}

    @classmethod
    def from_dict(cls, data) -> 'SamplingPolicy':
        if isinstance(data, str):
            return cls(data)
        return cls(data["rule"], data.get("top_k", config.TOP_K), data.get("rng_seed", 0))

    def __repr__(self):
        return f"SamplingPolicy(rule={self.rule.value}, top_k={self.top_k}, rng_seed={self.rng_seed})"


class StoppingCriteria:
    """Sample budget eta, distance budget delta, max-variance threshold psi."""

    def __init__(self, max_samples: Optional[int] = None, max_distance: Optional[float] = None,
                 variance_threshold: Optional[float] = None):
        """
        Raises:
            ConfigError: If no criterion is given
            ValueError: If a given criterion is not positive
        """
        if max_samples is None and max_distance is None and variance_threshold is None:
            raise ConfigError("StoppingCriteria needs at least one of max_samples, max_distance, variance_threshold")
        if max_samples is not None and (int(max_samples) != max_samples or max_samples < 1):
            raise ValueError(f"max_samples must be an integer >= 1, got {max_samples}")
        if max_distance is not None and not max_distance > 0:
            raise ValueError(f"max_distance must be positive, got {max_distance}")
        if variance_threshold is not None and not variance_threshold > 0:
            raise ValueError(f"variance_threshold must be positive, got {variance_threshold}")

        self.max_samples = None if max_samples is None else int(max_samples)
        self.max_distance = None if max_distance is None else float(max_distance)
        self.variance_threshold = None if variance_threshold is None else float(variance_threshold)

    @property
    def family(self) -> str:
        """Which dependent variable the criterion conditions on."""
        present = [name for name, value in (("samples", self.max_samples),
                                            ("distance", self.max_distance),
                                            ("variance", self.variance_threshold)) if value is not None]
        return present[0] if len(present) == 1 else "mixed"

    @property
    def label(self) -> str:
        parts = []
        if self.max_samples is not None:
            parts.append(f"samples-{self.max_samples}")
        if self.max_distance is not None:
            parts.append(f"distance-{self.max_distance:g}")
        if self.variance_threshold is not None:
            parts.append(f"variance-{self.variance_threshold:g}")
        return "+".join(parts)

    def check(self, n_samples: int, cumulative_distance: float, max_variance: float) -> Optional[StoppingReason]:
        """First satisfied criterion (samples, distance, variance order) or None."""
        if self.max_samples is not None and n_samples >= self.max_samples:
            return StoppingReason.MAX_SAMPLES
        if self.max_distance is not None and cumulative_distance >= self.max_distance:
            return StoppingReason.MAX_DISTANCE
        if self.variance_threshold is not None and max_variance < self.variance_threshold:
            return StoppingReason.VARIANCE_THRESHOLD
        return None

    def to_dict(self) -> dict:
        return {key: value for key, value in (("max_samples", self.max_samples),
                                              ("max_distance", self.max_distance),
                                              ("variance_threshold", self.variance_threshold))
                if value is not None}

    @classmethod
    def from_dict(cls, data: dict) -> 'StoppingCriteria':
        unknown = set(data) - {"max_samples", "max_distance", "variance_threshold"}
        if unknown:
            raise ConfigError(f"Unknown stopping keys: {sorted(unknown)}")
        return cls(data.get("max_samples"), data.get("max_distance"), data.get("variance_threshold"))

    def __repr__(self):
        return f"StoppingCriteria({self.label})"


class CandidateGrid:
    """The discretized domain over which acquisition is maximized."""

    def __init__(self, points: np.ndarray, d_max: float, node_indices: Optional[np.ndarray] = None):
        self.points = as_points(points)
        self.d_max = float(d_max)
        self.node_indices = node_indices

    @classmethod
    def from_spec(cls, spec: GridSpec, stride: int = 1) -> 'CandidateGrid':
        """Every ``stride``-th field node in both directions; d_max is the domain diagonal."""
        if stride < 1:
            raise ValueError(f"stride must be >= 1, got {stride}")
        rows, cols = np.meshgrid(np.arange(spec.resolution), np.arange(spec.resolution), indexing="ij")
        keep = (rows % stride == 0) & (cols % stride == 0)
        node_indices = np.flatnonzero(keep.ravel())
        return cls(spec.node_points()[node_indices], spec.diagonal, node_indices)

    def __len__(self):
        return len(self.points)


class PlannerState:
    """Dataset, robot position and travel bookkeeping of one campaign."""

    def __init__(self, start: Point2):
        self.dataset: List[Observation] = []
        self.current_location = Point2(float(start[0]), float(start[1]))
        self.cumulative_distance = 0.0
        self.iteration = 0
        self.trajectory: List[Point2] = [self.current_location]

    @property
    def n_samples(self) -> int:
        return len(self.dataset)

    def travel_to(self, target: Point2) -> float:
        """Move to ``target`` and return the Euclidean leg length."""
        target = Point2(float(target[0]), float(target[1]))
        leg = float(np.hypot(target.x - self.current_location.x, target.y - self.current_location.y))
        self.cumulative_distance += leg
        self.current_location = target
        self.trajectory.append(target)
        return leg

    def record(self, observation: Observation):
        self.dataset.append(observation)


class PlannerConfig:
    """Planner knobs that are not part of the policy or stopping rule."""

    def __init__(self, hyperparams: GpHyperparams, coarse_k: int = config.COARSE_GRID_K,
                 start_location: Sequence[float] = config.START_LOCATION,
                 candidate_stride: int = config.CANDIDATE_STRIDE,
                 revisit_tolerance: float = config.REVISIT_TOLERANCE,
                 pool_exclusion_scale: float = config.POOL_EXCLUSION_SCALE,
                 pool_separation_scale: float = config.POOL_SEPARATION_SCALE):
        if coarse_k < 1:
            raise ValueError(f"coarse_k must be >= 1, got {coarse_k}")
        if candidate_stride < 1:
            raise ValueError(f"candidate_stride must be >= 1, got {candidate_stride}")
        if revisit_tolerance < 0:
            raise ValueError(f"revisit_tolerance must be non-negative, got {revisit_tolerance}")
        if pool_exclusion_scale < 0 or pool_separation_scale < 0:
            raise ValueError(f"pool scales must be non-negative, got {pool_exclusion_scale}, {pool_separation_scale}")

        self.hyperparams = hyperparams
        self.coarse_k = int(coarse_k)
        self.start_location = Point2(float(start_location[0]), float(start_location[1]))
        self.candidate_stride = int(candidate_stride)
        self.revisit_tolerance = float(revisit_tolerance)
        self.pool_exclusion_scale = float(pool_exclusion_scale)
        self.pool_separation_scale = float(pool_separation_scale)

    @classmethod
    def for_side(cls, side: float, hyperparams: Optional[GpHyperparams] = None, **kwargs) -> 'PlannerConfig':
        return cls(hyperparams or GpHyperparams.for_side(side), **kwargs)

    def to_dict(self) -> dict:
        return {
            "hyperparams": self.hyperparams.to_dict(),
            "coarse_k": self.coarse_k,
            "start_location": list(self.start_location),
            "candidate_stride": self.candidate_stride,
            "revisit_tolerance": self.revisit_tolerance,
            "pool_exclusion_scale": self.pool_exclusion_scale,
            "pool_separation_scale": self.pool_separation_scale,
        }


def coarse_grid(side: float, k: int = config.COARSE_GRID_K) -> List[Point2]:
    """k x k lattice of cell centers over [0, side]^2."""
    centers = (np.arange(k) + 0.5) * side / k
    return [Point2(float(x), float(y)) for y in centers for x in centers]


def serpentine_order(points: Sequence[Point2]) -> List[Point2]:
    """Boustrophedon order: rows by ascending y, alternating x direction."""
    rows = {}
    for p in points:
        rows.setdefault(round(p[1], 9), []).append(Point2(float(p[0]), float(p[1])))
    ordered = []
    for i, y in enumerate(sorted(rows)):
        row = sorted(rows[y], key=lambda q: q.x, reverse=(i % 2 == 1))
        ordered.extend(row)
    return ordered


def initial_coarse_sample(truth: TruthSource, grid: Sequence[Point2],
                          start: Point2 = Point2(*config.START_LOCATION)) -> PlannerState:
    """
    Phase 1: visit every coarse point in serpentine order and sample it.

    Args:
        truth: Callable returning the moisture value at a point
        grid: Non-empty coarse lattice
        start: Robot start location

    Returns:
        PlannerState holding D_0, positioned at the last coarse point
    """
    if len(grid) == 0:
        raise ValueError("coarse grid must not be empty")

    state = PlannerState(start)
    for point in serpentine_order(grid):
        state.travel_to(point)
        state.record(Observation(state.current_location, float(truth(state.current_location))))
    return state


def acquisition_a1(variance, distance, d_max):
    """A1 = variance * (1 - d / d_max)."""
    return variance * (1.0 - distance / d_max)


def acquisition_a2(variance, distance, d_max):
    """A2 = 0.5 * (variance + (1 - d / d_max))."""
    return 0.5 * (variance + (1.0 - distance / d_max))


def score_candidates(variances: np.ndarray, distances: np.ndarray, d_max: float, rule: SamplingRule) -> np.ndarray:
    """Acquisition score of every candidate under ``rule``."""
    rule = SamplingRule(rule)
    if rule == SamplingRule.BENCHMARK:
        return np.asarray(variances, dtype=float).copy()
    if rule in (SamplingRule.A1, SamplingRule.A1_RANDOMIZED):
        return acquisition_a1(variances, distances, d_max)
    return acquisition_a2(variances, distances, d_max)


def randomized_pool(order: np.ndarray, points: np.ndarray, distances: np.ndarray, top_k: int,
                    exclusion: float = 0.0, separation: float = 0.0) -> np.ndarray:
    """
    Spread-out pool for the randomized rules.

    Walks the ranking, skipping candidates closer than ``exclusion`` to the
    robot and candidates closer than ``separation`` to a member already
    taken, until ``top_k`` members are found. Falls back to the plain top_k
    when nothing qualifies.

    Args:
        order: Candidate positions sorted by descending score
        points: Candidate locations, indexed like ``distances``
        distances: Distance of each candidate from the robot
        top_k: Pool size
        exclusion: Minimum distance from the robot
        separation: Minimum distance between pool members

    Returns:
        Positions (into ``points``) of the pool members, best first
    """
    ranked = order[distances[order] >= exclusion]
    pool = []
    while len(ranked) and len(pool) < top_k:
        member = ranked[0]
        pool.append(member)
        gaps = np.hypot(*(points[ranked[1:]] - points[member]).T)
        ranked = ranked[1:][gaps >= separation]
    return np.asarray(pool) if pool else order[:top_k]


def choose_candidate(state: PlannerState, variances: np.ndarray, candidates: CandidateGrid,
                     policy: SamplingPolicy, rng: Optional[np.random.Generator] = None,
                     revisit_tolerance: float = config.REVISIT_TOLERANCE,
                     pool_exclusion: float = 0.0, pool_separation: float = 0.0) -> Tuple[int, float]:
    """
    Index and score of the next candidate.

    Candidates within ``revisit_tolerance`` of an observation are not
    selectable. Ties go to the lowest index; randomized rules draw
    uniformly among a pool of top_k selectable candidates built by
    randomized_pool with the given (absolute) exclusion and separation.

    Raises:
        EmptyCandidates: If no selectable candidate remains
    """
    if len(candidates) == 0:
        raise EmptyCandidates("candidate grid is empty")

    selectable = np.ones(len(candidates), dtype=bool)
    if state.dataset:
        observed = as_points([obs.location for obs in state.dataset])
        selectable = cdist(candidates.points, observed).min(axis=1) > revisit_tolerance
    available = np.flatnonzero(selectable)
    if len(available) == 0:
        raise EmptyCandidates("every candidate has already been sampled")

    distances = cdist(as_points([state.current_location]), candidates.points[available])[0]
    scores = score_candidates(np.asarray(variances)[available], distances, candidates.d_max, policy.rule)
    order = np.argsort(-scores, kind="stable")

    if policy.is_randomized:
        rng = rng if rng is not None else make_rng(policy.rng_seed)
        pool = randomized_pool(order, candidates.points[available], distances, policy.top_k,
                               pool_exclusion, pool_separation)
        pick = pool[rng.integers(len(pool))]
    else:
        pick = order[0]

    return int(available[pick]), float(scores[pick])


def select_next(state: PlannerState, model: GpModel, candidates: CandidateGrid, policy: SamplingPolicy,
                rng: Optional[np.random.Generator] = None,
                revisit_tolerance: float = config.REVISIT_TOLERANCE,
                pool_exclusion: Optional[float] = None, pool_separation: Optional[float] = None) -> Point2:
    """
    Next sample location under ``policy``.

    Args:
        state: Current planner state (model must be fitted on state.dataset)
        model: Fitted GP
        candidates: Candidate grid
        policy: Sampling policy
        rng: Selection RNG for randomized rules (seeded from the policy if None)
        revisit_tolerance: Exclusion radius around existing observations
        pool_exclusion: Randomized pool's minimum distance from the robot
            (defaults to POOL_EXCLUSION_SCALE length scales)
        pool_separation: Minimum distance between randomized pool members
            (defaults to POOL_SEPARATION_SCALE length scales)

    Returns:
        Chosen candidate location

    Raises:
        EmptyCandidates: If the candidate list is empty or fully sampled
    """
    if len(candidates) == 0:
        raise EmptyCandidates("candidate grid is empty")
    _, variances = model.predict(candidates.points)
    length_scale = model.hyperparams.length_scale
    if pool_exclusion is None:
        pool_exclusion = config.POOL_EXCLUSION_SCALE * length_scale
    if pool_separation is None:
        pool_separation = config.POOL_SEPARATION_SCALE * length_scale
    index, _ = choose_candidate(state, variances, candidates, policy, rng, revisit_tolerance,
                                pool_exclusion, pool_separation)
    return Point2(*candidates.points[index])


def run_campaign(truth: GroundTruthField, policy: SamplingPolicy, stopping: StoppingCriteria,
                 planner_config: Optional[PlannerConfig] = None) -> CampaignResult:
    """
    Execute one full sampling campaign on a ground-truth field.

    Args:
        truth: Ground-truth field the robot samples
        policy: Acquisition rule
        stopping: Stopping criteria (at least one)
        planner_config: Planner knobs; defaults derived from the field side

    Returns:
        CampaignResult with sample log, trajectory, per-iteration records and final grids

    Raises:
        ConfigError: If stopping is not a valid StoppingCriteria
    """
    logger = logging.getLogger(__name__)

    if not isinstance(stopping, StoppingCriteria):
        raise ConfigError(f"stopping must be a StoppingCriteria, got {type(stopping).__name__}")

    spec = truth.spec
    cfg = planner_config or PlannerConfig.for_side(spec.side)
    h = cfg.hyperparams
    nodes = spec.node_points()
    truth_flat = truth.flat_values
    candidates = CandidateGrid.from_spec(spec, cfg.candidate_stride)
    rng = make_rng(policy.rng_seed)
    pool_exclusion = cfg.pool_exclusion_scale * h.length_scale
    pool_separation = cfg.pool_separation_scale * h.length_scale

    logger.info(f"Campaign start: {truth.kind} s={spec.side:g} policy={policy.label} stopping={stopping.label}")

    state = initial_coarse_sample(truth.sample, coarse_grid(spec.side, cfg.coarse_k), cfg.start_location)
    n_bootstrap = state.n_samples
    model = fit(state.dataset, h)
    mean, variance = model.predict(nodes)

    def snapshot(location, score) -> IterationRecord:
        candidate_variance = variance[candidates.node_indices]
        return IterationRecord(
            iteration=state.iteration,
            location=location,
            score=score,
            max_variance=float(candidate_variance.max()),
            avg_variance=float(candidate_variance.mean()),
            cumulative_distance=state.cumulative_distance,
            n_samples=state.n_samples,
            rmse=grid_rmse(mean, truth_flat),
        )

    records = [snapshot(None, None)]
    reason = stopping.check(state.n_samples, state.cumulative_distance, records[-1].max_variance)

    while reason is None:
        try:
            index, score = choose_candidate(state, variance[candidates.node_indices], candidates,
                                            policy, rng, cfg.revisit_tolerance, pool_exclusion, pool_separation)
        except EmptyCandidates:
            reason = StoppingReason.CANDIDATES_EXHAUSTED
            break

        target = Point2(*candidates.points[index])
        state.travel_to(target)
        state.record(Observation(target, truth.sample(target)))
        state.iteration += 1

        model = fit(state.dataset, h)
        mean, variance = model.predict(nodes)
        records.append(snapshot(target, score))
        logger.debug(f"Iteration {state.iteration}: ({target.x:.3f}, {target.y:.3f}) score={score:.4f} "
                     f"max_var={records[-1].max_variance:.4f} dist={state.cumulative_distance:.2f}")

        reason = stopping.check(state.n_samples, state.cumulative_distance, records[-1].max_variance)

    logger.info(f"Campaign stop ({reason.value}): {state.n_samples} samples, "
                f"distance {state.cumulative_distance:.2f}, max variance {records[-1].max_variance:.4f}")

    return CampaignResult(
        policy=policy,
        stopping=stopping,
        stopping_reason=reason.value,
        sample_log=list(state.dataset),
        trajectory=list(state.trajectory),
        per_iteration=records,
        final_reconstruction=mean.reshape(spec.resolution, spec.resolution),
        final_variance_grid=variance.reshape(spec.resolution, spec.resolution),
        spec=spec,
        hyperparams=h,
        n_bootstrap=n_bootstrap,
    )
