"""
Synthetic ground-truth moisture fields.

Four seeded generators (uniform, sloped, Gaussian clusters, hybrid) on a
square grid of side ``s``. Randomness comes from numpy's PCG64 generator
seeded with the map seed, so grids are reproducible across platforms.
Non-uniform fields are rescaled to span exactly [0, 1].
"""

import logging
from typing import List, Optional, Sequence

import numpy as np
from scipy.interpolate import RegularGridInterpolator

import config
from .gp_core import Point2
from .error_handler import OutOfBounds


class GridSpec:
    """Square domain [0, side]^2 discretized with ``resolution`` nodes per side."""

    def __init__(self, side: float, resolution: Optional[int] = None):
        """
        Args:
            side: Side length s (> 0)
            resolution: Nodes per side (>= 2); defaults to s + 1 (unit spacing), at least 2

        Raises:
            ValueError: If side or resolution is out of range
        """
        if not np.isfinite(side) or side <= 0:
            raise ValueError(f"side must be positive, got {side}")
        if resolution is None:
            resolution = max(2, int(round(side)) + 1)
        if int(resolution) != resolution or resolution < 2:
            raise ValueError(f"resolution must be an integer >= 2, got {resolution}")

        self.side = float(side)
        self.resolution = int(resolution)

    @property
    def spacing(self) -> float:
        return self.side / (self.resolution - 1)

    @property
    def diagonal(self) -> float:
        return self.side * np.sqrt(2.0)

    @property
    def axis(self) -> np.ndarray:
        """Node coordinates along one axis."""
        return np.linspace(0.0, self.side, self.resolution)

    def node_points(self) -> np.ndarray:
        """All nodes as an (resolution^2, 2) array in row-major order (row = y index)."""
        xx, yy = np.meshgrid(self.axis, self.axis, indexing="xy")
        return np.column_stack([xx.ravel(), yy.ravel()])

    def contains(self, p: Point2) -> bool:
        return 0.0 <= p[0] <= self.side and 0.0 <= p[1] <= self.side

    def to_dict(self) -> dict:
        return {"side": self.side, "resolution": self.resolution}

    def __eq__(self, other):
        if not isinstance(other, GridSpec):
            return NotImplemented
        return self.side == other.side and self.resolution == other.resolution

    def __repr__(self):
        return f"GridSpec(side={self.side:g}, resolution={self.resolution})"


class GaussianCluster:
    """An isotropic Gaussian bump; ``radius`` is its standard deviation."""

    def __init__(self, center: Point2, radius: float, amplitude: float):
        self.center = Point2(float(center[0]), float(center[1]))
        self.radius = float(radius)
        self.amplitude = float(amplitude)

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """Bump value at each row of an (n, 2) array."""
        d2 = (points[:, 0] - self.center.x) ** 2 + (points[:, 1] - self.center.y) ** 2
        return self.amplitude * np.exp(-d2 / (2.0 * self.radius ** 2))

    def to_dict(self) -> dict:
        return {"center": list(self.center), "radius": self.radius, "amplitude": self.amplitude}

    @classmethod
    def from_dict(cls, data: dict) -> 'GaussianCluster':
        return cls(Point2(*data["center"]), data["radius"], data["amplitude"])


class GroundTruthField:
    """An immutable generated moisture grid plus the parameters that made it."""

    def __init__(self, spec: GridSpec, values: np.ndarray, kind: str, seed: Optional[int],
                 params: Optional[dict] = None):
        """
        Args:
            spec: Grid specification
            values: (resolution, resolution) grid, row index = y node, column = x node
            kind: One of uniform, sloped, gaussian, hybrid
            seed: Generator seed (None for hand-built fields)
            params: Generator parameters, kept for export

        Raises:
            ValueError: If the grid has the wrong shape or leaves [0, 1]
        """
        values = np.array(values, dtype=float).reshape(spec.resolution, spec.resolution)
        if kind not in config.FIELD_KINDS:
            raise ValueError(f"kind must be one of {config.FIELD_KINDS}, got {kind}")
        if not np.all(np.isfinite(values)):
            raise ValueError("field values must be finite")
        if values.min() < 0.0 or values.max() > 1.0:
            raise ValueError(f"field values must lie in [0, 1], got [{values.min()}, {values.max()}]")

        values.setflags(write=False)
        self.spec = spec
        self.values = values
        self.kind = kind
        self.seed = seed
        self.params = dict(params or {})
        self._interpolator = RegularGridInterpolator(
            (spec.axis, spec.axis), values, method="linear")

    @property
    def flat_values(self) -> np.ndarray:
        """Row-major grid of length resolution^2."""
        return self.values.ravel()

    def sample(self, p: Point2) -> float:
        return sample_truth(self, p)

    def __call__(self, p: Point2) -> float:
        return sample_truth(self, p)


def make_rng(seed: int) -> np.random.Generator:
    """The simulator's seeded generator (PCG64)."""
    return np.random.Generator(np.random.PCG64(seed))


def rescale_unit(values: np.ndarray) -> np.ndarray:
    """Affinely map values onto [0, 1]; a constant grid maps to zeros."""
    low = values.min()
    span = values.max() - low
    if span <= 0.0:
        return np.zeros_like(values)
    scaled = (values - low) / span
    return np.clip(scaled, 0.0, 1.0)


def generate_uniform(spec: GridSpec, level: float, seed: Optional[int] = None) -> GroundTruthField:
    """Every cell equals ``level``."""
    if not 0.0 <= level <= 1.0:
        raise ValueError(f"level must lie in [0, 1], got {level}")
    values = np.full((spec.resolution, spec.resolution), float(level))
    return GroundTruthField(spec, values, "uniform", seed, {"level": float(level)})


def _draw_direction(rng: np.random.Generator) -> np.ndarray:
    angle = rng.uniform(0.0, 2.0 * np.pi)
    return np.array([np.cos(angle), np.sin(angle)])


def _sloped_values(spec: GridSpec, direction: np.ndarray) -> np.ndarray:
    nodes = spec.node_points()
    projection = nodes @ direction
    return rescale_unit(projection).reshape(spec.resolution, spec.resolution)


def generate_sloped(spec: GridSpec, seed: int, direction: Optional[Sequence[float]] = None) -> GroundTruthField:
    """
    Affine gradient along a seeded random direction, rescaled to [0, 1].

    Args:
        spec: Grid specification
        seed: Map seed
        direction: Optional (dx, dy) override of the gradient direction

    Returns:
        GroundTruthField of kind "sloped"
    """
    rng = make_rng(seed)
    drawn = _draw_direction(rng)
    if direction is not None:
        drawn = np.asarray(direction, dtype=float)
        norm = np.linalg.norm(drawn)
        if norm == 0.0:
            raise ValueError("direction must be non-zero")
        drawn = drawn / norm

    values = _sloped_values(spec, drawn)
    return GroundTruthField(spec, values, "sloped", seed, {"direction": drawn.tolist()})


def cluster_radius_bounds(side: float) -> tuple:
    """Radius interval [1, s/10]; for s < 10 the interval collapses to [1, 1]."""
    return 1.0, max(1.0, side / 10.0)


def draw_clusters(spec: GridSpec, n_clusters: int, rng: np.random.Generator,
                  amplitude_range=config.CLUSTER_AMPLITUDE_RANGE) -> List[GaussianCluster]:
    """Centers uniform over the domain, radii uniform in [1, s/10], seeded amplitudes."""
    low, high = cluster_radius_bounds(spec.side)
    clusters = []
    for _ in range(n_clusters):
        cx, cy = rng.uniform(0.0, spec.side, size=2)
        radius = rng.uniform(low, high)
        amplitude = rng.uniform(*amplitude_range)
        clusters.append(GaussianCluster(Point2(cx, cy), radius, amplitude))
    return clusters


def _cluster_values(spec: GridSpec, clusters: Sequence[GaussianCluster]) -> np.ndarray:
    nodes = spec.node_points()
    total = np.zeros(len(nodes))
    for cluster in clusters:
        total += cluster.evaluate(nodes)
    return rescale_unit(total).reshape(spec.resolution, spec.resolution)


def generate_gaussian(spec: GridSpec, n_clusters: int = config.N_CLUSTERS, seed: int = 0,
                      clusters: Optional[Sequence[GaussianCluster]] = None) -> GroundTruthField:
    """
    Sum of isotropic Gaussian bumps over a zero base, rescaled to [0, 1].

    Args:
        spec: Grid specification
        n_clusters: Number of bumps (>= 1)
        seed: Map seed
        clusters: Optional explicit clusters replacing the seeded draw

    Returns:
        GroundTruthField of kind "gaussian"
    """
    if clusters is None:
        if n_clusters < 1:
            raise ValueError(f"n_clusters must be at least 1, got {n_clusters}")
        rng = make_rng(seed)
        clusters = draw_clusters(spec, n_clusters, rng)

    values = _cluster_values(spec, clusters)
    params = {"n_clusters": len(clusters), "clusters": [c.to_dict() for c in clusters]}
    return GroundTruthField(spec, values, "gaussian", seed, params)


def generate_hybrid(spec: GridSpec, n_clusters: int = config.N_CLUSTERS, seed: int = 0,
                    amplitude_scale: float = 1.0) -> GroundTruthField:
    """
    Equal-weight sum of a sloped field and a Gaussian-cluster field, rescaled to [0, 1].

    The gradient direction is the first draw from the seed, so the sloped
    component equals generate_sloped(spec, seed). With n_clusters=0 or
    amplitude_scale=0 the result is exactly that sloped field.

    Args:
        spec: Grid specification
        n_clusters: Number of bumps (>= 0)
        seed: Map seed
        amplitude_scale: Multiplier on every cluster amplitude
    """
    if n_clusters < 0:
        raise ValueError(f"n_clusters must be non-negative, got {n_clusters}")

    rng = make_rng(seed)
    direction = _draw_direction(rng)
    clusters = draw_clusters(spec, n_clusters, rng)
    if amplitude_scale != 1.0:
        clusters = [GaussianCluster(c.center, c.radius, c.amplitude * amplitude_scale) for c in clusters]

    sloped = _sloped_values(spec, direction)
    bumps = _cluster_values(spec, clusters)
    values = rescale_unit(sloped + bumps)

    params = {
        "direction": direction.tolist(),
        "n_clusters": n_clusters,
        "clusters": [c.to_dict() for c in clusters],
    }
    return GroundTruthField(spec, values, "hybrid", seed, params)


def generate_field(kind: str, spec: GridSpec, seed: int, n_clusters: int = config.N_CLUSTERS) -> GroundTruthField:
    """Dispatch to the generator for ``kind``; uniform draws its level from the seed."""
    logger = logging.getLogger(__name__)
    logger.debug(f"Generating {kind} field on {spec} with seed {seed}")

    if kind == "uniform":
        level = float(make_rng(seed).uniform(*config.UNIFORM_LEVEL_RANGE))
        return generate_uniform(spec, level, seed)
    if kind == "sloped":
        return generate_sloped(spec, seed)
    if kind == "gaussian":
        return generate_gaussian(spec, n_clusters, seed)
    if kind == "hybrid":
        return generate_hybrid(spec, n_clusters, seed)
    raise ValueError(f"Unknown field kind: {kind}")


def sample_truth(field: GroundTruthField, p: Point2) -> float:
    """
    Bilinear interpolation of the truth grid at ``p``.

    Raises:
        OutOfBounds: If p lies outside [0, s]^2
    """
    if not (np.isfinite(p[0]) and np.isfinite(p[1])) or not field.spec.contains(p):
        raise OutOfBounds(f"point ({p[0]}, {p[1]}) outside [0, {field.spec.side:g}]^2")
    # grid axes are (y, x)
    return float(field._interpolator([[p[1], p[0]]])[0])
