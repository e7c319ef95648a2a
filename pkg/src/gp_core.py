"""
Exact Gaussian process regression for the moisture-mapping simulator.
Zero prior mean, squared-exponential kernel, Cholesky-based solve.
"""

import logging
from typing import List, NamedTuple, Sequence, Tuple

import numpy as np
import scipy.linalg as sla
from scipy.spatial.distance import cdist

import config
from .error_handler import FactorizationFailure


class Point2(NamedTuple):
    """A location in the square field domain."""
    x: float
    y: float


class Observation(NamedTuple):
    """A moisture measurement (normalized to [0, 1]) at a location."""
    location: Point2
    value: float


class GpHyperparams:
    """Kernel and likelihood hyperparameters of the GP."""

    def __init__(self, length_scale: float,
                 signal_variance: float = config.SIGNAL_VARIANCE,
                 noise_variance: float = config.NOISE_VARIANCE):
        """
        Initialize and validate hyperparameters.

        Args:
            length_scale: RBF length scale in field units (> 0)
            signal_variance: Prior signal variance (> 0)
            noise_variance: Observation noise variance (>= 0)

        Raises:
            ValueError: If any value is out of range
        """
        if not np.isfinite(length_scale) or length_scale <= 0:
            raise ValueError(f"length_scale must be positive, got {length_scale}")
        if not np.isfinite(signal_variance) or signal_variance <= 0:
            raise ValueError(f"signal_variance must be positive, got {signal_variance}")
        if not np.isfinite(noise_variance) or noise_variance < 0:
            raise ValueError(f"noise_variance must be non-negative, got {noise_variance}")

        self.length_scale = float(length_scale)
        self.signal_variance = float(signal_variance)
        self.noise_variance = float(noise_variance)

    @classmethod
    def for_side(cls, side: float, **overrides) -> 'GpHyperparams':
        """Default hyperparameters for a square environment of the given side."""
        length_scale = overrides.pop("length_scale", None)
        if length_scale is None:
            length_scale = side * config.LENGTH_SCALE_FRACTION
        return cls(length_scale=length_scale, **overrides)

    def to_dict(self) -> dict:
        return {
            "signal_variance": self.signal_variance,
            "length_scale": self.length_scale,
            "noise_variance": self.noise_variance,
        }

    @classmethod
    def from_dict(cls, data: dict) -> 'GpHyperparams':
        return cls(length_scale=data["length_scale"],
                   signal_variance=data["signal_variance"],
                   noise_variance=data["noise_variance"])

    def __eq__(self, other):
        if not isinstance(other, GpHyperparams):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def __repr__(self):
        return (f"GpHyperparams(signal_variance={self.signal_variance}, "
                f"length_scale={self.length_scale}, noise_variance={self.noise_variance})")


def as_points(points) -> np.ndarray:
    """Convert a Point2 sequence (or an (n, 2) array) to a float (n, 2) array."""
    array = np.asarray(points, dtype=float)
    if array.ndim == 1:
        array = array.reshape(1, 2)
    if array.ndim != 2 or array.shape[1] != 2:
        raise ValueError(f"points must have shape (n, 2), got {array.shape}")
    return array


def kernel(a: Point2, b: Point2, h: GpHyperparams) -> float:
    """
    Squared-exponential covariance between two points.

    Returns:
        sigma^2 * exp(-|a - b|^2 / (2 l^2))
    """
    dx = a[0] - b[0]
    dy = a[1] - b[1]
    return h.signal_variance * float(np.exp(-(dx * dx + dy * dy) / (2.0 * h.length_scale ** 2)))


def kernel_matrix(A, B, h: GpHyperparams) -> np.ndarray:
    """Covariance matrix K(A, B) for two point sets, shape (len(A), len(B))."""
    sqdist = cdist(as_points(A), as_points(B), metric="sqeuclidean")
    return h.signal_variance * np.exp(-sqdist / (2.0 * h.length_scale ** 2))


class GpModel:
    """
    A fitted GP. Immutable once built by fit(); predict() is safe to call
    from several threads.
    """

    def __init__(self, observations: Sequence[Observation], hyperparams: GpHyperparams,
                 X: np.ndarray, y: np.ndarray, L: np.ndarray, alpha: np.ndarray, jitter: float):
        self.observations: Tuple[Observation, ...] = tuple(observations)
        self.hyperparams = hyperparams
        self.jitter = jitter  # total diagonal added on top of noise_variance
        self._X = X
        self._y = y
        self._L = L
        self._alpha = alpha
        for array in (self._X, self._y, self._L, self._alpha):
            array.setflags(write=False)

    @property
    def n_observations(self) -> int:
        return len(self.observations)

    @property
    def training_inputs(self) -> np.ndarray:
        return self._X

    @property
    def cholesky_factor(self) -> np.ndarray:
        """Lower-triangular L with L L^T = K(X, X) + (noise + jitter) I."""
        return self._L

    def predict(self, queries) -> Tuple[np.ndarray, np.ndarray]:
        """
        Predictive mean and variance at query points.

        Args:
            queries: Point2 sequence or (m, 2) array

        Returns:
            (mean, variance) arrays of length m; variance clipped to [0, sigma^2]
        """
        Q = as_points(queries)
        h = self.hyperparams
        Ks = kernel_matrix(self._X, Q, h)

        mean = Ks.T @ self._alpha
        v = sla.solve_triangular(self._L, Ks, lower=True, check_finite=False)
        variance = h.signal_variance - np.einsum("ij,ij->j", v, v)

        return mean, np.clip(variance, 0.0, h.signal_variance)

    def predict_point(self, query: Point2) -> Tuple[float, float]:
        """Predictive (mean, variance) at a single point."""
        mean, variance = self.predict([query])
        return float(mean[0]), float(variance[0])


def fit(observations: Sequence[Observation], h: GpHyperparams,
        jitter: float = config.CHOLESKY_JITTER,
        retries: int = config.CHOLESKY_RETRIES) -> GpModel:
    """
    Fit an exact GP to observations.

    The Gram matrix K + noise*I gets ``jitter`` on its diagonal; if Cholesky
    fails the jitter is multiplied by 10, up to ``retries`` times.

    Args:
        observations: Non-empty sequence of Observation
        h: Hyperparameters
        jitter: Initial diagonal jitter
        retries: Number of 10x jitter retries

    Returns:
        Fitted GpModel

    Raises:
        ValueError: If observations are empty or non-finite
        FactorizationFailure: If the Gram matrix is not positive definite,
            or two observations share a location while noise_variance == 0
    """
    logger = logging.getLogger(__name__)

    if len(observations) == 0:
        raise ValueError("observations must not be empty")

    X = as_points([obs.location for obs in observations])
    y = np.array([obs.value for obs in observations], dtype=float)
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("observation locations and values must be finite")

    if h.noise_variance == 0.0 and len(X) > 1:
        # jitter alone would mask a singular noiseless system
        distances = cdist(X, X)
        np.fill_diagonal(distances, np.inf)
        if np.min(distances) == 0.0:
            raise FactorizationFailure("duplicate observation locations with zero noise variance")

    K = kernel_matrix(X, X, h)
    K[np.diag_indices_from(K)] += h.noise_variance

    current_jitter = jitter
    for attempt in range(retries + 1):
        try:
            L = sla.cholesky(K + current_jitter * np.eye(len(X)), lower=True, check_finite=False)
            break
        except np.linalg.LinAlgError:
            logger.debug(f"Cholesky failed with jitter {current_jitter:g} (attempt {attempt + 1})")
            current_jitter *= 10.0
    else:
        raise FactorizationFailure(
            f"Gram matrix of {len(X)} observations not positive definite "
            f"after {retries} jitter retries (last jitter {current_jitter / 10.0:g})")

    alpha = sla.cho_solve((L, True), y, check_finite=False)
    return GpModel(observations, h, X, y, L, alpha, current_jitter)


def predict(model: GpModel, queries) -> List[Tuple[float, float]]:
    """Predictive (mean, variance) pairs at each query point."""
    mean, variance = model.predict(queries)
    return list(zip(mean.tolist(), variance.tolist()))
