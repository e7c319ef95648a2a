import os
import json
import logging

# Gaussian process configuration
SIGNAL_VARIANCE = 1.0  # observations live on [0, 1], so prior variance is 1
NOISE_VARIANCE = 1e-6
LENGTH_SCALE_FRACTION = 0.2  # length scale = side / 5
CHOLESKY_JITTER = 1e-8
CHOLESKY_RETRIES = 3  # each retry multiplies the jitter by 10

# Ground-truth field configuration
N_CLUSTERS = 10
CLUSTER_AMPLITUDE_RANGE = (0.3, 1.0)
UNIFORM_LEVEL_RANGE = (0.1, 0.9)
FIELD_KINDS = ("uniform", "sloped", "gaussian", "hybrid")

# Planner configuration
TOP_K = 5
# randomized top-k pool, in length scales: candidates this close to the robot are
# skipped, and pool members keep this much distance from each other
POOL_EXCLUSION_SCALE = 1.5
POOL_SEPARATION_SCALE = 0.75
COARSE_GRID_K = 2  # 2x2 cell-center lattice = four bootstrap waypoints
START_LOCATION = (0.0, 0.0)
CANDIDATE_STRIDE = 1
REVISIT_TOLERANCE = 1e-6
POLICY_RULES = ["benchmark", "a1", "a2", "a1_randomized", "a2_randomized"]

# Simulation protocol
# Can be overridden via ENVIRONMENT_SIZES environment variable as JSON
# Example: export ENVIRONMENT_SIZES='[20, 40]'
DEFAULT_ENVIRONMENT_SIZES = [20, 40, 60, 80, 100]

try:
    sizes_json = os.getenv('ENVIRONMENT_SIZES')
    if sizes_json:
        ENVIRONMENT_SIZES = [float(s) for s in json.loads(sizes_json)]
    else:
        ENVIRONMENT_SIZES = DEFAULT_ENVIRONMENT_SIZES
except (json.JSONDecodeError, TypeError, ValueError) as e:
    logging.warning(f"Failed to parse ENVIRONMENT_SIZES from environment: {e}. Using defaults.")
    ENVIRONMENT_SIZES = DEFAULT_ENVIRONMENT_SIZES

MAPS_PER_SIZE = {
    'uniform': 1,
    'sloped': 1,
    'gaussian': 5,
    'hybrid': 5,
}
SAMPLE_BUDGETS = [20, 40, 60, 80, 100]
DISTANCE_BUDGETS = [300, 600, 900, 1200, 1500]
VARIANCE_THRESHOLDS = [0.4]

# Metrics
C_SAMPLE = 0.0
VWC_PERCENT_SCALE = 100.0

# Environment variables
OUTPUT_DIR = os.getenv('OUTPUT_DIR', 'sim_output/')
ENABLE_LOGGING = os.getenv('ENABLE_LOGGING', 'false').lower() == 'true'
RENDER_HEATMAPS = os.getenv('RENDER_HEATMAPS', 'true').lower() == 'true'

try:
    BASE_SEED = int(os.getenv('BASE_SEED', '2025'))
except ValueError as e:
    logging.warning(f"Failed to parse BASE_SEED from environment: {e}. Using default.")
    BASE_SEED = 2025

try:
    WORKERS = int(os.getenv('WORKERS', str(min(4, os.cpu_count() or 1))))
except ValueError as e:
    logging.warning(f"Failed to parse WORKERS from environment: {e}. Using 1.")
    WORKERS = 1

# Exit codes
EXIT_SUCCESS = 0
EXIT_CONFIG_ERROR = 1
EXIT_PARTIAL_FAILURE = 2


def validate_config():
    """
    Validate configuration values to ensure they are within acceptable ranges.

    Raises:
        AssertionError: If any configuration value is invalid
    """
    # GP hyperparameters
    assert SIGNAL_VARIANCE > 0, f"SIGNAL_VARIANCE must be positive, got {SIGNAL_VARIANCE}"
    assert NOISE_VARIANCE >= 0, f"NOISE_VARIANCE must be non-negative, got {NOISE_VARIANCE}"
    assert LENGTH_SCALE_FRACTION > 0, \
        f"LENGTH_SCALE_FRACTION must be positive, got {LENGTH_SCALE_FRACTION}"
    assert CHOLESKY_JITTER > 0, f"CHOLESKY_JITTER must be positive, got {CHOLESKY_JITTER}"
    assert CHOLESKY_RETRIES >= 0, f"CHOLESKY_RETRIES must be non-negative, got {CHOLESKY_RETRIES}"

    # Field generation
    assert N_CLUSTERS >= 1, f"N_CLUSTERS must be at least 1, got {N_CLUSTERS}"
    low, high = CLUSTER_AMPLITUDE_RANGE
    assert 0.0 < low <= high, f"CLUSTER_AMPLITUDE_RANGE must be positive and ordered, got {CLUSTER_AMPLITUDE_RANGE}"
    low, high = UNIFORM_LEVEL_RANGE
    assert 0.0 <= low <= high <= 1.0, \
        f"UNIFORM_LEVEL_RANGE must lie within [0, 1], got {UNIFORM_LEVEL_RANGE}"

    # Planner
    assert TOP_K >= 1, f"TOP_K must be at least 1, got {TOP_K}"
    assert POOL_EXCLUSION_SCALE >= 0, f"POOL_EXCLUSION_SCALE must be non-negative, got {POOL_EXCLUSION_SCALE}"
    assert POOL_SEPARATION_SCALE >= 0, f"POOL_SEPARATION_SCALE must be non-negative, got {POOL_SEPARATION_SCALE}"
    assert COARSE_GRID_K >= 1, f"COARSE_GRID_K must be at least 1, got {COARSE_GRID_K}"
    assert CANDIDATE_STRIDE >= 1, f"CANDIDATE_STRIDE must be at least 1, got {CANDIDATE_STRIDE}"
    assert REVISIT_TOLERANCE >= 0, f"REVISIT_TOLERANCE must be non-negative, got {REVISIT_TOLERANCE}"
    assert len(START_LOCATION) == 2, f"START_LOCATION must be an (x, y) pair, got {START_LOCATION}"

    # Protocol
    assert len(ENVIRONMENT_SIZES) > 0, "ENVIRONMENT_SIZES must not be empty"
    assert all(s > 0 for s in ENVIRONMENT_SIZES), f"ENVIRONMENT_SIZES must be positive, got {ENVIRONMENT_SIZES}"
    assert set(MAPS_PER_SIZE) == set(FIELD_KINDS), \
        f"MAPS_PER_SIZE must name exactly {FIELD_KINDS}, got {sorted(MAPS_PER_SIZE)}"
    assert all(n >= 0 for n in MAPS_PER_SIZE.values()), "MAPS_PER_SIZE counts must be non-negative"
    assert sum(MAPS_PER_SIZE.values()) >= 1, "MAPS_PER_SIZE must request at least one map"
    assert all(n >= 1 for n in SAMPLE_BUDGETS), f"SAMPLE_BUDGETS must be positive, got {SAMPLE_BUDGETS}"
    assert all(d > 0 for d in DISTANCE_BUDGETS), f"DISTANCE_BUDGETS must be positive, got {DISTANCE_BUDGETS}"
    assert all(v > 0 for v in VARIANCE_THRESHOLDS), \
        f"VARIANCE_THRESHOLDS must be positive, got {VARIANCE_THRESHOLDS}"

    # Batch
    assert C_SAMPLE >= 0, f"C_SAMPLE must be non-negative, got {C_SAMPLE}"
    assert VWC_PERCENT_SCALE > 0, f"VWC_PERCENT_SCALE must be positive, got {VWC_PERCENT_SCALE}"
    assert WORKERS >= 1, f"WORKERS must be at least 1, got {WORKERS}"

    return True


# Run validation on import
try:
    validate_config()
except AssertionError as e:
    logging.error(f"Configuration validation failed: {e}")
    raise
