"""Constants used throughout causalcpd."""

# Numerical tolerances
CPT_ROW_TOLERANCE = 1e-12
SIMPLEX_TOLERANCE = 1e-9

# Conditional-independence testing
DEFAULT_ALPHA_LEVEL = 0.01
MIN_EXPECTED_COUNT = 5  # strata below this mean expected cell count drop out of G and dof
MIN_COUNT_FACTOR = 5  # guard: effective samples >= 5 * s^2 * strata

# Superset-parent discovery
DEFAULT_TAU_UB = 5
DEFAULT_N_INTERVALS = 2
DEFAULT_PC_MAX_CONDS = 3
DEFAULT_MAX_COMBINATIONS = 1
MIN_SAMPLES_FACTOR = 20  # per-interval minimum = 20 * s^(pc_max_conds + 2)

# Relative Pearson divergence
DEFAULT_ALPHA = 0.1
DEFAULT_NW = 50
DEFAULT_NST = 1
DEFAULT_RIDGE = 0.01
DEFAULT_MAX_CENTERS = 100
SIGMA_FLOOR = 0.1
CV_FOLDS = 5
CV_SIGMA_FACTORS = (0.6, 0.8, 1.0, 1.2, 1.4)
CV_RIDGES = (1e-3, 1e-2, 1e-1)

# Synthetic generator
DEFAULT_MIN_DIVERGENCE = 0.02
DIVERGENCE_ALPHA_BETA = 0.1  # alpha * beta used when scoring generated shifts
REJECTION_BUDGET = 10_000
SEGMENT_SAMPLE_FACTOR = 20  # require T >= 20 * s^spa_size
CPT_DISTRIBUTION = "uniform-simplex"

# Artifacts
SIDECAR_SUFFIX = ".meta.json"
SEGMENT_DUMP_INDEX = "segments.json"
MANIFEST_NAME = "manifest.json"
