"""
Shared constants for prevmap.
"""

# EM defaults
DEFAULT_MAX_ITER = 500
DEFAULT_REL_TOL = 1e-8
DEFAULT_VAR_FLOOR_FRAC = 1e-8
DEFAULT_GRID_STEP = 0.05
DEFAULT_TOP_K_STARTS = 5
# Smallest active component kept: expected subject count and variance
# relative to the per-subject null variance
DEFAULT_MIN_ACTIVE_SUBJECTS = 5.0
DEFAULT_MIN_ACTIVE_VAR_RATIO = 0.01
DEFAULT_SEED = 0

# Minimum sample sizes
MIN_FIT_OBSERVATIONS = 8
MIN_SIGNED_RANK_NONZERO = 5
MIN_SPLIT_SUBJECTS = 16
EXACT_SIGNED_RANK_MAX_N = 20

# Inference defaults
DEFAULT_Q_LEVEL = 0.1
DEFAULT_TOY_Q_LEVEL = 0.05
DEFAULT_ALPHA = 0.05

# Smoothing kernel of the comparison t map, full width at half maximum in voxels
DEFAULT_FWHM = 3.0

# Region and power defaults
DEFAULT_ACTIVE_FRACTION = 0.5
DEFAULT_SPLITS = 10
DEFAULT_REPS = 1000
DEFAULT_POWER_N = 64
DEFAULT_P_GRID = (0.0, 0.05, 0.1, 0.2, 0.3, 0.5)

# Toy model from the two-population simulation: inactive scale mixture and
# active Gaussian, parameters read as (mean, variance).
TOY_NULL_WEIGHTS = (0.88, 0.12)
TOY_NULL_VARS = (0.15, 1.0)
TOY_ACTIVE_MU = 1.0
TOY_ACTIVE_VAR = 0.25
DEFAULT_TOY_DIMS = (64, 64)
DEFAULT_TOY_SUBJECTS = 100
DEFAULT_CENTER_JITTER_SD = 1.5
DEFAULT_AXES_JITTER_SD = 0.1
DEFAULT_TOY_AXES = (18.0, 12.0)

# RNG stream tags, folded into every keyed stream
STREAM_POPULATION = 1
STREAM_EFFECTS = 2
STREAM_GOF_SPLIT = 3
STREAM_SPLIT_HALF = 4
STREAM_POWER = 5

# File names and formats
EFFECTS_MAGIC = "PREVMAP-EFFECTS v1"
EFFECTS_FILENAME = "effects.txt"
TRUTH_FILENAME = "truth.csv"
PARAMETER_MAP_FILENAME = "parameter_map.csv"
REGIONS_FILENAME = "regions_{statistic}.csv"
AGREEMENT_FILENAME = "agreement.csv"
GOF_TABLE_FILENAME = "gof_ks.csv"
GOF_SUMMARY_FILENAME = "gof_summary.csv"
POWER_FILENAME = "power.csv"
ARE_FILENAME = "are.txt"
TOY_REPORT_FILENAME = "toy_report.json"
MAPS_FILENAME = "maps.csv"
SLICE_FILENAME = "{name}_{axis}{index}.pgm"

PGM_MAXVAL = 255
