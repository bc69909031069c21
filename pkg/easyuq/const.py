"""Constants for the EasyUQ package."""

import math

DOMAIN = "easyuq"

# Configuration
CONF_COMMAND = "command"
CONF_INPUT = "input"
CONF_OUTPUT = "output"
CONF_MODEL = "model"
CONF_SEED = "seed"
CONF_SCORE = "score"
CONF_KERNEL = "kernel"
CONF_LEVELS = "levels"
CONF_THREADS = "threads"
CONF_MODE = "mode"
CONF_BASELINE = "baseline"
CONF_N = "n"
CONF_SIZES = "sizes"
CONF_SEEDS = "seeds"
CONF_PREDICTOR = "predictor"
CONF_HYPERGRID = "hypergrid"
CONF_SPLITS = "splits"
CONF_OUTCOME = "outcome"
CONF_BASIC = "basic"
CONF_NU_GRID = "nu_grid"
CONF_TRAIN = "train"
CONF_VALIDATION = "validation"
CONF_VERBOSE = "verbose"

# Environment overrides (read through python-dotenv)
ENV_SEED = "EASYUQ_SEED"
ENV_THREADS = "EASYUQ_THREADS"
ENV_LOG_LEVEL = "EASYUQ_LOG_LEVEL"

# Defaults
DEFAULT_SEED = 0
DEFAULT_LEVELS = (0.05, 0.25, 0.5, 0.75, 0.95)
DEFAULT_SCORE = "logs"
DEFAULT_MODE = "moderated"
DEFAULT_N_SPLITS = 20
DEFAULT_SPLIT_FRACTIONS = (0.72, 0.18, 0.10)
DEFAULT_SIM_N = 500
DEFAULT_CONSISTENCY_SIZES = (250, 1000, 4000)
DEFAULT_CONSISTENCY_SEEDS = 10

# Scores
SCORE_LOGS = "logs"
SCORE_CRPS = "crps"
SCORES = (SCORE_LOGS, SCORE_CRPS)

# Tuning modes
MODE_MULTIPLE = "multiple"
MODE_MODERATED = "moderated"
MODE_VALIDATION = "validation"
MODES = (MODE_MULTIPLE, MODE_MODERATED)
WORKFLOW_MODES = (MODE_MULTIPLE, MODE_MODERATED, MODE_VALIDATION)

# Baselines
BASELINE_SINGLE_GAUSSIAN = "single_gaussian"
BASELINE_CLIMATOLOGY = "climatology"
BASELINES = (BASELINE_SINGLE_GAUSSIAN, BASELINE_CLIMATOLOGY)

# Point predictors for the workflow
PREDICTOR_IDENTITY = "identity"
PREDICTOR_LINEAR = "linear"
PREDICTOR_KNN = "knn"
DEFAULT_PREDICTOR = PREDICTOR_IDENTITY

# Kernel grid; math.inf is the Gaussian limit
NU_INF = math.inf
NU_GRID = (2.0, 3.0, 4.0, 5.0, 10.0, 20.0, NU_INF)

# Bandwidth search bracket, relative to the outcome range
H_FLOOR_FRACTION = 1e-4
H_CEIL_FRACTION = 1.0
DEGENERATION_FACTOR = 10.0  # h < factor * h_floor counts as degenerate
BRENT_LOG_TOL = 1e-3  # tolerance on log(h)
BRENT_MAXITER = 500
BRENT_PENALTY = 1e300  # stand-in for infinite criterion values

# Numerics
CDF_TOL = 1e-12
QUANTILE_TOL = 1e-9
QUANTILE_TAIL = 1e-10  # kernel mass left outside the quantile bracket, per side
QUANTILE_MAX_EXPANSIONS = 60
PAIR_TABLE_TOL = 1e-10  # quadrature tolerance for the Student-t pair excess table
PAIR_TABLE_LINEAR = (20.0, 801)  # evenly spaced knots on [0, 20]
PAIR_TABLE_GEOMETRIC = (1e6, 401)  # log-spaced knots on [20, 1e6]
JSON_DIGITS = 17

# Simulation
SIM_X_LOW = 0.0
SIM_X_HIGH = 10.0
SIM_SCALE_LOW = 2.0
SIM_SCALE_HIGH = 8.0
CONSISTENCY_X_WINDOW = (1.0, 9.0)
CONSISTENCY_Y_LEVELS = (0.01, 0.99)
CONSISTENCY_GRID_X = 41
CONSISTENCY_GRID_Y = 41
CONSISTENCY_BASE_H = 1.0
CONSISTENCY_BASE_N = 250

# Exit codes
EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3

# Attributes
ATTR_MEAN_SCORE = "mean_score"
ATTR_PER_CASE = "per_case"
ATTR_N_CASES = "n_cases"
ATTR_N_INFINITE = "n_infinite"
