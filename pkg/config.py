# levytype/config.py

import logging
import math
import os

from errors import ConfigError

# --- Directory Paths ---
# repository root; data/ and its run folders hang off it
BASE_DIR = os.path.dirname(os.path.abspath(__file__))

DATA_DIR = os.path.join(BASE_DIR, "data")
RESULTS_DIR = os.path.join(DATA_DIR, "results")
RUNS_DIR = os.path.join(DATA_DIR, "runs")

os.makedirs(RESULTS_DIR, exist_ok=True)
os.makedirs(RUNS_DIR, exist_ok=True)

DEFAULT_RESULTS_FILE = os.path.join(RESULTS_DIR, "acceptance.csv")

# --- Exponents and Quadrature ---
TOL_PSD = 1e-10  # smallest admissible eigenvalue of Q is -TOL_PSD
SUBADDITIVITY_TOL = 1e-9
UNIT_BALL_GRID_POINTS = 64  # points per axis for sup over the unit ball
PROBE_N_MAX = 2 ** 10
PROBE_REL_TOL = 1e-3
TAYLOR_SWITCH = 1e-4  # |y||xi| below this uses the Taylor form of the kernel
QUAD_EPSABS = 1e-13
QUAD_EPSREL = 1e-11
QUAD_LIMIT = 400

# --- Samplers ---
JUMP_BUDGET = 1e7  # expected number of jumps per path
MAX_BROWNIAN_LEVELS = 30
ANNULUS_SUBCELLS = 32
GAUSS_LEGENDRE_NODES = 8
LARGE_JUMP_CELLS_PER_OCTAVE = 16
LARGE_JUMP_OCTAVES = 40
SERIES_RESOLUTION_RADIUS = 0.0
ENSEMBLE_CHUNK = 256

# --- Statistics ---
N_SE = 3.0
ABS_TOL = 1e-12
DEFAULT_N = 10 ** 5

# --- Symbols, SDEs and Exit Times ---
BLOWUP_LEVEL = 1e12
LIPSCHITZ_SLACK = 1e-6
XI_MAX = 1e6
SLOPE_RESIDUAL_MAX = 0.05
SECTOR_KAPPA_CAP = 10.0
EXIT_DOMINANCE = 0.5
CENSOR_FRACTION = 0.01
K_STAR = math.acos(math.sqrt(2.0 / 3.0))

# --- Worker Pool ---
DEFAULT_THREADS = 4
THREADS_ENV_VAR = "LEVYTYPE_THREADS"


def threads():
    """
    Size of the Monte Carlo worker pool.

    :return: The value of LEVYTYPE_THREADS if set, else DEFAULT_THREADS.
    :raises ConfigError: If the variable is set but is not a positive integer.
    """
    raw = os.environ.get(THREADS_ENV_VAR)
    if raw is None or raw.strip() == "":
        return DEFAULT_THREADS
    try:
        value = int(raw)
    except ValueError as e:
        raise ConfigError(f"{THREADS_ENV_VAR} must be a positive integer, got {raw!r}") from e
    if value < 1:
        raise ConfigError(f"{THREADS_ENV_VAR} must be a positive integer, got {raw!r}")
    return value


# --- Logging ---
LOG_LEVEL = os.environ.get("LEVYTYPE_LOG_LEVEL", "INFO")  # any logging level name
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def setup_logging(level=None):
    """Configures the root logger once; output goes to stderr."""
    root = logging.getLogger()
    if root.handlers:
        root.setLevel(level or LOG_LEVEL)
        return
    logging.basicConfig(level=level or LOG_LEVEL, format=LOG_FORMAT)


if __name__ == '__main__':
    print(f"Base Directory: {BASE_DIR}")
    print(f"Results Directory: {RESULTS_DIR}")
    print(f"Runs Directory: {RUNS_DIR}")
    print(f"Default Results File: {DEFAULT_RESULTS_FILE}")
    print(f"Jump budget: {JUMP_BUDGET:g} expected jumps per path")
    print(f"Worker threads: {threads()}")
    print(f"Log level: {LOG_LEVEL}")
