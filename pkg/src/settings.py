import os
from dotenv import load_dotenv

# Load environment variables
load_dotenv()


def _get_float(name, default):
    value = os.getenv(name)
    return float(value) if value not in (None, "") else default


def _get_int(name, default):
    value = os.getenv(name)
    return int(value) if value not in (None, "") else default


GRID_N = _get_int("BELTRAMI_GRID_N", 256)
HALF_WIDTH = _get_float("BELTRAMI_HALF_WIDTH", 4.0)
EPS_FIX = _get_float("BELTRAMI_EPS_FIX", 1e-10)
MAX_ITER = _get_int("BELTRAMI_MAX_ITER", 100)
BOUNDARY_SAMPLES = _get_int("BELTRAMI_BOUNDARY_SAMPLES", 2048)
OUT_DIR = os.getenv("BELTRAMI_OUT_DIR") or "output"
LOG_LEVEL = (os.getenv("BELTRAMI_LOG_LEVEL") or "INFO").upper()

# Fixed libraries whose versions are echoed in every manifest.
PROBE_SCHEDULE_VERSION = 1
TEST_BUMP_LIBRARY_VERSION = 1
