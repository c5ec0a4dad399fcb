import os
from dotenv import load_dotenv

load_dotenv()

DEFAULT_SPECGAP_OUT_DIR = "./out"
SPECGAP_OUT_DIR = os.environ.get("SPECGAP_OUT_DIR", DEFAULT_SPECGAP_OUT_DIR)

SPECGAP_LOG_LEVEL = os.environ.get("SPECGAP_LOG_LEVEL", "INFO")

DEFAULT_SPECGAP_JOBS = 1
SPECGAP_JOBS = int(os.environ.get("SPECGAP_JOBS", DEFAULT_SPECGAP_JOBS))

# Tolerances
#
DEFAULT_HERMITICITY_TOL = 1e-12
HERMITICITY_TOL = float(
    os.environ.get("SPECGAP_HERMITICITY_TOL", DEFAULT_HERMITICITY_TOL)
)

DEFAULT_PROJ_TOL = 1e-10
PROJ_TOL = float(os.environ.get("SPECGAP_PROJ_TOL", DEFAULT_PROJ_TOL))

# Relative to max(1, ‖A‖)
DEFAULT_BND_TOL = 1e-9
BND_TOL = float(os.environ.get("SPECGAP_BND_TOL", DEFAULT_BND_TOL))

# Multiplied by dim and the largest singular value
DEFAULT_RANK_TOL = 1e-12
RANK_TOL = float(os.environ.get("SPECGAP_RANK_TOL", DEFAULT_RANK_TOL))

DEFAULT_DERIV_XCHECK_TOL = 1e-6
DERIV_XCHECK_TOL = float(
    os.environ.get("SPECGAP_DERIV_XCHECK_TOL", DEFAULT_DERIV_XCHECK_TOL)
)

DEFAULT_UNIT_TOL = 1e-8
UNIT_TOL = float(os.environ.get("SPECGAP_UNIT_TOL", DEFAULT_UNIT_TOL))

DEFAULT_TRANSPORT_TOL = 1e-6
TRANSPORT_TOL = float(os.environ.get("SPECGAP_TRANSPORT_TOL", DEFAULT_TRANSPORT_TOL))

DEFAULT_BOUND_SLACK = 1e-8
BOUND_SLACK = float(os.environ.get("SPECGAP_BOUND_SLACK", DEFAULT_BOUND_SLACK))

# Transport
#
DEFAULT_STEPS = 200
STEPS = int(os.environ.get("SPECGAP_STEPS", DEFAULT_STEPS))

DEFAULT_CONTOUR_NODES = 32
CONTOUR_NODES = int(os.environ.get("SPECGAP_CONTOUR_NODES", DEFAULT_CONTOUR_NODES))

# "magnus4" or "midpoint"
DEFAULT_TRANSPORT_SCHEME = "magnus4"
TRANSPORT_SCHEME = os.environ.get(
    "SPECGAP_TRANSPORT_SCHEME", DEFAULT_TRANSPORT_SCHEME
)

# Explorer
#
DEFAULT_SEARCH_ITERS = 200
SEARCH_ITERS = int(os.environ.get("SPECGAP_SEARCH_ITERS", DEFAULT_SEARCH_ITERS))

DEFAULT_MAX_DIM = 64
MAX_DIM = int(os.environ.get("SPECGAP_MAX_DIM", DEFAULT_MAX_DIM))

DEFAULT_MASTER_SEED = 20011205
MASTER_SEED = int(os.environ.get("SPECGAP_MASTER_SEED", DEFAULT_MASTER_SEED))
