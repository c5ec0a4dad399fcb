import math

# Regime thresholds on ‖V‖/d
THEOREM1_RATIO = 2.0 / (2.0 + math.pi)
CRITICAL_RATIO = 0.5

SQRT2_OVER_2 = math.sqrt(2.0) / 2.0

# Example family: epsilon ∈ (0, 3/4)
EXAMPLE_EPS_MAX = 0.75

# Resonance model: no eigenvalue below this coupling
RESONANCE_THRESHOLD = 0.4

REGIME_THEOREM1_I = "theorem1-i"
REGIME_THEOREM1_II = "theorem1-ii"
REGIME_SUBORDINATED = "subordinated"
REGIME_OPEN_WINDOW = "open-window"
REGIME_OVERCRITICAL = "overcritical"

# Regimes in which ‖P−Q‖ < 1 is asserted
ASSERTED_REGIMES = (REGIME_THEOREM1_I, REGIME_THEOREM1_II, REGIME_SUBORDINATED)

HULL_NONE = "none"
HULL_SIGMA_FREE = "sigma-hull-free"
HULL_SIGMA_REST_FREE = "Sigma-hull-free"
HULL_SUBORDINATED = "subordinated"

VIOLATION_CANDIDATE = "VIOLATION-CANDIDATE"
NO_CEILING_ASSERTED = "no ceiling asserted"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_ASSERTION = 2

NOT_HERMITIAN_MESSAGE = (
    "Matrix is not Hermitian: ‖M − M*‖_max = {deviation:.3e} exceeds "
    "{tol:.1e}·max(1, ‖M‖_max)"
)

RANK_CHANGE_MESSAGE = (
    "Rank of P(s) changed from {expected} to {actual} at s = {s:.6f}; "
    "the hypothesis ‖V‖ < d/2 is violated numerically"
)

CONTOUR_TOO_CLOSE_MESSAGE = (
    "Contour node {z:.6g} lies within {distance:.3e} of an eigenvalue of A + sV "
    "(s = {s:.6f}); adjust the contour or the panel size"
)
