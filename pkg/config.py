import os

# Material and geometry defaults (rubber-like two-layer strip, energy divided by mu)
DEFAULT_LAME_LAMBDA = 0.326     # GPa
DEFAULT_LAME_MU = 0.654e-3      # GPa
DEFAULT_NORMALIZE_BY_MU = True
DEFAULT_LENGTH = 1.0
DEFAULT_WZ = 0.6                # half-height; half-width follows from unit area
DEFAULT_CHI = 6.0               # prestrain strength

# Loading and helix defaults
DEFAULT_DELTA = 0.05            # boundary tilt of the flat helix
DEFAULT_FORCE_FRACTION = 0.999  # f = fraction * f_crit
DEFAULT_BC = "weak-clamped"
DELTA_RANGE = (1e-8, 0.5)

# Default sweep grid: (0.45, 6, 0.5) gives an unstable helix, (0.6, 6, 0.999) a stable one
DEFAULT_SWEEP_WZ = "0.45,0.6"
DEFAULT_SWEEP_CHI = "6"
DEFAULT_SWEEP_FRAC = "0.5,0.999"

# Torsional rigidity series
TORSION_N_TERMS = 32
TANH_SATURATION = 20.0          # tanh(x) == 1.0 in double precision beyond this

# Discretization
DEFAULT_N_GRID = 400            # elements for second-variation matrices
MIN_N_GRID = 100
DEFAULT_N_CURVE = 200           # nodes - 1 for minimizer curves
DEFAULT_N_SAMPLES = 400         # t-samples per conjugate-point scan
MIN_N_SAMPLES = 16

# Conjugate-point scan
T_MIN_FRAC = 1e-3
EIG_TOL = 1e-8
STIFFNESS_GUARD = 500.0         # ||Gamma|| * L above this => low-confidence
CONJUGATE_XTOL = 1e-10          # relative to L

# Minimizer (Armijo backtracking on the exponential map)
ARMIJO_STEP = 1.0
ARMIJO_SHRINK = 0.5
ARMIJO_SLOPE = 1e-4
ARMIJO_MAX_HALVINGS = 40
INIT_AMPLITUDE = 0.3           # random starting curves, radians per mode
BC_TOL = 1e-8
MINIMIZE_MAX_ITER = 20000
MINIMIZE_TOL = 1e-8

# Critical-force bisection
FCRIT_XTOL = 1e-8               # relative to the force scale
BLIND_BRACKET = 1e4             # +-BLIND_BRACKET * c_max / L^2

# CLI exit codes
EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_CONSTRUCTION = 3
EXIT_NO_CONVERGENCE = 4

# Logging level (error | info | debug), read after load_dotenv()
LOG_ENV_VAR = "RODSTAB_LOG"
DEFAULT_LOG_LEVEL = "info"


def log_level_from_env():
    """Current RODSTAB_LOG value, lower-cased (default info)."""
    return os.environ.get(LOG_ENV_VAR, DEFAULT_LOG_LEVEL).strip().lower()
