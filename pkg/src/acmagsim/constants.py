"""Global constants used across the simulator.

All quantities are SI: seconds, hertz, tesla, radians.
"""

# Electron gyromagnetic ratio in rad s^-1 T^-1
GAMMA_E = 1.760859644e11

# Band of |cos u| inside which the closed-form phase switches to its
# resonance limit
EPS_RES = 1e-9

# Quadrature resolution for the phase oracle and the density-matrix path
DEFAULT_NODES_PER_HALF_PERIOD = 200
MIN_NODES_PER_HALF_PERIOD = 50

# Default per-NV photon rates in the bright (m_s = 0) and dark (m_s = +-1)
# states, per readout window. r = r1/r0 = 0.917, contrast
# C = 1 / sqrt(1 + 2 (r0 + r1) / (r0 - r1)^2) = 0.0300, prefactor (1 - r)/(1 + r) = 0.0433
DEFAULT_BRIGHT_RATE = 0.5013
DEFAULT_DARK_RATE = 0.4597
DEFAULT_NV_COUNT = 60

# Centered-difference step for numerical Jacobians
JACOBIAN_REL_STEP = 1e-6
JACOBIAN_MIN_STEP = 1e-12

# Levenberg-Marquardt stopping rules
LM_MAX_ITERATIONS = 200
LM_GRADIENT_TOL = 1e-10
LM_STEP_TOL = 1e-12
LM_INITIAL_DAMPING = 1e-3
LM_DAMPING_FACTOR = 10.0
LM_MAX_DAMPING = 1e300

# Monte Carlo trials are drawn in fixed-size blocks so the random streams do
# not depend on how many worker threads run them
MC_BLOCK_SIZE = 256
MC_MAX_PHOTON_DRAWS = 2 ** 62

# CSV output precision
CSV_SIGNIFICANT_DIGITS = 17
