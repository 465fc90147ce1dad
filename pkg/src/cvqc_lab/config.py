"""Centralized numeric tolerances and size limits.

Every fixed tolerance in the package lives here so experiments and tests
agree on what "equal" means.
"""

# Default absolute tolerance for operator well-formedness checks
# (unitarity, projector idempotence/hermiticity).
ATOL = 1e-9

# Residual budget for reconstruction-style checks (rebuilding projectors
# from Jordan block data, branch additivity, exclusivity).
RESIDUAL_TOL = 1e-8

# Orthonormalization residual above which a decomposition is rejected
# as numerically degenerate.
DEGENERATE_LIMIT = 1e-6

# Eigenphases within this distance of 0 or pi are classified as
# one-dimensional invariant vectors rather than rotation blocks.
EIGPHASE_TOL = 1e-7

# Total qubits a single dense state may use: dimension <= 2**QUBIT_CAP.
QUBIT_CAP = 20

# A branch (or overlap reference) below this norm is treated as zero when
# extracting unit-modulus phases; the phase then defaults to 1.
ZERO_BRANCH_TOL = 1e-12

# States with squared norm at or below this cannot be measured.
ZERO_STATE_TOL = 1e-15

# Failure-probability exponent the phase-estimation abstraction is
# documented against (the estimator's out-of-window mass target 2**-N_FAIL).
N_FAIL_DEFAULT = 20

# Smallest grid step gamma0/T allowed before float underflow risks kick in.
GRID_STEP_MIN = 2.0 ** -40

# Environment variable capping CLI worker threads.
THREADS_ENV = "CVQC_LAB_THREADS"
