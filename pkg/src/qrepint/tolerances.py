"""Numerical tolerances used across the package.

Every tolerance is a named constant collected here so that tests and
library code agree on one set of values.
"""

# Hermiticity of operators and states: max |A - A^dag| entrywise.
HERMITICITY_TOL = 1e-12

# Unit-trace requirement for density matrices.
TRACE_TOL = 1e-12

# Smallest admissible eigenvalue of a density matrix.  Anything in
# [PSD_EIG_FLOOR, 0) is treated as roundoff; anything below is a genuine
# positivity violation.
PSD_EIG_FLOOR = -1e-10

# Eigenvalue clamping for entropies and matrix logarithms: eigenvalues in
# [-EIG_CLAMP_TOL, 0) are clamped to 0, more negative ones are an error.
EIG_CLAMP_TOL = 1e-10

# Support detection for relative entropy: eigenvalues of the reference
# state below SUPPORT_EIGVAL_TOL count as off-support; the first argument
# may carry at most SUPPORT_WEIGHT_TOL of weight there.
SUPPORT_EIGVAL_TOL = 1e-14
SUPPORT_WEIGHT_TOL = 1e-12

# Unitarity of eigendecomposition-based matrix exponentials: max entry of
# |U^dag U - I|.
UNITARITY_TOL = 1e-12

# Imaginary part allowed in expectation values of Hermitian observables.
IMAG_EXPECTATION_TOL = 1e-12

# Per-step thermodynamic ledger: first law |dE - dQ - dW| <= tol * scale,
# second law dS_i >= -tol.
FIRST_LAW_TOL = 1e-10
SECOND_LAW_TOL = 1e-10

# Commutator norm below which an interaction unitary counts as a map with
# equilibrium, [U, H0 + H_B] = 0.
EQUILIBRIUM_COMMUTATOR_TOL = 1e-10

# Commutator norm for coupling-level equilibrium checks, [v, H0 + H_B] = 0,
# and for [H_S, H0] = 0 preconditions.
COUPLING_COMMUTATOR_TOL = 1e-12

# Partial bath average of the coupling, Tr_B[v (I x omega)] = 0.
STANDARD_CONDITION_TOL = 1e-12

# Fixed-point iteration of collision maps.
FIXED_POINT_TOL = 1e-12
FIXED_POINT_MAX_ITER = 10**6

# Lindblad channels with rate or jump norm below this are dropped.
CHANNEL_PRUNE_TOL = 1e-15

# Steady-state solver: acceptable residual |L(rho_ss)|_max and the relative
# singular-value threshold that counts as a nullspace direction.
STEADY_STATE_RESIDUAL_TOL = 1e-10
NULLSPACE_REL_TOL = 1e-9

# Fixed-step integrator: trace drift allowed per step before renormalizing,
# and the eigenvalue floor below which integration aborts.
INTEGRATOR_TRACE_DRIFT_TOL = 1e-12
INTEGRATOR_POSITIVITY_FLOOR = -1e-8

# Dissipator equality on a full operator basis (derived vs reset model).
GENERATOR_EQUALITY_TOL = 1e-10

# Flux reports: first law |E_dot - Q_dot - W_dot| <= tol * scale and
# entropy production rate >= -tol.
FLUX_FIRST_LAW_TOL = 1e-10
FLUX_SECOND_LAW_TOL = 1e-10

# Free vs full Hamiltonian commutator for the three-qubit refrigerator.
REFRIGERATOR_COMMUTATOR_TOL = 1e-14
