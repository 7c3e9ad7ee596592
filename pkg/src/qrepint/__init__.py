"""Repeated-interaction (collision model) simulation of open quantum
systems with exact thermodynamic bookkeeping, Lindblad-limit tools and a
three-qubit absorption refrigerator."""

from .core import (
    DensityMatrix,
    FactorLayout,
    LayoutError,
    Operator,
    embed,
    evolve_unitary,
    expectation,
    gibbs_state,
    identity,
    kron,
    kron_all,
    matrix_exp_unitary,
    partial_trace,
    relative_entropy,
    von_neumann_entropy,
)
from .repint import (
    BathSpec,
    ConvergenceError,
    InteractionSchedule,
    ThermoRecord,
    classify_map,
    entropy_production_decomposition,
    invariant_state,
    local_thermo,
    run,
    step,
)
from .lindblad import (
    BathInfo,
    Channel,
    DegenerateSteadyStateError,
    FluxReport,
    LindbladGenerator,
    PositivityError,
    StandardConditionError,
    apply_dissipator,
    apply_dissipator_dual,
    apply_generator,
    build_generator,
    detailed_balance_check,
    flux_functional,
    global_fluxes,
    integrate,
    liouvillian_matrix,
    local_fluxes,
    steady_state,
)
from .refrigerator import (
    RefrigeratorParams,
    build_ansatz_couplings,
    build_derived_generator,
    build_hamiltonians,
    build_repint_schedule,
    build_reset_generator,
    cooling_window,
    cop,
    derived_generator_equals_reset,
    ness_structure_check,
    thermal_product_state,
    transient_power,
)

__version__ = "0.1.0"
