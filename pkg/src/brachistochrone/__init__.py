"""Time-optimal pure-state transfer: solvers and verifiers."""
from . import errors, general, hilbert, isotropic, propagator, qubit
from .errors import *  # noqa: F401,F403
from .general import (
    OptimalityReport,
    ShootingOptions,
    ShootingParameters,
    Tolerances,
    build_F,
    constraint_value,
    shoot,
    verify_optimality,
)
from .hilbert import (
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    ConstraintSet,
    energy_variance,
    expectation,
    fubini_study_distance,
    gram_schmidt_final,
    hermitian,
    projector,
    pure_state,
    ray_equal,
    traceless_part,
)
from .isotropic import geodesic_state, solve_isotropic, verify_reduced_equations
from .propagator import (
    HamiltonianSchedule,
    Trajectory,
    aa_residual,
    evolve,
    geodesic_residual,
    path_length,
    propagator_matrix,
)
from .qubit import (
    QubitFamily,
    bloch_trajectory,
    count_nodes,
    enumerate_families,
    field_profile,
    global_optimum,
    variance_profile,
)

__version__ = "0.1.0"
